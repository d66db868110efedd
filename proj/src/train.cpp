#include <chrono>
#include <cmath>
#include <numeric>

#include "embnav/bc.hpp"

namespace embnav::bc {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train learning_rate must be > 0");
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("train decay must be in (0, 1]");
    if (epochs < 1) throw ConfigError("train epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train batch_size must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("adam betas must be in [0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw ConfigError("adam epsilon must be > 0");
}

AdamOptimizer::AdamOptimizer(const MlpPolicy& shape, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    for (const auto& layer : shape.layers()) {
        DenseLayer<float> zero{Matrix<float>::Zero(layer.weights.rows(), layer.weights.cols()),
                               Vector<float>::Zero(layer.bias.size())};
        m_.push_back(zero);
        v_.push_back(zero);
    }
}

namespace {

template <typename Param>
void adam_update(Param& theta, const Param& g, Param& m, Param& v, float b1, float b2, float step_size,
                 float eps_hat) {
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
    theta.array() -= step_size * m.array() / (v.array().sqrt() + eps_hat);
}

}  // namespace

void AdamOptimizer::step(MlpPolicy& policy, const LayerParams<float>& gradients, double learning_rate) {
    auto& layers = policy.layers();
    if (gradients.size() != layers.size()) throw DimensionMismatch("Adam: gradient layer count mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    // lr * m_hat / (sqrt(v_hat) + eps), folded into one scalar step size.
    const auto step_size = static_cast<float>(learning_rate * std::sqrt(c2) / c1);
    const auto eps_hat = static_cast<float>(epsilon_ * std::sqrt(c2));
    const auto b1 = static_cast<float>(beta1_);
    const auto b2 = static_cast<float>(beta2_);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        adam_update(layers[l].weights, gradients[l].weights, m_[l].weights, v_[l].weights, b1, b2, step_size, eps_hat);
        adam_update(layers[l].bias, gradients[l].bias, m_[l].bias, v_[l].bias, b1, b2, step_size, eps_hat);
    }
}

TrainResult train(const Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (data.size() == 0) throw ContractViolation("train: dataset is empty");
    if (data.actions.rows() != 2 || data.actions.cols() != data.embeddings.cols()) {
        throw DimensionMismatch("train: action matrix shape does not match embeddings");
    }
    const auto started = std::chrono::steady_clock::now();

    std::vector<std::size_t> sizes{data.dim()};
    sizes.insert(sizes.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
    sizes.push_back(2);

    TrainResult result;
    result.policy = MlpPolicy::random(sizes, derive_seed(config.seed, "init", 0));
    AdamOptimizer adam(result.policy, config.adam_beta1, config.adam_beta2, config.adam_epsilon);
    Rng shuffle_rng(derive_seed(config.seed, "shuffle", 0));

    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Matrix<float> inputs, targets;
    double lr = config.learning_rate;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Fisher-Yates with an explicit bounded draw keeps the permutation reproducible.
        for (std::size_t i = n - 1; i > 0; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i);
            std::swap(order[i], order[pick(shuffle_rng)]);
        }
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, n - start);
            inputs.resize(data.embeddings.rows(), static_cast<Eigen::Index>(count));
            targets.resize(2, static_cast<Eigen::Index>(count));
            for (std::size_t k = 0; k < count; ++k) {
                const auto src = static_cast<Eigen::Index>(order[start + k]);
                inputs.col(static_cast<Eigen::Index>(k)) = data.embeddings.col(src);
                targets.col(static_cast<Eigen::Index>(k)) = data.actions.col(src) * kLabelScale;
            }
            const auto lg = loss_and_gradient(result.policy, inputs, targets);
            if (!std::isfinite(lg.loss)) {
                throw TrainingDiverged("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                       ", batch starting at " + std::to_string(start) + ", learning rate " +
                                       std::to_string(lr));
            }
            adam.step(result.policy, lg.gradients, lr);
            epoch_sum += lg.loss * static_cast<double>(count);
        }
        const double epoch_loss = epoch_sum / static_cast<double>(n);
        result.report.epoch_losses.push_back(epoch_loss);
        if (on_epoch) on_epoch(epoch, epoch_loss);
        lr *= config.decay;
    }
    result.report.final_loss = result.report.epoch_losses.back();
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace embnav::bc
