#include <cmath>

#include "embnav/bc.hpp"

namespace embnav::bc {

template <typename Scalar>
BasicMlp<Scalar>::BasicMlp(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw ContractViolation("MLP needs at least an input and an output size");
    for (auto s : sizes_) {
        if (s == 0) throw ContractViolation("MLP layer sizes must be positive");
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        DenseLayer<Scalar> layer;
        layer.weights = Matrix<Scalar>::Zero(sizes_[l + 1], sizes_[l]);
        layer.bias = Vector<Scalar>::Zero(sizes_[l + 1]);
        layers_.push_back(std::move(layer));
    }
}

template <typename Scalar>
BasicMlp<Scalar> BasicMlp<Scalar>::random(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
    BasicMlp net(std::move(layer_sizes));
    Rng rng(seed);
    for (auto& layer : net.layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
        std::uniform_real_distribution<double> u(-bound, bound);
        // Row-major fill so the draw order does not depend on Eigen's storage.
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = static_cast<Scalar>(u(rng));
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = static_cast<Scalar>(u(rng));
    }
    return net;
}

template <typename Scalar>
std::size_t BasicMlp<Scalar>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
    return n;
}

template <typename Scalar>
Matrix<Scalar> BasicMlp<Scalar>::forward_batch(const Matrix<Scalar>& inputs) const {
    if (static_cast<std::size_t>(inputs.rows()) != input_dim()) {
        throw DimensionMismatch("MLP input has " + std::to_string(inputs.rows()) + " rows, expected " +
                                std::to_string(input_dim()));
    }
    Matrix<Scalar> a = inputs;
    for (const auto& layer : layers_) {
        Matrix<Scalar> z = layer.weights * a;
        z.colwise() += layer.bias;
        a = z.array().tanh().matrix();
    }
    return a;
}

template <typename Scalar>
bool BasicMlp<Scalar>::operator==(const BasicMlp& other) const {
    if (sizes_ != other.sizes_) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (layers_[l].weights != other.layers_[l].weights || layers_[l].bias != other.layers_[l].bias) return false;
    }
    return true;
}

template class BasicMlp<float>;
template class BasicMlp<double>;

// ---------------------------------------------------------------------------

template <typename Scalar>
LossAndGradient<Scalar> loss_and_gradient(const BasicMlp<Scalar>& net, const Matrix<Scalar>& inputs,
                                          const Matrix<Scalar>& targets) {
    const auto batch = inputs.cols();
    if (batch == 0) throw ContractViolation("loss_and_gradient: empty batch");
    if (static_cast<std::size_t>(inputs.rows()) != net.input_dim()) {
        throw DimensionMismatch("loss_and_gradient: input dim " + std::to_string(inputs.rows()) + " != " +
                                std::to_string(net.input_dim()));
    }
    if (static_cast<std::size_t>(targets.rows()) != net.output_dim() || targets.cols() != batch) {
        throw DimensionMismatch("loss_and_gradient: target shape mismatch");
    }
    const auto& layers = net.layers();
    const std::size_t depth = layers.size();

    // activations[0] = inputs, activations[l + 1] = tanh(W_l a_l + b_l)
    std::vector<Matrix<Scalar>> activations;
    activations.reserve(depth + 1);
    activations.push_back(inputs);
    for (const auto& layer : layers) {
        Matrix<Scalar> z = layer.weights * activations.back();
        z.colwise() += layer.bias;
        activations.push_back(z.array().tanh().matrix());
    }

    const Matrix<Scalar> diff = activations.back() - targets;
    LossAndGradient<Scalar> out;
    out.loss = static_cast<double>(diff.template cast<double>().squaredNorm()) / static_cast<double>(batch);
    out.gradients.resize(depth);

    const Scalar scale = Scalar(2) / static_cast<Scalar>(batch);
    Matrix<Scalar> delta =
        (scale * diff.array() * (Scalar(1) - activations.back().array().square())).matrix();
    for (std::size_t l = depth; l-- > 0;) {
        out.gradients[l].weights = delta * activations[l].transpose();
        out.gradients[l].bias = delta.rowwise().sum();
        if (l > 0) {
            delta = ((layers[l].weights.transpose() * delta).array() *
                     (Scalar(1) - activations[l].array().square()))
                        .matrix();
        }
    }
    return out;
}

template LossAndGradient<float> loss_and_gradient(const BasicMlp<float>&, const Matrix<float>&, const Matrix<float>&);
template LossAndGradient<double> loss_and_gradient(const BasicMlp<double>&, const Matrix<double>&,
                                                   const Matrix<double>&);

namespace {

template <typename Scalar>
void to_matrices(std::span<const Sample> samples, std::size_t dim, Matrix<Scalar>& inputs, Matrix<Scalar>& targets) {
    inputs.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(samples.size()));
    targets.resize(2, static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.embedding.dim() != dim) {
            throw DimensionMismatch("sample " + std::to_string(i) + " has dim " + std::to_string(s.embedding.dim()) +
                                    ", expected " + std::to_string(dim));
        }
        const auto col = static_cast<Eigen::Index>(i);
        for (std::size_t k = 0; k < dim; ++k) inputs(static_cast<Eigen::Index>(k), col) = s.embedding.values[k];
        targets(0, col) = static_cast<Scalar>(s.action.left);
        targets(1, col) = static_cast<Scalar>(s.action.right);
    }
}

}  // namespace

LossAndGradient<float> loss_and_gradient(const MlpPolicy& policy, std::span<const Sample> batch) {
    if (batch.empty()) throw ContractViolation("loss_and_gradient: empty batch");
    Matrix<float> inputs, targets;
    to_matrices(batch, policy.input_dim(), inputs, targets);
    return loss_and_gradient(policy, inputs, targets);
}

sim::Action forward(const MlpPolicy& policy, const embedding::EmbeddingVector& input) {
    if (input.dim() != policy.input_dim()) {
        throw DimensionMismatch("policy expects dim " + std::to_string(policy.input_dim()) + ", got " +
                                std::to_string(input.dim()));
    }
    const Eigen::Map<const Eigen::VectorXf> x(input.values.data(), static_cast<Eigen::Index>(input.dim()));
    Eigen::VectorXf a = x;
    for (const auto& layer : policy.layers()) a = (layer.weights * a + layer.bias).array().tanh().matrix();
    return {static_cast<double>(a(0)), static_cast<double>(a(1))};
}

sim::Action act(const MlpPolicy& policy, const embedding::EmbeddingVector& image,
                const embedding::EmbeddingVector& text) {
    return forward(policy, embedding::fuse(image, text));
}

Sample Dataset::sample(std::size_t i) const {
    if (i >= size()) throw ContractViolation("Dataset::sample index out of range");
    const auto col = static_cast<Eigen::Index>(i);
    Sample s;
    s.embedding.values.resize(dim());
    for (std::size_t k = 0; k < dim(); ++k) s.embedding.values[k] = embeddings(static_cast<Eigen::Index>(k), col);
    s.action = {actions(0, col), actions(1, col)};
    return s;
}

Dataset Dataset::from_samples(std::span<const Sample> samples) {
    Dataset d;
    const std::size_t dim = samples.empty() ? 0 : samples.front().embedding.dim();
    to_matrices(samples, dim, d.embeddings, d.actions);
    return d;
}

// ---------------------------------------------------------------------------

LayerParams<double> finite_difference_gradient(const BasicMlp<double>& net, const Matrix<double>& inputs,
                                               const Matrix<double>& targets, double step) {
    if (!(step > 0.0)) throw ContractViolation("finite_difference_gradient: step must be positive");
    const auto& layers = net.layers();
    const std::size_t depth = layers.size();
    const auto batch = inputs.cols();
    const double inv = 1.0 / (2.0 * step * static_cast<double>(batch));

    // Unperturbed per-layer inputs a_l and pre-activations z_l.
    std::vector<Matrix<double>> acts{inputs};
    std::vector<Matrix<double>> pre;
    for (const auto& layer : layers) {
        Matrix<double> z = layer.weights * acts.back();
        z.colwise() += layer.bias;
        pre.push_back(z);
        acts.push_back(z.array().tanh().matrix());
    }

    // L(z_l[i] = z + dz) - L(z_l[i] = z - dz) for one sample. Both branches are
    // propagated together with their difference, using
    // tanh(p) - tanh(q) = sinh(p - q) / (cosh p cosh q), so the result carries
    // relative rather than absolute rounding error even when it is tiny.
    auto loss_difference = [&](std::size_t l, Eigen::Index i, Eigen::Index col, double dz) {
        const double z = pre[l](i, col);
        const double zp = z + dz, zm = z - dz;
        const double ap = std::tanh(zp), am = std::tanh(zm);
        const double di = std::sinh(2.0 * dz) / (std::cosh(zp) * std::cosh(zm));
        if (l + 1 == depth) {
            const double t = targets(i, col);
            return di * ((ap - t) + (am - t));
        }
        const double a0 = acts[l + 1](i, col);
        Vector<double> zn_p = pre[l + 1].col(col) + layers[l + 1].weights.col(i) * (ap - a0);
        Vector<double> zn_m = pre[l + 1].col(col) + layers[l + 1].weights.col(i) * (am - a0);
        Vector<double> dzn = layers[l + 1].weights.col(i) * di;
        Vector<double> a_p, a_m, d;
        for (std::size_t m = l + 1;; ++m) {
            a_p = zn_p.array().tanh().matrix();
            a_m = zn_m.array().tanh().matrix();
            d = (dzn.array().sinh() / (zn_p.array().cosh() * zn_m.array().cosh())).matrix();
            if (m + 1 == depth) break;
            zn_p = layers[m + 1].weights * a_p + layers[m + 1].bias;
            zn_m = layers[m + 1].weights * a_m + layers[m + 1].bias;
            dzn = layers[m + 1].weights * d;
        }
        return d.dot((a_p - targets.col(col)) + (a_m - targets.col(col)));
    };

    LayerParams<double> grad(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        const auto& w = layers[l].weights;
        grad[l].weights = Matrix<double>::Zero(w.rows(), w.cols());
        grad[l].bias = Vector<double>::Zero(w.rows());
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j <= w.cols(); ++j) {  // j == cols is the bias
                double acc = 0.0;
                for (Eigen::Index b = 0; b < batch; ++b) {
                    const double dz = j < w.cols() ? step * acts[l](j, b) : step;
                    acc += loss_difference(l, i, b, dz);
                }
                (j < w.cols() ? grad[l].weights(i, j) : grad[l].bias(i)) = acc * inv;
            }
        }
    }
    return grad;
}

double max_relative_error(const LayerParams<double>& analytic, const LayerParams<double>& numeric) {
    if (analytic.size() != numeric.size()) throw DimensionMismatch("max_relative_error: layer count differs");
    double worst = 0.0;
    auto visit = [&](double a, double n) { worst = std::max(worst, std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n))); };
    for (std::size_t l = 0; l < analytic.size(); ++l) {
        const auto& aw = analytic[l].weights;
        const auto& nw = numeric[l].weights;
        if (aw.rows() != nw.rows() || aw.cols() != nw.cols() || analytic[l].bias.size() != numeric[l].bias.size()) {
            throw DimensionMismatch("max_relative_error: layer shapes differ");
        }
        for (Eigen::Index k = 0; k < aw.size(); ++k) visit(aw.data()[k], nw.data()[k]);
        for (Eigen::Index k = 0; k < analytic[l].bias.size(); ++k) visit(analytic[l].bias(k), numeric[l].bias(k));
    }
    return worst;
}

double grad_check(const MlpPolicy& policy, std::span<const Sample> samples, double fd_step) {
    if (samples.empty()) throw ContractViolation("grad_check: needs at least one sample");
    const auto net = policy.cast<double>();
    Matrix<double> inputs, targets;
    to_matrices(samples, net.input_dim(), inputs, targets);
    const auto analytic = loss_and_gradient(net, inputs, targets);
    const auto numeric = finite_difference_gradient(net, inputs, targets, fd_step);
    return max_relative_error(analytic.gradients, numeric);
}

}  // namespace embnav::bc
