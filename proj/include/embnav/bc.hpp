#pragma once

// Feedforward policy, MSE behavior-cloning objective, Adam training and the
// deployment-time action map.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "embnav/embedding.hpp"
#include "embnav/sim.hpp"

namespace embnav::bc {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
    Matrix<Scalar> weights;  // out x in
    Vector<Scalar> bias;     // out
};

template <typename Scalar>
using LayerParams = std::vector<DenseLayer<Scalar>>;

/// Fully connected network with tanh on every layer, output included, so
/// actions are always inside (-1, 1).
template <typename Scalar>
class BasicMlp {
public:
    BasicMlp() = default;

    /// Zero-initialized network with the given layer sizes (input first).
    explicit BasicMlp(std::vector<std::size_t> layer_sizes);

    /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static BasicMlp random(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    std::size_t input_dim() const { return sizes_.front(); }
    std::size_t output_dim() const { return sizes_.back(); }
    std::size_t parameter_count() const;

    LayerParams<Scalar>& layers() { return layers_; }
    const LayerParams<Scalar>& layers() const { return layers_; }

    /// Inputs are columns (in x B); returns out x B.
    Matrix<Scalar> forward_batch(const Matrix<Scalar>& inputs) const;

    template <typename Other>
    BasicMlp<Other> cast() const {
        BasicMlp<Other> out(sizes_);
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            out.layers()[l].weights = layers_[l].weights.template cast<Other>();
            out.layers()[l].bias = layers_[l].bias.template cast<Other>();
        }
        return out;
    }

    bool operator==(const BasicMlp& other) const;

private:
    std::vector<std::size_t> sizes_;
    LayerParams<Scalar> layers_;
};

using MlpPolicy = BasicMlp<float>;

inline std::vector<std::size_t> default_layer_sizes(std::size_t input_dim) { return {input_dim, 256, 64, 2}; }

/// One behavior-cloning training unit: joint embedding and expert action.
struct Sample {
    embedding::EmbeddingVector embedding;
    sim::Action action;
};

/// Column-major sample store: embeddings dim x N, actions 2 x N.
struct Dataset {
    Eigen::MatrixXf embeddings;
    Eigen::MatrixXf actions;

    std::size_t dim() const { return static_cast<std::size_t>(embeddings.rows()); }
    std::size_t size() const { return static_cast<std::size_t>(embeddings.cols()); }
    Sample sample(std::size_t i) const;
    static Dataset from_samples(std::span<const Sample> samples);
};

template <typename Scalar>
struct LossAndGradient {
    double loss = 0.0;
    LayerParams<Scalar> gradients;
};

/// loss = mean over columns of ||net(x) - y||^2, with exact reverse-mode gradients.
template <typename Scalar>
LossAndGradient<Scalar> loss_and_gradient(const BasicMlp<Scalar>& net, const Matrix<Scalar>& inputs,
                                          const Matrix<Scalar>& targets);

LossAndGradient<float> loss_and_gradient(const MlpPolicy& policy, std::span<const Sample> batch);

/// Throws DimensionMismatch when the embedding dim differs from the input size.
sim::Action forward(const MlpPolicy& policy, const embedding::EmbeddingVector& input);

/// Deployment map: forward(policy, fuse(image, text)).
sim::Action act(const MlpPolicy& policy, const embedding::EmbeddingVector& image,
                const embedding::EmbeddingVector& text);

// ---------------------------------------------------------------------------
// Gradient verification.

/// Central differences of the batch loss w.r.t. every parameter. Each
/// perturbation is propagated forward from the first layer it touches,
/// reusing the unperturbed activations of earlier layers.
LayerParams<double> finite_difference_gradient(const BasicMlp<double>& net, const Matrix<double>& inputs,
                                               const Matrix<double>& targets, double step);

/// max |a - n| / max(1e-8, |a| + |n|) over all parameters.
double max_relative_error(const LayerParams<double>& analytic, const LayerParams<double>& numeric);

/// Compares analytic and finite-difference gradients in double precision.
double grad_check(const MlpPolicy& policy, std::span<const Sample> samples, double fd_step);

// ---------------------------------------------------------------------------
// Training.

struct TrainConfig {
    double learning_rate = 1e-3;
    double decay = 0.99;  // per epoch
    int epochs = 50;
    std::size_t batch_size = 256;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden_sizes = {256, 64};

    void validate() const;
};

struct TrainReport {
    std::vector<double> epoch_losses;
    double final_loss = 0.0;
    double wall_seconds = 0.0;
};

/// Raised when the training loss stops being finite.
class TrainingDiverged : public Error {
public:
    using Error::Error;
};

class AdamOptimizer {
public:
    AdamOptimizer(const MlpPolicy& shape, double beta1, double beta2, double epsilon);

    void step(MlpPolicy& policy, const LayerParams<float>& gradients, double learning_rate);
    long steps_taken() const { return t_; }

private:
    double beta1_, beta2_, epsilon_;
    long t_ = 0;
    LayerParams<float> m_, v_;
};

/// Scale applied to expert labels so that the tanh-bounded optimum is attainable.
inline constexpr float kLabelScale = 0.999f;

struct TrainResult {
    MlpPolicy policy;
    TrainReport report;
};

/// Callback per finished epoch: (epoch index, mean loss).
using EpochCallback = std::function<void(int, double)>;

TrainResult train(const Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------
// Policy file: "T2NP", u16 version, u32 layer count, then per layer
// u32 rows, u32 cols, row-major f32 weights, f32 biases (little-endian).

inline constexpr std::uint16_t kPolicyFormatVersion = 1;

void save_policy(const MlpPolicy& policy, const std::filesystem::path& path);
MlpPolicy load_policy(const std::filesystem::path& path);

}  // namespace embnav::bc
