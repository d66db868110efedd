#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "embnav/bc.hpp"

using namespace embnav;
using namespace embnav::bc;

namespace {

BasicMlp<double> hand_net() {
    BasicMlp<double> net({1, 2, 2});
    net.layers()[0].weights << 1, -1;
    net.layers()[0].bias << 0, 0.5;
    net.layers()[1].weights << 2, 1, 0, -1;
    net.layers()[1].bias << 0, 0.1;
    return net;
}

// Scalar reference forward pass and loss, independent of Eigen products.
double reference_loss(const BasicMlp<double>& net, const Matrix<double>& x, const Matrix<double>& y) {
    double total = 0;
    for (Eigen::Index b = 0; b < x.cols(); ++b) {
        std::vector<double> a(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) a[i] = x(i, b);
        for (const auto& layer : net.layers()) {
            std::vector<double> z(layer.weights.rows());
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
                double s = layer.bias(r);
                for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) s += layer.weights(r, c) * a[c];
                z[r] = std::tanh(s);
            }
            a = z;
        }
        for (Eigen::Index i = 0; i < y.rows(); ++i) total += (a[i] - y(i, b)) * (a[i] - y(i, b));
    }
    return total / static_cast<double>(x.cols());
}

Matrix<double> random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix<double> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = g(rng);
    return m;
}

Dataset synthetic_dataset(std::size_t dim, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    const auto teacher = random_matrix(rng, 2, static_cast<Eigen::Index>(dim), 1.5);
    Dataset d;
    d.embeddings = random_matrix(rng, static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n)).cast<float>();
    d.embeddings.colwise().normalize();
    d.actions = (teacher * d.embeddings.cast<double>()).array().tanh().matrix().cast<float>();
    return d;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("embnav_bc_" + name);
}

}  // namespace

TEST(Mlp, HandComputedForwardAndLoss) {
    const auto net = hand_net();
    Matrix<double> x(1, 1), y(2, 1);
    x << 0.5;
    y << 0.5, -0.2;
    const auto out = net.forward_batch(x);
    EXPECT_NEAR(out(0, 0), 0.7278944044432927, 1e-15);
    EXPECT_NEAR(out(1, 0), 0.09966799462495582, 1e-15);
    EXPECT_NEAR(loss_and_gradient(net, x, y).loss, 0.14173676657910564, 1e-15);
}

TEST(Mlp, ShapesAndParameterCount) {
    const auto net = MlpPolicy::random(default_layer_sizes(1152), 1);
    EXPECT_EQ(net.layer_sizes(), (std::vector<std::size_t>{1152, 256, 64, 2}));
    EXPECT_EQ(net.parameter_count(), 1152u * 256 + 256 + 256 * 64 + 64 + 64 * 2 + 2);
    EXPECT_EQ(net, MlpPolicy::random(default_layer_sizes(1152), 1));
    EXPECT_FALSE(net == MlpPolicy::random(default_layer_sizes(1152), 2));
}

TEST(Mlp, InitBoundedByFanIn) {
    const auto net = BasicMlp<double>::random({100, 25, 2}, 9);
    EXPECT_LE(net.layers()[0].weights.cwiseAbs().maxCoeff(), 0.1);
    EXPECT_LE(net.layers()[1].weights.cwiseAbs().maxCoeff(), 0.2);
    EXPECT_GT(net.layers()[1].weights.cwiseAbs().maxCoeff(), 0.1);
}

TEST(Gradient, AnalyticMatchesNaiveCentralDifferences) {
    Rng rng(4);
    auto net = BasicMlp<double>::random({1, 3, 2}, 11);
    const auto x = random_matrix(rng, 1, 5), y = random_matrix(rng, 2, 5, 0.5);
    const auto lg = loss_and_gradient(net, x, y);
    EXPECT_NEAR(lg.loss, reference_loss(net, x, y), 1e-14);
    const double h = 1e-6;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        auto& W = net.layers()[l].weights;
        for (Eigen::Index i = 0; i < W.size(); ++i) {
            const double keep = W(i);
            W(i) = keep + h;
            const double up = reference_loss(net, x, y);
            W(i) = keep - h;
            const double down = reference_loss(net, x, y);
            W(i) = keep;
            EXPECT_NEAR(lg.gradients[l].weights(i), (up - down) / (2 * h), 1e-8);
        }
        auto& b = net.layers()[l].bias;
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            const double keep = b(i);
            b(i) = keep + h;
            const double up = reference_loss(net, x, y);
            b(i) = keep - h;
            const double down = reference_loss(net, x, y);
            b(i) = keep;
            EXPECT_NEAR(lg.gradients[l].bias(i), (up - down) / (2 * h), 1e-8);
        }
    }
}

TEST(Gradient, LibraryFiniteDifferencesMatchNaiveOnes) {
    Rng rng(5);
    auto net = BasicMlp<double>::random({4, 6, 3, 2}, 12);
    const auto x = random_matrix(rng, 4, 7), y = random_matrix(rng, 2, 7, 0.5);
    const double h = 1e-5;
    const auto fd = finite_difference_gradient(net, x, y, h);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        auto& W = net.layers()[l].weights;
        for (Eigen::Index i = 0; i < W.size(); ++i) {
            const double keep = W(i);
            W(i) = keep + h;
            const double up = reference_loss(net, x, y);
            W(i) = keep - h;
            const double down = reference_loss(net, x, y);
            W(i) = keep;
            ASSERT_NEAR(fd[l].weights(i), (up - down) / (2 * h), 1e-8);
        }
    }
}

TEST(Gradient, GradCheckOnSmallPolicy) {
    const auto d = synthetic_dataset(16, 10, 3);
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < d.size(); ++i) samples.push_back(d.sample(i));
    const auto policy = MlpPolicy::random({16, 12, 8, 2}, 7);
    EXPECT_LT(grad_check(policy, samples, 1e-5), 1e-6);
}

TEST(Gradient, MaxRelativeErrorDefinition) {
    LayerParams<double> a{{Matrix<double>::Constant(1, 1, 1.0), Vector<double>::Constant(1, 0.0)}};
    LayerParams<double> n{{Matrix<double>::Constant(1, 1, 0.5), Vector<double>::Constant(1, 0.0)}};
    EXPECT_NEAR(max_relative_error(a, n), 0.5 / 1.5, 1e-15);
    EXPECT_EQ(max_relative_error(a, a), 0.0);
}

TEST(Adam, FirstTwoStepsMatchReference) {
    MlpPolicy p({1, 1});
    p.layers()[0].weights << 0.3f;
    p.layers()[0].bias << -0.1f;
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    AdamOptimizer adam(p, b1, b2, eps);
    LayerParams<float> g{{Matrix<float>::Constant(1, 1, 0.2f), Vector<float>::Constant(1, -4.0f)}};

    double w = 0.3, b = -0.1, mw = 0, vw = 0, mb = 0, vb = 0;
    const double gw[2] = {0.2, -0.5}, gb[2] = {-4.0, 1.0};
    for (int t = 1; t <= 2; ++t) {
        g[0].weights(0, 0) = static_cast<float>(gw[t - 1]);
        g[0].bias(0) = static_cast<float>(gb[t - 1]);
        adam.step(p, g, lr);
        mw = b1 * mw + (1 - b1) * gw[t - 1];
        vw = b2 * vw + (1 - b2) * gw[t - 1] * gw[t - 1];
        mb = b1 * mb + (1 - b1) * gb[t - 1];
        vb = b2 * vb + (1 - b2) * gb[t - 1] * gb[t - 1];
        w -= lr * (mw / (1 - std::pow(b1, t))) / (std::sqrt(vw / (1 - std::pow(b2, t))) + eps);
        b -= lr * (mb / (1 - std::pow(b1, t))) / (std::sqrt(vb / (1 - std::pow(b2, t))) + eps);
        EXPECT_NEAR(p.layers()[0].weights(0, 0), w, 1e-6);
        EXPECT_NEAR(p.layers()[0].bias(0), b, 1e-6);
    }
    EXPECT_EQ(adam.steps_taken(), 2);
}

TEST(Train, LossDecreasesAndRunIsDeterministic) {
    const auto d = synthetic_dataset(12, 400, 8);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 32;
    cfg.learning_rate = 3e-3;
    cfg.hidden_sizes = {32, 16};
    cfg.seed = 99;
    int calls = 0;
    const auto r = train(d, cfg, [&](int, double) { ++calls; });
    EXPECT_EQ(calls, 30);
    ASSERT_EQ(r.report.epoch_losses.size(), 30u);
    EXPECT_LT(r.report.final_loss, 0.5 * r.report.epoch_losses.front());
    EXPECT_EQ(r.policy.layer_sizes(), (std::vector<std::size_t>{12, 32, 16, 2}));
    const auto again = train(d, cfg);
    EXPECT_EQ(again.policy, r.policy);
    EXPECT_EQ(again.report.epoch_losses, r.report.epoch_losses);
}

TEST(Train, DivergenceIsReported) {
    auto d = synthetic_dataset(4, 20, 1);
    d.embeddings(0, 0) = std::numeric_limits<float>::quiet_NaN();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.hidden_sizes = {4};
    EXPECT_THROW(train(d, cfg), TrainingDiverged);
}

TEST(Train, ConfigValidation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.learning_rate = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.decay = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.epochs = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.adam_beta2 = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Policy, OutputsStayInsideUnitBox) {
    Rng rng(10);
    auto p = MlpPolicy::random({8, 16, 2}, 3);
    for (auto& l : p.layers()) l.weights *= 50.0f;
    for (int k = 0; k < 500; ++k) {
        const auto x = random_matrix(rng, 8, 1);
        std::vector<float> v(x.data(), x.data() + 8);
        const auto a = forward(p, embedding::EmbeddingVector(v));
        ASSERT_LE(std::abs(a.left), 1.0);
        ASSERT_LE(std::abs(a.right), 1.0);
    }
}

TEST(Policy, ActFusesThenForwards) {
    const auto p = MlpPolicy::random({3, 4, 2}, 5);
    const embedding::EmbeddingVector img(std::vector<float>{1, 0, 0}), txt(std::vector<float>{0, 1, 0});
    const auto a = act(p, img, txt), b = forward(p, embedding::fuse(img, txt));
    EXPECT_EQ(a.left, b.left);
    EXPECT_EQ(a.right, b.right);
    EXPECT_THROW(forward(p, embedding::EmbeddingVector(std::vector<float>{1, 0})), DimensionMismatch);
}

TEST(PolicyFile, RoundTripIsExact) {
    const auto p = MlpPolicy::random({7, 5, 3, 2}, 6);
    const auto path = temp_path("roundtrip.bin");
    save_policy(p, path);
    EXPECT_EQ(load_policy(path), p);
    // Header (4 + 2 + 4) plus per-layer dims and floats.
    const std::uintmax_t expected = 10 + 3 * 8 + 4 * (7 * 5 + 5 + 5 * 3 + 3 + 3 * 2 + 2);
    EXPECT_EQ(std::filesystem::file_size(path), expected);
}

TEST(PolicyFile, CorruptFilesAreRejected) {
    const auto p = MlpPolicy::random({3, 2}, 1);
    const auto path = temp_path("corrupt.bin");
    save_policy(p, path);
    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto write = [&](const std::string& s) { std::ofstream(path, std::ios::binary | std::ios::trunc) << s; };

    write("XXXX" + bytes.substr(4));
    EXPECT_THROW(load_policy(path), FormatError);
    write(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(load_policy(path), FormatError);
    write(bytes + "z");
    EXPECT_THROW(load_policy(path), FormatError);
    auto bad_version = bytes;
    bad_version[4] = 9;
    write(bad_version);
    EXPECT_THROW(load_policy(path), FormatError);
    EXPECT_THROW(load_policy(temp_path("does_not_exist.bin")), FormatError);
}
