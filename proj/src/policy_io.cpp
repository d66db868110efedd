#include <bit>
#include <cstring>
#include <fstream>

#include "embnav/bc.hpp"
#include "embnav/binary_io.hpp"

namespace embnav::bc {

namespace {

constexpr char kMagic[4] = {'T', '2', 'N', 'P'};

}  // namespace

void save_policy(const MlpPolicy& policy, const std::filesystem::path& path) {
    io::BinaryWriter out(path);
    out.bytes(kMagic, 4);
    out.u16(kPolicyFormatVersion);
    out.u32(static_cast<std::uint32_t>(policy.layers().size()));
    for (const auto& layer : policy.layers()) {
        const auto rows = layer.weights.rows();
        const auto cols = layer.weights.cols();
        out.u32(static_cast<std::uint32_t>(rows));
        out.u32(static_cast<std::uint32_t>(cols));
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) out.f32(layer.weights(r, c));
        }
        for (Eigen::Index r = 0; r < rows; ++r) out.f32(layer.bias(r));
    }
    out.finish();
}

MlpPolicy load_policy(const std::filesystem::path& path) {
    io::BinaryReader in(path);
    char magic[4];
    in.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path.string() + ": bad magic, not a T2NP policy file");
    const auto version = in.u16();
    if (version != kPolicyFormatVersion) {
        throw FormatError(path.string() + ": unsupported policy format version " + std::to_string(version));
    }
    const auto layer_count = in.u32();
    if (layer_count == 0 || layer_count > 64) throw FormatError(path.string() + ": implausible layer count");

    std::vector<DenseLayer<float>> layers;
    std::vector<std::size_t> sizes;
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        const auto rows = in.u32();
        const auto cols = in.u32();
        if (rows == 0 || cols == 0) throw FormatError(path.string() + ": empty layer " + std::to_string(l));
        if (l == 0) {
            sizes.push_back(cols);
        } else if (cols != sizes.back()) {
            throw FormatError(path.string() + ": layer " + std::to_string(l) + " input size " + std::to_string(cols) +
                              " does not match previous output " + std::to_string(sizes.back()));
        }
        sizes.push_back(rows);
        DenseLayer<float> layer{Matrix<float>(rows, cols), Vector<float>(rows)};
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t c = 0; c < cols; ++c) layer.weights(r, c) = in.f32();
        }
        for (std::uint32_t r = 0; r < rows; ++r) layer.bias(r) = in.f32();
        layers.push_back(std::move(layer));
    }
    in.expect_end();
    if (sizes.back() != 2) throw FormatError(path.string() + ": policy output size must be 2");
    MlpPolicy policy(sizes);
    policy.layers() = std::move(layers);
    return policy;
}

}  // namespace embnav::bc
