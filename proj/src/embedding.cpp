#include <algorithm>
#include <cmath>

#include "embnav/embedding.hpp"

namespace embnav::embedding {

double l2_norm(std::span<const float> v) {
    double sum = 0.0;
    for (float x : v) sum += static_cast<double>(x) * x;
    return std::sqrt(sum);
}

double dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw DimensionMismatch("dot: dims differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += static_cast<double>(a[i]) * b[i];
    return sum;
}

namespace {

std::vector<double> unit_double(const EmbeddingVector& v, const char* what) {
    const double n = l2_norm(v.values);
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw ContractViolation(std::string(what) + ": vector has no normalized direction (zero or non-finite)");
    }
    std::vector<double> out(v.dim());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.values[i] / n;
    return out;
}

}  // namespace

EmbeddingVector normalize(const EmbeddingVector& v) {
    const auto unit = unit_double(v, "normalize");
    return EmbeddingVector(std::vector<float>(unit.begin(), unit.end()));
}

EmbeddingVector fuse(const EmbeddingVector& image, const EmbeddingVector& text) {
    if (image.dim() != text.dim()) {
        throw DimensionMismatch("fuse: image dim " + std::to_string(image.dim()) + " != text dim " +
                                std::to_string(text.dim()));
    }
    const auto v = unit_double(image, "fuse");
    const auto u = unit_double(text, "fuse");
    std::vector<double> sum(v.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < sum.size(); ++i) {
        sum[i] = v[i] + u[i];
        sq += sum[i] * sum[i];
    }
    const double n = std::sqrt(sq);
    if (!(n > 1e-12)) throw ContractViolation("fuse: antipodal inputs sum to the zero vector");
    std::vector<float> out(sum.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(sum[i] / n);
    return EmbeddingVector(std::move(out));
}

double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("cosine_distance: dims differ");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double x = a.values[i], y = b.values[i];
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if (!(aa > 0.0) || !(bb > 0.0)) throw ContractViolation("cosine_distance: zero vector");
    return std::clamp(1.0 - ab / std::sqrt(aa * bb), 0.0, 2.0);
}

// ---------------------------------------------------------------------------

void SyntheticEmbedderParams::validate() const {
    if (dim < 2) throw ConfigError("embedder dim must be >= 2");
    if (!(lambda_spatial >= 0.0) || !(mu_cue >= 0.0)) throw ConfigError("embedder lambda/mu must be >= 0");
    if (!(noise_sigma >= 0.0)) throw ConfigError("embedder noise_sigma must be >= 0");
    if (!(size_scale > 0.0)) throw ConfigError("embedder size_scale must be > 0");
    if (!(background_weight >= 0.0)) throw ConfigError("embedder background_weight must be >= 0");
}

ProviderPreset preset(PresetName name) {
    ProviderPreset p;
    switch (name) {
        case PresetName::Strong:
            p.name = "strong";
            p.params.dim = 1152;
            p.params.lambda_spatial = 0.6;
            p.params.noise_sigma = 0.02;
            break;
        case PresetName::Medium:
            p.name = "medium";
            p.params.dim = 512;
            p.params.lambda_spatial = 0.3;
            p.params.noise_sigma = 0.02;
            break;
        case PresetName::Weak:
            p.name = "weak";
            p.params.dim = 768;
            p.params.lambda_spatial = 0.35;
            p.params.noise_sigma = 0.08;
            break;
    }
    return p;
}

std::optional<ProviderPreset> find_preset(std::string_view name) {
    if (name == "strong") return preset(PresetName::Strong);
    if (name == "medium") return preset(PresetName::Medium);
    if (name == "weak") return preset(PresetName::Weak);
    return std::nullopt;
}

std::unique_ptr<EmbeddingProvider> make_provider(std::string_view name) {
    constexpr std::string_view kFilePrefix = "file:";
    if (name.starts_with(kFilePrefix)) {
        return FileProvider::load(std::filesystem::path(std::string(name.substr(kFilePrefix.size()))));
    }
    if (auto p = find_preset(name)) return std::make_unique<SyntheticEmbedder>(p->params, p->name);
    throw ConfigError("unknown provider '" + std::string(name) + "' (expected strong|medium|weak|file:PATH)");
}

}  // namespace embnav::embedding
