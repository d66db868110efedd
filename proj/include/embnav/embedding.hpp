#pragma once

// Embedding vectors, joint fusion, and the provider abstraction that stands in
// for a frozen vision-language model.

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "embnav/instruction.hpp"
#include "embnav/seed.hpp"
#include "embnav/sim.hpp"

namespace embnav::embedding {

/// Query for a key the provider does not hold.
class MissingKey : public Error {
public:
    using Error::Error;
};

struct EmbeddingVector {
    std::vector<float> values;

    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<float> v) : values(std::move(v)) {}

    std::size_t dim() const { return values.size(); }
    std::span<const float> span() const { return values; }
    bool operator==(const EmbeddingVector&) const = default;
};

double l2_norm(std::span<const float> v);
double dot(std::span<const float> a, std::span<const float> b);

/// Unit-norm copy. Throws ContractViolation for a zero (or non-finite) vector.
EmbeddingVector normalize(const EmbeddingVector& v);

/// Joint embedding: normalize(normalize(image) + normalize(text)).
EmbeddingVector fuse(const EmbeddingVector& image, const EmbeddingVector& text);

/// 1 - cos(a, b), in [0, 2].
double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::size_t dim() const = 0;

    /// Image-side embedding of what the camera sees. `noise` supplies any per-query randomness.
    virtual EmbeddingVector embed_image(const sim::Observation& obs, Rng& noise) const = 0;

    virtual EmbeddingVector embed_text(const instruction::Instruction& instr) const = 0;

    virtual std::string description() const = 0;
};

// ---------------------------------------------------------------------------
// Synthetic, spatially sensitive embedder.

struct SyntheticEmbedderParams {
    std::size_t dim = 1152;
    std::uint64_t seed = 20250607;
    double lambda_spatial = 0.6;
    double mu_cue = 0.5;
    double noise_sigma = 0.02;
    double size_scale = 0.5;  // saliency gain: weight = apparent_size * size_scale / 0.5
    double background_weight = 0.25;

    void validate() const;
};

enum class PresetName { Strong, Medium, Weak };

struct ProviderPreset {
    std::string name;
    SyntheticEmbedderParams params;
};

/// strong = (1152, 0.6, 0.02), medium = (512, 0.3, 0.02), weak = (768, 0.35, 0.08).
ProviderPreset preset(PresetName name);
std::optional<ProviderPreset> find_preset(std::string_view name);

/// Embeds observations as a saliency-weighted sum of color and grid-cell anchors:
///
///   image = normalize( sum_t w_t * normalize(a[color_t] + lambda * g[cell_t]) + beta * b + eps )
///   text  = normalize( a[color] + mu * d[cue] )
///
/// Anchors are fixed unit vectors drawn from `params.seed`; eps ~ N(0, sigma^2) per component.
class SyntheticEmbedder final : public EmbeddingProvider {
public:
    explicit SyntheticEmbedder(SyntheticEmbedderParams params, std::string name = "custom");

    std::size_t dim() const override { return params_.dim; }
    EmbeddingVector embed_image(const sim::Observation& obs, Rng& noise) const override;
    EmbeddingVector embed_text(const instruction::Instruction& instr) const override;
    std::string description() const override;

    const SyntheticEmbedderParams& params() const { return params_; }
    std::span<const double> color_anchor(sim::TargetColor c) const { return color_anchors_[sim::color_index(c)]; }
    std::span<const double> cell_anchor(int cell_index) const { return cell_anchors_.at(cell_index); }
    std::span<const double> background_anchor() const { return background_; }
    std::span<const double> cue_anchor(instruction::SpatialCue cue) const {
        return cue_anchors_[static_cast<std::size_t>(cue)];
    }

private:
    SyntheticEmbedderParams params_;
    std::string name_;
    std::vector<std::vector<double>> color_anchors_;  // 5
    std::vector<std::vector<double>> cell_anchors_;   // 9
    std::vector<double> background_;
    std::vector<std::vector<double>> cue_anchors_;  // 3
};

// ---------------------------------------------------------------------------
// File-backed provider reading the line-delimited embedding exchange format:
//   {"id": "...", "kind": "image"|"text", "dim": D, "vector": [...]}
// An optional first line without "vector" is a header (e.g. {"model": "..."}).
// Image queries are keyed by scene_key(observation), text queries by the instruction text.

enum class RecordKind { Image, Text };

struct ExchangeRecord {
    std::string id;
    RecordKind kind = RecordKind::Image;
    std::vector<double> vector;
};

/// Canonical key of a camera view: visible targets ordered by color, e.g.
/// "scene:blue@2,0;red@0,1", or "scene:empty".
std::string scene_key(const sim::Observation& obs);

void write_exchange_file(const std::filesystem::path& path, const std::vector<ExchangeRecord>& records,
                         const std::string& model = "");

class FileProvider final : public EmbeddingProvider {
public:
    /// Throws FormatError (malformed line) or DimensionMismatch (mixed dims).
    static std::unique_ptr<FileProvider> load(const std::filesystem::path& path);

    std::size_t dim() const override { return dim_; }
    EmbeddingVector embed_image(const sim::Observation& obs, Rng& noise) const override;
    EmbeddingVector embed_text(const instruction::Instruction& instr) const override;
    std::string description() const override;

    /// Throws MissingKey.
    const EmbeddingVector& lookup(const std::string& id, RecordKind kind) const;
    std::size_t size() const { return images_.size() + texts_.size(); }
    const std::string& model() const { return model_; }

private:
    std::filesystem::path path_;
    std::string model_;
    std::size_t dim_ = 0;
    std::map<std::string, EmbeddingVector> images_;
    std::map<std::string, EmbeddingVector> texts_;
};

/// Resolves "strong" | "medium" | "weak" | "file:PATH".
std::unique_ptr<EmbeddingProvider> make_provider(std::string_view name);

// ---------------------------------------------------------------------------
// Spatial-sensitivity probe.

struct DistanceStats {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation
};

struct ProbeReport {
    DistanceStats same_cell;
    DistanceStats different_cell;
    std::size_t pair_count = 0;

    /// different.mean - same.mean
    double gap() const { return different_cell.mean - same_cell.mean; }
    /// Standard error of gap(), sqrt(s_same^2/n + s_diff^2/n).
    double gap_standard_error() const;
};

/// Staged camera view with one target of `color` at the center of `cell`, at a
/// fixed apparent size so that only the cell varies between views.
sim::Observation staged_view(sim::TargetColor color, sim::GridCell cell, double fov = kPi / 2.0);

/// For each pair: a reference view (c, k), a same-cell view (c, k) and a
/// different-cell view (c, k' != k), each fused with the same instruction embedding.
ProbeReport spatial_probe(const EmbeddingProvider& provider, std::size_t pair_count, std::uint64_t probe_seed);

}  // namespace embnav::embedding
