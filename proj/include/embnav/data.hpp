#pragma once

// Demonstration collection, conversion to (joint embedding, action) samples,
// and the on-disk formats for both.

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "embnav/artifact.hpp"
#include "embnav/bc.hpp"
#include "embnav/embedding.hpp"
#include "embnav/expert.hpp"
#include "embnav/sim.hpp"

namespace embnav::data {

struct TrajectoryRecord {
    int episode_id = 0;
    int step = 0;
    sim::TargetColor goal = sim::TargetColor::Red;
    sim::Pose pose;
    sim::Observation observation;
    std::string instruction_text;
    sim::Action action;
    double reward = 0.0;
};

struct DatasetManifest {
    std::size_t episodes = 0;
    std::array<std::size_t, sim::kNumColors> per_color{};
    std::size_t total_samples = 0;
    std::string provider = "none";
    std::uint64_t collect_seed = 0;
    std::uint64_t embed_seed = 0;
    std::size_t dim = 0;
    int min_steps = 0;
    int max_steps = 0;
    double mean_steps = 0.0;
    ArtifactStamp stamp;

    /// Throws FormatError if per-color counts do not sum to the episode count.
    void validate() const;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

struct Collection {
    std::vector<TrajectoryRecord> records;
    DatasetManifest manifest;
};

/// Episode i uses seed derive_seed(seed, "collect", i) for its spawn and goal
/// color kAllColors[i % 5]. Throws Error if the expert ever times out.
Collection collect(int n_episodes, std::uint64_t seed, const sim::World& world, const expert::ExpertParams& params);

// Raw trajectory file: one JSON object per line, preceded by a header line
// {"format": "embnav-raw", "version": 1, ...stamp}.
inline constexpr int kRawFormatVersion = 1;

void write_raw(const std::filesystem::path& path, std::span<const TrajectoryRecord> records,
               const ArtifactStamp& stamp);

struct RawFile {
    ArtifactStamp stamp;
    std::vector<TrajectoryRecord> records;
};

RawFile read_raw(const std::filesystem::path& path);

/// One sample per record, in record order. Noise for episode e is drawn from
/// derive_seed(embed_seed, "embed", e).
bc::Dataset embed_dataset(std::span<const TrajectoryRecord> records, const embedding::EmbeddingProvider& provider,
                          std::uint64_t embed_seed);

// BC dataset file: "T2N1", u32 dim, u64 count, then count records of
// (dim + 2) little-endian f32 (embedding then left/right action).
inline constexpr std::size_t kDatasetHeaderBytes = 16;

void save_dataset(const bc::Dataset& data, const std::filesystem::path& path);

/// Throws FormatError on bad magic or truncation, DimensionMismatch if
/// `expected_dim` is nonzero and differs from the header.
bc::Dataset load_dataset(const std::filesystem::path& path, std::size_t expected_dim = 0);

}  // namespace embnav::data
