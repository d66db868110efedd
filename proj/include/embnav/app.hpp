#pragma once

// Run configuration, pipeline orchestration and the command-line front end.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "embnav/embedding.hpp"
#include "embnav/eval.hpp"

namespace embnav::app {

/// Provider section: a preset or file provider plus optional synthetic overrides.
struct ProviderConfig {
    std::string name = "strong";  // strong | medium | weak | file:PATH
    std::optional<double> lambda_spatial;
    std::optional<double> noise_sigma;
    std::optional<double> mu_cue;
    std::optional<double> size_scale;
    std::optional<double> background_weight;
};

std::unique_ptr<embedding::EmbeddingProvider> make_provider(const ProviderConfig& config);

struct RunConfig {
    eval::PipelineConfig pipeline;
    ProviderConfig provider;
    std::filesystem::path output_dir = "runs/default";

    /// Throws ConfigError.
    void validate() const;
};

/// INI text with sections [arena] [robot] [camera] [expert] [provider] [train]
/// [collect] [eval] [run]. Unknown sections or keys are rejected.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Every parameter in a fixed order with round-trip precision. Parsing this
/// text yields an equal configuration; output_dir is excluded.
std::string canonical_text(const RunConfig& config);
void write_config(const RunConfig& config, const std::filesystem::path& path);

enum class Stage { Collect, Embed, Train, Eval };
std::string_view stage_name(Stage s);

/// Hex FNV-1a of the canonical sections a stage depends on (its own and all upstream ones).
std::string stage_hash(const RunConfig& config, Stage stage);
/// Hash over the whole canonical text.
std::string config_hash(const RunConfig& config);

/// Error raised by run_full_pipeline, naming the stage that failed.
class StageError : public Error {
public:
    StageError(Stage stage, const std::string& cause);
    Stage stage() const { return stage_; }

private:
    Stage stage_;
};

/// Artifact names inside the output directory.
struct ArtifactPaths {
    std::filesystem::path dir;
    std::filesystem::path config() const { return dir / "config.ini"; }
    std::filesystem::path raw() const { return dir / "raw.jsonl"; }
    std::filesystem::path manifest() const { return dir / "manifest.json"; }
    std::filesystem::path dataset() const { return dir / "dataset.bin"; }
    std::filesystem::path policy() const { return dir / "policy.bin"; }
    std::filesystem::path metrics() const { return dir / "metrics.json"; }
    std::filesystem::path episodes() const { return dir / "episodes.csv"; }
    static std::filesystem::path sidecar(const std::filesystem::path& artifact);
};

/// Sidecar written next to every artifact as "<name>.meta.json".
struct Sidecar {
    ArtifactStamp stamp;
    std::string checksum;        // hex FNV-1a of the artifact bytes
    std::uintmax_t bytes = 0;
    std::string input_checksum;  // checksum of the upstream artifact, empty for the first stage
    nlohmann::json details = nlohmann::json::object();
};

std::string file_checksum(const std::filesystem::path& path);
void write_sidecar(const std::filesystem::path& artifact, const Sidecar& sidecar);
Sidecar read_sidecar(const std::filesystem::path& artifact);

struct PipelineResult {
    ArtifactPaths paths;
    std::vector<Stage> ran;
    std::vector<Stage> skipped;
    eval::MetricsSummary metrics;
};

/// collect -> embed -> train -> eval. A stage whose artifact already carries
/// the expected stamp and input checksum is skipped.
PipelineResult run_full_pipeline(const RunConfig& config, const eval::ProgressFn& progress = {});

struct VerifyReport {
    std::vector<std::string> problems;
    bool ok() const { return problems.empty(); }
};

/// Cross-checks stamps, checksums and counts of every artifact in `dir`.
VerifyReport verify_artifacts(const std::filesystem::path& dir);

/// Entry point of the command-line tool. Returns the process exit status:
/// 0 success, 1 stage failure, 2 usage error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace embnav::app
