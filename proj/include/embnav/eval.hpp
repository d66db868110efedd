#pragma once

// Closed-loop evaluation, metric aggregation and multi-provider comparison.

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "embnav/artifact.hpp"
#include "embnav/bc.hpp"
#include "embnav/data.hpp"
#include "embnav/embedding.hpp"
#include "embnav/expert.hpp"
#include "embnav/instruction.hpp"
#include "embnav/sim.hpp"

namespace embnav::eval {

struct EpisodeContext {
    std::uint64_t seed = 0;
    sim::TargetColor goal = sim::TargetColor::Red;
    sim::Pose spawn;
    instruction::Instruction instruction;
};

/// Anything that maps (state, observation) to wheel commands. Learned
/// controllers must only look at the observation and the episode instruction.
class Controller {
public:
    virtual ~Controller() = default;
    virtual void begin_episode(const EpisodeContext& /*ctx*/) {}
    virtual sim::Action act(const sim::EpisodeState& state, const sim::Observation& obs) = 0;
    virtual std::string name() const = 0;
};

class ExpertController final : public Controller {
public:
    ExpertController(sim::Arena arena, expert::ExpertParams params) : arena_(arena), params_(params) {}
    sim::Action act(const sim::EpisodeState& state, const sim::Observation& obs) override;
    std::string name() const override { return "expert"; }

private:
    sim::Arena arena_;
    expert::ExpertParams params_;
};

class ConstantController final : public Controller {
public:
    explicit ConstantController(sim::Action action) : action_(action) {}
    sim::Action act(const sim::EpisodeState&, const sim::Observation&) override { return action_; }
    std::string name() const override { return "constant"; }

private:
    sim::Action action_;
};

/// Deployment loop of the learned policy: the text embedding is computed once
/// per episode, image noise comes from a stream seeded by the episode seed.
class EmbeddingPolicyController final : public Controller {
public:
    EmbeddingPolicyController(const bc::MlpPolicy& policy, const embedding::EmbeddingProvider& provider);
    void begin_episode(const EpisodeContext& ctx) override;
    sim::Action act(const sim::EpisodeState& state, const sim::Observation& obs) override;
    std::string name() const override { return "policy"; }

private:
    const bc::MlpPolicy& policy_;
    const embedding::EmbeddingProvider& provider_;
    embedding::EmbeddingVector text_;
    Rng noise_;
};

struct EpisodeResult {
    std::uint64_t seed = 0;
    sim::TargetColor goal = sim::TargetColor::Red;
    bool success = false;
    int steps = 0;
    double cumulative_reward = 0.0;
    double path_length = 0.0;
    double optimal_path_length = 0.0;  // straight line spawn -> goal center
    double final_distance = 0.0;
};

EpisodeResult run_episode(Controller& controller, std::uint64_t seed, sim::TargetColor goal, const sim::World& world);

EpisodeResult run_policy_episode(const bc::MlpPolicy& policy, const embedding::EmbeddingProvider& provider,
                                 std::uint64_t seed, sim::TargetColor goal, const sim::World& world);

/// Step statistics cover successful episodes only; failures are counted separately.
struct MetricsSummary {
    int n = 0;
    int successes = 0;
    double success_rate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double avg_steps = 0.0;
    int min_steps = 0;
    int max_steps = 0;
    double avg_failed_steps = 0.0;
    double mean_cumulative_reward = 0.0;
    double mean_path_efficiency = 0.0;  // path_length / optimal, successful episodes
    double max_final_distance_success = 0.0;

    bool operator==(const MetricsSummary&) const = default;
};

/// Wald interval p +- z sqrt(p(1-p)/n), clamped to [0, 1].
std::pair<double, double> wald_ci(int successes, int n, double z = 1.96);

MetricsSummary summarize(std::span<const EpisodeResult> results);

struct Evaluation {
    std::vector<EpisodeResult> episodes;
    MetricsSummary summary;
};

/// Episode i: seed derive_seed(master_seed, "eval", i), goal kAllColors[i % 5].
Evaluation evaluate(Controller& controller, int n, std::uint64_t master_seed, const sim::World& world);

nlohmann::json to_json(const MetricsSummary& m);
MetricsSummary summary_from_json(const nlohmann::json& j);

/// JSON: {"stamp": ..., "controller": ..., "summary": {...}}.
void write_summary(const std::filesystem::path& path, const MetricsSummary& m, const ArtifactStamp& stamp,
                   const std::string& controller);

/// Columns: episode,seed,goal,success,steps,cumulative_reward,path_length,optimal_path_length,final_distance
void write_episodes_csv(const std::filesystem::path& path, std::span<const EpisodeResult> results);

// ---------------------------------------------------------------------------

struct PipelineConfig {
    sim::World world;
    expert::ExpertParams expert;
    int collect_episodes = 500;
    bc::TrainConfig train;
    int eval_episodes = 100;
    std::uint64_t master_seed = 7;

    void validate() const;
};

/// Stage seeds derived from the master seed.
struct StageSeeds {
    std::uint64_t collect;
    std::uint64_t embed;
    std::uint64_t train;
    std::uint64_t eval;

    static StageSeeds from_master(std::uint64_t master);
};

struct ComparisonRow {
    std::string provider;
    std::size_t dim = 0;
    bool ok = false;
    std::string failure;
    MetricsSummary metrics;
    double final_bc_loss = 0.0;
    double train_seconds = 0.0;
};

struct Comparison {
    MetricsSummary expert;
    std::vector<ComparisonRow> rows;
};

/// Published reference rows (success %, avg successful steps) for the report template.
struct ReferenceRow {
    const char* model;
    double success_rate;
    double avg_steps;
};
inline constexpr std::array<ReferenceRow, 3> kReferenceRows = {{
    {"SigLIP", 0.740, 369.4},
    {"CLIP", 0.620, 417.6},
    {"ViLT", 0.400, 472.0},
}};

using ProgressFn = std::function<void(const std::string&)>;

/// Collects one shared demonstration set, then embeds, trains and evaluates each
/// provider with identical seeds. A failing provider yields a row with ok=false.
Comparison compare(std::span<const embedding::ProviderPreset> providers, const PipelineConfig& config,
                   const ProgressFn& progress = {});

/// Delimited table: provider,dim,status,success_rate,ci_low,ci_high,avg_steps_success,final_bc_loss
/// followed by expert and reference rows.
void write_comparison_csv(const std::filesystem::path& path, const Comparison& comparison);

}  // namespace embnav::eval
