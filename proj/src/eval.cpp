#include "embnav/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace embnav::eval {

using nlohmann::json;

sim::Action ExpertController::act(const sim::EpisodeState& state, const sim::Observation&) {
    return expert::expert_action(state, arena_, params_);
}

EmbeddingPolicyController::EmbeddingPolicyController(const bc::MlpPolicy& policy,
                                                     const embedding::EmbeddingProvider& provider)
    : policy_(policy), provider_(provider) {
    if (policy.input_dim() != provider.dim()) {
        throw DimensionMismatch("policy input dim " + std::to_string(policy.input_dim()) + " != provider dim " +
                                std::to_string(provider.dim()));
    }
}

void EmbeddingPolicyController::begin_episode(const EpisodeContext& ctx) {
    text_ = provider_.embed_text(ctx.instruction);
    noise_.seed(derive_seed(ctx.seed, "eval-noise", 0));
}

sim::Action EmbeddingPolicyController::act(const sim::EpisodeState&, const sim::Observation& obs) {
    return bc::act(policy_, provider_.embed_image(obs, noise_), text_);
}

EpisodeResult run_episode(Controller& controller, std::uint64_t seed, sim::TargetColor goal, const sim::World& world) {
    Rng rng(seed);
    EpisodeContext ctx;
    ctx.seed = seed;
    ctx.goal = goal;
    ctx.spawn = sim::sample_spawn(world.arena, rng);
    ctx.instruction = instruction::instruction_for(ctx.spawn, goal, world.arena);
    controller.begin_episode(ctx);

    EpisodeResult result;
    result.seed = seed;
    result.goal = goal;
    result.optimal_path_length = sim::distance(ctx.spawn.position(), world.arena.target(goal));

    sim::EpisodeState state = sim::initial_state(ctx.spawn, goal, world.arena);
    while (state.status == sim::Status::Running) {
        const auto obs = sim::observe(state, world.arena, world.fov);
        const auto raw = controller.act(state, obs);
        const auto next = sim::step(state, sim::Action::clamped(raw.left, raw.right), world.arena, world.robot);
        result.path_length += sim::distance(state.pose.position(), next.pose.position());
        state = next;
    }
    result.success = state.status == sim::Status::Success;
    result.steps = state.step;
    result.cumulative_reward = state.cumulative_reward;
    result.final_distance = sim::goal_distance(state, world.arena);
    return result;
}

EpisodeResult run_policy_episode(const bc::MlpPolicy& policy, const embedding::EmbeddingProvider& provider,
                                 std::uint64_t seed, sim::TargetColor goal, const sim::World& world) {
    EmbeddingPolicyController controller(policy, provider);
    return run_episode(controller, seed, goal, world);
}

std::pair<double, double> wald_ci(int successes, int n, double z) {
    if (n <= 0) throw ContractViolation("wald_ci: n must be >= 1");
    if (successes < 0 || successes > n) throw ContractViolation("wald_ci: successes must be in [0, n]");
    const double p = static_cast<double>(successes) / n;
    const double half = z * std::sqrt(p * (1.0 - p) / n);
    return {std::clamp(p - half, 0.0, 1.0), std::clamp(p + half, 0.0, 1.0)};
}

MetricsSummary summarize(std::span<const EpisodeResult> results) {
    MetricsSummary m;
    m.n = static_cast<int>(results.size());
    if (m.n == 0) return m;
    long success_steps = 0, failed_steps = 0;
    double reward_sum = 0.0, efficiency_sum = 0.0;
    m.min_steps = std::numeric_limits<int>::max();
    for (const auto& r : results) {
        reward_sum += r.cumulative_reward;
        if (r.success) {
            ++m.successes;
            success_steps += r.steps;
            m.min_steps = std::min(m.min_steps, r.steps);
            m.max_steps = std::max(m.max_steps, r.steps);
            efficiency_sum += r.optimal_path_length > 0.0 ? r.path_length / r.optimal_path_length : 1.0;
            m.max_final_distance_success = std::max(m.max_final_distance_success, r.final_distance);
        } else {
            failed_steps += r.steps;
        }
    }
    const int failures = m.n - m.successes;
    m.success_rate = static_cast<double>(m.successes) / m.n;
    std::tie(m.ci_low, m.ci_high) = wald_ci(m.successes, m.n);
    if (m.successes > 0) {
        m.avg_steps = static_cast<double>(success_steps) / m.successes;
        m.mean_path_efficiency = efficiency_sum / m.successes;
    } else {
        m.min_steps = 0;
    }
    m.avg_failed_steps = failures > 0 ? static_cast<double>(failed_steps) / failures : 0.0;
    m.mean_cumulative_reward = reward_sum / m.n;
    return m;
}

Evaluation evaluate(Controller& controller, int n, std::uint64_t master_seed, const sim::World& world) {
    if (n < 1) throw ContractViolation("evaluate: n must be >= 1");
    Evaluation out;
    out.episodes.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto goal = sim::kAllColors[static_cast<std::size_t>(i) % sim::kNumColors];
        out.episodes.push_back(run_episode(controller, derive_seed(master_seed, "eval", static_cast<std::uint64_t>(i)), goal, world));
    }
    out.summary = summarize(out.episodes);
    return out;
}

json to_json(const MetricsSummary& m) {
    return {{"n", m.n},
            {"successes", m.successes},
            {"success_rate", m.success_rate},
            {"ci_low", m.ci_low},
            {"ci_high", m.ci_high},
            {"avg_steps", m.avg_steps},
            {"min_steps", m.min_steps},
            {"max_steps", m.max_steps},
            {"avg_failed_steps", m.avg_failed_steps},
            {"mean_cumulative_reward", m.mean_cumulative_reward},
            {"mean_path_efficiency", m.mean_path_efficiency},
            {"max_final_distance_success", m.max_final_distance_success}};
}

MetricsSummary summary_from_json(const json& j) {
    MetricsSummary m;
    try {
        j.at("n").get_to(m.n);
        j.at("successes").get_to(m.successes);
        j.at("success_rate").get_to(m.success_rate);
        j.at("ci_low").get_to(m.ci_low);
        j.at("ci_high").get_to(m.ci_high);
        j.at("avg_steps").get_to(m.avg_steps);
        j.at("min_steps").get_to(m.min_steps);
        j.at("max_steps").get_to(m.max_steps);
        j.at("avg_failed_steps").get_to(m.avg_failed_steps);
        j.at("mean_cumulative_reward").get_to(m.mean_cumulative_reward);
        j.at("mean_path_efficiency").get_to(m.mean_path_efficiency);
        j.at("max_final_distance_success").get_to(m.max_final_distance_success);
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed metrics summary: ") + e.what());
    }
    return m;
}

void write_summary(const std::filesystem::path& path, const MetricsSummary& m, const ArtifactStamp& stamp,
                   const std::string& controller) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << json{{"stamp", stamp}, {"controller", controller}, {"summary", to_json(m)}}.dump(2) << '\n';
}

void write_episodes_csv(const std::filesystem::path& path, std::span<const EpisodeResult> results) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << "episode,seed,goal,success,steps,cumulative_reward,path_length,optimal_path_length,final_distance\n";
    out << std::setprecision(9);
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        out << i << ',' << r.seed << ',' << sim::color_name(r.goal) << ',' << (r.success ? 1 : 0) << ',' << r.steps
            << ',' << r.cumulative_reward << ',' << r.path_length << ',' << r.optimal_path_length << ','
            << r.final_distance << '\n';
    }
}

// ---------------------------------------------------------------------------

void PipelineConfig::validate() const {
    world.validate();
    expert.validate(world.arena);
    train.validate();
    if (collect_episodes < 1) throw ConfigError("collect episodes must be >= 1");
    if (eval_episodes < 1) throw ConfigError("eval episodes must be >= 1");
}

StageSeeds StageSeeds::from_master(std::uint64_t master) {
    return {derive_seed(master, "stage:collect", 0), derive_seed(master, "stage:embed", 0),
            derive_seed(master, "stage:train", 0), derive_seed(master, "stage:eval", 0)};
}

Comparison compare(std::span<const embedding::ProviderPreset> providers, const PipelineConfig& config,
                   const ProgressFn& progress) {
    if (providers.size() < 2) throw ContractViolation("compare: needs at least two providers");
    config.validate();
    auto note = [&](const std::string& msg) {
        if (progress) progress(msg);
    };
    const auto seeds = StageSeeds::from_master(config.master_seed);

    Comparison out;
    ExpertController expert_ctl(config.world.arena, config.expert);
    out.expert = evaluate(expert_ctl, config.eval_episodes, seeds.eval, config.world).summary;

    note("collecting " + std::to_string(config.collect_episodes) + " expert episodes");
    const auto collection = data::collect(config.collect_episodes, seeds.collect, config.world, config.expert);

    for (const auto& preset : providers) {
        ComparisonRow row;
        row.provider = preset.name;
        row.dim = preset.params.dim;
        try {
            const embedding::SyntheticEmbedder provider(preset.params, preset.name);
            note(preset.name + ": embedding " + std::to_string(collection.records.size()) + " samples");
            const auto dataset = data::embed_dataset(collection.records, provider, seeds.embed);
            note(preset.name + ": training");
            bc::TrainConfig tc = config.train;
            tc.seed = seeds.train;
            const auto trained = bc::train(dataset, tc);
            row.final_bc_loss = trained.report.final_loss;
            row.train_seconds = trained.report.wall_seconds;
            note(preset.name + ": evaluating");
            EmbeddingPolicyController ctl(trained.policy, provider);
            row.metrics = evaluate(ctl, config.eval_episodes, seeds.eval, config.world).summary;
            row.ok = true;
        } catch (const std::exception& e) {
            row.failure = e.what();
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

void write_comparison_csv(const std::filesystem::path& path, const Comparison& comparison) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << "kind,provider,dim,status,success_rate,ci_low,ci_high,avg_steps_success,final_bc_loss\n";
    out << std::setprecision(9);
    const auto& e = comparison.expert;
    out << "expert,expert,0,ok," << e.success_rate << ',' << e.ci_low << ',' << e.ci_high << ',' << e.avg_steps
        << ",\n";
    for (const auto& r : comparison.rows) {
        out << "provider," << r.provider << ',' << r.dim << ',';
        if (!r.ok) {
            std::string reason = r.failure;
            std::replace(reason.begin(), reason.end(), ',', ';');
            std::replace(reason.begin(), reason.end(), '\n', ' ');
            out << "failed: " << reason << ",,,,,\n";
            continue;
        }
        const auto& m = r.metrics;
        out << "ok," << m.success_rate << ',' << m.ci_low << ',' << m.ci_high << ',' << m.avg_steps << ','
            << r.final_bc_loss << '\n';
    }
    for (const auto& ref : kReferenceRows) {
        const int successes = static_cast<int>(std::lround(ref.success_rate * 100));
        const auto [lo, hi] = wald_ci(successes, 100);
        out << "reference," << ref.model << ",,published," << ref.success_rate << ',' << lo << ',' << hi << ','
            << ref.avg_steps << ",\n";
    }
}

}  // namespace embnav::eval
