#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "embnav/app.hpp"
#include "embnav/data.hpp"

namespace embnav::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad flags or paths; mapped to exit status 2.
class UsageError : public Error {
public:
    using Error::Error;
};

bool inside(const fs::path& dir, const fs::path& p) {
    const auto base = fs::weakly_canonical(fs::absolute(dir));
    const auto target = fs::weakly_canonical(fs::absolute(p));
    auto b = base.begin();
    auto t = target.begin();
    for (; b != base.end(); ++b, ++t) {
        if (t == target.end() || *b != *t) return false;
    }
    return true;
}

/// Outputs always land in the output directory.
fs::path output_path(const fs::path& dir, const std::string& value) {
    const fs::path p = fs::path(value).is_absolute() ? fs::path(value) : dir / value;
    if (!inside(dir, p)) throw UsageError("output path " + value + " lies outside the output directory " + dir.string());
    fs::create_directories(p.parent_path());
    return p;
}

/// Inputs are looked up in the output directory first.
fs::path input_path(const fs::path& dir, const std::string& value) {
    const fs::path p(value);
    if (p.is_relative() && fs::exists(dir / p)) return dir / p;
    return p;
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::string one_line(const eval::MetricsSummary& m) {
    return "success_rate=" + fixed(m.success_rate, 3) + " ci=[" + fixed(m.ci_low, 3) + ", " + fixed(m.ci_high, 3) +
           "] avg_steps=" + fixed(m.avg_steps, 1) + " min=" + std::to_string(m.min_steps) +
           " max=" + std::to_string(m.max_steps) + " reward=" + fixed(m.mean_cumulative_reward, 3) +
           " n=" + std::to_string(m.n);
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

json probe_json(const embedding::ProbeReport& r) {
    return {{"pair_count", r.pair_count},
            {"same_cell", {{"mean", r.same_cell.mean}, {"std", r.same_cell.std}}},
            {"different_cell", {{"mean", r.different_cell.mean}, {"std", r.different_cell.std}}},
            {"gap", r.gap()},
            {"gap_standard_error", r.gap_standard_error()}};
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Embedding-only navigation workbench: expert demonstrations, joint embeddings, behavior cloning, evaluation."};
    app.name("embnav");
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_file, output_dir;
    bool quiet = false;
    app.add_option("-c,--config", config_file, "INI configuration file")->check(CLI::ExistingFile);
    app.add_option("-o,--output-dir", output_dir, "Directory receiving every output (overrides [run] output_dir)");
    app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

    // Per-subcommand values; std::optional marks "not given on the command line".
    std::optional<int> episodes, collect_episodes, epochs, pairs, samples, dim;
    std::optional<std::uint64_t> seed;
    std::optional<double> lr, lambda, fd_step;
    std::string provider, out_file, raw_file = "raw.jsonl", data_file = "dataset.bin", policy_file = "policy.bin",
                                     report_file, providers = "strong,medium,weak";

    auto* collect = app.add_subcommand("collect", "Roll out the expert and record raw trajectories");
    collect->add_option("--episodes", episodes, "Number of episodes");
    collect->add_option("--seed", seed, "Master seed");
    collect->add_option("--out", out_file, "Raw trajectory file (default raw.jsonl)");

    auto* embed = app.add_subcommand("embed", "Turn raw trajectories into a (joint embedding, action) dataset");
    embed->add_option("--provider", provider, "strong | medium | weak | file:PATH");
    embed->add_option("--raw", raw_file, "Raw trajectory file")->capture_default_str();
    embed->add_option("--out", out_file, "Dataset file (default dataset.bin)");
    embed->add_option("--seed", seed, "Master seed");

    auto* train = app.add_subcommand("train", "Fit the MLP policy by behavior cloning");
    train->add_option("--data", data_file, "Dataset file")->capture_default_str();
    train->add_option("--epochs", epochs, "Training epochs");
    train->add_option("--lr", lr, "Initial learning rate");
    train->add_option("--out", out_file, "Policy file (default policy.bin)");
    train->add_option("--seed", seed, "Master seed");

    auto* evalc = app.add_subcommand("eval", "Evaluate a trained policy in closed loop");
    evalc->add_option("--policy", policy_file, "Policy file")->capture_default_str();
    evalc->add_option("--provider", provider, "strong | medium | weak | file:PATH");
    evalc->add_option("--episodes", episodes, "Number of episodes");
    evalc->add_option("--report", report_file, "Summary JSON (default metrics.json); episodes CSV is written beside it");
    evalc->add_option("--seed", seed, "Master seed");

    auto* expert_eval = app.add_subcommand("expert-eval", "Evaluate the privileged expert");
    expert_eval->add_option("--episodes", episodes, "Number of episodes");
    expert_eval->add_option("--seed", seed, "Master seed");
    expert_eval->add_option("--report", report_file, "Optional summary JSON inside the output directory");

    auto* probe = app.add_subcommand("probe", "Spatial-sensitivity probe of an embedding provider");
    probe->add_option("--provider", provider, "strong | medium | weak | file:PATH");
    probe->add_option("--pairs", pairs, "Number of view pairs (>= 30)");
    probe->add_option("--out", out_file, "Probe report (default probe.json)");
    probe->add_option("--seed", seed, "Probe seed");
    probe->add_option("--lambda", lambda, "Override the spatial weight of a synthetic provider");

    auto* comparec = app.add_subcommand("compare", "Train and evaluate several providers on shared demonstrations");
    comparec->add_option("--providers", providers, "Comma-separated preset names")->capture_default_str();
    comparec->add_option("--out", out_file, "Comparison table (default comparison.csv)");
    comparec->add_option("--episodes", episodes, "Evaluation episodes per provider");
    comparec->add_option("--collect-episodes", collect_episodes, "Demonstration episodes");
    comparec->add_option("--epochs", epochs, "Training epochs");
    comparec->add_option("--seed", seed, "Master seed");

    auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    gradcheck->add_option("--samples", samples, "Random samples (default 10)");
    gradcheck->add_option("--step", fd_step, "Finite-difference step (default 1e-5)");
    gradcheck->add_option("--dim", dim, "Input dimension (default 1152)");
    gradcheck->add_option("--seed", seed, "Seed");

    auto* pipeline = app.add_subcommand("pipeline", "collect -> embed -> train -> eval, skipping up-to-date stages");
    pipeline->add_option("--seed", seed, "Master seed");

    auto* verify = app.add_subcommand("verify", "Check stamps and cross-artifact consistency of a pipeline run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    }

    auto progress = [&](const std::string& msg) {
        if (!quiet) err << msg << std::endl;
    };

    try {
        RunConfig cfg = config_file.empty() ? RunConfig{} : load_config(config_file);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (seed && !gradcheck->parsed() && !probe->parsed()) cfg.pipeline.master_seed = *seed;
        if (!provider.empty()) {
            cfg.provider = ProviderConfig{};
            cfg.provider.name = provider;
        }
        if (lambda) cfg.provider.lambda_spatial = *lambda;
        if (epochs) cfg.pipeline.train.epochs = *epochs;
        if (lr) cfg.pipeline.train.learning_rate = *lr;
        if (collect_episodes) cfg.pipeline.collect_episodes = *collect_episodes;
        if (episodes) {
            if (collect->parsed()) {
                cfg.pipeline.collect_episodes = *episodes;
            } else {
                cfg.pipeline.eval_episodes = *episodes;
            }
        }
        try {
            cfg.validate();
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }

        const fs::path dir = cfg.output_dir;
        const auto& pc = cfg.pipeline;
        const auto seeds = eval::StageSeeds::from_master(pc.master_seed);
        auto stamp = [&](std::string kind, int version, Stage stage) {
            return ArtifactStamp{std::move(kind), version, stage_hash(cfg, stage), pc.master_seed};
        };
        auto or_default = [](const std::string& v, const char* fallback) { return v.empty() ? std::string(fallback) : v; };

        if (collect->parsed()) {
            const auto raw_path = output_path(dir, or_default(out_file, "raw.jsonl"));
            const auto s = stamp("raw", data::kRawFormatVersion, Stage::Collect);
            progress("collecting " + std::to_string(pc.collect_episodes) + " expert episodes");
            auto collection = data::collect(pc.collect_episodes, seeds.collect, pc.world, pc.expert);
            collection.manifest.stamp = s;
            data::write_raw(raw_path, collection.records, s);
            auto manifest_path = raw_path;
            manifest_path.replace_extension(".manifest.json");
            data::write_manifest(collection.manifest, manifest_path);
            write_sidecar(raw_path, {s, file_checksum(raw_path), fs::file_size(raw_path), "", {}});
            out << "collected " << collection.manifest.episodes << " episodes, " << collection.manifest.total_samples
                << " samples, steps min/mean/max " << collection.manifest.min_steps << "/"
                << fixed(collection.manifest.mean_steps, 1) << "/" << collection.manifest.max_steps << " -> "
                << raw_path.string() << "\n";
        } else if (embed->parsed()) {
            const auto raw_path = input_path(dir, raw_file);
            const auto data_path = output_path(dir, or_default(out_file, "dataset.bin"));
            const auto raw = data::read_raw(raw_path);
            const auto prov = make_provider(cfg.provider);
            progress("embedding " + std::to_string(raw.records.size()) + " samples with " + prov->description());
            const auto dataset = data::embed_dataset(raw.records, *prov, seeds.embed);
            data::save_dataset(dataset, data_path);
            write_sidecar(data_path, {stamp("dataset", 1, Stage::Embed), file_checksum(data_path),
                                      fs::file_size(data_path), file_checksum(raw_path),
                                      {{"provider", prov->description()}, {"dim", dataset.dim()}}});
            out << "embedded " << dataset.size() << " samples, dim " << dataset.dim() << " -> " << data_path.string()
                << "\n";
        } else if (train->parsed()) {
            const auto data_path = input_path(dir, data_file);
            const auto policy_path = output_path(dir, or_default(out_file, "policy.bin"));
            const auto dataset = data::load_dataset(data_path);
            bc::TrainConfig tc = pc.train;
            tc.seed = seeds.train;
            const auto trained = bc::train(dataset, tc, [&](int epoch, double loss) {
                progress("epoch " + std::to_string(epoch + 1) + " loss " + std::to_string(loss));
            });
            bc::save_policy(trained.policy, policy_path);
            write_sidecar(policy_path, {stamp("policy", bc::kPolicyFormatVersion, Stage::Train),
                                        file_checksum(policy_path), fs::file_size(policy_path),
                                        file_checksum(data_path),
                                        {{"epoch_losses", trained.report.epoch_losses},
                                         {"final_loss", trained.report.final_loss}}});
            out << "trained " << tc.epochs << " epochs, final loss " << trained.report.final_loss << " -> "
                << policy_path.string() << "\n";
        } else if (evalc->parsed()) {
            const auto policy_path = input_path(dir, policy_file);
            const auto report_path = output_path(dir, or_default(report_file, "metrics.json"));
            auto csv_path = report_path;
            csv_path.replace_extension(".episodes.csv");
            const auto policy = bc::load_policy(policy_path);
            const auto prov = make_provider(cfg.provider);
            eval::EmbeddingPolicyController controller(policy, *prov);
            const auto evaluation = eval::evaluate(controller, pc.eval_episodes, seeds.eval, pc.world);
            eval::write_summary(report_path, evaluation.summary, stamp("metrics", 1, Stage::Eval), controller.name());
            eval::write_episodes_csv(csv_path, evaluation.episodes);
            out << "policy: " << one_line(evaluation.summary) << "\n";
        } else if (expert_eval->parsed()) {
            eval::ExpertController controller(pc.world.arena, pc.expert);
            const auto evaluation = eval::evaluate(controller, pc.eval_episodes, seeds.eval, pc.world);
            if (!report_file.empty()) {
                const auto report_path = output_path(dir, report_file);
                eval::write_summary(report_path, evaluation.summary, stamp("metrics", 1, Stage::Eval), "expert");
                auto csv_path = report_path;
                csv_path.replace_extension(".episodes.csv");
                eval::write_episodes_csv(csv_path, evaluation.episodes);
            }
            out << "expert: " << one_line(evaluation.summary) << "\n";
        } else if (probe->parsed()) {
            const auto out_path = output_path(dir, or_default(out_file, "probe.json"));
            const auto prov = make_provider(cfg.provider);
            const std::uint64_t probe_seed = seed.value_or(derive_seed(pc.master_seed, "probe", 0));
            const auto report = embedding::spatial_probe(*prov, static_cast<std::size_t>(pairs.value_or(200)), probe_seed);
            auto j = probe_json(report);
            j["provider"] = prov->description();
            j["probe_seed"] = probe_seed;
            write_json(out_path, j);
            out << "probe " << prov->description() << ": same " << fixed(report.same_cell.mean, 5) << " +- "
                << fixed(report.same_cell.std, 5) << ", different " << fixed(report.different_cell.mean, 5) << " +- "
                << fixed(report.different_cell.std, 5) << ", gap " << fixed(report.gap(), 5) << " (se "
                << fixed(report.gap_standard_error(), 5) << ")\n";
        } else if (comparec->parsed()) {
            const auto out_path = output_path(dir, or_default(out_file, "comparison.csv"));
            std::vector<embedding::ProviderPreset> presets;
            std::stringstream ss(providers);
            for (std::string name; std::getline(ss, name, ',');) {
                const auto p = embedding::find_preset(name);
                if (!p) throw UsageError("unknown preset '" + name + "' in --providers");
                presets.push_back(*p);
            }
            const auto cmp = eval::compare(presets, pc, progress);
            eval::write_comparison_csv(out_path, cmp);
            out << "expert: " << one_line(cmp.expert) << "\n";
            for (const auto& row : cmp.rows) {
                out << row.provider << ": " << (row.ok ? one_line(row.metrics) : "failed: " + row.failure) << "\n";
            }
            out << "table -> " << out_path.string() << "\n";
        } else if (gradcheck->parsed()) {
            const std::size_t in_dim = static_cast<std::size_t>(dim.value_or(1152));
            const std::uint64_t s = seed.value_or(pc.master_seed);
            const auto policy = bc::MlpPolicy::random(bc::default_layer_sizes(in_dim), derive_seed(s, "gradcheck-init", 0));
            Rng rng(derive_seed(s, "gradcheck-samples", 0));
            std::normal_distribution<float> normal;
            std::uniform_real_distribution<double> uniform(-1.0, 1.0);
            std::vector<bc::Sample> batch(static_cast<std::size_t>(samples.value_or(10)));
            for (auto& smp : batch) {
                std::vector<float> v(in_dim);
                for (auto& x : v) x = normal(rng);
                smp.embedding = embedding::normalize(embedding::EmbeddingVector(std::move(v)));
                smp.action = {uniform(rng), uniform(rng)};
            }
            const double worst = bc::grad_check(policy, batch, fd_step.value_or(1e-5));
            out << "max relative error " << worst << " over " << policy.parameter_count() << " parameters\n";
            if (!(worst < 1e-4)) {
                err << "error: gradient check failed (threshold 1e-4)\n";
                return 1;
            }
        } else if (pipeline->parsed()) {
            const auto result = run_full_pipeline(cfg, progress);
            for (auto s : result.skipped) out << "skipped " << stage_name(s) << " (up to date)\n";
            for (auto s : result.ran) out << "ran " << stage_name(s) << "\n";
            out << "policy: " << one_line(result.metrics) << "\n";
        } else if (verify->parsed()) {
            const auto report = verify_artifacts(dir);
            if (!report.ok()) {
                for (const auto& p : report.problems) err << "verify: " << p << "\n";
                err << "error: " << report.problems.size() << " consistency problem(s) in " << dir.string() << "\n";
                return 1;
            }
            out << "verify: all artifacts in " << dir.string() << " are consistent\n";
        }
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace embnav::app
