#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "embnav/app.hpp"
#include "embnav/binary_io.hpp"
#include "embnav/data.hpp"

namespace embnav::app {

namespace fs = std::filesystem;
using nlohmann::json;

std::filesystem::path ArtifactPaths::sidecar(const fs::path& artifact) {
    fs::path p = artifact;
    p += ".meta.json";
    return p;
}

std::string file_checksum(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

void write_sidecar(const fs::path& artifact, const Sidecar& s) {
    const auto path = ArtifactPaths::sidecar(artifact);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << json{{"stamp", s.stamp},
                {"checksum", s.checksum},
                {"bytes", s.bytes},
                {"input_checksum", s.input_checksum},
                {"details", s.details}}
               .dump(2)
        << '\n';
}

Sidecar read_sidecar(const fs::path& artifact) {
    const auto path = ArtifactPaths::sidecar(artifact);
    std::ifstream in(path);
    if (!in) throw FormatError("missing sidecar " + path.string());
    try {
        const json j = json::parse(in);
        Sidecar s;
        s.stamp = j.at("stamp").get<ArtifactStamp>();
        j.at("checksum").get_to(s.checksum);
        j.at("bytes").get_to(s.bytes);
        j.at("input_checksum").get_to(s.input_checksum);
        s.details = j.value("details", json::object());
        return s;
    } catch (const json::exception& e) {
        throw FormatError("malformed sidecar " + path.string() + ": " + e.what());
    }
}

namespace {

Sidecar seal(const fs::path& artifact, const ArtifactStamp& stamp, std::string input_checksum, json details = json::object()) {
    Sidecar s{stamp, file_checksum(artifact), fs::file_size(artifact), std::move(input_checksum), std::move(details)};
    write_sidecar(artifact, s);
    return s;
}

// An artifact is current when its sidecar carries the expected stamp and
// input checksum and the file still hashes to the recorded value.
std::optional<Sidecar> current(const fs::path& artifact, const ArtifactStamp& stamp, const std::string& input_checksum) {
    if (!fs::exists(artifact) || !fs::exists(ArtifactPaths::sidecar(artifact))) return std::nullopt;
    try {
        auto s = read_sidecar(artifact);
        if (s.stamp != stamp || s.input_checksum != input_checksum) return std::nullopt;
        if (fs::file_size(artifact) != s.bytes || file_checksum(artifact) != s.checksum) return std::nullopt;
        return s;
    } catch (const Error&) {
        return std::nullopt;
    }
}

template <typename Fn>
auto run_stage(Stage stage, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

constexpr int kMetricsFormatVersion = 1;
constexpr int kEpisodesFormatVersion = 1;

}  // namespace

PipelineResult run_full_pipeline(const RunConfig& config, const eval::ProgressFn& progress) {
    config.validate();
    auto note = [&](const std::string& msg) {
        if (progress) progress(msg);
    };
    PipelineResult result;
    result.paths.dir = config.output_dir;
    const auto& paths = result.paths;
    fs::create_directories(paths.dir);
    write_config(config, paths.config());

    const auto& pc = config.pipeline;
    const auto seeds = eval::StageSeeds::from_master(pc.master_seed);
    auto stamp_for = [&](std::string kind, int version, Stage stage) {
        return ArtifactStamp{std::move(kind), version, stage_hash(config, stage), pc.master_seed};
    };

    // collect
    std::optional<std::vector<data::TrajectoryRecord>> records;
    const auto raw_stamp = stamp_for("raw", data::kRawFormatVersion, Stage::Collect);
    auto raw_meta = current(paths.raw(), raw_stamp, "");
    if (raw_meta && fs::exists(paths.manifest())) {
        result.skipped.push_back(Stage::Collect);
    } else {
        raw_meta = run_stage(Stage::Collect, [&] {
            note("collect: " + std::to_string(pc.collect_episodes) + " expert episodes");
            auto collection = data::collect(pc.collect_episodes, seeds.collect, pc.world, pc.expert);
            collection.manifest.stamp = raw_stamp;
            data::write_raw(paths.raw(), collection.records, raw_stamp);
            data::write_manifest(collection.manifest, paths.manifest());
            records = std::move(collection.records);
            return seal(paths.raw(), raw_stamp, "", {{"records", records->size()}});
        });
        result.ran.push_back(Stage::Collect);
    }

    // embed
    std::optional<bc::Dataset> dataset;
    const auto data_stamp = stamp_for("dataset", 1, Stage::Embed);
    auto data_meta = current(paths.dataset(), data_stamp, raw_meta->checksum);
    if (data_meta) {
        result.skipped.push_back(Stage::Embed);
    } else {
        data_meta = run_stage(Stage::Embed, [&] {
            if (!records) records = data::read_raw(paths.raw()).records;
            const auto provider = make_provider(config.provider);
            note("embed: " + std::to_string(records->size()) + " samples with " + provider->description());
            dataset = data::embed_dataset(*records, *provider, seeds.embed);
            data::save_dataset(*dataset, paths.dataset());
            return seal(paths.dataset(), data_stamp, raw_meta->checksum,
                        {{"provider", provider->description()},
                         {"dim", dataset->dim()},
                         {"samples", dataset->size()},
                         {"embed_seed", seeds.embed}});
        });
        result.ran.push_back(Stage::Embed);
    }

    // train
    std::optional<bc::MlpPolicy> policy;
    const auto policy_stamp = stamp_for("policy", bc::kPolicyFormatVersion, Stage::Train);
    auto policy_meta = current(paths.policy(), policy_stamp, data_meta->checksum);
    if (policy_meta) {
        result.skipped.push_back(Stage::Train);
    } else {
        policy_meta = run_stage(Stage::Train, [&] {
            if (!dataset) dataset = data::load_dataset(paths.dataset());
            bc::TrainConfig tc = pc.train;
            tc.seed = seeds.train;
            note("train: " + std::to_string(tc.epochs) + " epochs on " + std::to_string(dataset->size()) + " samples");
            auto trained = bc::train(*dataset, tc, [&](int epoch, double loss) {
                note("train: epoch " + std::to_string(epoch + 1) + " loss " + std::to_string(loss));
            });
            policy = std::move(trained.policy);
            bc::save_policy(*policy, paths.policy());
            return seal(paths.policy(), policy_stamp, data_meta->checksum,
                        {{"epoch_losses", trained.report.epoch_losses},
                         {"final_loss", trained.report.final_loss},
                         {"wall_seconds", trained.report.wall_seconds},
                         {"train_seed", tc.seed}});
        });
        result.ran.push_back(Stage::Train);
    }
    dataset.reset();

    // eval
    const auto metrics_stamp = stamp_for("metrics", kMetricsFormatVersion, Stage::Eval);
    const auto episodes_stamp = stamp_for("episodes", kEpisodesFormatVersion, Stage::Eval);
    const auto metrics_meta = current(paths.metrics(), metrics_stamp, policy_meta->checksum);
    const auto episodes_meta = current(paths.episodes(), episodes_stamp, policy_meta->checksum);
    if (metrics_meta && episodes_meta) {
        std::ifstream in(paths.metrics());
        result.metrics = eval::summary_from_json(json::parse(in).at("summary"));
        result.skipped.push_back(Stage::Eval);
    } else {
        result.metrics = run_stage(Stage::Eval, [&] {
            if (!policy) policy = bc::load_policy(paths.policy());
            const auto provider = make_provider(config.provider);
            note("eval: " + std::to_string(pc.eval_episodes) + " episodes");
            eval::EmbeddingPolicyController controller(*policy, *provider);
            const auto evaluation = eval::evaluate(controller, pc.eval_episodes, seeds.eval, pc.world);
            eval::write_summary(paths.metrics(), evaluation.summary, metrics_stamp, controller.name());
            seal(paths.metrics(), metrics_stamp, policy_meta->checksum);
            eval::write_episodes_csv(paths.episodes(), evaluation.episodes);
            seal(paths.episodes(), episodes_stamp, policy_meta->checksum);
            return evaluation.summary;
        });
        result.ran.push_back(Stage::Eval);
    }
    return result;
}

// ---------------------------------------------------------------------------

VerifyReport verify_artifacts(const fs::path& dir) {
    VerifyReport report;
    auto problem = [&](std::string msg) { report.problems.push_back(std::move(msg)); };
    const ArtifactPaths paths{dir};

    RunConfig config;
    try {
        config = load_config(paths.config());
    } catch (const Error& e) {
        problem(e.what());
        return report;
    }
    const auto master = config.pipeline.master_seed;

    struct Entry {
        fs::path path;
        Stage stage;
        std::optional<Sidecar> meta;
    };
    std::vector<Entry> entries = {{paths.raw(), Stage::Collect, {}},
                                  {paths.dataset(), Stage::Embed, {}},
                                  {paths.policy(), Stage::Train, {}},
                                  {paths.metrics(), Stage::Eval, {}},
                                  {paths.episodes(), Stage::Eval, {}}};
    for (auto& e : entries) {
        const std::string name = e.path.filename().string();
        if (!fs::exists(e.path)) {
            problem(name + ": missing");
            continue;
        }
        try {
            e.meta = read_sidecar(e.path);
        } catch (const Error& err) {
            problem(name + ": " + err.what());
            continue;
        }
        const auto& s = *e.meta;
        if (s.stamp.config_hash != stage_hash(config, e.stage)) problem(name + ": config hash does not match config.ini");
        if (s.stamp.master_seed != master) problem(name + ": master seed does not match config.ini");
        if (fs::file_size(e.path) != s.bytes || file_checksum(e.path) != s.checksum) {
            problem(name + ": contents do not match the recorded checksum");
        }
    }
    auto chained = [&](std::size_t child, std::size_t parent) {
        if (entries[child].meta && entries[parent].meta &&
            entries[child].meta->input_checksum != entries[parent].meta->checksum) {
            problem(entries[child].path.filename().string() + ": built from a different " +
                    entries[parent].path.filename().string());
        }
    };
    chained(1, 0);
    chained(2, 1);
    chained(3, 2);
    chained(4, 2);

    // Content-level cross checks.
    std::size_t raw_records = 0;
    try {
        const auto raw = data::read_raw(paths.raw());
        raw_records = raw.records.size();
        if (entries[0].meta && raw.stamp != entries[0].meta->stamp) problem("raw.jsonl: header stamp differs from sidecar");
        const auto manifest = data::read_manifest(paths.manifest());
        manifest.validate();
        if (manifest.stamp != raw.stamp) problem("manifest.json: stamp differs from raw.jsonl");
        if (manifest.total_samples != raw_records) problem("manifest.json: sample count differs from raw.jsonl");
        if (manifest.episodes != static_cast<std::size_t>(config.pipeline.collect_episodes)) {
            problem("manifest.json: episode count differs from config.ini");
        }
    } catch (const Error& e) {
        problem(std::string("raw/manifest: ") + e.what());
    }

    std::size_t data_dim = 0;
    try {
        io::BinaryReader r(paths.dataset());
        char magic[4];
        r.bytes(magic, 4);
        if (std::string_view(magic, 4) != "T2N1") throw FormatError("bad magic");
        data_dim = r.u32();
        const auto count = r.u64();
        if (count != raw_records) problem("dataset.bin: sample count differs from raw.jsonl");
    } catch (const Error& e) {
        problem(std::string("dataset.bin: ") + e.what());
    }

    try {
        const auto policy = bc::load_policy(paths.policy());
        if (policy.input_dim() != data_dim) problem("policy.bin: input dim differs from dataset.bin");
    } catch (const Error& e) {
        problem(std::string("policy.bin: ") + e.what());
    }

    try {
        std::ifstream in(paths.metrics());
        const json j = json::parse(in);
        const auto summary = eval::summary_from_json(j.at("summary"));
        if (entries[3].meta && j.at("stamp").get<ArtifactStamp>() != entries[3].meta->stamp) {
            problem("metrics.json: inline stamp differs from sidecar");
        }
        if (summary.n != config.pipeline.eval_episodes) problem("metrics.json: episode count differs from config.ini");
        std::ifstream csv(paths.episodes());
        std::string line;
        std::getline(csv, line);
        int rows = 0, successes = 0;
        while (std::getline(csv, line)) {
            if (line.empty()) continue;
            ++rows;
            std::stringstream ss(line);
            std::string field;
            for (int i = 0; i < 4 && std::getline(ss, field, ','); ++i) {
            }
            successes += field == "1";
        }
        if (rows != summary.n) problem("episodes.csv: row count differs from metrics.json");
        if (successes != summary.successes) problem("episodes.csv: success count differs from metrics.json");
    } catch (const std::exception& e) {
        problem(std::string("metrics/episodes: ") + e.what());
    }
    return report;
}

}  // namespace embnav::app
