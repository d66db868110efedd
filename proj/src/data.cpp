#include "embnav/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "embnav/binary_io.hpp"
#include "embnav/instruction.hpp"

namespace embnav::data {

using nlohmann::json;

namespace {

constexpr char kDatasetMagic[4] = {'T', '2', 'N', '1'};
constexpr std::string_view kRawFormat = "embnav-raw";

json observation_to_json(const sim::Observation& obs) {
    json visible = json::array();
    for (const auto& v : obs.visible) {
        visible.push_back({{"color", sim::color_name(v.color)},
                           {"bearing", v.bearing},
                           {"distance", v.distance},
                           {"row", v.cell.row},
                           {"col", v.cell.col},
                           {"size", v.apparent_size}});
    }
    return {{"fov", obs.fov}, {"visible", visible}};
}

sim::TargetColor color_from_json(const json& j) {
    const auto name = j.get<std::string>();
    const auto c = sim::parse_color(name);
    if (!c) throw FormatError("unknown color '" + name + "'");
    return *c;
}

sim::Observation observation_from_json(const json& j) {
    sim::Observation obs;
    obs.fov = j.at("fov").get<double>();
    for (const auto& v : j.at("visible")) {
        sim::VisibleTarget t;
        t.color = color_from_json(v.at("color"));
        t.bearing = v.at("bearing").get<double>();
        t.distance = v.at("distance").get<double>();
        t.cell = {v.at("row").get<int>(), v.at("col").get<int>()};
        t.apparent_size = v.at("size").get<double>();
        obs.visible.push_back(t);
    }
    return obs;
}

json record_to_json(const TrajectoryRecord& r) {
    return {{"episode", r.episode_id},
            {"step", r.step},
            {"goal", sim::color_name(r.goal)},
            {"pose", {r.pose.x, r.pose.y, r.pose.heading}},
            {"observation", observation_to_json(r.observation)},
            {"instruction", r.instruction_text},
            {"action", {r.action.left, r.action.right}},
            {"reward", r.reward}};
}

TrajectoryRecord record_from_json(const json& j) {
    TrajectoryRecord r;
    r.episode_id = j.at("episode").get<int>();
    r.step = j.at("step").get<int>();
    r.goal = color_from_json(j.at("goal"));
    const auto& pose = j.at("pose");
    r.pose = {pose.at(0).get<double>(), pose.at(1).get<double>(), pose.at(2).get<double>()};
    r.observation = observation_from_json(j.at("observation"));
    r.instruction_text = j.at("instruction").get<std::string>();
    const auto& action = j.at("action");
    r.action = {action.at(0).get<double>(), action.at(1).get<double>()};
    r.reward = j.at("reward").get<double>();
    return r;
}

}  // namespace

void DatasetManifest::validate() const {
    std::size_t sum = 0;
    for (auto c : per_color) sum += c;
    if (sum != episodes) {
        throw FormatError("manifest per-color counts sum to " + std::to_string(sum) + ", expected " +
                          std::to_string(episodes));
    }
}

json to_json(const DatasetManifest& m) {
    json per_color;
    for (auto c : sim::kAllColors) per_color[std::string(sim::color_name(c))] = m.per_color[sim::color_index(c)];
    return {{"stamp", m.stamp},
            {"episodes", m.episodes},
            {"per_color", per_color},
            {"total_samples", m.total_samples},
            {"provider", m.provider},
            {"collect_seed", m.collect_seed},
            {"embed_seed", m.embed_seed},
            {"dim", m.dim},
            {"steps", {{"min", m.min_steps}, {"max", m.max_steps}, {"mean", m.mean_steps}}}};
}

DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest m;
    try {
        m.stamp = j.at("stamp").get<ArtifactStamp>();
        m.episodes = j.at("episodes").get<std::size_t>();
        for (auto c : sim::kAllColors) {
            m.per_color[sim::color_index(c)] = j.at("per_color").at(std::string(sim::color_name(c))).get<std::size_t>();
        }
        m.total_samples = j.at("total_samples").get<std::size_t>();
        m.provider = j.at("provider").get<std::string>();
        m.collect_seed = j.at("collect_seed").get<std::uint64_t>();
        m.embed_seed = j.at("embed_seed").get<std::uint64_t>();
        m.dim = j.at("dim").get<std::size_t>();
        m.min_steps = j.at("steps").at("min").get<int>();
        m.max_steps = j.at("steps").at("max").get<int>();
        m.mean_steps = j.at("steps").at("mean").get<double>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
    m.validate();
    return m;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << to_json(m).dump(2) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open manifest " + path.string());
    try {
        return manifest_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

Collection collect(int n_episodes, std::uint64_t seed, const sim::World& world, const expert::ExpertParams& params) {
    if (n_episodes < 1) throw ContractViolation("collect: n_episodes must be >= 1");
    world.validate();
    params.validate(world.arena);

    Collection out;
    auto& m = out.manifest;
    m.episodes = static_cast<std::size_t>(n_episodes);
    m.collect_seed = seed;
    m.min_steps = world.arena.max_steps;
    long step_sum = 0;
    for (int ep = 0; ep < n_episodes; ++ep) {
        const auto goal = sim::kAllColors[static_cast<std::size_t>(ep) % sim::kNumColors];
        Rng rng(derive_seed(seed, "collect", static_cast<std::uint64_t>(ep)));
        const auto spawn = sim::sample_spawn(world.arena, rng);
        const auto instr = instruction::instruction_for(spawn, goal, world.arena);
        const auto episode = expert::run_expert_episode(spawn, goal, world, params);
        if (!episode.succeeded()) {
            throw Error("expert failed episode " + std::to_string(ep) + " (goal " + std::string(sim::color_name(goal)) +
                        ", spawn " + std::to_string(spawn.x) + "," + std::to_string(spawn.y) + "," +
                        std::to_string(spawn.heading) + "): " + std::string(sim::status_name(episode.final_state.status)) +
                        " after " + std::to_string(episode.final_state.step) + " steps");
        }
        for (const auto& s : episode.steps) {
            TrajectoryRecord r;
            r.episode_id = ep;
            r.step = s.state.step;
            r.goal = goal;
            r.pose = s.state.pose;
            r.observation = s.observation;
            r.instruction_text = instr.text;
            r.action = s.action;
            r.reward = s.reward;
            out.records.push_back(std::move(r));
        }
        ++m.per_color[sim::color_index(goal)];
        const int steps = episode.final_state.step;
        m.min_steps = std::min(m.min_steps, steps);
        m.max_steps = std::max(m.max_steps, steps);
        step_sum += steps;
    }
    m.total_samples = out.records.size();
    m.mean_steps = static_cast<double>(step_sum) / n_episodes;
    return out;
}

void write_raw(const std::filesystem::path& path, std::span<const TrajectoryRecord> records, const ArtifactStamp& stamp) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    json header{{"format", kRawFormat}, {"version", kRawFormatVersion}, {"stamp", stamp}, {"records", records.size()}};
    out << header.dump() << '\n';
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
    if (!out) throw Error("write failed for " + path.string());
}

RawFile read_raw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open raw trajectory file " + path.string());
    RawFile raw;
    std::string line;
    std::size_t line_no = 0;
    std::size_t expected = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            if (line_no == 1) {
                if (j.value("format", "") != kRawFormat) throw FormatError("missing embnav-raw header");
                const int version = j.at("version").get<int>();
                if (version != kRawFormatVersion) throw FormatError("unsupported raw format version " + std::to_string(version));
                raw.stamp = j.at("stamp").get<ArtifactStamp>();
                expected = j.at("records").get<std::size_t>();
                continue;
            }
            raw.records.push_back(record_from_json(j));
        } catch (const json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (line_no == 0) throw FormatError(path.string() + ": empty file (no header)");
    if (raw.records.size() != expected) {
        throw FormatError(path.string() + ": header announces " + std::to_string(expected) + " records, found " +
                          std::to_string(raw.records.size()));
    }
    return raw;
}

bc::Dataset embed_dataset(std::span<const TrajectoryRecord> records, const embedding::EmbeddingProvider& provider,
                          std::uint64_t embed_seed) {
    const std::size_t dim = provider.dim();
    bc::Dataset data;
    data.embeddings.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(records.size()));
    data.actions.resize(2, static_cast<Eigen::Index>(records.size()));

    int current_episode = -1;
    Rng noise;
    embedding::EmbeddingVector text;
    std::string text_source;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.episode_id != current_episode) {
            current_episode = r.episode_id;
            noise.seed(derive_seed(embed_seed, "embed", static_cast<std::uint64_t>(r.episode_id)));
        }
        if (r.instruction_text != text_source || text.dim() == 0) {
            const auto instr = instruction::parse_instruction(r.instruction_text);
            if (!instr) {
                throw FormatError("record " + std::to_string(i) + " (episode " + std::to_string(r.episode_id) +
                                  ") has no valid instruction: '" + r.instruction_text + "'");
            }
            text = provider.embed_text(*instr);
            text_source = r.instruction_text;
        }
        const auto image = provider.embed_image(r.observation, noise);
        if (image.dim() != dim || text.dim() != dim) {
            throw DimensionMismatch("provider returned dim " + std::to_string(image.dim()) + "/" +
                                    std::to_string(text.dim()) + ", expected " + std::to_string(dim));
        }
        const auto joint = embedding::fuse(image, text);
        const auto col = static_cast<Eigen::Index>(i);
        data.embeddings.col(col) = Eigen::Map<const Eigen::VectorXf>(joint.values.data(), static_cast<Eigen::Index>(dim));
        data.actions(0, col) = static_cast<float>(r.action.left);
        data.actions(1, col) = static_cast<float>(r.action.right);
    }
    return data;
}

void save_dataset(const bc::Dataset& data, const std::filesystem::path& path) {
    if (data.actions.rows() != 2 || data.actions.cols() != data.embeddings.cols()) {
        throw DimensionMismatch("save_dataset: action matrix shape does not match embeddings");
    }
    io::BinaryWriter out(path);
    out.bytes(kDatasetMagic, 4);
    out.u32(static_cast<std::uint32_t>(data.dim()));
    out.u64(data.size());
    std::vector<float> record(data.dim() + 2);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto col = static_cast<Eigen::Index>(i);
        std::memcpy(record.data(), data.embeddings.col(col).data(), data.dim() * sizeof(float));
        record[data.dim()] = data.actions(0, col);
        record[data.dim() + 1] = data.actions(1, col);
        out.bytes(record.data(), record.size() * sizeof(float));
    }
    out.finish();
}

bc::Dataset load_dataset(const std::filesystem::path& path, std::size_t expected_dim) {
    io::BinaryReader in(path);
    char magic[4];
    in.bytes(magic, 4);
    if (std::memcmp(magic, kDatasetMagic, 4) != 0) throw FormatError(path.string() + ": bad magic, not a T2N1 dataset");
    const std::size_t dim = in.u32();
    const std::uint64_t count = in.u64();
    if (dim < 2) throw FormatError(path.string() + ": dataset dim must be >= 2");
    if (expected_dim != 0 && dim != expected_dim) {
        throw DimensionMismatch(path.string() + ": dataset dim " + std::to_string(dim) + ", expected " +
                                std::to_string(expected_dim));
    }
    const auto size = std::filesystem::file_size(path);
    const std::uint64_t needed = kDatasetHeaderBytes + count * (dim + 2) * sizeof(float);
    if (size > needed) throw FormatError(path.string() + ": trailing bytes after offset " + std::to_string(needed));

    bc::Dataset data;
    data.embeddings.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(size < needed ? 0 : count));
    data.actions.resize(2, data.embeddings.cols());
    std::vector<float> record(dim + 2);
    for (std::uint64_t i = 0; i < count; ++i) {
        in.bytes(record.data(), record.size() * sizeof(float));  // throws with the offset when truncated
        const auto col = static_cast<Eigen::Index>(i);
        if (col >= data.embeddings.cols()) continue;
        data.embeddings.col(col) = Eigen::Map<const Eigen::VectorXf>(record.data(), static_cast<Eigen::Index>(dim));
        data.actions(0, col) = record[dim];
        data.actions(1, col) = record[dim + 1];
    }
    return data;
}

}  // namespace embnav::data
