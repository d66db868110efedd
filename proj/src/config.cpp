#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "embnav/app.hpp"

namespace embnav::app {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
    return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, std::string_view text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
        throw ConfigError("key " + key + ": expected a number, got '" + t + "'");
    }
    return v;
}

template <typename Int>
Int parse_int(const std::string& key, std::string_view text) {
    const std::string t = trim(text);
    Int v{};
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
        throw ConfigError("key " + key + ": expected an integer, got '" + t + "'");
    }
    return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

// One config key: how to print it from a RunConfig and how to apply a value.
struct Key {
    std::string section;
    std::string name;
    std::function<std::optional<std::string>(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};


template <typename Ref>
Key number_key(std::string section, std::string name, Ref ref) {
    const std::string full = section + "." + name;
    return {section, name,
            [ref](const RunConfig& c) -> std::optional<std::string> {
                const auto& v = ref(const_cast<RunConfig&>(c));
                if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
                    return fmt_double(v);
                } else {
                    return std::to_string(v);
                }
            },
            [ref, full](RunConfig& c, const std::string& text) {
                auto& v = ref(c);
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_floating_point_v<T>) {
                    v = parse_double(full, text);
                } else {
                    v = parse_int<T>(full, text);
                }
            }};
}

template <typename Ref>
Key optional_key(std::string section, std::string name, Ref ref) {
    const std::string full = section + "." + name;
    return {section, name,
            [ref](const RunConfig& c) -> std::optional<std::string> {
                const auto& v = ref(const_cast<RunConfig&>(c));
                if (!v) return std::nullopt;
                return fmt_double(*v);
            },
            [ref, full](RunConfig& c, const std::string& text) { ref(c) = parse_double(full, text); }};
}

Key target_key(sim::TargetColor color) {
    const std::string name(sim::color_name(color));
    const std::size_t i = sim::color_index(color);
    return {"arena", name,
            [i](const RunConfig& c) -> std::optional<std::string> {
                const auto t = c.pipeline.world.arena.targets[i];
                return fmt_double(t.x) + ", " + fmt_double(t.y);
            },
            [i, name](RunConfig& c, const std::string& text) {
                const auto parts = split(text, ',');
                if (parts.size() != 2) throw ConfigError("key arena." + name + ": expected 'x, y'");
                c.pipeline.world.arena.targets[i] = {parse_double("arena." + name, parts[0]),
                                                     parse_double("arena." + name, parts[1])};
            }};
}

const std::vector<Key>& schema() {
    static const std::vector<Key> keys = [] {
        std::vector<Key> k;
        auto arena = [](RunConfig& c) -> sim::Arena& { return c.pipeline.world.arena; };
        k.push_back(number_key("arena", "side", [=](RunConfig& c) -> auto& { return arena(c).side; }));
        k.push_back(number_key("arena", "target_radius", [=](RunConfig& c) -> auto& { return arena(c).target_radius; }));
        k.push_back(number_key("arena", "success_radius", [=](RunConfig& c) -> auto& { return arena(c).success_radius; }));
        k.push_back(number_key("arena", "max_steps", [=](RunConfig& c) -> auto& { return arena(c).max_steps; }));
        k.push_back(number_key("arena", "dt", [=](RunConfig& c) -> auto& { return arena(c).dt; }));
        for (auto color : sim::kAllColors) k.push_back(target_key(color));

        auto robot = [](RunConfig& c) -> sim::RobotModel& { return c.pipeline.world.robot; };
        k.push_back(number_key("robot", "wheel_radius", [=](RunConfig& c) -> auto& { return robot(c).wheel_radius; }));
        k.push_back(number_key("robot", "wheel_separation", [=](RunConfig& c) -> auto& { return robot(c).wheel_separation; }));
        k.push_back(number_key("robot", "max_wheel_speed", [=](RunConfig& c) -> auto& { return robot(c).max_wheel_speed; }));

        k.push_back(number_key("camera", "fov", [](RunConfig& c) -> auto& { return c.pipeline.world.fov; }));

        auto ex = [](RunConfig& c) -> expert::ExpertParams& { return c.pipeline.expert; };
        k.push_back(number_key("expert", "turn_threshold", [=](RunConfig& c) -> auto& { return ex(c).turn_threshold; }));
        k.push_back(number_key("expert", "k_heading", [=](RunConfig& c) -> auto& { return ex(c).k_heading; }));
        k.push_back(number_key("expert", "k_approach", [=](RunConfig& c) -> auto& { return ex(c).k_approach; }));
        k.push_back(number_key("expert", "slow_radius", [=](RunConfig& c) -> auto& { return ex(c).slow_radius; }));

        k.push_back(number_key("collect", "episodes", [](RunConfig& c) -> auto& { return c.pipeline.collect_episodes; }));

        k.push_back({"provider", "name", [](const RunConfig& c) -> std::optional<std::string> { return c.provider.name; },
                     [](RunConfig& c, const std::string& v) { c.provider.name = trim(v); }});
        k.push_back(optional_key("provider", "lambda_spatial", [](RunConfig& c) -> auto& { return c.provider.lambda_spatial; }));
        k.push_back(optional_key("provider", "noise_sigma", [](RunConfig& c) -> auto& { return c.provider.noise_sigma; }));
        k.push_back(optional_key("provider", "mu_cue", [](RunConfig& c) -> auto& { return c.provider.mu_cue; }));
        k.push_back(optional_key("provider", "size_scale", [](RunConfig& c) -> auto& { return c.provider.size_scale; }));
        k.push_back(optional_key("provider", "background_weight",
                                 [](RunConfig& c) -> auto& { return c.provider.background_weight; }));

        auto tr = [](RunConfig& c) -> bc::TrainConfig& { return c.pipeline.train; };
        k.push_back(number_key("train", "learning_rate", [=](RunConfig& c) -> auto& { return tr(c).learning_rate; }));
        k.push_back(number_key("train", "decay", [=](RunConfig& c) -> auto& { return tr(c).decay; }));
        k.push_back(number_key("train", "epochs", [=](RunConfig& c) -> auto& { return tr(c).epochs; }));
        k.push_back(number_key("train", "batch_size", [=](RunConfig& c) -> auto& { return tr(c).batch_size; }));
        k.push_back(number_key("train", "adam_beta1", [=](RunConfig& c) -> auto& { return tr(c).adam_beta1; }));
        k.push_back(number_key("train", "adam_beta2", [=](RunConfig& c) -> auto& { return tr(c).adam_beta2; }));
        k.push_back(number_key("train", "adam_epsilon", [=](RunConfig& c) -> auto& { return tr(c).adam_epsilon; }));
        k.push_back({"train", "hidden_sizes",
                     [](const RunConfig& c) -> std::optional<std::string> {
                         std::string s;
                         for (auto h : c.pipeline.train.hidden_sizes) s += (s.empty() ? "" : ",") + std::to_string(h);
                         return s;
                     },
                     [](RunConfig& c, const std::string& v) {
                         c.pipeline.train.hidden_sizes.clear();
                         if (trim(v).empty()) return;
                         for (const auto& part : split(v, ',')) {
                             c.pipeline.train.hidden_sizes.push_back(parse_int<std::size_t>("train.hidden_sizes", part));
                         }
                     }});

        k.push_back(number_key("eval", "episodes", [](RunConfig& c) -> auto& { return c.pipeline.eval_episodes; }));

        k.push_back(number_key("run", "master_seed", [](RunConfig& c) -> auto& { return c.pipeline.master_seed; }));
        return k;
    }();
    return keys;
}

const std::vector<std::string> kSectionOrder = {"arena", "robot", "camera", "expert", "collect",
                                                "provider", "train", "eval", "run"};

std::string section_text(const RunConfig& config, const std::string& section) {
    std::string out = "[" + section + "]\n";
    for (const auto& key : schema()) {
        if (key.section != section) continue;
        if (auto v = key.get(config)) out += key.name + " = " + *v + "\n";
    }
    return out;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::unique_ptr<embedding::EmbeddingProvider> make_provider(const ProviderConfig& config) {
    if (config.name.rfind("file:", 0) == 0) return embedding::make_provider(config.name);
    auto p = embedding::find_preset(config.name);
    if (!p) throw ConfigError("unknown provider '" + config.name + "' (expected strong, medium, weak or file:PATH)");
    auto& params = p->params;
    if (config.lambda_spatial) params.lambda_spatial = *config.lambda_spatial;
    if (config.noise_sigma) params.noise_sigma = *config.noise_sigma;
    if (config.mu_cue) params.mu_cue = *config.mu_cue;
    if (config.size_scale) params.size_scale = *config.size_scale;
    if (config.background_weight) params.background_weight = *config.background_weight;
    params.validate();
    return std::make_unique<embedding::SyntheticEmbedder>(params, p->name);
}

void RunConfig::validate() const {
    pipeline.validate();
    if (provider.name.rfind("file:", 0) == 0) {
        const std::filesystem::path file = provider.name.substr(5);
        if (!std::filesystem::is_regular_file(file)) {
            throw ConfigError("embedding file " + file.string() + " does not exist");
        }
        if (provider.lambda_spatial || provider.noise_sigma || provider.mu_cue || provider.size_scale ||
            provider.background_weight) {
            throw ConfigError("synthetic overrides do not apply to a file provider");
        }
    } else if (!embedding::find_preset(provider.name)) {
        throw ConfigError("unknown provider '" + provider.name + "'");
    }
    if (output_dir.empty()) throw ConfigError("output directory must not be empty");
}

RunConfig parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    RunConfig config;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) {
            throw ConfigError("key '" + section + "' must be inside a section");
        }
        for (const auto& [name, value] : body) {
            if (section == "run" && name == "output_dir") {
                config.output_dir = trim(value.data());
                continue;
            }
            const auto it = std::find_if(schema().begin(), schema().end(),
                                         [&](const Key& k) { return k.section == section && k.name == name; });
            if (it == schema().end()) throw ConfigError("unknown config key " + section + "." + name);
            it->set(config, value.data());
        }
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse_config(in);
}

std::string canonical_text(const RunConfig& config) {
    std::string out;
    for (const auto& section : kSectionOrder) out += section_text(config, section);
    return out;
}

void write_config(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << canonical_text(config);
}

std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::Collect: return "collect";
        case Stage::Embed: return "embed";
        case Stage::Train: return "train";
        case Stage::Eval: return "eval";
    }
    return "?";
}

std::string stage_hash(const RunConfig& config, Stage stage) {
    std::vector<std::string> sections = {"arena", "robot", "camera", "expert", "collect", "run"};
    if (stage >= Stage::Embed) sections.push_back("provider");
    if (stage >= Stage::Train) sections.push_back("train");
    if (stage >= Stage::Eval) sections.push_back("eval");
    std::string text;
    for (const auto& s : sections) text += section_text(config, s);
    return hex64(fnv1a64(text));
}

std::string config_hash(const RunConfig& config) { return hex64(fnv1a64(canonical_text(config))); }

StageError::StageError(Stage stage, const std::string& cause)
    : Error("stage " + std::string(stage_name(stage)) + " failed: " + cause), stage_(stage) {}

}  // namespace embnav::app
