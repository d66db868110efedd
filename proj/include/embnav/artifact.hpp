#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace embnav {

/// Provenance carried by every output artifact (inline or in a sidecar file).
struct ArtifactStamp {
    std::string kind;
    int format_version = 1;
    std::string config_hash;
    std::uint64_t master_seed = 0;

    bool operator==(const ArtifactStamp&) const = default;
};

inline void to_json(nlohmann::json& j, const ArtifactStamp& s) {
    j = nlohmann::json{{"kind", s.kind},
                       {"format_version", s.format_version},
                       {"config_hash", s.config_hash},
                       {"master_seed", s.master_seed}};
}

inline void from_json(const nlohmann::json& j, ArtifactStamp& s) {
    j.at("kind").get_to(s.kind);
    j.at("format_version").get_to(s.format_version);
    j.at("config_hash").get_to(s.config_hash);
    j.at("master_seed").get_to(s.master_seed);
}

}  // namespace embnav
