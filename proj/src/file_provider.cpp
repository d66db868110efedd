#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "embnav/embedding.hpp"

namespace embnav::embedding {

using nlohmann::json;

std::string scene_key(const sim::Observation& obs) {
    if (obs.visible.empty()) return "scene:empty";
    std::vector<const sim::VisibleTarget*> sorted;
    for (const auto& v : obs.visible) sorted.push_back(&v);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](auto* a, auto* b) { return sim::color_index(a->color) < sim::color_index(b->color); });
    std::string key = "scene:";
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i > 0) key += ';';
        key += sim::color_name(sorted[i]->color);
        key += '@' + std::to_string(sorted[i]->cell.row) + ',' + std::to_string(sorted[i]->cell.col);
    }
    return key;
}

void write_exchange_file(const std::filesystem::path& path, const std::vector<ExchangeRecord>& records,
                         const std::string& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    if (!model.empty()) out << json{{"model", model}}.dump() << '\n';
    for (const auto& r : records) {
        json j;
        j["id"] = r.id;
        j["kind"] = r.kind == RecordKind::Image ? "image" : "text";
        j["dim"] = r.vector.size();
        j["vector"] = r.vector;
        out << j.dump() << '\n';
    }
    if (!out) throw Error("write failed for " + path.string());
}

std::unique_ptr<FileProvider> FileProvider::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open embedding file " + path.string());

    auto provider = std::unique_ptr<FileProvider>(new FileProvider());
    provider->path_ = path;
    std::string line;
    std::size_t line_no = 0;
    bool seen_record = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError(where + ": invalid JSON (" + e.what() + ")");
        }
        if (!j.is_object()) throw FormatError(where + ": record is not an object");
        if (!j.contains("vector")) {
            if (seen_record || !j.contains("model")) throw FormatError(where + ": record without \"vector\"");
            provider->model_ = j["model"].is_string() ? j["model"].get<std::string>() : j["model"].dump();
            continue;
        }
        seen_record = true;
        if (!j.contains("id") || !j["id"].is_string()) throw FormatError(where + ": missing string \"id\"");
        if (!j.contains("kind") || !j["kind"].is_string()) throw FormatError(where + ": missing string \"kind\"");
        if (!j.contains("dim") || !j["dim"].is_number_integer()) throw FormatError(where + ": missing integer \"dim\"");
        if (!j["vector"].is_array()) throw FormatError(where + ": \"vector\" is not an array");

        const auto kind_str = j["kind"].get<std::string>();
        RecordKind kind;
        if (kind_str == "image") {
            kind = RecordKind::Image;
        } else if (kind_str == "text") {
            kind = RecordKind::Text;
        } else {
            throw FormatError(where + ": kind must be \"image\" or \"text\", got \"" + kind_str + "\"");
        }
        const auto declared = j["dim"].get<long long>();
        const auto& arr = j["vector"];
        if (declared < 2 || static_cast<std::size_t>(declared) != arr.size()) {
            throw FormatError(where + ": dim " + std::to_string(declared) + " does not match vector length " +
                              std::to_string(arr.size()));
        }
        const auto dim = static_cast<std::size_t>(declared);
        if (provider->dim_ == 0) {
            provider->dim_ = dim;
        } else if (provider->dim_ != dim) {
            throw DimensionMismatch(where + ": dim " + std::to_string(dim) + " differs from file dim " +
                                    std::to_string(provider->dim_));
        }
        EmbeddingVector v;
        v.values.reserve(dim);
        for (const auto& x : arr) {
            if (!x.is_number()) throw FormatError(where + ": non-numeric vector element");
            const double d = x.get<double>();
            if (!std::isfinite(d)) throw FormatError(where + ": non-finite vector element");
            v.values.push_back(static_cast<float>(d));
        }
        if (!(l2_norm(v.values) > 0.0)) throw FormatError(where + ": zero vector");
        auto& table = kind == RecordKind::Image ? provider->images_ : provider->texts_;
        const auto id = j["id"].get<std::string>();
        if (!table.emplace(id, normalize(v)).second) throw FormatError(where + ": duplicate " + kind_str + " id '" + id + "'");
    }
    if (provider->dim_ == 0) throw FormatError(path.string() + ": no embedding records");
    return provider;
}

const EmbeddingVector& FileProvider::lookup(const std::string& id, RecordKind kind) const {
    const auto& table = kind == RecordKind::Image ? images_ : texts_;
    auto it = table.find(id);
    if (it == table.end()) {
        throw MissingKey(std::string(kind == RecordKind::Image ? "image" : "text") + " key '" + id + "' not in " +
                         path_.string());
    }
    return it->second;
}

EmbeddingVector FileProvider::embed_image(const sim::Observation& obs, Rng& /*noise*/) const {
    return lookup(scene_key(obs), RecordKind::Image);
}

EmbeddingVector FileProvider::embed_text(const instruction::Instruction& instr) const {
    return lookup(instr.text, RecordKind::Text);
}

std::string FileProvider::description() const {
    std::string d = "file:" + path_.string() + " (dim=" + std::to_string(dim_) + ", " +
                    std::to_string(images_.size()) + " image, " + std::to_string(texts_.size()) + " text";
    if (!model_.empty()) d += ", model=" + model_;
    return d + ")";
}

}  // namespace embnav::embedding
