#include <cmath>
#include <sstream>

#include "embnav/embedding.hpp"

namespace embnav::embedding {

namespace {

std::vector<double> random_unit(std::size_t dim, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(dim);
    double sq = 0.0;
    for (auto& x : v) {
        x = gauss(rng);
        sq += x * x;
    }
    const double n = std::sqrt(sq);
    for (auto& x : v) x /= n;
    return v;
}

void add_scaled(std::vector<double>& acc, std::span<const double> v, double scale) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * v[i];
}

EmbeddingVector to_unit_float(const std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double n = std::sqrt(sq);
    if (!(n > 0.0)) throw ContractViolation("synthetic embedding collapsed to the zero vector");
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
    return EmbeddingVector(std::move(out));
}

}  // namespace

SyntheticEmbedder::SyntheticEmbedder(SyntheticEmbedderParams params, std::string name)
    : params_(params), name_(std::move(name)) {
    params_.validate();
    // Draw order is part of the determinism contract: colors, cells, background, cues.
    Rng rng(params_.seed);
    for (std::size_t i = 0; i < sim::kNumColors; ++i) color_anchors_.push_back(random_unit(params_.dim, rng));
    for (int i = 0; i < 9; ++i) cell_anchors_.push_back(random_unit(params_.dim, rng));
    background_ = random_unit(params_.dim, rng);
    for (std::size_t i = 0; i < instruction::kNumCues; ++i) cue_anchors_.push_back(random_unit(params_.dim, rng));
}

EmbeddingVector SyntheticEmbedder::embed_image(const sim::Observation& obs, Rng& noise) const {
    const std::size_t dim = params_.dim;
    std::vector<double> acc(dim, 0.0);
    std::vector<double> item(dim);
    const double gain = params_.size_scale / sim::kApparentSizeScale;
    for (const auto& target : obs.visible) {
        const auto color = color_anchor(target.color);
        const auto cell = cell_anchor(target.cell.index());
        double sq = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            item[i] = color[i] + params_.lambda_spatial * cell[i];
            sq += item[i] * item[i];
        }
        add_scaled(acc, item, target.apparent_size * gain / std::sqrt(sq));
    }
    add_scaled(acc, background_, params_.background_weight);
    if (params_.noise_sigma > 0.0) {
        std::normal_distribution<double> gauss(0.0, params_.noise_sigma);
        for (auto& x : acc) x += gauss(noise);
    }
    return to_unit_float(acc);
}

EmbeddingVector SyntheticEmbedder::embed_text(const instruction::Instruction& instr) const {
    std::vector<double> acc(color_anchors_[sim::color_index(instr.color)]);
    add_scaled(acc, cue_anchor(instr.cue), params_.mu_cue);
    return to_unit_float(acc);
}

std::string SyntheticEmbedder::description() const {
    std::ostringstream os;
    os << "synthetic:" << name_ << "(dim=" << params_.dim << ", seed=" << params_.seed
       << ", lambda=" << params_.lambda_spatial << ", mu=" << params_.mu_cue << ", sigma=" << params_.noise_sigma
       << ", size_scale=" << params_.size_scale << ", background=" << params_.background_weight << ")";
    return os.str();
}

}  // namespace embnav::embedding
