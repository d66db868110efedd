#include <cmath>

#include "embnav/embedding.hpp"

namespace embnav::embedding {

namespace {

constexpr std::array<double, 3> kRowDistance = {0.45, 1.15, 2.0};
constexpr double kStagedApparentSize = 0.5;

DistanceStats summarize(const std::vector<double>& xs) {
    DistanceStats s;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) s.mean += x;
    s.mean /= n;
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return s;
}

instruction::SpatialCue cue_for_column(int col) {
    if (col == 0) return instruction::SpatialCue::Left;
    if (col == 2) return instruction::SpatialCue::Right;
    return instruction::SpatialCue::StraightAhead;
}

}  // namespace

double ProbeReport::gap_standard_error() const {
    const double n = static_cast<double>(pair_count);
    return std::sqrt(same_cell.std * same_cell.std / n + different_cell.std * different_cell.std / n);
}

sim::Observation staged_view(sim::TargetColor color, sim::GridCell cell, double fov) {
    sim::VisibleTarget t;
    t.color = color;
    t.bearing = (1 - cell.col) * fov / 3.0;
    t.distance = kRowDistance.at(cell.row);
    t.cell = sim::cell_for(t.bearing, t.distance, fov);
    t.apparent_size = kStagedApparentSize;
    sim::Observation obs;
    obs.fov = fov;
    obs.visible.push_back(t);
    return obs;
}

ProbeReport spatial_probe(const EmbeddingProvider& provider, std::size_t pair_count, std::uint64_t probe_seed) {
    if (pair_count < 30) throw ContractViolation("spatial_probe: pair_count must be >= 30");
    Rng sampler(probe_seed);
    Rng noise(derive_seed(probe_seed, "probe-noise", 0));
    std::uniform_int_distribution<int> pick_color(0, static_cast<int>(sim::kNumColors) - 1);
    std::uniform_int_distribution<int> pick_cell(0, 8);
    std::uniform_int_distribution<int> pick_other(0, 7);

    std::vector<double> same, different;
    same.reserve(pair_count);
    different.reserve(pair_count);
    for (std::size_t i = 0; i < pair_count; ++i) {
        const auto color = sim::kAllColors[pick_color(sampler)];
        const int k = pick_cell(sampler);
        int k_other = pick_other(sampler);
        if (k_other >= k) ++k_other;

        const auto cell = sim::GridCell::from_index(k);
        const auto text = provider.embed_text(instruction::render_instruction(color, cue_for_column(cell.col)));
        const auto ref = fuse(provider.embed_image(staged_view(color, cell), noise), text);
        const auto same_view = fuse(provider.embed_image(staged_view(color, cell), noise), text);
        const auto diff_view =
            fuse(provider.embed_image(staged_view(color, sim::GridCell::from_index(k_other)), noise), text);
        same.push_back(cosine_distance(ref, same_view));
        different.push_back(cosine_distance(ref, diff_view));
    }
    ProbeReport report;
    report.same_cell = summarize(same);
    report.different_cell = summarize(different);
    report.pair_count = pair_count;
    return report;
}

}  // namespace embnav::embedding
