#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "embnav/embedding.hpp"

using namespace embnav;
using namespace embnav::embedding;
using sim::GridCell;
using sim::TargetColor;

namespace {

EmbeddingVector vec(std::vector<float> v) { return EmbeddingVector(std::move(v)); }

EmbeddingVector random_vec(Rng& rng, std::size_t dim) {
    std::normal_distribution<float> g;
    std::vector<float> v(dim);
    for (auto& x : v) x = g(rng);
    return vec(std::move(v));
}

double norm_of(const EmbeddingVector& v) {
    double s = 0;
    for (float x : v.values) s += double(x) * x;
    return std::sqrt(s);
}

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
    const auto p = std::filesystem::temp_directory_path() / ("embnav_test_" + name);
    std::ofstream(p, std::ios::binary | std::ios::trunc) << contents;
    return p;
}

const std::string kFixture = std::string(EMBNAV_FIXTURES) + "/exchange_golden.jsonl";

}  // namespace

TEST(Normalize, ThreeFourFive) {
    const auto n = normalize(vec({3, 4}));
    EXPECT_FLOAT_EQ(n.values[0], 0.6f);
    EXPECT_FLOAT_EQ(n.values[1], 0.8f);
    EXPECT_THROW(normalize(vec({0, 0})), ContractViolation);
    EXPECT_THROW(normalize(vec({NAN, 1})), ContractViolation);
}

TEST(Fuse, OrthogonalUnitsGiveDiagonal) {
    const auto f = fuse(vec({1, 0}), vec({0, 1}));
    EXPECT_NEAR(f.values[0], 1 / std::sqrt(2.0), 1e-7);
    EXPECT_NEAR(f.values[1], 1 / std::sqrt(2.0), 1e-7);
}

TEST(Fuse, IdenticalDirectionsReturnThatDirection) {
    const auto f = fuse(vec({0, 2, 0}), vec({0, 5, 0}));
    EXPECT_EQ(f.values, (std::vector<float>{0, 1, 0}));
}

TEST(Fuse, ErrorsOnAntipodalZeroAndDimMismatch) {
    EXPECT_THROW(fuse(vec({1, 0}), vec({-1, 0})), ContractViolation);
    EXPECT_THROW(fuse(vec({0, 0}), vec({1, 0})), ContractViolation);
    EXPECT_THROW(fuse(vec({1, 0}), vec({1, 0, 0})), DimensionMismatch);
}

TEST(FuseProperty, UnitNormCommutativeScaleInvariant) {
    Rng rng(21);
    std::uniform_real_distribution<float> scale(0.01f, 100.0f);
    for (int k = 0; k < 1000; ++k) {
        const auto a = random_vec(rng, 64), b = random_vec(rng, 64);
        const auto f = fuse(a, b);
        ASSERT_NEAR(norm_of(f), 1.0, 1e-6);
        ASSERT_EQ(f, fuse(b, a));
        auto a2 = a;
        const float c = scale(rng);
        for (auto& x : a2.values) x *= c;
        const auto g = fuse(a2, b);
        for (std::size_t i = 0; i < f.dim(); ++i) ASSERT_NEAR(f.values[i], g.values[i], 1e-6);
    }
}

TEST(CosineDistance, ReferenceValues) {
    EXPECT_NEAR(cosine_distance(vec({1, 2}), vec({2, 4})), 0.0, 1e-12);
    EXPECT_NEAR(cosine_distance(vec({1, 0}), vec({0, 3})), 1.0, 1e-12);
    EXPECT_NEAR(cosine_distance(vec({1, 1}), vec({-1, -1})), 2.0, 1e-12);
    EXPECT_NEAR(cosine_distance(vec({1, 0}), vec({1, 1})), 1.0 - 1.0 / std::sqrt(2.0), 1e-7);
    EXPECT_THROW(cosine_distance(vec({1, 0}), vec({1})), DimensionMismatch);
}

TEST(CosineDistanceProperty, BoundedAndSymmetric) {
    Rng rng(22);
    for (int k = 0; k < 1000; ++k) {
        const auto a = random_vec(rng, 16), b = random_vec(rng, 16);
        const double d = cosine_distance(a, b);
        ASSERT_GE(d, 0.0);
        ASSERT_LE(d, 2.0);
        ASSERT_EQ(d, cosine_distance(b, a));
    }
}

TEST(Presets, PinnedParameters) {
    const auto s = preset(PresetName::Strong).params, m = preset(PresetName::Medium).params,
               w = preset(PresetName::Weak).params;
    EXPECT_EQ(s.dim, 1152u);
    EXPECT_DOUBLE_EQ(s.lambda_spatial, 0.6);
    EXPECT_DOUBLE_EQ(s.noise_sigma, 0.02);
    EXPECT_EQ(m.dim, 512u);
    EXPECT_DOUBLE_EQ(m.lambda_spatial, 0.3);
    EXPECT_DOUBLE_EQ(m.noise_sigma, 0.02);
    EXPECT_EQ(w.dim, 768u);
    EXPECT_DOUBLE_EQ(w.lambda_spatial, 0.35);
    EXPECT_DOUBLE_EQ(w.noise_sigma, 0.08);
    for (const auto& p : {s, m, w}) {
        EXPECT_DOUBLE_EQ(p.mu_cue, 0.5);
        EXPECT_DOUBLE_EQ(p.background_weight, 0.25);
        EXPECT_DOUBLE_EQ(p.size_scale, 0.5);
    }
    EXPECT_FALSE(find_preset("ultra").has_value());
}

TEST(SyntheticEmbedder, AnchorsFollowDocumentedDrawOrder) {
    SyntheticEmbedderParams p;
    p.dim = 32;
    const SyntheticEmbedder e(p);
    // Regenerate: 5 colors, 9 cells, background, 3 cues from one mt19937_64 stream.
    Rng rng(p.seed);
    std::normal_distribution<double> g(0.0, 1.0);
    auto draw = [&] {
        std::vector<double> v(p.dim);
        double s = 0;
        for (auto& x : v) {
            x = g(rng);
            s += x * x;
        }
        for (auto& x : v) x /= std::sqrt(s);
        return v;
    };
    for (auto c : sim::kAllColors) {
        const auto want = draw();
        const auto got = e.color_anchor(c);
        for (std::size_t i = 0; i < p.dim; ++i) ASSERT_DOUBLE_EQ(got[i], want[i]);
    }
    for (int k = 0; k < 9; ++k) {
        const auto want = draw();
        for (std::size_t i = 0; i < p.dim; ++i) ASSERT_DOUBLE_EQ(e.cell_anchor(k)[i], want[i]);
    }
    const auto bg = draw();
    for (std::size_t i = 0; i < p.dim; ++i) ASSERT_DOUBLE_EQ(e.background_anchor()[i], bg[i]);
    for (auto cue : {instruction::SpatialCue::Left, instruction::SpatialCue::Right, instruction::SpatialCue::StraightAhead}) {
        const auto want = draw();
        for (std::size_t i = 0; i < p.dim; ++i) ASSERT_DOUBLE_EQ(e.cue_anchor(cue)[i], want[i]);
    }
}

TEST(SyntheticEmbedder, NoiseFreeImageMatchesFormula) {
    SyntheticEmbedderParams p;
    p.dim = 48;
    p.noise_sigma = 0.0;
    const SyntheticEmbedder e(p);
    sim::Observation obs;
    obs.visible.push_back({TargetColor::Blue, 0.1, 0.8, {1, 1}, 0.625});
    obs.visible.push_back({TargetColor::Pink, 0.5, 1.9, {2, 0}, 0.5 / 1.9});
    std::vector<double> want(p.dim, 0.0);
    for (const auto& t : obs.visible) {
        std::vector<double> item(p.dim);
        double s = 0;
        for (std::size_t i = 0; i < p.dim; ++i) {
            item[i] = e.color_anchor(t.color)[i] + 0.6 * e.cell_anchor(t.cell.index())[i];
            s += item[i] * item[i];
        }
        for (std::size_t i = 0; i < p.dim; ++i) want[i] += t.apparent_size * item[i] / std::sqrt(s);
    }
    for (std::size_t i = 0; i < p.dim; ++i) want[i] += 0.25 * e.background_anchor()[i];
    double s = 0;
    for (double x : want) s += x * x;
    Rng unused(0);
    const auto got = e.embed_image(obs, unused);
    for (std::size_t i = 0; i < p.dim; ++i) ASSERT_NEAR(got.values[i], want[i] / std::sqrt(s), 1e-7);
}

TEST(SyntheticEmbedder, EmptyViewIsBackgroundWithoutNoise) {
    SyntheticEmbedderParams p;
    p.dim = 16;
    p.noise_sigma = 0.0;
    const SyntheticEmbedder e(p);
    Rng unused(0);
    const auto got = e.embed_image(sim::Observation{}, unused);
    for (std::size_t i = 0; i < p.dim; ++i) ASSERT_NEAR(got.values[i], e.background_anchor()[i], 1e-7);
}

TEST(SyntheticEmbedder, TextMatchesFormula) {
    SyntheticEmbedderParams p;
    p.dim = 24;
    const SyntheticEmbedder e(p);
    const auto ins = instruction::render_instruction(TargetColor::Green, instruction::SpatialCue::Right);
    std::vector<double> want(p.dim);
    double s = 0;
    for (std::size_t i = 0; i < p.dim; ++i) {
        want[i] = e.color_anchor(TargetColor::Green)[i] + 0.5 * e.cue_anchor(instruction::SpatialCue::Right)[i];
        s += want[i] * want[i];
    }
    const auto got = e.embed_text(ins);
    for (std::size_t i = 0; i < p.dim; ++i) ASSERT_NEAR(got.values[i], want[i] / std::sqrt(s), 1e-7);
}

TEST(SyntheticEmbedder, SeededNoiseIsReproducibleAndUnitNorm) {
    const SyntheticEmbedder e(preset(PresetName::Weak).params, "weak");
    const auto obs = staged_view(TargetColor::Red, {1, 2});
    Rng a(5), b(5), c(6);
    const auto va = e.embed_image(obs, a), vb = e.embed_image(obs, b), vc = e.embed_image(obs, c);
    EXPECT_EQ(va, vb);
    EXPECT_NE(va, vc);
    EXPECT_NEAR(norm_of(va), 1.0, 1e-6);
    EXPECT_EQ(va.dim(), 768u);
}

TEST(SyntheticEmbedder, SameSeedSameAnchorsAcrossInstances) {
    const SyntheticEmbedder a(preset(PresetName::Medium).params), b(preset(PresetName::Medium).params);
    const auto ins = instruction::render_instruction(TargetColor::Yellow, instruction::SpatialCue::Left);
    EXPECT_EQ(a.embed_text(ins), b.embed_text(ins));
}

TEST(SyntheticEmbedderParams, ValidationRejectsNonsense) {
    SyntheticEmbedderParams p;
    p.dim = 1;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.noise_sigma = -1;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.size_scale = 0;
    EXPECT_THROW(p.validate(), ConfigError);
}

TEST(StagedView, EveryCellStagesIntoItself) {
    for (int k = 0; k < 9; ++k) {
        const auto obs = staged_view(TargetColor::Pink, GridCell::from_index(k));
        ASSERT_EQ(obs.visible.size(), 1u);
        EXPECT_EQ(obs.visible[0].cell.index(), k);
        EXPECT_LE(std::abs(obs.visible[0].bearing), obs.fov / 2);
    }
}

TEST(Probe, StrongPresetOrdersSameBelowDifferent) {
    const SyntheticEmbedder e(preset(PresetName::Strong).params, "strong");
    const auto r = spatial_probe(e, 200, 17);
    EXPECT_EQ(r.pair_count, 200u);
    EXPECT_LT(r.same_cell.mean, r.different_cell.mean);
    EXPECT_GT(r.gap(), 3 * r.gap_standard_error());
}

TEST(Probe, ZeroLambdaHasNoSpatialSignal) {
    auto p = preset(PresetName::Strong).params;
    p.lambda_spatial = 0.0;
    const SyntheticEmbedder e(p, "ablation");
    const auto r = spatial_probe(e, 200, 17);
    EXPECT_LT(std::abs(r.gap()), 3 * r.gap_standard_error());
}

TEST(Probe, RequiresThirtyPairsAndIsDeterministic) {
    const SyntheticEmbedder e(preset(PresetName::Medium).params);
    EXPECT_THROW(spatial_probe(e, 29, 1), ContractViolation);
    const auto a = spatial_probe(e, 30, 4), b = spatial_probe(e, 30, 4);
    EXPECT_EQ(a.same_cell.mean, b.same_cell.mean);
    EXPECT_EQ(a.different_cell.std, b.different_cell.std);
}

TEST(ProbeReport, GapStandardErrorFormula) {
    ProbeReport r;
    r.pair_count = 100;
    r.same_cell = {0.2, 0.03};
    r.different_cell = {0.25, 0.04};
    EXPECT_NEAR(r.gap(), 0.05, 1e-15);
    EXPECT_NEAR(r.gap_standard_error(), 0.005, 1e-15);  // sqrt(0.0009/100 + 0.0016/100)
}

TEST(SceneKey, OrderedByColorAndEmpty) {
    EXPECT_EQ(scene_key(sim::Observation{}), "scene:empty");
    sim::Observation obs;
    obs.visible.push_back({TargetColor::Blue, 0.0, 0.5, {2, 0}, 1.0});
    obs.visible.push_back({TargetColor::Red, 0.0, 1.0, {0, 1}, 0.5});
    EXPECT_EQ(scene_key(obs), "scene:red@0,1;blue@2,0");
}

TEST(FileProvider, GoldenFixture) {
    const auto fp = FileProvider::load(kFixture);
    EXPECT_EQ(fp->dim(), 4u);
    EXPECT_EQ(fp->model(), "fixture-stub-v1");
    EXPECT_EQ(fp->size(), 5u);
    EXPECT_EQ(fp->lookup("scene:empty", RecordKind::Image).values, (std::vector<float>{1, 0, 0, 0}));
    // Stored vectors are normalized on load.
    EXPECT_EQ(fp->lookup("scene:blue@2,0;red@0,1", RecordKind::Image).values, (std::vector<float>{0, 0, 0, 1}));
    // Image and text namespaces are separate.
    EXPECT_EQ(fp->lookup("scene:red@1,1", RecordKind::Text).values, (std::vector<float>{0, 1, 0, 0}));

    Rng unused(0);
    EXPECT_EQ(fp->embed_image(staged_view(TargetColor::Red, {1, 1}), unused).values,
              (std::vector<float>{0.5f, 0.5f, 0.5f, 0.5f}));
    const auto text =
        fp->embed_text(instruction::render_instruction(TargetColor::Red, instruction::SpatialCue::StraightAhead));
    EXPECT_FLOAT_EQ(text.values[1], 0.6f);
    EXPECT_FLOAT_EQ(text.values[2], 0.8f);
}

TEST(FileProvider, MissingKeyAtQueryTime) {
    const auto fp = FileProvider::load(kFixture);
    Rng unused(0);
    EXPECT_THROW(fp->embed_image(staged_view(TargetColor::Green, {0, 0}), unused), MissingKey);
    EXPECT_THROW(fp->embed_text(instruction::render_instruction(TargetColor::Red, instruction::SpatialCue::Left)),
                 MissingKey);
}

TEST(FileProvider, DistinctErrorsForBadFiles) {
    EXPECT_THROW(FileProvider::load(temp_file("malformed.jsonl", "{\"id\": \"a\", \"kind\"\n")), FormatError);
    EXPECT_THROW(FileProvider::load(temp_file("mixed.jsonl",
                                              "{\"id\":\"a\",\"kind\":\"image\",\"dim\":2,\"vector\":[1,0]}\n"
                                              "{\"id\":\"b\",\"kind\":\"text\",\"dim\":3,\"vector\":[1,0,0]}\n")),
                 DimensionMismatch);
    EXPECT_THROW(FileProvider::load(temp_file("lenmismatch.jsonl",
                                              "{\"id\":\"a\",\"kind\":\"image\",\"dim\":3,\"vector\":[1,0]}\n")),
                 FormatError);
    EXPECT_THROW(FileProvider::load(temp_file("dup.jsonl",
                                              "{\"id\":\"a\",\"kind\":\"image\",\"dim\":2,\"vector\":[1,0]}\n"
                                              "{\"id\":\"a\",\"kind\":\"image\",\"dim\":2,\"vector\":[0,1]}\n")),
                 FormatError);
    EXPECT_THROW(FileProvider::load(temp_file("kind.jsonl",
                                              "{\"id\":\"a\",\"kind\":\"audio\",\"dim\":2,\"vector\":[1,0]}\n")),
                 FormatError);
    EXPECT_THROW(FileProvider::load(temp_file("empty.jsonl", "")), FormatError);
    EXPECT_THROW(FileProvider::load("/nonexistent/embnav.jsonl"), FormatError);
}

TEST(FileProvider, WriterRoundTripKeepsUnitVectors) {
    Rng rng(3);
    std::vector<ExchangeRecord> records;
    for (int i = 0; i < 10; ++i) {
        const auto v = normalize(random_vec(rng, 8));
        records.push_back({"scene:item" + std::to_string(i), i % 2 ? RecordKind::Text : RecordKind::Image,
                           std::vector<double>(v.values.begin(), v.values.end())});
    }
    const auto path = std::filesystem::temp_directory_path() / "embnav_test_roundtrip.jsonl";
    write_exchange_file(path, records, "roundtrip");
    const auto fp = FileProvider::load(path);
    EXPECT_EQ(fp->model(), "roundtrip");
    for (const auto& r : records) {
        const auto& got = fp->lookup(r.id, r.kind);
        EXPECT_NEAR(norm_of(got), 1.0, 1e-6);
        for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(got.values[i], r.vector[i], 1e-6);
    }
}

TEST(MakeProvider, ResolvesPresetsFilesAndRejectsUnknown) {
    EXPECT_EQ(make_provider("strong")->dim(), 1152u);
    EXPECT_EQ(make_provider("medium")->dim(), 512u);
    EXPECT_EQ(make_provider("weak")->dim(), 768u);
    EXPECT_EQ(make_provider("file:" + kFixture)->dim(), 4u);
    EXPECT_THROW(make_provider("siglip"), ConfigError);
}
