#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "embnav/data.hpp"
#include "embnav/instruction.hpp"

using namespace embnav;
using namespace embnav::data;

namespace {

const sim::World kWorld{};
const expert::ExpertParams kExpert{};

const Collection& small_collection() {
    static const Collection c = collect(10, 3, kWorld, kExpert);
    return c;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("embnav_data_" + name);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const std::filesystem::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary | std::ios::trunc) << s;
}

ArtifactStamp test_stamp() { return {"raw", 1, "00000000deadbeef", 3}; }

}  // namespace

TEST(Collect, RoundRobinGoalsAndManifestCounts) {
    const auto& c = small_collection();
    const auto& m = c.manifest;
    EXPECT_EQ(m.episodes, 10u);
    for (auto n : m.per_color) EXPECT_EQ(n, 2u);
    EXPECT_EQ(m.total_samples, c.records.size());
    EXPECT_NEAR(m.mean_steps * 10, static_cast<double>(c.records.size()), 1e-9);
    EXPECT_LE(m.min_steps, m.max_steps);
    for (const auto& r : c.records) {
        EXPECT_EQ(r.goal, sim::kAllColors[static_cast<std::size_t>(r.episode_id) % 5]);
        const auto instr = instruction::parse_instruction(r.instruction_text);
        ASSERT_TRUE(instr.has_value());
        EXPECT_EQ(instr->color, r.goal);
    }
}

TEST(Collect, EpisodesStartAtTheirDerivedSpawn) {
    const auto& c = small_collection();
    int last_episode = -1;
    for (const auto& r : c.records) {
        if (r.episode_id == last_episode) continue;
        EXPECT_EQ(r.episode_id, last_episode + 1);
        last_episode = r.episode_id;
        EXPECT_EQ(r.step, 0);
        Rng rng(derive_seed(3, "collect", static_cast<std::uint64_t>(r.episode_id)));
        const auto spawn = sim::sample_spawn(kWorld.arena, rng);
        EXPECT_EQ(r.pose.x, spawn.x);
        EXPECT_EQ(r.pose.y, spawn.y);
        EXPECT_EQ(r.pose.heading, spawn.heading);
    }
    EXPECT_EQ(last_episode, 9);
}

TEST(Collect, DeterministicAndRejectsZeroEpisodes) {
    const auto again = collect(10, 3, kWorld, kExpert);
    ASSERT_EQ(again.records.size(), small_collection().records.size());
    for (std::size_t i = 0; i < again.records.size(); ++i) {
        ASSERT_EQ(again.records[i].action, small_collection().records[i].action);
    }
    EXPECT_THROW(collect(0, 3, kWorld, kExpert), ContractViolation);
}

TEST(Manifest, JsonRoundTripAndValidation) {
    auto m = small_collection().manifest;
    m.stamp = test_stamp();
    m.provider = "strong";
    m.dim = 1152;
    const auto path = temp_path("manifest.json");
    write_manifest(m, path);
    const auto back = read_manifest(path);
    EXPECT_EQ(back.per_color, m.per_color);
    EXPECT_EQ(back.total_samples, m.total_samples);
    EXPECT_EQ(back.stamp, m.stamp);
    EXPECT_EQ(back.dim, 1152u);
    EXPECT_EQ(back.mean_steps, m.mean_steps);

    auto j = to_json(m);
    j["per_color"]["red"] = 5;
    EXPECT_THROW(manifest_from_json(j), FormatError);
    j.erase("dim");
    EXPECT_THROW(manifest_from_json(j), FormatError);
}

TEST(RawFile, RoundTripPreservesEveryField) {
    const auto& recs = small_collection().records;
    const auto path = temp_path("raw.jsonl");
    write_raw(path, recs, test_stamp());
    const auto raw = read_raw(path);
    EXPECT_EQ(raw.stamp, test_stamp());
    ASSERT_EQ(raw.records.size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto &a = recs[i], &b = raw.records[i];
        ASSERT_EQ(a.episode_id, b.episode_id);
        ASSERT_EQ(a.step, b.step);
        ASSERT_EQ(a.pose.x, b.pose.x);
        ASSERT_EQ(a.pose.heading, b.pose.heading);
        ASSERT_EQ(a.action, b.action);
        ASSERT_EQ(a.reward, b.reward);
        ASSERT_EQ(a.instruction_text, b.instruction_text);
        ASSERT_EQ(a.observation.visible.size(), b.observation.visible.size());
        for (std::size_t k = 0; k < a.observation.visible.size(); ++k) {
            ASSERT_EQ(a.observation.visible[k].cell, b.observation.visible[k].cell);
            ASSERT_EQ(a.observation.visible[k].apparent_size, b.observation.visible[k].apparent_size);
        }
    }
}

TEST(RawFile, MalformedFilesAreRejected) {
    const auto path = temp_path("raw_bad.jsonl");
    write_raw(path, std::span(small_collection().records).first(3), test_stamp());
    const auto text = slurp(path);

    dump(path, "");
    EXPECT_THROW(read_raw(path), FormatError);
    dump(path, text.substr(text.find('\n') + 1));  // header removed
    EXPECT_THROW(read_raw(path), FormatError);
    dump(path, text.substr(0, text.rfind('\n', text.size() - 2) + 1));  // one record short
    EXPECT_THROW(read_raw(path), FormatError);
    auto bad_color = text;
    bad_color.replace(bad_color.find("\"goal\":\"red\""), 12, "\"goal\":\"tan\"");
    dump(path, bad_color);
    EXPECT_THROW(read_raw(path), FormatError);
    EXPECT_THROW(read_raw(temp_path("missing.jsonl")), FormatError);
}

TEST(EmbedDataset, MatchesPerEpisodeNoiseStreams) {
    const auto& recs = small_collection().records;
    embedding::SyntheticEmbedderParams p;
    p.dim = 24;
    const embedding::SyntheticEmbedder provider(p, "test");
    const auto d = embed_dataset(recs, provider, 55);
    ASSERT_EQ(d.size(), recs.size());
    ASSERT_EQ(d.dim(), 24u);

    Rng noise;
    int episode = -1;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (recs[i].episode_id != episode) {
            episode = recs[i].episode_id;
            noise.seed(derive_seed(55, "embed", static_cast<std::uint64_t>(episode)));
        }
        const auto image = provider.embed_image(recs[i].observation, noise);
        const auto text = provider.embed_text(*instruction::parse_instruction(recs[i].instruction_text));
        const auto joint = embedding::fuse(image, text);
        for (std::size_t k = 0; k < 24; ++k) {
            ASSERT_EQ(d.embeddings(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)), joint.values[k]);
        }
        ASSERT_EQ(d.actions(0, static_cast<Eigen::Index>(i)), static_cast<float>(recs[i].action.left));
        ASSERT_EQ(d.actions(1, static_cast<Eigen::Index>(i)), static_cast<float>(recs[i].action.right));
    }
}

TEST(EmbedDataset, InvalidInstructionIsAFormatError) {
    auto recs = std::vector(small_collection().records.begin(), small_collection().records.begin() + 2);
    recs[1].instruction_text = "go somewhere";
    const embedding::SyntheticEmbedder provider(embedding::SyntheticEmbedderParams{});
    EXPECT_THROW(embed_dataset(recs, provider, 1), FormatError);
}

TEST(DatasetFile, ByteLayoutMatchesHandDecoding) {
    bc::Dataset d;
    d.embeddings.resize(3, 2);
    d.embeddings << 0.5f, -1.f, 0.25f, 2.f, 1e-3f, 7.f;
    d.actions.resize(2, 2);
    d.actions << 0.1f, -0.9f, 0.3f, 1.f;
    const auto path = temp_path("layout.bin");
    save_dataset(d, path);
    const auto bytes = slurp(path);
    ASSERT_EQ(bytes.size(), kDatasetHeaderBytes + 2 * 5 * 4);
    EXPECT_EQ(bytes.substr(0, 4), "T2N1");
    auto u = [&](std::size_t off, int n) {
        std::uint64_t v = 0;
        for (int i = n - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[off + static_cast<std::size_t>(i)]);
        return v;
    };
    EXPECT_EQ(u(4, 4), 3u);
    EXPECT_EQ(u(8, 8), 2u);
    auto f = [&](std::size_t idx) {
        const auto bits = static_cast<std::uint32_t>(u(kDatasetHeaderBytes + 4 * idx, 4));
        float x;
        std::memcpy(&x, &bits, 4);
        return x;
    };
    const float want[10] = {0.5f, 0.25f, 1e-3f, 0.1f, 0.3f, -1.f, 2.f, 7.f, -0.9f, 1.f};
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(f(i), want[i]) << i;

    const auto back = load_dataset(path, 3);
    EXPECT_EQ(back.embeddings, d.embeddings);
    EXPECT_EQ(back.actions, d.actions);
}

TEST(DatasetFile, CorruptionAndDimensionErrors) {
    bc::Dataset d;
    d.embeddings = Eigen::MatrixXf::Ones(4, 3);
    d.actions = Eigen::MatrixXf::Zero(2, 3);
    const auto path = temp_path("corrupt.bin");
    save_dataset(d, path);
    const auto bytes = slurp(path);

    EXPECT_THROW(load_dataset(path, 5), DimensionMismatch);
    dump(path, bytes.substr(0, bytes.size() - 1));
    EXPECT_THROW(load_dataset(path), FormatError);
    dump(path, bytes + std::string(4, '\0'));
    EXPECT_THROW(load_dataset(path), FormatError);
    dump(path, "T2N0" + bytes.substr(4));
    EXPECT_THROW(load_dataset(path), FormatError);

    d.actions = Eigen::MatrixXf::Zero(2, 2);
    EXPECT_THROW(save_dataset(d, path), DimensionMismatch);
}
