#include "helpers.hpp"

#include "summer/embed.hpp"
#include "summer/errors.hpp"

using namespace summer;
using summer::testing::to_vector;

namespace {

ModelConfig square_config()
{
    ModelConfig c;
    c.d_t = c.d_a = c.d_v = c.d_s = 3;
    c.num_speakers = 3;
    c.max_positions = 4;
    return c;
}

void fill(Tensor t, double value)
{
    for (auto& x : t.mutable_values())
        x = value;
}

void make_identity(Tensor t)
{
    auto v = t.mutable_values();
    const std::size_t n = t.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < t.cols(); ++j)
            v[i * t.cols() + j] = i == j ? 1.0 : 0.0;
}

DialogueRecord dialogue(std::vector<std::size_t> speakers, std::vector<std::vector<double>> features)
{
    DialogueRecord d{"e", {}};
    for (std::size_t i = 0; i < speakers.size(); ++i) {
        UtteranceRecord u;
        u.speaker = speakers[i];
        u.text = u.audio = u.visual = features[i];
        d.utterances.push_back(u);
    }
    return d;
}

} // namespace

TEST(Embed, ZeroTablesAndIdentityProjectionReturnFeatures)
{
    const auto c = square_config();
    Rng rng(1);
    auto p = EmbeddingParams::create(rng, c, "tav");
    fill(p.position_table, 0.0);
    for (auto& m : p.modalities) {
        fill(m.speaker_table, 0.0);
        make_identity(m.projection);
    }
    const auto d = dialogue({0, 1}, {{1, 2, 3}, {-4, 5.5, 0}});
    const auto out = embed_utterances(d, p);
    ASSERT_EQ(out.size(), 3u);
    for (const auto& u : out)
        EXPECT_EQ(to_vector(u), (std::vector<double>{1, 2, 3, -4, 5.5, 0}));
}

TEST(Embed, SameSpeakerDiffersByPositionRows)
{
    const auto c = square_config();
    Rng rng(2);
    const auto p = EmbeddingParams::create(rng, c, "t");
    const auto d = dialogue({1, 1}, {{0.3, 0.2, 0.1}, {0.3, 0.2, 0.1}});
    const auto u = embed_modality(d, p, 't');
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_NEAR(u.at(1, k) - u.at(0, k), p.position_table.at(1, k) - p.position_table.at(0, k), 1e-15);
}

TEST(Embed, SpeakerTermIsTheSpeakersRow)
{
    const auto c = square_config();
    Rng rng(3);
    auto p = EmbeddingParams::create(rng, c, "a");
    fill(p.position_table, 0.0);
    fill(p.modalities[0].projection, 0.0);
    const auto d = dialogue({2}, {{9, 9, 9}});
    const auto u = embed_modality(d, p, 'a');
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_EQ(u.at(0, k), p.get('a').speaker_table.at(2, k));
}

TEST(Embed, DoublingSpeakerTableDoublesItsContribution)
{
    const auto c = square_config();
    Rng rng(4);
    auto p = EmbeddingParams::create(rng, c, "v");
    const auto d = dialogue({0, 2, 1}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    const auto base = embed_modality(d, p, 'v');
    for (auto& x : p.modalities[0].speaker_table.mutable_values())
        x *= 2.0;
    const auto doubled = embed_modality(d, p, 'v');
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 3; ++k)
            EXPECT_NEAR(doubled.at(i, k) - base.at(i, k), p.get('v').speaker_table.at(d.utterances[i].speaker, k) / 2.0,
                        1e-15);
}

TEST(Embed, ProjectsEveryModalityToSharedWidth)
{
    ModelConfig c;
    c.d_t = 5;
    c.d_a = 7;
    c.d_v = 2;
    c.d_s = 4;
    Rng rng(5);
    const auto p = EmbeddingParams::create(rng, c, "tav");
    UtteranceRecord u;
    u.text.assign(5, 1.0);
    u.audio.assign(7, 1.0);
    u.visual.assign(2, 1.0);
    const DialogueRecord d{"w", {u, u}};
    for (const auto& e : embed_utterances(d, p))
        EXPECT_EQ(e.shape(), (Shape{2, 4}));
}

TEST(Embed, PositionBeyondTableIsBoundsError)
{
    const auto c = square_config();
    Rng rng(6);
    const auto p = EmbeddingParams::create(rng, c, "t");
    std::vector<std::size_t> speakers(5, 0);
    std::vector<std::vector<double>> features(5, std::vector<double>{0, 0, 0});
    EXPECT_THROW(embed_modality(dialogue(speakers, features), p, 't'), BoundsError);
}

TEST(Embed, GradientReachesAllThreeTables)
{
    const auto c = square_config();
    Rng rng(7);
    const auto p = EmbeddingParams::create(rng, c, "t");
    const auto d = dialogue({0, 2}, {{1, 2, 3}, {3, 2, 1}});
    backward(sum(embed_modality(d, p, 't')));
    EXPECT_TRUE(p.position_table.has_grad());
    EXPECT_TRUE(p.get('t').speaker_table.has_grad());
    EXPECT_TRUE(p.get('t').projection.has_grad());
    EXPECT_EQ(p.get('t').speaker_table.grad()[1 * 3], 0.0) << "speaker 1 never appears";
}
