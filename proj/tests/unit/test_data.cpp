#include "helpers.hpp"

#include "summer/data.hpp"
#include "summer/errors.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace summer;
using summer::testing::expect_error_containing;
using summer::testing::temp_path;

namespace {

ModelConfig small_config()
{
    ModelConfig c;
    c.d_t = 4;
    c.d_a = 3;
    c.d_v = 2;
    return c;
}

UtteranceRecord utterance(const ModelConfig& c, std::size_t speaker, std::size_t label, double base)
{
    UtteranceRecord u;
    u.speaker = speaker;
    u.label = label;
    for (std::size_t i = 0; i < c.d_t; ++i)
        u.text.push_back(base + 0.1 * static_cast<double>(i));
    for (std::size_t i = 0; i < c.d_a; ++i)
        u.audio.push_back(-base + 1.0 / 3.0 * static_cast<double>(i));
    for (std::size_t i = 0; i < c.d_v; ++i)
        u.visual.push_back(base * 1e-7 + static_cast<double>(i));
    return u;
}

} // namespace

TEST(LoadDialogues, OneDialogueTwoUtterances)
{
    const auto c = small_config();
    DialogueRecord d{"d0", {utterance(c, 0, 1, 0.5), utterance(c, 1, 2, -1.25)}};
    const auto path = temp_path("one.jsonl");
    write_dialogues(path, {d});
    const auto loaded = load_dialogues(path, c);
    ASSERT_EQ(loaded.size(), 1u);
    EXPECT_EQ(loaded[0].size(), 2u);
    EXPECT_EQ(loaded[0], d);
}

TEST(LoadDialogues, WrongTextLengthCitesActualAndExpected)
{
    const auto c = small_config();
    ModelConfig wide = c;
    wide.d_t = 100;
    ModelConfig narrow = c;
    narrow.d_t = 99;
    DialogueRecord d{"bad-dialogue", {utterance(narrow, 0, 0, 1.0)}};
    std::stringstream s;
    write_dialogues(s, {d});
    try {
        read_dialogues(s, wide);
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("text_features length 99, expected 100"), std::string::npos) << msg;
        EXPECT_NE(msg.find("bad-dialogue"), std::string::npos) << msg;
    }
}

TEST(LoadDialogues, UnknownLabelIsValidationError)
{
    const auto c = small_config();
    DialogueRecord d{"d", {utterance(c, 0, 6, 1.0)}};
    std::stringstream s;
    write_dialogues(s, {d});
    expect_error_containing<ValidationError>([&] { read_dialogues(s, c); }, "label");
}

TEST(LoadDialogues, SpeakerOutOfRangeIsValidationError)
{
    const auto c = small_config();
    DialogueRecord d{"d", {utterance(c, 2, 0, 1.0)}};
    std::stringstream s;
    write_dialogues(s, {d});
    expect_error_containing<ValidationError>([&] { read_dialogues(s, c); }, "speaker");
}

TEST(LoadDialogues, MalformedLineReportsLineNumber)
{
    const auto c = small_config();
    std::stringstream s;
    write_dialogues(s, {DialogueRecord{"ok", {utterance(c, 0, 0, 1.0)}}});
    s << "{not json\n";
    expect_error_containing<ParseError>([&] { read_dialogues(s, c); }, "line 2");
}

TEST(LoadDialogues, EmptyFileGivesEmptyListAndWarns)
{
    std::ostringstream captured;
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(captured);
    auto previous = spdlog::default_logger();
    spdlog::set_default_logger(std::make_shared<spdlog::logger>("capture", sink));

    const auto path = temp_path("empty.jsonl");
    std::ofstream(path).close();
    const auto loaded = load_dialogues(path, small_config());
    spdlog::set_default_logger(previous);

    EXPECT_TRUE(loaded.empty());
    EXPECT_NE(captured.str().find("warning"), std::string::npos) << captured.str();
}

TEST(LoadDialogues, MissingFileIsIoError)
{
    EXPECT_THROW(load_dialogues(temp_path("does-not-exist.jsonl"), small_config()), IoError);
}

TEST(LoadDialogues, WriteThenLoadRoundTripsExactly)
{
    ModelConfig c;
    c.utterances = 40;
    const auto records = generate_synthetic(c, 3);
    const auto path = temp_path("roundtrip.jsonl");
    write_dialogues(path, records);
    EXPECT_EQ(load_dialogues(path, c), records);
}

TEST(Synthetic, SameSeedIsByteIdentical)
{
    ModelConfig c;
    std::stringstream a, b;
    write_dialogues(a, generate_synthetic(c, 42));
    write_dialogues(b, generate_synthetic(c, 42));
    EXPECT_EQ(a.str(), b.str());
}

TEST(Synthetic, DifferentSeedsDiffer)
{
    ModelConfig c;
    const auto a = generate_synthetic(c, 1);
    const auto b = generate_synthetic(c, 2);
    EXPECT_NE(a[0].utterances[0].text, b[0].utterances[0].text);
}

TEST(Synthetic, BalancedClassCounts)
{
    ModelConfig c;
    c.utterances = 200;
    c.num_classes = 6;
    const auto records = generate_synthetic(c, 5);
    EXPECT_EQ(utterance_count(records), 200u);
    const double expected = 200.0 / 6.0;
    for (auto n : class_counts(records, 6)) {
        EXPECT_GE(static_cast<double>(n), expected - 10.0);
        EXPECT_LE(static_cast<double>(n), expected + 10.0);
    }
}

TEST(Synthetic, ImbalanceSkewsCounts)
{
    ModelConfig c;
    c.imbalance = 8.0;
    const auto counts = class_counts(generate_synthetic(c, 5), c.num_classes);
    EXPECT_GT(counts.front(), 4 * counts.back());
}

TEST(Synthetic, DialogueLengthsRespectBounds)
{
    ModelConfig c;
    const auto records = generate_synthetic(c, 9);
    for (std::size_t i = 0; i < records.size(); ++i) {
        EXPECT_LE(records[i].size(), c.max_dialogue);
        if (i + 1 < records.size()) {
            EXPECT_GE(records[i].size(), c.min_dialogue);
        }
        validate_dialogue(records[i], c);
    }
}

// Nearest class centroid is a linear rule: argmax_c (mu_c . x - |mu_c|^2 / 2).
TEST(Synthetic, TextFeaturesAreLinearlySeparable)
{
    ModelConfig c;
    const auto records = generate_synthetic(c, 17);
    const std::size_t half = records.size() / 2;
    const std::vector<DialogueRecord> fit(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(half));
    const std::vector<DialogueRecord> test(records.begin() + static_cast<std::ptrdiff_t>(half), records.end());
    std::vector<std::vector<double>> centroid(c.num_classes, std::vector<double>(c.d_t, 0.0));
    std::vector<double> count(c.num_classes, 0.0);
    for (const auto& d : fit)
        for (const auto& u : d.utterances) {
            for (std::size_t k = 0; k < c.d_t; ++k)
                centroid[u.label][k] += u.text[k];
            count[u.label] += 1.0;
        }
    for (std::size_t l = 0; l < c.num_classes; ++l)
        for (auto& x : centroid[l])
            x /= count[l];

    std::size_t correct = 0, total = 0;
    for (const auto& d : test)
        for (const auto& u : d.utterances) {
            double best = -1e300;
            std::size_t arg = 0;
            for (std::size_t l = 0; l < c.num_classes; ++l) {
                double score = 0.0;
                for (std::size_t k = 0; k < c.d_t; ++k)
                    score += centroid[l][k] * u.text[k] - 0.5 * centroid[l][k] * centroid[l][k];
                if (score > best) {
                    best = score;
                    arg = l;
                }
            }
            correct += arg == u.label ? 1 : 0;
            ++total;
        }
    EXPECT_GT(static_cast<double>(correct) / static_cast<double>(total), 0.9);
}

TEST(Split, ExactFractions)
{
    ModelConfig c;
    c.utterances = 100;
    c.min_dialogue = c.max_dialogue = 10;
    const auto records = generate_synthetic(c, 1);
    ASSERT_EQ(records.size(), 10u);
    const auto s = split_dataset(records, {0.8, 0.1, 0.1}, 7);
    EXPECT_EQ(s.train.size(), 8u);
    EXPECT_EQ(s.val.size(), 1u);
    EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, AllToTrain)
{
    ModelConfig c;
    const auto records = generate_synthetic(c, 1);
    const auto s = split_dataset(records, {1.0, 0.0, 0.0}, 7);
    EXPECT_EQ(s.train, records);
    EXPECT_TRUE(s.val.empty() && s.test.empty());
}

TEST(Split, StableAcrossRunsAndDisjointCover)
{
    ModelConfig c;
    const auto records = generate_synthetic(c, 1);
    const auto a = split_dataset(records, {0.6, 0.2, 0.2}, 99);
    const auto b = split_dataset(records, {0.6, 0.2, 0.2}, 99);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
    EXPECT_EQ(a.test, b.test);
    std::multiset<std::string> ids;
    for (const auto* part : {&a.train, &a.val, &a.test})
        for (const auto& d : *part)
            ids.insert(d.dialogue_id);
    EXPECT_EQ(ids.size(), records.size());
    EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), records.size());
}

TEST(Split, TooFewDialoguesIsAnError)
{
    ModelConfig c;
    c.utterances = 10;
    c.min_dialogue = c.max_dialogue = 10;
    const auto records = generate_synthetic(c, 1);
    EXPECT_THROW(split_dataset(records, {0.8, 0.1, 0.1}, 1), Error);
}

TEST(Split, FractionsMustSumToOne)
{
    ModelConfig c;
    EXPECT_THROW(split_dataset(generate_synthetic(c, 1), {0.5, 0.1, 0.1}, 1), Error);
}
