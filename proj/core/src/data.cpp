#include "summer/data.hpp"

#include "summer/errors.hpp"
#include "summer/random.hpp"

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace summer {

using nlohmann::json;

const std::vector<double>& UtteranceRecord::features(char modality) const
{
    switch (modality) {
    case 't':
        return text;
    case 'a':
        return audio;
    case 'v':
        return visual;
    default:
        throw ConfigError(std::string("unknown modality '") + modality + "'");
    }
}

namespace {

const char* modality_field(char m)
{
    return m == 't' ? "text" : m == 'a' ? "audio" : "visual";
}

std::size_t to_index(const json& v, const char* what)
{
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ParseError(std::string(what) + " must be a non-negative integer");
    return v.get<std::size_t>();
}

std::vector<double> to_vector(const json& v, const char* what)
{
    if (!v.is_array())
        throw ParseError(std::string(what) + " must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number())
            throw ParseError(std::string(what) + " must be an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

DialogueRecord from_json(const json& j)
{
    if (!j.is_object())
        throw ParseError("expected a JSON object");
    DialogueRecord d;
    if (!j.contains("dialogue_id") || !j["dialogue_id"].is_string())
        throw ParseError("missing string field 'dialogue_id'");
    d.dialogue_id = j["dialogue_id"].get<std::string>();
    if (!j.contains("utterances") || !j["utterances"].is_array())
        throw ParseError("missing array field 'utterances'");
    for (const auto& u : j["utterances"]) {
        if (!u.is_object())
            throw ParseError("utterance must be an object");
        UtteranceRecord r;
        for (const char* key : {"speaker", "label", "text", "audio", "visual"})
            if (!u.contains(key))
                throw ParseError(std::string("utterance missing field '") + key + "'");
        r.speaker = to_index(u["speaker"], "speaker");
        r.label = to_index(u["label"], "label");
        r.text = to_vector(u["text"], "text");
        r.audio = to_vector(u["audio"], "audio");
        r.visual = to_vector(u["visual"], "visual");
        d.utterances.push_back(std::move(r));
    }
    return d;
}

json to_json(const DialogueRecord& d)
{
    json utterances = json::array();
    for (const auto& u : d.utterances)
        utterances.push_back({{"speaker", u.speaker},
                              {"label", u.label},
                              {"text", u.text},
                              {"audio", u.audio},
                              {"visual", u.visual}});
    return {{"dialogue_id", d.dialogue_id}, {"utterances", std::move(utterances)}};
}

// Largest-remainder apportionment of `total` over `weights`.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights)
{
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(total) * weights[i] / sum;
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned)
        ++counts[remainders[k % remainders.size()].second];
    return counts;
}

std::vector<double> unit_direction(Rng& rng, std::size_t dim)
{
    std::vector<double> v(dim);
    double norm = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v)
        x /= norm;
    return v;
}

} // namespace

void validate_dialogue(const DialogueRecord& d, const ModelConfig& config)
{
    if (d.utterances.empty())
        throw ValidationError("dialogue " + d.dialogue_id + ": no utterances");
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
        const auto& u = d.utterances[i];
        const std::string where = "dialogue " + d.dialogue_id + " utterance " + std::to_string(i) + ": ";
        for (char m : kModalities) {
            const auto expected = config.modality_dim(m);
            const auto actual = u.features(m).size();
            if (actual != expected)
                throw ValidationError(where + modality_field(m) + "_features length " + std::to_string(actual) +
                                      ", expected " + std::to_string(expected));
            for (double x : u.features(m))
                if (!std::isfinite(x))
                    throw ValidationError(where + modality_field(m) + "_features contains a non-finite value");
        }
        if (u.label >= config.num_classes)
            throw ValidationError(where + "label " + std::to_string(u.label) + " outside [0, " +
                                  std::to_string(config.num_classes) + ")");
        if (u.speaker >= config.num_speakers)
            throw ValidationError(where + "speaker " + std::to_string(u.speaker) + " outside [0, " +
                                  std::to_string(config.num_speakers) + ")");
    }
}

std::vector<DialogueRecord> read_dialogues(std::istream& in, const ModelConfig& config)
{
    std::vector<DialogueRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        DialogueRecord d;
        try {
            d = from_json(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        validate_dialogue(d, config);
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<DialogueRecord> load_dialogues(const std::string& path, const ModelConfig& config)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open feature file '" + path + "'");
    auto records = read_dialogues(in, config);
    if (records.empty())
        spdlog::warn("feature file '{}' contains no dialogues", path);
    return records;
}

void write_dialogues(std::ostream& out, const std::vector<DialogueRecord>& records)
{
    for (const auto& d : records)
        out << to_json(d).dump() << '\n';
}

void write_dialogues(const std::string& path, const std::vector<DialogueRecord>& records)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write feature file '" + path + "'");
    write_dialogues(out, records);
    if (!out)
        throw IoError("error while writing '" + path + "'");
}

std::vector<DialogueRecord> generate_synthetic(const ModelConfig& config, std::uint64_t seed)
{
    config.validate();
    const std::size_t classes = config.num_classes;
    Rng rng(derive_seed(seed, "synthetic-data"));

    // Class prototypes per modality.
    const double strength[3] = {config.separation, config.separation * config.audio_signal,
                                config.separation * config.visual_signal};
    std::vector<std::vector<double>> prototypes[3];
    for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t c = 0; c < classes; ++c) {
            auto dir = unit_direction(rng, config.modality_dim(kModalities[m]));
            for (auto& x : dir)
                x *= strength[m];
            prototypes[m].push_back(std::move(dir));
        }

    // Dialogue lengths until the utterance budget is spent.
    std::vector<std::size_t> lengths;
    for (std::size_t remaining = config.utterances; remaining > 0;) {
        const std::size_t span = config.max_dialogue - config.min_dialogue + 1;
        const std::size_t len = std::min(remaining, config.min_dialogue + rng.index(span));
        lengths.push_back(len);
        remaining -= len;
    }

    // Exact label quotas, geometric skew from class 0 down to class C-1.
    std::vector<double> weights(classes);
    for (std::size_t c = 0; c < classes; ++c)
        weights[c] = std::pow(config.imbalance, -static_cast<double>(c) / static_cast<double>(classes - 1));
    const auto quotas = apportion(config.utterances, weights);
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < classes; ++c)
        labels.insert(labels.end(), quotas[c], c);
    rng.shuffle(labels);

    std::vector<DialogueRecord> out;
    std::size_t next = 0;
    for (std::size_t d = 0; d < lengths.size(); ++d) {
        DialogueRecord dialogue;
        dialogue.dialogue_id = fmt::format("syn-{:04d}", d);
        std::size_t speaker = rng.index(config.num_speakers);
        for (std::size_t i = 0; i < lengths[d]; ++i) {
            if (i > 0 && config.num_speakers > 1 && rng.uniform() < 0.8)
                speaker = (speaker + 1 + rng.index(config.num_speakers - 1)) % config.num_speakers;
            UtteranceRecord u;
            u.speaker = speaker;
            u.label = labels[next++];
            // Overlap: some utterances carry another class's signal.
            std::size_t source = u.label;
            if (config.label_noise > 0.0 && rng.uniform() < config.label_noise)
                source = (u.label + 1 + rng.index(classes - 1)) % classes;
            for (std::size_t m = 0; m < 3; ++m) {
                const auto& proto = prototypes[m][source];
                std::vector<double> f(proto.size());
                for (std::size_t k = 0; k < f.size(); ++k)
                    f[k] = proto[k] + config.noise * rng.normal();
                (m == 0 ? u.text : m == 1 ? u.audio : u.visual) = std::move(f);
            }
            dialogue.utterances.push_back(std::move(u));
        }
        out.push_back(std::move(dialogue));
    }
    return out;
}

DatasetSplit split_dataset(const std::vector<DialogueRecord>& records, std::array<double, 3> fractions,
                           std::uint64_t seed)
{
    double total = 0.0;
    std::size_t nonzero = 0;
    for (double f : fractions) {
        if (!(f >= 0.0))
            throw ParameterError("split fractions must be non-negative");
        total += f;
        nonzero += f > 0.0 ? 1 : 0;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw ParameterError("split fractions must sum to 1");
    if (records.size() < nonzero)
        throw ParameterError("cannot split " + std::to_string(records.size()) + " dialogues into " +
                             std::to_string(nonzero) + " non-empty parts");

    auto sizes = apportion(records.size(), {fractions[0], fractions[1], fractions[2]});
    // Every split with a positive fraction receives at least one dialogue.
    for (std::size_t k = 0; k < 3; ++k) {
        if (fractions[k] > 0.0 && sizes[k] == 0) {
            auto donor = std::max_element(sizes.begin(), sizes.end());
            --*donor;
            ++sizes[k];
        }
    }

    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order);

    std::vector<std::size_t> parts[3];
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        parts[k].assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                        order.begin() + static_cast<std::ptrdiff_t>(cursor + sizes[k]));
        std::sort(parts[k].begin(), parts[k].end());
        cursor += sizes[k];
    }
    DatasetSplit split;
    std::vector<DialogueRecord>* targets[3] = {&split.train, &split.val, &split.test};
    for (std::size_t k = 0; k < 3; ++k)
        for (auto idx : parts[k])
            targets[k]->push_back(records[idx]);
    return split;
}

std::size_t utterance_count(const std::vector<DialogueRecord>& records)
{
    std::size_t n = 0;
    for (const auto& d : records)
        n += d.size();
    return n;
}

std::size_t longest_dialogue(const std::vector<DialogueRecord>& records)
{
    std::size_t n = 0;
    for (const auto& d : records)
        n = std::max(n, d.size());
    return n;
}

std::vector<std::size_t> class_counts(const std::vector<DialogueRecord>& records, std::size_t num_classes)
{
    std::vector<std::size_t> counts(num_classes, 0);
    for (const auto& d : records)
        for (const auto& u : d.utterances)
            if (u.label < num_classes)
                ++counts[u.label];
    return counts;
}

} // namespace summer
