#pragma once

#include "summer/config.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace summer {

inline constexpr std::array<char, 3> kModalities{'t', 'a', 'v'};

struct UtteranceRecord {
    std::size_t speaker = 0;
    std::size_t label = 0;
    std::vector<double> text;
    std::vector<double> audio;
    std::vector<double> visual;

    const std::vector<double>& features(char modality) const;

    bool operator==(const UtteranceRecord&) const = default;
};

struct DialogueRecord {
    std::string dialogue_id;
    std::vector<UtteranceRecord> utterances; // conversation order

    std::size_t size() const { return utterances.size(); }
    bool operator==(const DialogueRecord&) const = default;
};

// Feature files are JSON Lines, one dialogue per line:
// {"dialogue_id": "...", "utterances": [{"speaker": 0, "label": 2,
//   "text": [...], "audio": [...], "visual": [...]}, ...]}
std::vector<DialogueRecord> load_dialogues(const std::string& path, const ModelConfig& config);
std::vector<DialogueRecord> read_dialogues(std::istream& in, const ModelConfig& config);
void write_dialogues(const std::string& path, const std::vector<DialogueRecord>& records);
void write_dialogues(std::ostream& out, const std::vector<DialogueRecord>& records);

// Throws ValidationError naming the dialogue and the offending field.
void validate_dialogue(const DialogueRecord& dialogue, const ModelConfig& config);

/// Seeded corpus whose classes are linearly separable on text features
/// (given the default separation); audio and visual carry weaker copies of
/// the class signal. Counts per class follow exact quotas, skewed
/// geometrically when config.imbalance > 1.
std::vector<DialogueRecord> generate_synthetic(const ModelConfig& config, std::uint64_t seed);

struct DatasetSplit {
    std::vector<DialogueRecord> train;
    std::vector<DialogueRecord> val;
    std::vector<DialogueRecord> test;
};

// Partitions whole dialogues; each split keeps the input order.
DatasetSplit split_dataset(const std::vector<DialogueRecord>& records, std::array<double, 3> fractions,
                           std::uint64_t seed);

std::size_t utterance_count(const std::vector<DialogueRecord>& records);
std::size_t longest_dialogue(const std::vector<DialogueRecord>& records);
std::vector<std::size_t> class_counts(const std::vector<DialogueRecord>& records, std::size_t num_classes);

} // namespace summer
