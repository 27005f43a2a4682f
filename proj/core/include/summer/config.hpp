#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace summer {

enum class Mode { Train, Eval };

enum class BranchMode { All, Text };

/// Every architecture, optimisation, distillation, routing and data knob.
///
/// Stored on disk as flat `key = value` text with `[section]` headers
/// (model, optim, ikd, sdmoe, ablation, data, run, paths). Keys that appear
/// before any header are resolved by their unique name. Missing keys keep the
/// defaults below.
struct ModelConfig {
    // [model]
    std::size_t d_t = 100;
    std::size_t d_a = 100;
    std::size_t d_v = 256;
    std::size_t d_s = 100;
    std::size_t heads = 4;
    std::size_t d_head = 25;
    std::size_t fusion_layers = 6;
    std::size_t experts = 4;
    std::size_t gru_hidden = 100;
    std::size_t ffn_hidden = 400;
    std::size_t num_classes = 6;
    std::size_t num_speakers = 2;
    std::size_t max_positions = 64;
    std::size_t teacher_width = 0; // 0: same as d_s
    std::vector<std::string> labels{"happy", "sad", "neutral", "angry", "excited", "frustrated"};

    // [optim]
    double lr = 1e-4;
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    std::size_t teacher_epochs = 50;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    // [ikd]
    double kappa1 = 0.4;
    double kappa2 = 0.3;
    double kappa3 = 0.3;
    double epsilon = 0.1;
    bool literal_smoothing = false;

    // [sdmoe]
    double tau = 0.5;
    double alpha = 2.0;
    bool one_sided = false;

    // [ablation]
    bool sdmoe = true;
    bool hcmf = true;
    bool ikd = true;
    BranchMode branches = BranchMode::All;
    std::string modalities = "tav";

    // [data]
    std::size_t utterances = 200;
    std::size_t min_dialogue = 6;
    std::size_t max_dialogue = 14;
    double separation = 4.0;
    double noise = 1.0;
    double audio_signal = 0.5;
    double visual_signal = 0.5;
    double imbalance = 1.0;
    double label_noise = 0.0;
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    double test_fraction = 0.1;

    // [run]
    std::uint64_t seed = 0;

    // [paths]
    std::string data_path;
    std::string val_path;
    std::string teacher_checkpoint;

    bool has_text() const;
    bool has_audio() const;
    bool has_visual() const;
    std::size_t modality_dim(char modality) const;

    // Throws ConfigError naming the key and the violated constraint.
    void validate() const;
};

using EnvLookup = std::function<const char*(const char*)>;

ModelConfig parse_config(std::string_view text);
ModelConfig load_config(const std::string& path);
// Applies SUMMER_<SECTION>_<KEY> variables, e.g. SUMMER_OPTIM_LR.
void apply_env_overrides(ModelConfig& config, const EnvLookup& lookup);
void apply_env_overrides(ModelConfig& config);
// Sets one key ("section.key" or a unique bare key) from its text form.
void set_config_value(ModelConfig& config, std::string_view key, std::string_view value);
// Full resolved config in the same format parse_config reads.
std::string to_string(const ModelConfig& config);
std::vector<std::string> config_keys();

} // namespace summer
