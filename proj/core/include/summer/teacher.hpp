#pragma once

#include "summer/config.hpp"
#include "summer/data.hpp"
#include "summer/embed.hpp"
#include "summer/hcmf.hpp"
#include "summer/nn.hpp"
#include "summer/sdmoe.hpp"

#include <cstdint>

namespace summer {

struct TeacherOutput {
    Tensor logits;   // l x C
    Tensor features; // l x d_s, classifier input
    GateDecision gate;
};

/// Text-only pipeline: utterance-speaker embedding, text SDMoE, a
/// self-attention encoder, and a per-utterance classifier. Once frozen its
/// parameters stop requiring gradients.
class TeacherModel {
public:
    TeacherModel(const ModelConfig& config, std::uint64_t init_seed);

    TeacherOutput forward(const DialogueRecord& dialogue, Mode mode, std::uint64_t noise_seed) const;
    // Teacher classifier on arbitrary features of the teacher's width.
    Tensor classify(const Tensor& features) const;

    void freeze();
    bool frozen() const { return frozen_; }

    const ModelConfig& config() const { return config_; }
    std::size_t feature_width() const { return config_.d_s; }
    ParamList parameters() const;

private:
    ModelConfig config_;
    EmbeddingParams embedding_;
    SdMoe moe_;
    FusionStack encoder_;
    LayerNorm output_norm_;
    Linear classifier_;
    bool frozen_ = false;
};

// Applies the frozen teacher's classifier to student features already mapped
// to the teacher's width. Gradients reach the features, never the teacher.
Tensor teacher_logits_on_student(const TeacherModel& teacher, const Tensor& student_intermediate);

} // namespace summer
