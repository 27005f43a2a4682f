#pragma once

#include "summer/config.hpp"
#include "summer/data.hpp"
#include "summer/embed.hpp"
#include "summer/hcmf.hpp"
#include "summer/nn.hpp"
#include "summer/sdmoe.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace summer {

struct StudentOutput {
    Tensor logits;   // l x C
    Tensor features; // l x d_s fused per-utterance representation
    std::vector<std::pair<char, GateDecision>> gates; // empty when SDMoE is ablated
};

/// Multimodal student: utterance-speaker embedding per modality, one SDMoE per
/// modality (or a plain BiGRU when ablated), hierarchical fusion (or
/// concatenation), a classifier, and the cross-KD adapter when distillation
/// is on.
class StudentModel {
public:
    StudentModel(const ModelConfig& config, std::uint64_t init_seed);

    StudentOutput forward(const DialogueRecord& dialogue, Mode mode, std::uint64_t noise_seed) const;
    // Maps fused features to the teacher classifier's input width.
    Tensor adapt(const Tensor& features) const;
    bool has_adapter() const { return adapter_.weight.defined(); }

    const ModelConfig& config() const { return config_; }
    ParamList parameters() const;

private:
    ModelConfig config_;
    EmbeddingParams embedding_;
    std::vector<SdMoe> moe_;
    std::vector<BiGru> encoders_;
    Hcmf fusion_;
    ConcatFusion concat_;
    Linear classifier_;
    Linear adapter_;
};

} // namespace summer
