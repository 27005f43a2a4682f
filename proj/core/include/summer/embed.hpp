#pragma once

#include "summer/config.hpp"
#include "summer/data.hpp"
#include "summer/nn.hpp"

#include <string>
#include <vector>

namespace summer {

struct ModalityEmbedding {
    char modality = 't';
    Tensor projection;    // d_m x d_s, bias-free
    Tensor speaker_table; // num_speakers x d_s
};

/// Utterance-speaker embedding tables: per-modality projection and speaker
/// table plus one absolute position table shared by all modalities.
struct EmbeddingParams {
    std::vector<ModalityEmbedding> modalities;
    Tensor position_table; // max_positions x d_s

    static EmbeddingParams create(Rng& rng, const ModelConfig& config, const std::string& modalities);

    const ModalityEmbedding& get(char modality) const;
    std::size_t max_positions() const { return position_table.rows(); }
    void collect(ParamList& out, const std::string& prefix) const;
};

// l x d_m constant matrix of one modality's features, rows in conversation order.
Tensor feature_matrix(const DialogueRecord& dialogue, char modality);

// U_e[i] = features[i] * projection + V[speaker(i)] + P[i]
Tensor embed_modality(const DialogueRecord& dialogue, const EmbeddingParams& params, char modality);

// One embedded sequence per modality in params, same order.
std::vector<Tensor> embed_utterances(const DialogueRecord& dialogue, const EmbeddingParams& params);

} // namespace summer
