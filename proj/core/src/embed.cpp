#include "summer/embed.hpp"

#include "summer/errors.hpp"

#include <numeric>

namespace summer {

EmbeddingParams EmbeddingParams::create(Rng& rng, const ModelConfig& config, const std::string& modalities)
{
    EmbeddingParams p;
    for (char m : modalities) {
        ModalityEmbedding e;
        e.modality = m;
        e.projection = xavier_param(rng, config.modality_dim(m), config.d_s);
        e.speaker_table = uniform_param(rng, {config.num_speakers, config.d_s}, 0.1);
        p.modalities.push_back(std::move(e));
    }
    p.position_table = uniform_param(rng, {config.max_positions, config.d_s}, 0.1);
    return p;
}

const ModalityEmbedding& EmbeddingParams::get(char modality) const
{
    for (const auto& e : modalities)
        if (e.modality == modality)
            return e;
    throw ConfigError(std::string("no embedding for modality '") + modality + "'");
}

void EmbeddingParams::collect(ParamList& out, const std::string& prefix) const
{
    for (const auto& e : modalities) {
        const std::string base = prefix + "." + e.modality;
        out.push_back({base + ".projection", e.projection});
        out.push_back({base + ".speaker", e.speaker_table});
    }
    out.push_back({prefix + ".position", position_table});
}

Tensor feature_matrix(const DialogueRecord& dialogue, char modality)
{
    if (dialogue.utterances.empty())
        throw ContractError("dialogue " + dialogue.dialogue_id + " has no utterances");
    const std::size_t width = dialogue.utterances.front().features(modality).size();
    std::vector<double> values;
    values.reserve(dialogue.size() * width);
    for (const auto& u : dialogue.utterances) {
        const auto& f = u.features(modality);
        if (f.size() != width)
            throw ValidationError("dialogue " + dialogue.dialogue_id + ": ragged feature widths");
        values.insert(values.end(), f.begin(), f.end());
    }
    return Tensor::from({dialogue.size(), width}, std::move(values));
}

Tensor embed_modality(const DialogueRecord& dialogue, const EmbeddingParams& params, char modality)
{
    const auto& e = params.get(modality);
    const std::size_t length = dialogue.size();
    if (length > params.max_positions())
        throw BoundsError("dialogue " + dialogue.dialogue_id + " has " + std::to_string(length) +
                          " utterances but the position table holds " + std::to_string(params.max_positions()));
    std::vector<std::size_t> speakers, positions(length);
    for (const auto& u : dialogue.utterances) {
        if (u.speaker >= e.speaker_table.rows())
            throw BoundsError("speaker " + std::to_string(u.speaker) + " outside the speaker table");
        speakers.push_back(u.speaker);
    }
    std::iota(positions.begin(), positions.end(), std::size_t{0});

    const Tensor projected = matmul(feature_matrix(dialogue, modality), e.projection);
    return add(add(projected, gather_rows(e.speaker_table, speakers)), gather_rows(params.position_table, positions));
}

std::vector<Tensor> embed_utterances(const DialogueRecord& dialogue, const EmbeddingParams& params)
{
    std::vector<Tensor> out;
    for (const auto& e : params.modalities)
        out.push_back(embed_modality(dialogue, params, e.modality));
    return out;
}

} // namespace summer
