#include "summer/hcmf.hpp"

#include "summer/errors.hpp"
#include "summer/random.hpp"

#include <cmath>

namespace summer {

Tensor scaled_attention(const Tensor& query, const Tensor& key, const Tensor& value)
{
    if (key.rows() != value.rows())
        throw ContractError("attention key length " + std::to_string(key.rows()) + " differs from value length " +
                            std::to_string(value.rows()));
    const double scale = 1.0 / std::sqrt(static_cast<double>(query.cols()));
    const Tensor scores = affine(matmul(query, transpose(key)), scale);
    return matmul(softmax(scores, 1), value);
}

AttentionHead::AttentionHead(Rng& rng, std::size_t width, std::size_t head_width)
    : query(rng, width, head_width), key(rng, width, head_width, false), value(rng, width, head_width),
      phi(constant_param({1, 1}, 1.0))
{
}

void AttentionHead::collect(ParamList& out, const std::string& prefix) const
{
    query.collect(out, prefix + ".query");
    key.collect(out, prefix + ".key");
    value.collect(out, prefix + ".value");
    out.push_back({prefix + ".phi", phi});
}

DynAttnLayer::DynAttnLayer(Rng& rng, std::size_t width, std::size_t head_count, std::size_t head_width,
                           std::size_t ffn_hidden)
    : output(rng, head_count * head_width, width, false), query_norm(width), context_norm(width),
      ffn_norm(width), ffn(rng, width, ffn_hidden)
{
    heads.reserve(head_count);
    for (std::size_t h = 0; h < head_count; ++h)
        heads.emplace_back(rng, width, head_width);
}

Tensor DynAttnLayer::attention_sublayer(const Tensor& query_seq, const Tensor& key_seq,
                                        const Tensor& value_seq) const
{
    if (key_seq.rows() != value_seq.rows())
        throw ContractError("dyn_attn: key length " + std::to_string(key_seq.rows()) +
                            " differs from value length " + std::to_string(value_seq.rows()));
    const Tensor q = query_norm(query_seq);
    const Tensor k = context_norm(key_seq);
    const Tensor v = &key_seq == &value_seq ? k : context_norm(value_seq);
    std::vector<Tensor> per_head;
    per_head.reserve(heads.size());
    for (const auto& head : heads)
        per_head.push_back(scale_by(scaled_attention(head.query(q), head.key(k), head.value(v)), head.phi));
    return add(query_seq, output(concat_cols(per_head)));
}

Tensor DynAttnLayer::operator()(const Tensor& query_seq, const Tensor& key_seq, const Tensor& value_seq) const
{
    const Tensor x = attention_sublayer(query_seq, key_seq, value_seq);
    return add(x, ffn(ffn_norm(x)));
}

void DynAttnLayer::collect(ParamList& out, const std::string& prefix) const
{
    for (std::size_t h = 0; h < heads.size(); ++h)
        heads[h].collect(out, prefix + ".head" + std::to_string(h));
    output.collect(out, prefix + ".output");
    query_norm.collect(out, prefix + ".query_norm");
    context_norm.collect(out, prefix + ".context_norm");
    ffn_norm.collect(out, prefix + ".ffn_norm");
    ffn.collect(out, prefix + ".ffn");
}

Tensor dyn_attn(const DynAttnLayer& layer, const Tensor& query_seq, const Tensor& key_seq, const Tensor& value_seq)
{
    return layer(query_seq, key_seq, value_seq);
}

FusionStack::FusionStack(Rng& rng, const ModelConfig& config)
{
    if (config.fusion_layers == 0)
        throw ConfigError("fusion_layers must be > 0");
    layers.reserve(config.fusion_layers);
    for (std::size_t l = 0; l < config.fusion_layers; ++l)
        layers.emplace_back(rng, config.d_s, config.heads, config.d_head, config.ffn_hidden);
}

Tensor FusionStack::fuse(const Tensor& anchor_seq, const Tensor& other_seq) const
{
    Tensor x = anchor_seq;
    for (const auto& layer : layers)
        x = layer(x, other_seq, other_seq);
    return x;
}

Tensor FusionStack::self_attend(const Tensor& seq) const
{
    Tensor x = seq;
    for (const auto& layer : layers)
        x = layer(x, x, x);
    return x;
}

void FusionStack::collect(ParamList& out, const std::string& prefix) const
{
    for (std::size_t l = 0; l < layers.size(); ++l)
        layers[l].collect(out, prefix + ".layer" + std::to_string(l));
}

Tensor fuse_stage(const FusionStack& stack, const Tensor& anchor_seq, const Tensor& other_seq)
{
    if (anchor_seq.cols() != other_seq.cols())
        throw DimensionError("fuse_stage: widths " + std::to_string(anchor_seq.cols()) + " and " +
                             std::to_string(other_seq.cols()) + " differ");
    return stack.fuse(anchor_seq, other_seq);
}

namespace {

const Tensor& find_sequence(const std::vector<std::pair<char, Tensor>>& sequences, char modality)
{
    for (const auto& [m, seq] : sequences)
        if (m == modality)
            return seq;
    throw ConfigError(std::string("missing modality '") + modality + "' for fusion");
}

} // namespace

std::vector<char> fusion_order(char anchor, const std::string& available)
{
    const std::string cycle = anchor == 't' ? "av" : anchor == 'a' ? "vt" : "ta";
    std::vector<char> out;
    for (char m : cycle)
        if (available.find(m) != std::string::npos)
            out.push_back(m);
    return out;
}

FusionBranch::FusionBranch(Rng& rng, const ModelConfig& config, char anchor_modality, std::vector<char> order)
    : anchor(anchor_modality), others(std::move(order)), ffn_norm(config.d_s),
      output_norm(config.d_s)
{
    for (std::size_t s = 0; s < others.size(); ++s)
        stages.emplace_back(rng, config);
    ffn = FeedForward(rng, config.d_s, config.ffn_hidden);
}

Tensor FusionBranch::forward(const std::vector<std::pair<char, Tensor>>& sequences) const
{
    Tensor x = find_sequence(sequences, anchor);
    for (std::size_t s = 0; s < stages.size(); ++s)
        x = fuse_stage(stages[s], x, find_sequence(sequences, others[s]));
    x = add(x, ffn(ffn_norm(x)));
    return output_norm(x);
}

void FusionBranch::collect(ParamList& out, const std::string& prefix) const
{
    for (std::size_t s = 0; s < stages.size(); ++s)
        stages[s].collect(out, prefix + ".stage" + std::to_string(s + 1));
    ffn_norm.collect(out, prefix + ".ffn_norm");
    ffn.collect(out, prefix + ".ffn");
    output_norm.collect(out, prefix + ".output_norm");
}

Hcmf::Hcmf(Rng& rng, const ModelConfig& config, const std::string& modalities, BranchMode mode)
    : modalities_(modalities)
{
    if (modalities.empty())
        throw ConfigError("fusion needs at least one modality");
    if (modalities.size() == 1)
        return;
    std::string anchors = modalities;
    if (mode == BranchMode::Text) {
        if (modalities.find('t') == std::string::npos)
            throw ConfigError("text-branch fusion needs the text modality");
        anchors = "t";
    }
    // Branches start from identical weights: each draws from a copy of the
    // same stream.
    for (char anchor : anchors) {
        Rng branch_rng = rng;
        branches_.emplace_back(branch_rng, config, anchor, fusion_order(anchor, modalities));
    }
    rng.next();
}

HcmfOutput Hcmf::forward(const std::vector<std::pair<char, Tensor>>& sequences) const
{
    for (char m : modalities_)
        find_sequence(sequences, m);
    HcmfOutput out;
    if (branches_.empty()) {
        out.fused = find_sequence(sequences, modalities_.front());
        return out;
    }
    for (const auto& b : branches_)
        out.branches.push_back(b.forward(sequences));
    if (out.branches.size() == 1) {
        out.fused = out.branches.front();
        return out;
    }
    Tensor total = out.branches.front();
    for (std::size_t i = 1; i < out.branches.size(); ++i)
        total = add(total, out.branches[i]);
    out.fused = affine(total, 1.0 / static_cast<double>(out.branches.size()));
    return out;
}

void Hcmf::collect(ParamList& out, const std::string& prefix) const
{
    for (const auto& b : branches_)
        b.collect(out, prefix + ".branch_" + b.anchor);
}

HcmfOutput hcmf_forward(const Hcmf& fusion, const std::vector<std::pair<char, Tensor>>& sequences)
{
    return fusion.forward(sequences);
}

ConcatFusion::ConcatFusion(Rng& rng, const ModelConfig& config, std::size_t stream_count) : streams(stream_count)
{
    if (streams > 1)
        projection = Linear(rng, streams * config.d_s, config.d_s);
}

Tensor ConcatFusion::forward(const std::vector<std::pair<char, Tensor>>& sequences) const
{
    if (sequences.size() != streams)
        throw ConfigError("concat fusion expects " + std::to_string(streams) + " streams, got " +
                          std::to_string(sequences.size()));
    if (streams == 1)
        return sequences.front().second;
    std::vector<Tensor> parts;
    for (const auto& [m, seq] : sequences)
        parts.push_back(seq);
    return projection(concat_cols(parts));
}

void ConcatFusion::collect(ParamList& out, const std::string& prefix) const
{
    if (projection.weight.defined())
        projection.collect(out, prefix + ".projection");
}

Tensor pool_utterance(const Tensor& fused_seq)
{
    return mean_rows(fused_seq);
}

} // namespace summer
