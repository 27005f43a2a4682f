#pragma once

// Hierarchical cross-modal fusion.
//
// Each branch anchors one modality as the query stream, attends to a second
// modality (stage 1), then uses that result as the query against the third
// (stage 2), and finishes with a feed-forward block (stage 3). Attention heads
// carry a learnable scale phi. Branch outputs are averaged.

#include "summer/config.hpp"
#include "summer/nn.hpp"

#include <utility>
#include <vector>

namespace summer {

// softmax(q k^T / sqrt(d)) v for one head.
Tensor scaled_attention(const Tensor& query, const Tensor& key, const Tensor& value);

struct AttentionHead {
    Linear query;
    Linear key; // bias-free: a key bias shifts every score in a row equally
    Linear value;
    Tensor phi; // 1 x 1, starts at 1

    AttentionHead() = default;
    AttentionHead(Rng& rng, std::size_t width, std::size_t head_width);
    void collect(ParamList& out, const std::string& prefix) const;
};

/// Pre-norm block: x + W_o [phi_h * attn_h] followed by x + FFN(LN(x)).
struct DynAttnLayer {
    std::vector<AttentionHead> heads;
    Linear output; // h*d_head -> d_s, bias-free so phi = 0 is an exact identity
    LayerNorm query_norm;
    LayerNorm context_norm;
    LayerNorm ffn_norm;
    FeedForward ffn;

    DynAttnLayer() = default;
    DynAttnLayer(Rng& rng, std::size_t width, std::size_t heads, std::size_t head_width, std::size_t ffn_hidden);

    // Residual stream after the attention sublayer only.
    Tensor attention_sublayer(const Tensor& query_seq, const Tensor& key_seq, const Tensor& value_seq) const;
    Tensor operator()(const Tensor& query_seq, const Tensor& key_seq, const Tensor& value_seq) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

Tensor dyn_attn(const DynAttnLayer& layer, const Tensor& query_seq, const Tensor& key_seq, const Tensor& value_seq);

/// L cross-attention layers; the context stream stays fixed across layers.
struct FusionStack {
    std::vector<DynAttnLayer> layers;

    FusionStack() = default;
    FusionStack(Rng& rng, const ModelConfig& config);

    // Output keeps the anchor's length.
    Tensor fuse(const Tensor& anchor_seq, const Tensor& other_seq) const;
    // Layers applied as self-attention with the stream updated each layer.
    Tensor self_attend(const Tensor& seq) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

Tensor fuse_stage(const FusionStack& stack, const Tensor& anchor_seq, const Tensor& other_seq);

struct FusionBranch {
    char anchor = 't';
    std::vector<char> others; // fusion order
    std::vector<FusionStack> stages;
    LayerNorm ffn_norm;
    FeedForward ffn;
    LayerNorm output_norm;

    FusionBranch() = default;
    FusionBranch(Rng& rng, const ModelConfig& config, char anchor, std::vector<char> others);

    Tensor forward(const std::vector<std::pair<char, Tensor>>& sequences) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

// Non-anchor modalities in fusion order: t -> a, v; a -> v, t; v -> t, a.
std::vector<char> fusion_order(char anchor, const std::string& available);

struct HcmfOutput {
    Tensor fused;                 // l x d_s
    std::vector<Tensor> branches; // one per branch, same order as Hcmf::branches()
};

class Hcmf {
public:
    Hcmf() = default;
    // `modalities` lists the available streams; a single stream bypasses fusion.
    Hcmf(Rng& rng, const ModelConfig& config, const std::string& modalities, BranchMode mode);

    HcmfOutput forward(const std::vector<std::pair<char, Tensor>>& sequences) const;

    const std::vector<FusionBranch>& branches() const { return branches_; }
    std::vector<FusionBranch>& branches() { return branches_; }
    void collect(ParamList& out, const std::string& prefix) const;

private:
    std::string modalities_;
    std::vector<FusionBranch> branches_;
};

HcmfOutput hcmf_forward(const Hcmf& fusion, const std::vector<std::pair<char, Tensor>>& sequences);

/// Ablation stand-in for fusion: concatenate streams, project to d_s.
struct ConcatFusion {
    Linear projection;
    std::size_t streams = 0;

    ConcatFusion() = default;
    ConcatFusion(Rng& rng, const ModelConfig& config, std::size_t streams);

    Tensor forward(const std::vector<std::pair<char, Tensor>>& sequences) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

// Mean over sequence positions: l x d -> 1 x d.
Tensor pool_utterance(const Tensor& fused_seq);

} // namespace summer
