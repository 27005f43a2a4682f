#pragma once

#include "summer/random.hpp"
#include "summer/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace summer {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

// FNV-1a over the raw bytes of every parameter value, in list order.
std::uint64_t checksum(const ParamList& params);
std::size_t parameter_count(const ParamList& params);
void zero_grads(ParamList& params);
void set_trainable(ParamList& params, bool trainable);

Tensor uniform_param(Rng& rng, Shape shape, double bound);
Tensor xavier_param(Rng& rng, std::size_t fan_in, std::size_t fan_out);
Tensor constant_param(Shape shape, double value);

/// y = x W (+ b), W stored as in x out.
struct Linear {
    Tensor weight;
    Tensor bias; // undefined when the layer is bias-free

    Linear() = default;
    Linear(Rng& rng, std::size_t in, std::size_t out, bool with_bias = true);

    std::size_t in_features() const { return weight.rows(); }
    std::size_t out_features() const { return weight.cols(); }

    Tensor operator()(const Tensor& x) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

struct LayerNorm {
    Tensor gain;
    Tensor bias;

    LayerNorm() = default;
    explicit LayerNorm(std::size_t width);

    Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }
    void collect(ParamList& out, const std::string& prefix) const;
};

/// Position-wise GELU network.
struct FeedForward {
    Linear up;
    Linear down;

    FeedForward() = default;
    FeedForward(Rng& rng, std::size_t width, std::size_t hidden);

    Tensor operator()(const Tensor& x) const { return down(gelu(up(x))); }
    void collect(ParamList& out, const std::string& prefix) const;
};

} // namespace summer
