#include "summer/nn.hpp"

#include <cmath>
#include <cstring>

namespace summer {

std::uint64_t checksum(const ParamList& params)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& p : params) {
        feed(p.name.data(), p.name.size());
        const auto v = p.tensor.values();
        feed(v.data(), v.size_bytes());
    }
    return h;
}

std::size_t parameter_count(const ParamList& params)
{
    std::size_t n = 0;
    for (const auto& p : params)
        n += p.tensor.size();
    return n;
}

void zero_grads(ParamList& params)
{
    for (auto& p : params)
        p.tensor.zero_grad();
}

void set_trainable(ParamList& params, bool trainable)
{
    for (auto& p : params)
        p.tensor.set_requires_grad(trainable);
}

Tensor uniform_param(Rng& rng, Shape shape, double bound)
{
    auto t = Tensor::zeros(std::move(shape), true);
    for (auto& v : t.mutable_values())
        v = rng.uniform(-bound, bound);
    return t;
}

Tensor xavier_param(Rng& rng, std::size_t fan_in, std::size_t fan_out)
{
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform_param(rng, {fan_in, fan_out}, bound);
}

Tensor constant_param(Shape shape, double value)
{
    return Tensor::full(std::move(shape), value, true);
}

Linear::Linear(Rng& rng, std::size_t in, std::size_t out, bool with_bias)
    : weight(xavier_param(rng, in, out))
{
    if (with_bias)
        bias = constant_param({1, out}, 0.0);
}

Tensor Linear::operator()(const Tensor& x) const
{
    auto y = matmul(x, weight);
    return bias.defined() ? add_row(y, bias) : y;
}

void Linear::collect(ParamList& out, const std::string& prefix) const
{
    out.push_back({prefix + ".weight", weight});
    if (bias.defined())
        out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(std::size_t width)
    : gain(constant_param({1, width}, 1.0)), bias(constant_param({1, width}, 0.0))
{
}

void LayerNorm::collect(ParamList& out, const std::string& prefix) const
{
    out.push_back({prefix + ".gain", gain});
    out.push_back({prefix + ".bias", bias});
}

FeedForward::FeedForward(Rng& rng, std::size_t width, std::size_t hidden)
    : up(rng, width, hidden), down(rng, hidden, width)
{
}

void FeedForward::collect(ParamList& out, const std::string& prefix) const
{
    up.collect(out, prefix + ".up");
    down.collect(out, prefix + ".down");
}

} // namespace summer
