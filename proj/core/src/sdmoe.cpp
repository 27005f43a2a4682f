#include "summer/sdmoe.hpp"

#include "summer/errors.hpp"
#include "summer/random.hpp"

#include <cmath>

namespace summer {

namespace {

Linear gru_linear(Rng& rng, std::size_t in, std::size_t hidden)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    Linear l;
    l.weight = uniform_param(rng, {in, 3 * hidden}, bound);
    l.bias = uniform_param(rng, {1, 3 * hidden}, bound);
    return l;
}

} // namespace

GruCell::GruCell(Rng& rng, std::size_t input_size, std::size_t hidden)
    : input(gru_linear(rng, input_size, hidden)), hidden(gru_linear(rng, hidden, hidden)), hidden_size(hidden)
{
}

Tensor GruCell::run(const Tensor& sequence) const
{
    if (sequence.rows() == 0)
        throw ContractError("GRU needs a sequence of length >= 1");
    const std::size_t h = hidden_size;
    const Tensor projected = input(sequence); // l x 3h, all steps at once
    Tensor state = Tensor::zeros({1, h});
    std::vector<Tensor> states;
    states.reserve(sequence.rows());
    for (std::size_t t = 0; t < sequence.rows(); ++t) {
        const Tensor x = slice_rows(projected, t, 1);
        const Tensor hw = hidden(state);
        const Tensor rz = sigmoid(add(slice_cols(x, 0, 2 * h), slice_cols(hw, 0, 2 * h)));
        const Tensor reset = slice_cols(rz, 0, h);
        const Tensor update = slice_cols(rz, h, h);
        const Tensor candidate = tanh(add(slice_cols(x, 2 * h, h), mul(reset, slice_cols(hw, 2 * h, h))));
        // (1 - z) * n + z * h  ==  n + z * (h - n)
        state = add(candidate, mul(update, sub(state, candidate)));
        states.push_back(state);
    }
    return concat_rows(states);
}

void GruCell::collect(ParamList& out, const std::string& prefix) const
{
    input.collect(out, prefix + ".input");
    hidden.collect(out, prefix + ".hidden");
}

BiGru::BiGru(Rng& rng, std::size_t input_size, std::size_t hidden_size, std::size_t output_size)
    : forward_cell(rng, input_size, hidden_size),
      backward_cell(rng, input_size, hidden_size),
      projection(rng, 2 * hidden_size, output_size)
{
}

Tensor BiGru::operator()(const Tensor& sequence) const
{
    const Tensor fwd = forward_cell.run(sequence);
    const Tensor bwd = reverse_rows(backward_cell.run(reverse_rows(sequence)));
    return projection(concat_cols({fwd, bwd}));
}

void BiGru::collect(ParamList& out, const std::string& prefix) const
{
    forward_cell.collect(out, prefix + ".fwd");
    backward_cell.collect(out, prefix + ".bwd");
    projection.collect(out, prefix + ".proj");
}

ExpertBank::ExpertBank(Rng& rng, std::size_t count, std::size_t width, std::size_t hidden_size)
{
    if (count == 0)
        throw ConfigError("experts must be > 0");
    experts.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        experts.emplace_back(rng, width, hidden_size, width);
}

std::vector<Tensor> ExpertBank::forward(const Tensor& sequence) const
{
    std::vector<Tensor> out;
    out.reserve(experts.size());
    for (const auto& e : experts)
        out.push_back(e(sequence));
    return out;
}

void ExpertBank::collect(ParamList& out, const std::string& prefix) const
{
    for (std::size_t i = 0; i < experts.size(); ++i)
        experts[i].collect(out, prefix + ".expert" + std::to_string(i));
}

GateStatistics gate_statistics(std::span<const double> weights, double alpha, bool one_sided)
{
    if (weights.empty())
        throw ContractError("gate_statistics needs at least one weight");
    if (!(alpha > 0.0))
        throw ParameterError("alpha must be > 0");
    GateStatistics s;
    const double n = static_cast<double>(weights.size());
    for (double w : weights)
        s.mean += w;
    s.mean /= n;
    for (double w : weights)
        s.stddev += (w - s.mean) * (w - s.mean);
    s.stddev = std::sqrt(s.stddev / n);

    s.active.assign(weights.size(), true);
    if (s.stddev == 0.0)
        return s;
    const double lo = s.mean - alpha * s.stddev;
    const double hi = s.mean + alpha * s.stddev;
    bool any = false;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        s.active[i] = lo < weights[i] && (one_sided || weights[i] < hi);
        any = any || s.active[i];
    }
    if (!any)
        s.active.assign(weights.size(), true);
    return s;
}

std::vector<double> gumbel_noise(std::span<const double> uniform_samples)
{
    std::vector<double> g;
    g.reserve(uniform_samples.size());
    for (double r : uniform_samples) {
        if (!(r > 0.0 && r < 1.0))
            throw DomainError("Gumbel noise needs samples strictly inside (0, 1)");
        g.push_back(-std::log(-std::log(r)));
    }
    return g;
}

std::size_t GateDecision::active_count() const
{
    std::size_t n = 0;
    for (bool a : active)
        n += a ? 1 : 0;
    return n;
}

Routing route(const Tensor& gate_weights, std::span<const double> noise, const RoutingOptions& options)
{
    if (!(options.tau > 0.0))
        throw ParameterError("tau must be > 0");
    const std::size_t n = gate_weights.size();
    if (!noise.empty() && noise.size() != n)
        throw DimensionError("routing noise has " + std::to_string(noise.size()) + " entries for " +
                             std::to_string(n) + " experts");

    Routing r;
    const auto raw = gate_weights.values();
    auto stats = gate_statistics(raw, options.alpha, options.one_sided);

    Tensor logits = gate_weights;
    if (!noise.empty())
        logits = add(gate_weights, Tensor::from(gate_weights.shape(), {noise.begin(), noise.end()}));
    r.weights = masked_softmax(logits, stats.active, options.tau);

    r.decision.raw_weights.assign(raw.begin(), raw.end());
    r.decision.mean = stats.mean;
    r.decision.stddev = stats.stddev;
    r.decision.active = std::move(stats.active);
    r.decision.routing.assign(r.weights.values().begin(), r.weights.values().end());
    return r;
}

SdMoe::SdMoe(Rng& rng, std::size_t experts, std::size_t width, std::size_t hidden_size)
    : bank_(rng, experts, width, hidden_size)
{
    gate_.weight = constant_param({width, experts}, 0.0);
    gate_.bias = constant_param({1, experts}, 0.0);
}

SdMoeOutput SdMoe::forward(const Tensor& sequence, const RoutingOptions& options, Mode mode,
                           std::uint64_t noise_seed) const
{
    const Tensor gate_weights = gate_(mean_rows(sequence));
    std::vector<double> noise;
    if (mode == Mode::Train) {
        Rng rng(noise_seed);
        std::vector<double> uniform(bank_.size());
        for (auto& u : uniform)
            u = rng.uniform_open();
        noise = gumbel_noise(uniform);
    }
    Routing routing = route(gate_weights, noise, options);

    // Inactive experts carry exactly zero weight and zero gradient, so only
    // the active ones are evaluated.
    std::vector<Tensor> weights, outputs;
    for (std::size_t i = 0; i < bank_.size(); ++i) {
        if (!routing.decision.active[i])
            continue;
        weights.push_back(slice_cols(routing.weights, i, 1));
        outputs.push_back(bank_.experts[i](sequence));
    }
    SdMoeOutput out;
    out.output = weighted_sum(concat_cols(weights), outputs);
    out.gate = std::move(routing.decision);
    return out;
}

void SdMoe::collect(ParamList& out, const std::string& prefix) const
{
    gate_.collect(out, prefix + ".gate");
    bank_.collect(out, prefix + ".experts");
}

} // namespace summer
