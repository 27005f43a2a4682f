#pragma once

// Sparse dynamic mixture of BiGRU experts.
//
// A gate maps the mean-pooled sequence to one weight per expert. Experts whose
// weight falls outside (mean - alpha*std, mean + alpha*std) are switched off;
// the survivors are mixed with softmax((w + g) / tau), where g is Gumbel
// noise during training and zero at evaluation.

#include "summer/config.hpp"
#include "summer/nn.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace summer {

/// One GRU direction. Gate blocks are laid out [reset | update | candidate].
struct GruCell {
    Linear input;  // d_in -> 3 d_h
    Linear hidden; // d_h -> 3 d_h
    std::size_t hidden_size = 0;

    GruCell() = default;
    GruCell(Rng& rng, std::size_t input_size, std::size_t hidden_size);

    // Hidden state for every step, initial state zero: l x d_h.
    Tensor run(const Tensor& sequence) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

/// Bidirectional GRU whose concatenated states are projected back to d_out.
struct BiGru {
    GruCell forward_cell;
    GruCell backward_cell;
    Linear projection; // 2 d_h -> d_out

    BiGru() = default;
    BiGru(Rng& rng, std::size_t input_size, std::size_t hidden_size, std::size_t output_size);

    Tensor operator()(const Tensor& sequence) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

struct ExpertBank {
    std::vector<BiGru> experts;

    ExpertBank() = default;
    ExpertBank(Rng& rng, std::size_t count, std::size_t width, std::size_t hidden_size);

    std::size_t size() const { return experts.size(); }
    std::vector<Tensor> forward(const Tensor& sequence) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

struct GateStatistics {
    double mean = 0.0;
    double stddev = 0.0; // population
    std::vector<bool> active;
};

// Strict band test; if the band is empty (std == 0) or rejects everyone,
// every expert stays active. `one_sided` only rejects low outliers.
GateStatistics gate_statistics(std::span<const double> weights, double alpha, bool one_sided = false);

// g_i = -log(-log(u_i)), u_i strictly inside (0, 1).
std::vector<double> gumbel_noise(std::span<const double> uniform_samples);

struct GateDecision {
    std::vector<double> raw_weights;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<bool> active;
    std::vector<double> routing;

    std::size_t active_count() const;
};

struct RoutingOptions {
    double tau = 0.5;
    double alpha = 2.0;
    bool one_sided = false;
};

struct Routing {
    Tensor weights; // 1 x n, differentiable
    GateDecision decision;
};

// Masks on the noiseless weights, then softmax((w + noise) / tau) over the
// active experts. `noise` may be empty (no noise).
Routing route(const Tensor& gate_weights, std::span<const double> noise, const RoutingOptions& options);

struct SdMoeOutput {
    Tensor output; // l x d_s
    GateDecision gate;
};

class SdMoe {
public:
    SdMoe() = default;
    SdMoe(Rng& rng, std::size_t experts, std::size_t width, std::size_t hidden_size);

    // In train mode the Gumbel draws come from `noise_seed`; eval mode is noiseless.
    SdMoeOutput forward(const Tensor& sequence, const RoutingOptions& options, Mode mode,
                        std::uint64_t noise_seed) const;

    const ExpertBank& bank() const { return bank_; }
    ExpertBank& bank() { return bank_; }
    const Linear& gate() const { return gate_; }
    Linear& gate() { return gate_; }

    void collect(ParamList& out, const std::string& prefix) const;

private:
    ExpertBank bank_;
    Linear gate_; // d_s -> n, zero-initialised
};

} // namespace summer
