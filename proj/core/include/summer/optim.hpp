#pragma once

#include "summer/nn.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace summer {

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0; // decoupled: p -= lr * weight_decay * p
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
};

// One bias-corrected Adam update in place.
void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state, const AdamOptions& options);

class Adam {
public:
    Adam(ParamList params, AdamOptions options);

    // Updates every parameter that received a gradient, then clears grads.
    void step();
    void zero_grad();

    const AdamOptions& options() const { return options_; }
    const ParamList& params() const { return params_; }

private:
    ParamList params_;
    AdamOptions options_;
    std::vector<AdamState> state_;
};

} // namespace summer
