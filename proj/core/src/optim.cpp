#include "summer/optim.hpp"

#include "summer/errors.hpp"

#include <cmath>

namespace summer {

void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state, const AdamOptions& options)
{
    if (param.size() != grad.size())
        throw ContractError("adam_step: parameter has " + std::to_string(param.size()) + " entries, gradient " +
                            std::to_string(grad.size()));
    if (state.m.empty()) {
        state.m.assign(param.size(), 0.0);
        state.v.assign(param.size(), 0.0);
    }
    if (state.m.size() != param.size())
        throw ContractError("adam_step: optimizer state does not match the parameter");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(options.beta1, t);
    const double correction2 = 1.0 - std::pow(options.beta2, t);
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        state.m[i] = options.beta1 * state.m[i] + (1.0 - options.beta1) * g;
        state.v[i] = options.beta2 * state.v[i] + (1.0 - options.beta2) * g * g;
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        if (options.weight_decay != 0.0)
            param[i] -= options.lr * options.weight_decay * param[i];
        param[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
}

Adam::Adam(ParamList params, AdamOptions options)
    : params_(std::move(params)), options_(options), state_(params_.size())
{
}

void Adam::step()
{
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = params_[k].tensor;
        if (!p.has_grad())
            continue;
        adam_step(p.mutable_values(), p.grad(), state_[k], options_);
    }
    zero_grad();
}

void Adam::zero_grad()
{
    zero_grads(params_);
}

} // namespace summer
