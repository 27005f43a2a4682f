#include "summer/gradcheck.hpp"

#include "summer/errors.hpp"

#include <algorithm>
#include <cmath>

namespace summer {

GradCheckResult finite_difference_check(const std::function<Tensor()>& loss_fn, ParamList params,
                                        double eps)
{
    if (!(eps >= 1e-7 && eps <= 1e-4))
        throw ParameterError("finite-difference eps must lie in [1e-7, 1e-4]");

    zero_grads(params);
    const Tensor loss = loss_fn();
    const double base = loss.item();
    backward(loss);

    if (loss_fn().item() != base)
        throw ContractError("loss function is not deterministic; fix every noise seed before checking gradients");

    GradCheckResult result;
    result.loss = base;
    for (auto& p : params) {
        std::vector<double> analytic(p.tensor.size(), 0.0);
        if (p.tensor.has_grad())
            std::copy(p.tensor.grad().begin(), p.tensor.grad().end(), analytic.begin());

        auto values = p.tensor.mutable_values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double original = values[i];
            values[i] = original + eps;
            const double up = loss_fn().item();
            values[i] = original - eps;
            const double down = loss_fn().item();
            values[i] = original;

            const double numeric = (up - down) / (2.0 * eps);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
            const double rel = std::abs(analytic[i] - numeric) / denom;
            ++result.checked;
            result.analytic.push_back(analytic[i]);
            result.numeric.push_back(numeric);
            if (rel > result.max_relative_error || result.checked == 1) {
                result.max_relative_error = rel;
                result.worst_param = p.name;
                result.worst_index = i;
                result.worst_analytic = analytic[i];
                result.worst_numeric = numeric;
            }
        }
    }
    zero_grads(params);
    return result;
}

std::size_t count_mismatches(const GradCheckResult& result, double rtol, double atol)
{
    std::size_t count = 0;
    for (std::size_t i = 0; i < result.analytic.size(); ++i) {
        const double a = result.analytic[i], n = result.numeric[i];
        if (std::abs(a - n) > rtol * std::max(std::abs(a), std::abs(n)) + atol)
            ++count;
    }
    return count;
}

} // namespace summer
