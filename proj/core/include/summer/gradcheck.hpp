#pragma once

#include "summer/nn.hpp"
#include "summer/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace summer {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
    double loss = 0.0;
    // Every checked scalar, flattened in parameter order.
    std::vector<double> analytic;
    std::vector<double> numeric;
};

/// Compares backward() against central differences for every scalar in
/// `params`. `loss_fn` must rebuild the graph on each call and be
/// deterministic; it is evaluated twice at the base point to verify that.
///
/// relative error = |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
GradCheckResult finite_difference_check(const std::function<Tensor()>& loss_fn, ParamList params,
                                        double eps = 1e-5);

// Scalars where |analytic - numeric| > rtol * max(|analytic|, |numeric|) + atol.
std::size_t count_mismatches(const GradCheckResult& result, double rtol, double atol);

} // namespace summer
