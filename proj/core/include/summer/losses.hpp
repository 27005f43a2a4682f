#pragma once

// Distillation objective: cross-KD (teacher || student through the teacher's
// classifier), ground-truth alignment, and label smoothing.

#include "summer/tensor.hpp"

#include <cstddef>
#include <vector>

namespace summer {

// Probabilities are clamped to this floor before any logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes);

// 1 - eps on the true class, eps / (C - 1) elsewhere.
Tensor smoothed_labels(const std::vector<std::size_t>& labels, std::size_t classes, double epsilon);

// Throws ContractError unless every row sums to 1 within 1e-6.
void require_distributions(const Tensor& p, const char* what);

// sum_i sum_j t_ij log(t_ij / s_ij), divided by the batch size.
Tensor cross_kd_loss(const Tensor& p_teacher, const Tensor& p_student);

// -(1/N) sum_i log p_i[label_i]
Tensor align_loss(const Tensor& p_student, const std::vector<std::size_t>& labels);

enum class SmoothingForm {
    Standard, // -(1/N) sum gt~ log p
    Literal,  // -(1/N) sum p log gt~
};

Tensor label_smooth_loss(const Tensor& p_student, const std::vector<std::size_t>& labels, double epsilon,
                         SmoothingForm form = SmoothingForm::Standard);

struct LossWeights {
    double kappa1 = 0.4;
    double kappa2 = 0.3;
    double kappa3 = 0.3;
};

struct LossBreakdown {
    double l_cross = 0.0;
    double l_align = 0.0;
    double l_smooth = 0.0;
    double total = 0.0;
    LossWeights kappa;
};

// kappa1 * l_cross + kappa2 * l_align + kappa3 * l_smooth, evaluated in
// exactly the order ikd_total uses.
double recombine(const LossWeights& kappa, double l_cross, double l_align, double l_smooth);

struct IkdLoss {
    Tensor total;
    LossBreakdown breakdown;
};

IkdLoss ikd_total(const Tensor& l_cross, const Tensor& l_align, const Tensor& l_smooth, const LossWeights& kappa);

} // namespace summer
