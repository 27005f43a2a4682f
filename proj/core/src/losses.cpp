#include "summer/losses.hpp"

#include "summer/errors.hpp"

#include <cmath>

namespace summer {

namespace {

void require_labels(const Tensor& p, const std::vector<std::size_t>& labels)
{
    if (labels.size() != p.rows())
        throw ContractError(std::to_string(labels.size()) + " labels for " + std::to_string(p.rows()) +
                            " predictions");
    for (auto y : labels)
        if (y >= p.cols())
            throw ContractError("label " + std::to_string(y) + " outside [0, " + std::to_string(p.cols()) + ")");
}

Tensor safe_log(const Tensor& p)
{
    return log(clamp_min(p, kProbabilityFloor));
}

} // namespace

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes)
{
    std::vector<double> values(labels.size() * classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes)
            throw ContractError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(classes) + ")");
        values[i * classes + labels[i]] = 1.0;
    }
    return Tensor::from({labels.size(), classes}, std::move(values));
}

Tensor smoothed_labels(const std::vector<std::size_t>& labels, std::size_t classes, double epsilon)
{
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ParameterError("smoothing epsilon must lie in (0, 1)");
    if (classes < 2)
        throw ParameterError("label smoothing needs at least two classes");
    const double off = epsilon / static_cast<double>(classes - 1);
    std::vector<double> values(labels.size() * classes, off);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes)
            throw ContractError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(classes) + ")");
        values[i * classes + labels[i]] = 1.0 - epsilon;
    }
    return Tensor::from({labels.size(), classes}, std::move(values));
}

void require_distributions(const Tensor& p, const char* what)
{
    const std::size_t n = p.cols();
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = p[i * n + j];
            if (!(v >= 0.0))
                throw ContractError(std::string(what) + " row " + std::to_string(i) + " has a negative entry");
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-6)
            throw ContractError(std::string(what) + " row " + std::to_string(i) + " sums to " +
                                std::to_string(total) + ", not 1");
    }
}

Tensor cross_kd_loss(const Tensor& p_teacher, const Tensor& p_student)
{
    if (p_teacher.shape() != p_student.shape())
        throw DimensionError("cross_kd_loss: teacher " + shape_string(p_teacher.shape()) + " vs student " +
                             shape_string(p_student.shape()));
    require_distributions(p_teacher, "teacher distribution");
    require_distributions(p_student, "student distribution");
    const Tensor kl = sum(mul(p_teacher, sub(safe_log(p_teacher), safe_log(p_student))));
    return affine(kl, 1.0 / static_cast<double>(p_teacher.rows()));
}

Tensor align_loss(const Tensor& p_student, const std::vector<std::size_t>& labels)
{
    require_labels(p_student, labels);
    require_distributions(p_student, "student distribution");
    const Tensor picked = sum(mul(one_hot(labels, p_student.cols()), safe_log(p_student)));
    return affine(picked, -1.0 / static_cast<double>(p_student.rows()));
}

Tensor label_smooth_loss(const Tensor& p_student, const std::vector<std::size_t>& labels, double epsilon,
                         SmoothingForm form)
{
    require_labels(p_student, labels);
    require_distributions(p_student, "student distribution");
    const Tensor soft = smoothed_labels(labels, p_student.cols(), epsilon);
    const double scale = -1.0 / static_cast<double>(p_student.rows());
    if (form == SmoothingForm::Literal)
        return affine(sum(mul(p_student, log(soft))), scale);
    return affine(sum(mul(soft, safe_log(p_student))), scale);
}

double recombine(const LossWeights& kappa, double l_cross, double l_align, double l_smooth)
{
    const double a = kappa.kappa1 * l_cross + 0.0;
    const double b = kappa.kappa2 * l_align + 0.0;
    const double c = kappa.kappa3 * l_smooth + 0.0;
    return (a + b) + c;
}

IkdLoss ikd_total(const Tensor& l_cross, const Tensor& l_align, const Tensor& l_smooth, const LossWeights& kappa)
{
    for (double k : {kappa.kappa1, kappa.kappa2, kappa.kappa3})
        if (!(k >= 0.0))
            throw ParameterError("loss weights must be >= 0");
    IkdLoss out;
    out.total = add(add(affine(l_cross, kappa.kappa1), affine(l_align, kappa.kappa2)), affine(l_smooth, kappa.kappa3));
    out.breakdown.l_cross = l_cross.item();
    out.breakdown.l_align = l_align.item();
    out.breakdown.l_smooth = l_smooth.item();
    out.breakdown.total = out.total.item();
    out.breakdown.kappa = kappa;
    return out;
}

} // namespace summer
