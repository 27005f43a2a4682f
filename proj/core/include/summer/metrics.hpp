#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace summer {

struct ClassReport {
    std::size_t label = 0;
    double accuracy = 0.0; // recall
    double precision = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct EvalReport {
    std::vector<std::vector<std::size_t>> confusion; // [true][predicted]
    std::vector<ClassReport> per_class;
    double accuracy = 0.0;
    double weighted_accuracy = 0.0;
    double weighted_f1 = 0.0;
    std::size_t samples = 0;
    std::vector<std::string> warnings;
};

/// Confusion matrix and support-weighted metrics. A class with no support
/// and no predictions gets F1 = 0 and a warning.
EvalReport compute_report(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                          std::size_t num_classes);

// {"accuracy", "w_acc", "w_f1", "per_class": [{"label", "acc", "f1", "support"}], "confusion"}
std::string report_to_json(const EvalReport& report);

} // namespace summer
