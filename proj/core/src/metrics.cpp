#include "summer/metrics.hpp"

#include "summer/errors.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace summer {

EvalReport compute_report(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                          std::size_t num_classes)
{
    if (labels.empty())
        throw ValidationError("cannot evaluate an empty dataset");
    if (labels.size() != predictions.size())
        throw ContractError(std::to_string(labels.size()) + " labels for " + std::to_string(predictions.size()) +
                            " predictions");

    EvalReport r;
    r.samples = labels.size();
    r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes || predictions[i] >= num_classes)
            throw ContractError("class index outside [0, " + std::to_string(num_classes) + ")");
        ++r.confusion[labels[i]][predictions[i]];
    }

    const double n = static_cast<double>(r.samples);
    std::size_t correct = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        ClassReport cr;
        cr.label = c;
        const std::size_t tp = r.confusion[c][c];
        std::size_t predicted = 0;
        for (std::size_t t = 0; t < num_classes; ++t)
            predicted += r.confusion[t][c];
        for (std::size_t p = 0; p < num_classes; ++p)
            cr.support += r.confusion[c][p];
        correct += tp;

        cr.accuracy = cr.support > 0 ? static_cast<double>(tp) / static_cast<double>(cr.support) : 0.0;
        cr.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        const double denom = cr.precision + cr.accuracy;
        cr.f1 = denom > 0.0 ? 2.0 * cr.precision * cr.accuracy / denom : 0.0;
        if (cr.support == 0 && predicted == 0) {
            r.warnings.push_back("class " + std::to_string(c) + " has no samples and no predictions; F1 set to 0");
            spdlog::warn("{}", r.warnings.back());
        }
        r.weighted_accuracy += static_cast<double>(cr.support) / n * cr.accuracy;
        r.weighted_f1 += static_cast<double>(cr.support) / n * cr.f1;
        r.per_class.push_back(cr);
    }
    r.accuracy = static_cast<double>(correct) / n;
    return r;
}

std::string report_to_json(const EvalReport& report)
{
    nlohmann::json j;
    j["accuracy"] = report.accuracy;
    j["w_acc"] = report.weighted_accuracy;
    j["w_f1"] = report.weighted_f1;
    j["per_class"] = nlohmann::json::array();
    for (const auto& c : report.per_class)
        j["per_class"].push_back({{"label", c.label}, {"acc", c.accuracy}, {"f1", c.f1}, {"support", c.support}});
    j["confusion"] = report.confusion;
    return j.dump(2);
}

} // namespace summer
