#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "netsight/dataset.hpp"
#include "netsight/error.hpp"

namespace netsight {

/// Counts with abnormal (label 1) as the positive class.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    [[nodiscard]] std::size_t total() const noexcept { return tp + fp + tn + fn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

[[nodiscard]] inline ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> truths) {
    if (predictions.size() != truths.size()) throw ContractError("confusion: length mismatch");
    if (predictions.empty()) throw DataError("confusion: no samples");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool p = predictions[i] == Label::abnormal;
        const bool t = truths[i] == Label::abnormal;
        if (p && t) ++cm.tp;
        else if (p) ++cm.fp;
        else if (t) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

struct MetricsReport {
    double f1 = 0.0;
    double accuracy = 0.0;
    double bacc = 0.0;
    double mcc = 0.0;
    double tpr = 0.0;
    double tnr = 0.0;
    double fpr = 0.0;

    bool operator==(const MetricsReport&) const = default;
};

namespace detail {
inline double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace detail

/// Any 0/0 ratio is taken as 0.
[[nodiscard]] inline MetricsReport compute_metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw DataError("compute_metrics: empty confusion matrix");
    const auto tp = static_cast<double>(cm.tp);
    const auto fp = static_cast<double>(cm.fp);
    const auto tn = static_cast<double>(cm.tn);
    const auto fn = static_cast<double>(cm.fn);
    MetricsReport m;
    m.f1 = detail::ratio(2.0 * tp, 2.0 * tp + fp + fn);
    m.accuracy = (tp + tn) / static_cast<double>(cm.total());
    m.tpr = detail::ratio(tp, tp + fn);
    m.tnr = detail::ratio(tn, tn + fp);
    m.fpr = detail::ratio(fp, fp + tn);
    m.bacc = 0.5 * (m.tpr + m.tnr);
    m.mcc = detail::ratio(tp * tn - fp * fn, std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)));
    return m;
}

}  // namespace netsight
