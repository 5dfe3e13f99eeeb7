#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "cpd/changepoints.hpp"
#include "cpd/error.hpp"

namespace cpd {

struct MetricsReport {
    std::size_t k_pred = 0; ///< includes the artificial endpoint
    std::size_t ae = 0;
    double meantime = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double rand_index = 0.0;
    std::size_t margin = 0;
};

inline void require_same_n(const ChangePointSet &pred, const ChangePointSet &truth) {
    require(pred.n() == truth.n(), ErrorCode::MismatchedLength, "prediction and truth differ in series length");
}

/// |K_pred - K_true| with endpoint-inclusive counts.
inline std::size_t annotation_error(const ChangePointSet &pred, const ChangePointSet &truth) {
    require_same_n(pred, truth);
    const std::size_t a = pred.k_pred();
    const std::size_t b = truth.k_pred();
    return a > b ? a - b : b - a;
}

/// Mean over predicted points of the distance to the nearest true point.
/// Returns 0 for an empty prediction or empty truth.
inline double meantime(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
    if (pred.empty() || truth.empty()) {
        return 0.0;
    }
    std::vector<std::size_t> sorted(truth.begin(), truth.end());
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0;
    for (std::size_t p : pred) {
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), p);
        std::size_t best = std::numeric_limits<std::size_t>::max();
        if (it != sorted.end()) {
            best = *it - p;
        }
        if (it != sorted.begin()) {
            best = std::min(best, p - *std::prev(it));
        }
        total += static_cast<double>(best);
    }
    return total / static_cast<double>(pred.size());
}

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    std::size_t true_positives = 0;
};

/// True positives are the true points with some prediction strictly closer
/// than `margin`. Precision is capped at 1 for the rare case of one
/// prediction covering two true points.
inline PrecisionRecall precision_recall(std::span<const std::size_t> pred, std::span<const std::size_t> truth,
                                        std::size_t margin) {
    PrecisionRecall out;
    if (pred.empty() || truth.empty()) {
        return out;
    }
    std::vector<std::size_t> sorted(pred.begin(), pred.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t t : truth) {
        // First prediction inside the open interval (t - margin, t + margin).
        const auto it = t >= margin ? std::upper_bound(sorted.begin(), sorted.end(), t - margin) : sorted.begin();
        if (it != sorted.end() && *it < t + margin) {
            ++out.true_positives;
        }
    }
    out.precision = std::min(1.0, static_cast<double>(out.true_positives) / static_cast<double>(pred.size()));
    out.recall = static_cast<double>(out.true_positives) / static_cast<double>(truth.size());
    return out;
}

inline double f1(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

namespace detail {

inline std::int64_t pairs(std::int64_t m) { return m * (m - 1) / 2; }

} // namespace detail

/// Fraction of sample pairs on which the two segmentations agree, from the
/// segment boundaries in O(K_pred + K_true).
inline double rand_index(const ChangePointSet &pred, const ChangePointSet &truth) {
    require_same_n(pred, truth);
    const std::size_t n = pred.n();
    require(n >= 2, ErrorCode::SeriesTooShort, "rand index needs n >= 2");
    const auto a = pred.boundaries();
    const auto b = truth.boundaries();
    std::int64_t same_a = 0;
    std::int64_t same_b = 0;
    std::int64_t same_both = 0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        same_a += detail::pairs(static_cast<std::int64_t>(a[i + 1] - a[i]));
    }
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
        same_b += detail::pairs(static_cast<std::int64_t>(b[i + 1] - b[i]));
    }
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t start = 0;
    while (start < n) {
        const std::size_t stop = std::min(a[i + 1], b[j + 1]);
        same_both += detail::pairs(static_cast<std::int64_t>(stop - start));
        start = stop;
        if (a[i + 1] == stop) {
            ++i;
        }
        if (b[j + 1] == stop) {
            ++j;
        }
    }
    const std::int64_t total = detail::pairs(static_cast<std::int64_t>(n));
    const std::int64_t disagree = same_a + same_b - 2 * same_both;
    return static_cast<double>(total - disagree) / static_cast<double>(total);
}

/// Margin in samples for a percentage of the series length.
inline std::size_t margin_from_percent(std::size_t n, double pct) {
    require(pct >= 0.0, ErrorCode::InvalidArgument, "margin percentage must be >= 0");
    return static_cast<std::size_t>(std::llround(static_cast<double>(n) * pct / 100.0));
}

/// Full report. The endpoint n is a member of both sets; meantime is scaled
/// by `dt`.
inline MetricsReport evaluate(const ChangePointSet &pred, const ChangePointSet &truth, std::size_t margin,
                              double dt = 1.0) {
    require_same_n(pred, truth);
    const auto p = pred.with_endpoint();
    const auto t = truth.with_endpoint();
    MetricsReport r;
    r.k_pred = pred.k_pred();
    r.ae = annotation_error(pred, truth);
    r.meantime = meantime(p, t) * dt;
    const auto pr = precision_recall(p, t, margin);
    r.precision = pr.precision;
    r.recall = pr.recall;
    r.f1 = f1(pr.precision, pr.recall);
    r.rand_index = rand_index(pred, truth);
    r.margin = margin;
    return r;
}

} // namespace cpd
