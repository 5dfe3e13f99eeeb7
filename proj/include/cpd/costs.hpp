#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpd/changepoints.hpp"
#include "cpd/error.hpp"
#include "cpd/linalg.hpp"
#include "cpd/series.hpp"

namespace cpd {

enum class CostKind { L2, L1, Normal, LinReg, AR, Ridge, Lasso };

inline constexpr std::array<CostKind, 7> kAllCostKinds = {CostKind::L2,    CostKind::L1,    CostKind::Normal,
                                                          CostKind::LinReg, CostKind::AR,   CostKind::Ridge,
                                                          CostKind::Lasso};

inline std::string_view to_string(CostKind kind) {
    switch (kind) {
    case CostKind::L2: return "l2";
    case CostKind::L1: return "l1";
    case CostKind::Normal: return "normal";
    case CostKind::LinReg: return "linreg";
    case CostKind::AR: return "ar";
    case CostKind::Ridge: return "ridge";
    case CostKind::Lasso: return "lasso";
    }
    return "?";
}

inline CostKind parse_cost_kind(std::string_view name) {
    for (CostKind k : kAllCostKinds) {
        if (to_string(k) == name) {
            return k;
        }
    }
    fail(ErrorCode::InvalidArgument, "unknown cost kind '" + std::string(name) + "'");
}

/// Variance floor applied by c_Normal before taking the logarithm.
inline constexpr double kVarianceFloor = 1e-12;
/// Diagonal jitter for the autoregressive normal equations.
inline constexpr double kArJitter = 1e-10;

/// Selects one segment cost and its parameters. `min_size == 0` means the
/// smallest length for which the cost is defined.
struct CostModel {
    CostKind kind = CostKind::L2;
    double gamma = 1.0;
    std::size_t lags = 4;
    std::size_t min_size = 0;

    static CostModel of(CostKind kind, double gamma = 1.0, std::size_t lags = 4) {
        CostModel m;
        m.kind = kind;
        m.gamma = gamma;
        m.lags = lags;
        return m;
    }

    std::size_t smallest_admissible_size() const {
        switch (kind) {
        case CostKind::L2:
        case CostKind::L1:
        case CostKind::Normal: return 2;
        case CostKind::LinReg:
        case CostKind::Ridge:
        case CostKind::Lasso: return 3;
        case CostKind::AR: return lags + 2;
        }
        return 2;
    }

    std::size_t effective_min_size() const { return min_size == 0 ? smallest_admissible_size() : min_size; }

    void validate() const {
        require(std::isfinite(gamma) && gamma >= 0.0, ErrorCode::InvalidArgument, "gamma must be >= 0");
        require(kind != CostKind::AR || lags >= 1, ErrorCode::InvalidArgument, "AR cost needs at least one lag");
        require(effective_min_size() >= smallest_admissible_size(), ErrorCode::InvalidArgument,
                "min_size below the smallest admissible segment for " + std::string(to_string(kind)));
    }
};

/// Result of the single-covariate Lasso fit on one segment, in the
/// normalised in-segment time coordinate x = (t - a) / (b - a).
struct LassoSegmentFit {
    double intercept = 0.0;
    double slope = 0.0;
    double objective = 0.0;
    std::size_t sweeps = 0;
    bool converged = false;
};

/// Precomputed statistics for one series and cost model. Evaluation is
/// const and thread-safe; every closed-form cost is O(1) per segment.
///
/// Segments are half-open [a, b) in 0-based sample indices.
class SegmentCost {
public:
    SegmentCost(CostModel model, std::span<const double> y) : model_(model), y_(y.begin(), y.end()) {
        model_.validate();
        const std::size_t n = y_.size();
        // Costs are shift invariant; centring keeps the prefix sums small.
        const double shift = n ? std::accumulate(y_.begin(), y_.end(), 0.0) / static_cast<double>(n) : 0.0;
        centred_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            centred_[i] = y_[i] - shift;
        }
        sum_.assign(n + 1, 0.0L);
        sum_sq_.assign(n + 1, 0.0L);
        sum_ty_.assign(n + 1, 0.0L);
        for (std::size_t i = 0; i < n; ++i) {
            const long double v = centred_[i];
            sum_[i + 1] = sum_[i] + v;
            sum_sq_[i + 1] = sum_sq_[i] + v * v;
            sum_ty_[i + 1] = sum_ty_[i] + static_cast<long double>(i) * v;
        }
        if (model_.kind == CostKind::AR) {
            lag_products_.assign(model_.lags + 1, std::vector<long double>(n + 1, 0.0L));
            for (std::size_t d = 0; d <= model_.lags; ++d) {
                auto &acc = lag_products_[d];
                for (std::size_t s = 0; s < n; ++s) {
                    const long double term =
                        s >= d ? static_cast<long double>(centred_[s]) * centred_[s - d] : 0.0L;
                    acc[s + 1] = acc[s] + term;
                }
            }
        }
    }

    const CostModel &model() const noexcept { return model_; }
    std::size_t size() const noexcept { return y_.size(); }
    std::size_t min_size() const { return model_.effective_min_size(); }

    /// Unchecked evaluation used by the searches. c_Normal applies the
    /// variance floor silently here.
    double operator()(std::size_t a, std::size_t b) const {
        switch (model_.kind) {
        case CostKind::L2: return l2(a, b);
        case CostKind::L1: return l1(a, b);
        case CostKind::Normal: return normal(a, b);
        case CostKind::LinReg: return ridge(a, b, 0.0);
        case CostKind::Ridge: return ridge(a, b, model_.gamma);
        case CostKind::Lasso: return lasso_fit(a, b, 1e-8, 1000).objective;
        case CostKind::AR: return ar(a, b);
        }
        return 0.0;
    }

    /// Evaluation with every precondition and degeneracy check.
    double checked(std::size_t a, std::size_t b) const {
        if (!(a < b && b <= y_.size())) {
            fail(ErrorCode::IndexOutOfRange,
                 "segment [" + std::to_string(a) + ", " + std::to_string(b) + ") outside the series", b);
        }
        if (b - a < min_size()) {
            fail(ErrorCode::SegmentTooShort,
                 "segment of length " + std::to_string(b - a) + " below min_size " + std::to_string(min_size()),
                 b - a);
        }
        if (model_.kind == CostKind::Normal) {
            const double var = l2(a, b) / static_cast<double>(b - a);
            if (var < kVarianceFloor) {
                fail(ErrorCode::DegenerateSegment, "segment variance below the c_Normal floor");
            }
        }
        if (model_.kind == CostKind::Lasso) {
            const auto fit = lasso_fit(a, b, 1e-8, 1000);
            if (!fit.converged) {
                fail(ErrorCode::NoConvergence,
                     "lasso coordinate descent did not converge; best objective " + std::to_string(fit.objective),
                     fit.sweeps);
            }
            return fit.objective;
        }
        return (*this)(a, b);
    }

    double l2(std::size_t a, std::size_t b) const {
        const long double m = static_cast<long double>(b - a);
        const long double s = sum_[b] - sum_[a];
        const long double ss = sum_sq_[b] - sum_sq_[a];
        return std::max(0.0, static_cast<double>(ss - s * s / m));
    }

    double l1(std::size_t a, std::size_t b) const {
        thread_local std::vector<double> scratch;
        scratch.assign(y_.begin() + static_cast<std::ptrdiff_t>(a), y_.begin() + static_cast<std::ptrdiff_t>(b));
        // Lower median for even lengths.
        const auto mid = scratch.begin() + static_cast<std::ptrdiff_t>((scratch.size() - 1) / 2);
        std::nth_element(scratch.begin(), mid, scratch.end());
        const double median = *mid;
        double total = 0.0;
        for (std::size_t t = a; t < b; ++t) {
            total += std::abs(y_[t] - median);
        }
        return total;
    }

    double normal(std::size_t a, std::size_t b) const {
        const double m = static_cast<double>(b - a);
        const double rss = l2(a, b);
        const double var = std::max(rss / m, kVarianceFloor);
        return m * std::log(var) + rss / var;
    }

    /// Centred regression statistics in the x = (t - a)/(b - a) coordinate.
    struct RegressionStats {
        double sxx;
        double sxy;
        double syy;
        double mean_x;
        double mean_y;
    };

    RegressionStats regression_stats(std::size_t a, std::size_t b) const {
        const long double m = static_cast<long double>(b - a);
        const long double sy = sum_[b] - sum_[a];
        const long double syy = sum_sq_[b] - sum_sq_[a] - sy * sy / m;
        const long double suy = (sum_ty_[b] - sum_ty_[a]) - static_cast<long double>(a) * sy;
        const long double mean_u = (m - 1.0L) / 2.0L;
        const long double suu = m * (m * m - 1.0L) / 12.0L;
        const long double suy_c = suy - mean_u * sy;
        RegressionStats st{};
        st.sxx = static_cast<double>(suu / (m * m));
        st.sxy = static_cast<double>(suy_c / m);
        st.syy = static_cast<double>(std::max(0.0L, syy));
        st.mean_x = static_cast<double>(mean_u / m);
        return st;
    }

    /// Ridge objective with the intercept unpenalised; gamma = 0 is OLS.
    double ridge(std::size_t a, std::size_t b, double gamma) const {
        const auto st = regression_stats(a, b);
        return std::max(0.0, st.syy - st.sxy * st.sxy / (st.sxx + gamma));
    }

    LassoSegmentFit lasso_fit(std::size_t a, std::size_t b, double tol, std::size_t max_sweeps) const {
        const auto st = regression_stats(a, b);
        linalg::Matrix gram(1);
        gram(0, 0) = st.sxx;
        const auto cd = linalg::lasso_coordinate_descent(gram, {st.sxy}, st.syy, model_.gamma, tol, max_sweeps);
        LassoSegmentFit fit;
        fit.slope = cd.coef[0];
        fit.objective = std::max(0.0, cd.objective);
        fit.sweeps = cd.sweeps;
        fit.converged = cd.converged;
        double mean_y = 0.0;
        for (std::size_t t = a; t < b; ++t) {
            mean_y += y_[t];
        }
        mean_y /= static_cast<double>(b - a);
        fit.intercept = mean_y - fit.slope * st.mean_x;
        return fit;
    }

    /// AR(p) residual sum of squares. Responses are t in [a + p, b); the lags
    /// are drawn from inside the segment only.
    double ar(std::size_t a, std::size_t b) const {
        const std::size_t p = model_.lags;
        const std::size_t r = b - a - p;
        const long double rl = static_cast<long double>(r);
        // Sum of y_{t-i} over the response window, for i = 0..p.
        std::vector<long double> s(p + 1);
        for (std::size_t i = 0; i <= p; ++i) {
            s[i] = sum_[b - i] - sum_[a + p - i];
        }
        auto cross = [&](std::size_t i, std::size_t j) {
            if (i > j) {
                std::swap(i, j);
            }
            const auto &lp = lag_products_[j - i];
            return lp[b - i] - lp[a + p - i] - s[i] * s[j] / rl;
        };
        linalg::Matrix gram(p);
        std::vector<double> xty(p);
        for (std::size_t i = 1; i <= p; ++i) {
            xty[i - 1] = static_cast<double>(cross(0, i));
            for (std::size_t j = i; j <= p; ++j) {
                const double c = static_cast<double>(cross(i, j));
                gram(i - 1, j - 1) = c;
                gram(j - 1, i - 1) = c;
            }
        }
        const double yy = static_cast<double>(std::max(0.0L, cross(0, 0)));
        std::vector<double> coef;
        if (!linalg::cholesky_solve(gram, xty, kArJitter, coef)) {
            return yy;
        }
        return std::clamp(linalg::quadratic_objective(gram, xty, yy, coef), 0.0, yy);
    }

private:
    CostModel model_;
    std::vector<double> y_;
    std::vector<double> centred_;
    std::vector<long double> sum_;
    std::vector<long double> sum_sq_;
    std::vector<long double> sum_ty_;
    std::vector<std::vector<long double>> lag_products_;
};

namespace detail {

inline SegmentCost slice_cost(const CostModel &model, const TimeSeries &ts, std::size_t a, std::size_t b) {
    if (!(a < b && b <= ts.size())) {
        fail(ErrorCode::IndexOutOfRange,
             "segment [" + std::to_string(a) + ", " + std::to_string(b) + ") outside the series", b);
    }
    return SegmentCost(model, ts.values().subspan(a, b - a));
}

} // namespace detail

/// Cost of y[a, b) under `model`, with every precondition checked.
inline double segment_cost(const CostModel &model, const TimeSeries &ts, std::size_t a, std::size_t b) {
    const auto cost = detail::slice_cost(model, ts, a, b);
    return cost.checked(0, b - a);
}

inline double cost_l2(const TimeSeries &ts, std::size_t a, std::size_t b) {
    return segment_cost(CostModel::of(CostKind::L2), ts, a, b);
}

inline double cost_l1(const TimeSeries &ts, std::size_t a, std::size_t b) {
    return segment_cost(CostModel::of(CostKind::L1), ts, a, b);
}

inline double cost_normal(const TimeSeries &ts, std::size_t a, std::size_t b) {
    return segment_cost(CostModel::of(CostKind::Normal), ts, a, b);
}

inline double cost_linreg(const TimeSeries &ts, std::size_t a, std::size_t b) {
    return segment_cost(CostModel::of(CostKind::LinReg), ts, a, b);
}

inline double cost_ar(const TimeSeries &ts, std::size_t a, std::size_t b, std::size_t lags = 4) {
    return segment_cost(CostModel::of(CostKind::AR, 1.0, lags), ts, a, b);
}

inline double cost_ridge(const TimeSeries &ts, std::size_t a, std::size_t b, double gamma = 1.0) {
    return segment_cost(CostModel::of(CostKind::Ridge, gamma), ts, a, b);
}

inline double cost_lasso(const TimeSeries &ts, std::size_t a, std::size_t b, double gamma = 1.0) {
    return segment_cost(CostModel::of(CostKind::Lasso, gamma), ts, a, b);
}

/// Lasso fit on y[a, b) exposing the coefficients and convergence state.
inline LassoSegmentFit lasso_segment_fit(const TimeSeries &ts, std::size_t a, std::size_t b, double gamma,
                                         double tol = 1e-8, std::size_t max_sweeps = 1000) {
    const auto cost = detail::slice_cost(CostModel::of(CostKind::Lasso, gamma), ts, a, b);
    require(b - a >= 3, ErrorCode::SegmentTooShort, "lasso segment needs at least 3 samples");
    return cost.lasso_fit(0, b - a, tol, max_sweeps);
}

/// Sum of segment costs over the segmentation defined by `cps`.
inline double sum_of_costs(const CostModel &model, const TimeSeries &ts, const ChangePointSet &cps) {
    require(cps.n() == ts.size(), ErrorCode::MismatchedLength, "change point set length differs from series");
    const SegmentCost cost(model, ts.values());
    const auto bounds = cps.boundaries();
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < bounds.size(); ++j) {
        total += cost.checked(bounds[j], bounds[j + 1]);
    }
    return total;
}

} // namespace cpd
