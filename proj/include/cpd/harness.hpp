#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cpd/bayes.hpp"
#include "cpd/changepoints.hpp"
#include "cpd/costs.hpp"
#include "cpd/error.hpp"
#include "cpd/metrics.hpp"
#include "cpd/parallel.hpp"
#include "cpd/search.hpp"
#include "cpd/series.hpp"

namespace cpd {

enum class Method { Pelt, Win, Bayes };

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::Pelt: return "pelt";
    case Method::Win: return "win";
    case Method::Bayes: return "bayes";
    }
    return "?";
}

inline Method parse_method(std::string_view name) {
    for (Method m : {Method::Pelt, Method::Win, Method::Bayes}) {
        if (to_string(m) == name) {
            return m;
        }
    }
    fail(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

/// One detection run: method plus every parameter it may consume.
struct DetectConfig {
    Method method = Method::Pelt;
    CostModel cost;
    double penalty = 10.0;
    std::size_t half_width = 100;
    BayesConfig bayes;
};

inline ChangePointSet detect(const TimeSeries &ts, const DetectConfig &cfg) {
    switch (cfg.method) {
    case Method::Pelt: return pelt(ts, cfg.cost, {cfg.penalty, cfg.half_width}).cps;
    case Method::Win: return win(ts, cfg.cost, {cfg.penalty, cfg.half_width});
    case Method::Bayes: return bayes_detect(ts, cfg.bayes);
    }
    return ChangePointSet(ts.size(), {});
}

/// {0}, 25 log-spaced values over [1e-3, 1e5], and the integers 0..50;
/// sorted and deduplicated.
inline std::vector<double> standard_penalty_grid() {
    std::vector<double> grid{0.0};
    for (int i = 0; i < 25; ++i) {
        grid.push_back(std::pow(10.0, -3.0 + 8.0 * i / 24.0));
    }
    for (int i = 0; i <= 50; ++i) {
        grid.push_back(static_cast<double>(i));
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

inline const std::vector<double> kStandardGammaGrid = {0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0};

inline constexpr std::string_view kSelectionRule = "max f1, then min meantime, then min ae, then max precision";

struct SweepRow {
    double param = 0.0;
    ChangePointSet cps;
    MetricsReport metrics;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::size_t best = 0;
    std::string selection_rule{kSelectionRule};

    const SweepRow &best_row() const { return rows.at(best); }
};

/// Index of the best row under the lexicographic selection rule; the
/// earliest row wins full ties.
inline std::size_t select_best(const std::vector<SweepRow> &rows) {
    require(!rows.empty(), ErrorCode::InvalidArgument, "cannot select from an empty sweep");
    auto better = [](const MetricsReport &a, const MetricsReport &b) {
        if (a.f1 != b.f1) {
            return a.f1 > b.f1;
        }
        if (a.meantime != b.meantime) {
            return a.meantime < b.meantime;
        }
        if (a.ae != b.ae) {
            return a.ae < b.ae;
        }
        return a.precision > b.precision;
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (better(rows[i].metrics, rows[best].metrics)) {
            best = i;
        }
    }
    return best;
}

struct SweepOptions {
    std::size_t margin = 0;
    double dt = 1.0;
    unsigned threads = 0;
};

namespace detail {

template <class Detect>
SweepResult sweep(const std::vector<double> &grid, const ChangePointSet &truth, const SweepOptions &opt,
                  Detect &&run) {
    require(!grid.empty(), ErrorCode::InvalidArgument, "sweep grid is empty");
    SweepResult res;
    res.rows.resize(grid.size());
    parallel_for(
        grid.size(),
        [&](std::size_t i) {
            SweepRow row;
            row.param = grid[i];
            row.cps = run(grid[i]);
            row.metrics = evaluate(row.cps, truth, opt.margin, opt.dt);
            res.rows[i] = std::move(row);
        },
        opt.threads);
    res.best = select_best(res.rows);
    return res;
}

} // namespace detail

/// One detection and evaluation per penalty (PELT or WIN).
inline SweepResult penalty_sweep(const TimeSeries &ts, const ChangePointSet &truth, const CostModel &model,
                                 Method method, const std::vector<double> &grid, const SweepOptions &opt = {},
                                 std::size_t half_width = 100) {
    require(method != Method::Bayes, ErrorCode::InvalidArgument, "penalty sweeps apply to pelt and win");
    require(truth.n() == ts.size(), ErrorCode::MismatchedLength, "truth length differs from series length");
    model.validate();
    return detail::sweep(grid, truth, opt, [&](double beta) {
        DetectConfig cfg;
        cfg.method = method;
        cfg.cost = model;
        cfg.penalty = beta;
        cfg.half_width = half_width;
        return detect(ts, cfg);
    });
}

/// One detection per regularisation constant at a fixed penalty.
inline SweepResult gamma_sweep(const TimeSeries &ts, const ChangePointSet &truth, CostKind kind,
                               const std::vector<double> &gammas, double penalty = 100.0,
                               Method method = Method::Win, const SweepOptions &opt = {},
                               std::size_t half_width = 100) {
    require(kind == CostKind::Ridge || kind == CostKind::Lasso, ErrorCode::InvalidArgument,
            "gamma sweeps apply to ridge and lasso");
    require(method != Method::Bayes, ErrorCode::InvalidArgument, "gamma sweeps apply to pelt and win");
    require(truth.n() == ts.size(), ErrorCode::MismatchedLength, "truth length differs from series length");
    return detail::sweep(gammas, truth, opt, [&](double gamma) {
        DetectConfig cfg;
        cfg.method = method;
        cfg.cost = CostModel::of(kind, gamma);
        cfg.penalty = penalty;
        cfg.half_width = half_width;
        return detect(ts, cfg);
    });
}

/// Peak selection at each threshold over one shared posterior.
inline SweepResult threshold_sweep(const TimeSeries &ts, const ChangePointSet &truth, const BayesConfig &bayes,
                                   const std::vector<double> &thresholds, const SweepOptions &opt = {}) {
    require(truth.n() == ts.size(), ErrorCode::MismatchedLength, "truth length differs from series length");
    const std::vector<double> prob = grid_posterior(ts, bayes);
    return detail::sweep(thresholds, truth, opt, [&](double thr) {
        if (prob.size() < 2) {
            return ChangePointSet(ts.size(), {});
        }
        return grid_peaks(prob, thr, bayes, ts.size());
    });
}

/// Union of per-signal predictions. Sorted points closer than or equal to
/// `merge_radius` to their neighbour form one cluster, replaced by its
/// rounded mean.
inline ChangePointSet aggregate_union(const std::vector<ChangePointSet> &predictions, std::size_t merge_radius) {
    require(!predictions.empty(), ErrorCode::InvalidArgument, "nothing to aggregate");
    const std::size_t n = predictions.front().n();
    std::vector<std::size_t> all;
    for (const auto &p : predictions) {
        require(p.n() == n, ErrorCode::MismatchedLength, "predictions differ in series length");
        all.insert(all.end(), p.intermediate().begin(), p.intermediate().end());
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> merged;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i + 1;
        double sum = static_cast<double>(all[i]);
        while (j < all.size() && all[j] - all[j - 1] <= merge_radius) {
            sum += static_cast<double>(all[j]);
            ++j;
        }
        merged.push_back(static_cast<std::size_t>(std::llround(sum / static_cast<double>(j - i))));
        i = j;
    }
    return ChangePointSet::normalised(n, std::move(merged));
}

} // namespace cpd
