#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "cpd/changepoints.hpp"
#include "cpd/costs.hpp"
#include "cpd/error.hpp"
#include "cpd/peaks.hpp"
#include "cpd/series.hpp"

namespace cpd {

struct SearchConfig {
    double penalty = 0.0;
    std::size_t half_width = 100;

    void validate(const CostModel &model) const {
        require(std::isfinite(penalty) && penalty >= 0.0, ErrorCode::InvalidArgument, "penalty must be >= 0");
        require(half_width >= model.effective_min_size(), ErrorCode::InvalidArgument,
                "half_width must be at least min_size");
    }
};

struct SearchResult {
    ChangePointSet cps;
    double objective = 0.0;
};

/// Largest cost evaluated by the DP oracle before it refuses the input.
inline constexpr std::size_t kOracleMaxLength = 2000;

namespace detail {

inline ChangePointSet backtrack(const std::vector<std::size_t> &last, std::size_t n) {
    std::vector<std::size_t> points;
    for (std::size_t t = last[n]; t > 0; t = last[t]) {
        points.push_back(t);
    }
    std::reverse(points.begin(), points.end());
    return ChangePointSet(n, std::move(points));
}

inline double prune_tolerance(double f) { return 1e-9 * std::max(1.0, std::abs(f)); }

} // namespace detail

/// Exact penalised optimal partition with PELT pruning.
///
/// F[0] = -penalty and F[t] = min_s F[s] + c(s, t) + penalty over admissible
/// last change points s. A candidate s found dominated at time t is only
/// discarded once every later end point T >= t + min_size can split at t,
/// which keeps the pruning valid under a minimum segment length. On equal
/// objectives the smaller s wins.
inline SearchResult pelt(const TimeSeries &ts, const CostModel &model, const SearchConfig &cfg) {
    model.validate();
    require(std::isfinite(cfg.penalty) && cfg.penalty >= 0.0, ErrorCode::InvalidArgument, "penalty must be >= 0");
    const std::size_t n = ts.size();
    const std::size_t m = model.effective_min_size();
    require(n >= 2 * m, ErrorCode::SeriesTooShort, "series shorter than twice the minimum segment length");
    const SegmentCost cost(model, ts.values());
    const double inf = std::numeric_limits<double>::infinity();
    const double beta = cfg.penalty;

    std::vector<double> f(n + 1, inf);
    std::vector<std::size_t> last(n + 1, 0);
    f[0] = -beta;

    struct Candidate {
        std::size_t s;
        std::size_t expires;
    };
    constexpr std::size_t alive = std::numeric_limits<std::size_t>::max();
    std::vector<Candidate> cands{{0, alive}};
    std::vector<double> value;

    for (std::size_t t = m; t <= n; ++t) {
        if (t >= 2 * m) {
            cands.push_back({t - m, alive});
        }
        std::erase_if(cands, [t](const Candidate &c) { return c.expires <= t; });
        value.resize(cands.size());
        double best = inf;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            value[i] = f[cands[i].s] + cost(cands[i].s, t);
            const double total = value[i] + beta;
            if (total < best) {
                best = total;
                arg = cands[i].s;
            }
        }
        f[t] = best;
        last[t] = arg;
        const double bound = best + detail::prune_tolerance(best);
        for (std::size_t i = 0; i < cands.size(); ++i) {
            if (cands[i].expires == alive && value[i] > bound) {
                cands[i].expires = t + m;
            }
        }
    }
    return {detail::backtrack(last, n), f[n]};
}

/// Unpruned optimal-partition dynamic program; the reference for `pelt`.
inline SearchResult dp_oracle(const TimeSeries &ts, const CostModel &model, double penalty) {
    model.validate();
    require(std::isfinite(penalty) && penalty >= 0.0, ErrorCode::InvalidArgument, "penalty must be >= 0");
    const std::size_t n = ts.size();
    require(n <= kOracleMaxLength, ErrorCode::SeriesTooLong, "dp_oracle is limited to 2000 samples");
    const std::size_t m = model.effective_min_size();
    require(n >= m, ErrorCode::SeriesTooShort, "series shorter than the minimum segment length");
    const SegmentCost cost(model, ts.values());
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> f(n + 1, inf);
    std::vector<std::size_t> last(n + 1, 0);
    f[0] = -penalty;
    for (std::size_t t = m; t <= n; ++t) {
        double best = inf;
        std::size_t arg = 0;
        for (std::size_t s = 0; s + m <= t; s = (s == 0 ? m : s + 1)) {
            const double total = f[s] + cost(s, t) + penalty;
            if (total < best) {
                best = total;
                arg = s;
            }
        }
        f[t] = best;
        last[t] = arg;
    }
    return {detail::backtrack(last, n), f[n]};
}

/// Disc(t) = c(t-w, t+w) - c(t-w, t) - c(t, t+w) for t in [w, n-w]; entry i
/// corresponds to t = w + i.
inline std::vector<double> discrepancy(const TimeSeries &ts, const CostModel &model, std::size_t half_width) {
    model.validate();
    const std::size_t n = ts.size();
    const std::size_t w = half_width;
    require(w >= model.effective_min_size(), ErrorCode::InvalidArgument, "half_width must be at least min_size");
    require(n >= 2 * w, ErrorCode::SeriesTooShort, "series shorter than two window half-widths");
    const SegmentCost cost(model, ts.values());
    std::vector<double> disc;
    disc.reserve(n - 2 * w + 1);
    for (std::size_t t = w; t + w <= n; ++t) {
        disc.push_back(cost(t - w, t + w) - cost(t - w, t) - cost(t, t + w));
    }
    return disc;
}

/// Window-sliding search: peaks of the discrepancy above the penalty, at
/// least `half_width` apart.
inline ChangePointSet win(const TimeSeries &ts, const CostModel &model, const SearchConfig &cfg) {
    cfg.validate(model);
    const auto disc = discrepancy(ts, model, cfg.half_width);
    std::vector<std::size_t> points = find_peaks(disc, cfg.penalty, cfg.half_width);
    for (auto &p : points) {
        p += cfg.half_width;
    }
    return ChangePointSet(ts.size(), std::move(points));
}

} // namespace cpd
