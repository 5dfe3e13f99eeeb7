#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpd/changepoints.hpp"
#include "cpd/error.hpp"
#include "cpd/peaks.hpp"
#include "cpd/series.hpp"

namespace cpd {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
    if (a < b) {
        std::swap(a, b);
    }
    if (b == kNegInf) {
        return a;
    }
    return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> xs) {
    double hi = kNegInf;
    for (double x : xs) {
        hi = std::max(hi, x);
    }
    if (hi == kNegInf) {
        return kNegInf;
    }
    double acc = 0.0;
    for (double x : xs) {
        acc += std::exp(x - hi);
    }
    return hi + std::log(acc);
}

/// Normal-Inverse-Gamma prior on a segment's (mean, variance).
struct NigPrior {
    double mu0 = 0.0;
    double kappa0 = 0.1;
    double alpha0 = 1.0;
    double beta0 = 1.0;

    void validate() const {
        require(std::isfinite(mu0), ErrorCode::InvalidArgument, "mu0 must be finite");
        require(kappa0 > 0.0 && alpha0 > 0.0 && beta0 > 0.0, ErrorCode::InvalidArgument,
                "kappa0, alpha0 and beta0 must be positive");
    }
};

/// Log marginal likelihood of y[a, b) under a Gaussian likelihood with a
/// NIG prior, in O(1) per segment from prefix sums.
class SegmentMarginal {
public:
    SegmentMarginal(std::span<const double> y, NigPrior prior) : prior_(prior) {
        prior_.validate();
        sum_.assign(y.size() + 1, 0.0L);
        sum_sq_.assign(y.size() + 1, 0.0L);
        for (std::size_t i = 0; i < y.size(); ++i) {
            sum_[i + 1] = sum_[i] + y[i];
            sum_sq_[i + 1] = sum_sq_[i] + static_cast<long double>(y[i]) * y[i];
        }
        const double a0 = prior_.alpha0;
        const_term_ = -std::lgamma(a0) + a0 * std::log(prior_.beta0);
    }

    std::size_t size() const noexcept { return sum_.size() - 1; }
    const NigPrior &prior() const noexcept { return prior_; }

    double operator()(std::size_t a, std::size_t b) const {
        const double m = static_cast<double>(b - a);
        const long double s = sum_[b] - sum_[a];
        const long double mean = s / static_cast<long double>(m);
        const double scatter = static_cast<double>(std::max(0.0L, (sum_sq_[b] - sum_sq_[a]) - s * mean));
        const double dev = static_cast<double>(mean) - prior_.mu0;
        const double kn = prior_.kappa0 + m;
        const double an = prior_.alpha0 + 0.5 * m;
        const double bn = prior_.beta0 + 0.5 * scatter + prior_.kappa0 * m * dev * dev / (2.0 * kn);
        return const_term_ + std::lgamma(an) - an * std::log(bn) + 0.5 * std::log(prior_.kappa0 / kn) -
               0.5 * m * std::log(2.0 * std::numbers::pi);
    }

private:
    NigPrior prior_;
    std::vector<long double> sum_;
    std::vector<long double> sum_sq_;
    double const_term_ = 0.0;
};

/// log P(t, s) for the 1-based inclusive sample range t..s.
inline double seg_marginal(const TimeSeries &ts, std::size_t t, std::size_t s, const NigPrior &prior = {}) {
    if (!(1 <= t && t <= s && s <= ts.size())) {
        fail(ErrorCode::IndexOutOfRange, "segment bounds must satisfy 1 <= t <= s <= n", s);
    }
    const SegmentMarginal marginal(ts.values().subspan(t - 1, s - t + 1), prior);
    return marginal(0, s - t + 1);
}

enum class PriorKind { Flat, Geometric, NegativeBinomial };

inline std::string_view to_string(PriorKind kind) {
    switch (kind) {
    case PriorKind::Flat: return "flat";
    case PriorKind::Geometric: return "geometric";
    case PriorKind::NegativeBinomial: return "negbin";
    }
    return "?";
}

inline PriorKind parse_prior_kind(std::string_view name) {
    for (PriorKind k : {PriorKind::Flat, PriorKind::Geometric, PriorKind::NegativeBinomial}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    fail(ErrorCode::InvalidArgument, "unknown prior '" + std::string(name) + "'");
}

/// Point-process prior on the gap d >= 1 between consecutive change points.
struct DistancePrior {
    PriorKind kind = PriorKind::Flat;
    double p = 0.01;
    double r = 2.0;

    static DistancePrior flat() { return {}; }
    static DistancePrior geometric(double p) { return {PriorKind::Geometric, p, 1.0}; }
    static DistancePrior negative_binomial(double r, double p) { return {PriorKind::NegativeBinomial, p, r}; }

    void validate() const {
        if (kind != PriorKind::Flat) {
            require(p > 0.0 && p < 1.0, ErrorCode::InvalidArgument, "prior p must lie in (0, 1)");
        }
        if (kind == PriorKind::NegativeBinomial) {
            require(r > 0.0, ErrorCode::InvalidArgument, "negative binomial r must be positive");
        }
    }

    /// log pi(d) for a series of length n.
    double log_pmf(std::size_t d, std::size_t n) const {
        if (d == 0) {
            return kNegInf;
        }
        const double k = static_cast<double>(d - 1);
        switch (kind) {
        case PriorKind::Flat: return -std::log(static_cast<double>(n));
        case PriorKind::Geometric: return std::log(p) + k * std::log1p(-p);
        case PriorKind::NegativeBinomial:
            return std::lgamma(k + r) - std::lgamma(r) - std::lgamma(k + 1.0) + r * std::log(p) + k * std::log1p(-p);
        }
        return kNegInf;
    }
};

struct PosteriorConfig {
    DistancePrior prior;
    NigPrior hyper;
    std::size_t k_max = 0; ///< 0 selects min(30, n / 10)
    /// Relative truncation threshold for the recursion sums; 0 sums every
    /// term. With a fixed change-point count the terms are not unimodal in
    /// the split position, so a positive value can cut off dominant terms.
    double epsilon = 0.0;

    static std::size_t default_k_max(std::size_t n) { return std::max<std::size_t>(1, std::min<std::size_t>(30, n / 10)); }
};

/// Exact change-point posterior for one series.
///
/// Segments are [a, b) in 0-based indices; a change point b is the first
/// sample of a new segment. Every segment of a segmentation, including the
/// first and the last, carries a distance-prior factor pi(b - a). The tail
/// table holds log Q: tail(r, a) sums over all segmentations of y[a, n)
/// with r change points, so Q_j^{(k)}(i) = tail(k - j, i - 1) in 1-based
/// notation and Q^{(k)}(1) = tail(k, 0).
class PosteriorResult {
public:
    std::size_t n() const noexcept { return n_; }
    std::size_t k_max() const noexcept { return k_max_; }
    double epsilon() const noexcept { return epsilon_; }
    const std::vector<double> &cp_prob() const noexcept { return cp_prob_; }
    const DistancePrior &prior() const noexcept { return prior_; }

    /// log P(t, s), 1-based inclusive.
    double log_p(std::size_t t, std::size_t s) const {
        if (!(1 <= t && t <= s && s <= n_)) {
            fail(ErrorCode::IndexOutOfRange, "log_p bounds must satisfy 1 <= t <= s <= n", s);
        }
        return (*marginal_)(t - 1, s);
    }

    /// log Q_j^{(k)}(i) with 1-based i in [2, n].
    double log_q(std::size_t k, std::size_t j, std::size_t i) const {
        require(k >= 1 && k <= k_max_ && j >= 1 && j <= k, ErrorCode::InvalidArgument, "need 1 <= j <= k <= k_max");
        if (!(2 <= i && i <= n_)) {
            fail(ErrorCode::IndexOutOfRange, "Q index outside [2, n]", i);
        }
        return tail_[k - j][i - 1];
    }

    /// log Q^{(k)}(1): log evidence of the data given k change points.
    double log_evidence(std::size_t k) const {
        require(k >= 1 && k <= k_max_, ErrorCode::InvalidArgument, "k outside [1, k_max]");
        return tail_[k][0];
    }

    /// log of the sum over k of the evidence (uniform prior over k omitted).
    double log_total() const noexcept { return log_total_; }

    /// Distribution of tau_j given tau_{j-1} = prev (prev = 0 for j = 1);
    /// entry b is the probability that segment j + 1 starts at b.
    std::vector<double> conditional(std::size_t k, std::size_t j, std::size_t prev) const {
        require(k >= 1 && k <= k_max_ && j >= 1 && j <= k, ErrorCode::InvalidArgument, "need 1 <= j <= k <= k_max");
        require(j > 1 || prev == 0, ErrorCode::InvalidArgument, "the first change point is conditioned on 0");
        const std::size_t rest = k - j;
        require(prev + rest + 1 < n_, ErrorCode::IndexOutOfRange, "no room for the remaining change points");
        std::vector<double> out(n_, 0.0);
        const double denom = tail_[rest + 1][prev];
        for (std::size_t b = prev + 1; b + rest < n_; ++b) {
            const double lw = (*marginal_)(prev, b) + prior_.log_pmf(b - prev, n_) + tail_[rest][b] - denom;
            out[b] = std::exp(lw);
        }
        return out;
    }

private:
    friend PosteriorResult cp_posterior(const TimeSeries &, const PosteriorConfig &);

    std::size_t n_ = 0;
    std::size_t k_max_ = 0;
    double epsilon_ = 0.0;
    DistancePrior prior_;
    std::shared_ptr<const SegmentMarginal> marginal_;
    std::vector<std::vector<double>> tail_;
    std::vector<std::vector<double>> head_;
    double log_total_ = kNegInf;
    std::vector<double> cp_prob_;
};

/// Runs the truncated Q recursions for k = 1..k_max and aggregates the
/// per-position change-point probability with a uniform prior over k.
inline PosteriorResult cp_posterior(const TimeSeries &ts, const PosteriorConfig &cfg) {
    cfg.prior.validate();
    require(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0, ErrorCode::InvalidArgument, "epsilon must lie in [0, 1)");
    const std::size_t n = ts.size();
    const std::size_t k_max = cfg.k_max == 0 ? PosteriorConfig::default_k_max(n) : cfg.k_max;
    require(k_max >= 1 && k_max <= n - 1, ErrorCode::InvalidArgument, "k_max must lie in [1, n - 1]");

    PosteriorResult res;
    res.n_ = n;
    res.k_max_ = k_max;
    res.epsilon_ = cfg.epsilon;
    res.prior_ = cfg.prior;
    res.marginal_ = std::make_shared<const SegmentMarginal>(ts.values(), cfg.hyper);
    const SegmentMarginal &logp = *res.marginal_;
    const double log_eps = cfg.epsilon > 0.0 ? std::log(cfg.epsilon) : kNegInf;

    std::vector<double> log_pi(n + 1);
    for (std::size_t d = 0; d <= n; ++d) {
        log_pi[d] = cfg.prior.log_pmf(d, n);
    }
    auto seg = [&](std::size_t a, std::size_t b) { return logp(a, b) + log_pi[b - a]; };

    // tail[r][a]: segmentations of y[a, n) with r change points.
    auto &tail = res.tail_;
    tail.assign(k_max + 1, std::vector<double>(n + 1, kNegInf));
    for (std::size_t a = 0; a < n; ++a) {
        tail[0][a] = seg(a, n);
    }
    for (std::size_t r = 1; r <= k_max; ++r) {
        for (std::size_t a = 0; a + r < n; ++a) {
            double acc = kNegInf;
            for (std::size_t b = a + 1; b + r <= n; ++b) {
                const double term = seg(a, b) + tail[r - 1][b];
                acc = log_add(acc, term);
                if (acc != kNegInf && term - acc < log_eps) {
                    break;
                }
            }
            tail[r][a] = acc;
        }
    }

    // head[j][b]: segmentations of y[0, b) into j segments.
    auto &head = res.head_;
    head.assign(k_max + 1, std::vector<double>(n + 1, kNegInf));
    for (std::size_t b = 1; b <= n; ++b) {
        head[1][b] = seg(0, b);
    }
    for (std::size_t j = 2; j <= k_max; ++j) {
        for (std::size_t b = j; b <= n; ++b) {
            double acc = kNegInf;
            for (std::size_t a = b - 1; a >= j - 1; --a) {
                const double term = head[j - 1][a] + seg(a, b);
                acc = log_add(acc, term);
                if ((acc != kNegInf && term - acc < log_eps) || a == j - 1) {
                    break;
                }
            }
            head[j][b] = acc;
        }
    }

    std::vector<double> evidence;
    for (std::size_t k = 1; k <= k_max; ++k) {
        evidence.push_back(tail[k][0]);
    }
    res.log_total_ = log_sum_exp(evidence);

    res.cp_prob_.assign(n, 0.0);
    for (std::size_t b = 1; b < n; ++b) {
        double acc = kNegInf;
        for (std::size_t k = 1; k <= k_max; ++k) {
            for (std::size_t j = 1; j <= k && j <= b; ++j) {
                acc = log_add(acc, head[j][b] + tail[k - j][b]);
            }
        }
        res.cp_prob_[b] = std::clamp(std::exp(acc - res.log_total_), 0.0, 1.0);
    }
    return res;
}

/// Peaks of a probability curve above `threshold`, at least `distance` apart.
inline ChangePointSet detect_peaks(std::span<const double> cp_prob, double threshold, std::size_t distance) {
    require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::InvalidArgument, "threshold must lie in [0, 1]");
    require(distance >= 1, ErrorCode::InvalidArgument, "distance must be at least 1");
    require(cp_prob.size() >= 2, ErrorCode::SeriesTooShort, "probability curve needs at least 2 entries");
    return ChangePointSet(cp_prob.size(), find_peaks(cp_prob, threshold, distance));
}

struct FusedBelief {
    std::vector<double> cp_prob;
    std::vector<std::size_t> degenerate; ///< indices where p and u contradict with certainty
};

/// Log-odds fusion p u / (p u + (1 - p)(1 - u)); u = 0.5 leaves p unchanged.
inline FusedBelief fuse_user_belief(std::span<const double> cp_prob, std::span<const double> user_belief) {
    require(cp_prob.size() == user_belief.size(), ErrorCode::MismatchedLength,
            "posterior and user belief differ in length");
    FusedBelief out;
    out.cp_prob.resize(cp_prob.size());
    for (std::size_t i = 0; i < cp_prob.size(); ++i) {
        const double p = cp_prob[i];
        const double u = user_belief[i];
        if (!(p >= 0.0 && p <= 1.0 && u >= 0.0 && u <= 1.0)) {
            fail(ErrorCode::InvalidArgument, "probabilities must lie in [0, 1] (index " + std::to_string(i) + ")", i);
        }
        const double num = p * u;
        const double den = num + (1.0 - p) * (1.0 - u);
        if (den == 0.0) {
            out.cp_prob[i] = 0.0;
            out.degenerate.push_back(i);
            continue;
        }
        out.cp_prob[i] = std::clamp(num / den, 0.0, 1.0);
    }
    return out;
}

struct BayesConfig {
    PosteriorConfig posterior;
    double threshold = 0.2;
    std::size_t distance = 10;
    std::size_t paa_window = 20;
};

/// Hyperparameters for the PAA grid. The prior describes one z-scored
/// sample; a mean of w samples has variance sigma^2 / w, so the same prior
/// on the grid has kappa0 / w and beta0 / w.
inline NigPrior window_prior(const NigPrior &h, std::size_t window) {
    const double w = static_cast<double>(window);
    return {h.mu0, h.kappa0 / w, h.alpha0, h.beta0 / w};
}

/// Posterior settings applied to the PAA grid.
inline PosteriorConfig grid_posterior_config(const BayesConfig &cfg) {
    PosteriorConfig pc = cfg.posterior;
    pc.hyper = window_prior(cfg.posterior.hyper, cfg.paa_window);
    return pc;
}

/// Peak distance in original samples, converted to grid steps (rounded up,
/// so mapped peaks stay at least `distance` samples apart).
inline std::size_t grid_distance(const BayesConfig &cfg) {
    return std::max<std::size_t>(1, (cfg.distance + cfg.paa_window - 1) / cfg.paa_window);
}

/// Change point probability on the PAA grid, ceil(n / window) entries.
/// Constant input gives all zeros.
inline std::vector<double> grid_posterior(const TimeSeries &ts, const BayesConfig &cfg) {
    require(cfg.paa_window >= 1, ErrorCode::InvalidArgument, "PAA window must be at least 1");
    const auto x = ts.values();
    if (!(detail::sample_stddev(x, detail::mean(x)) > 0.0)) {
        return std::vector<double>((ts.size() + cfg.paa_window - 1) / cfg.paa_window, 0.0);
    }
    return cp_posterior(paa(normalise(ts), cfg.paa_window), grid_posterior_config(cfg)).cp_prob();
}

/// Peaks of a grid curve, mapped to the first original sample of their
/// window.
inline ChangePointSet grid_peaks(std::span<const double> prob, double threshold, const BayesConfig &cfg,
                                 std::size_t n) {
    const auto peaks = detect_peaks(prob, threshold, grid_distance(cfg));
    std::vector<std::size_t> points;
    for (std::size_t p : peaks.intermediate()) {
        points.push_back(p * cfg.paa_window);
    }
    return ChangePointSet::normalised(n, std::move(points));
}

/// PAA, posterior and peak selection. Constant input yields no change
/// points.
inline ChangePointSet bayes_detect(const TimeSeries &ts, const BayesConfig &cfg) {
    const auto prob = grid_posterior(ts, cfg);
    if (prob.size() < 2) {
        return ChangePointSet(ts.size(), {});
    }
    return grid_peaks(prob, cfg.threshold, cfg, ts.size());
}

} // namespace cpd
