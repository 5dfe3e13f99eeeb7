#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cpd/changepoints.hpp"
#include "cpd/error.hpp"
#include "cpd/series.hpp"

namespace cpd {

enum class Family { PiecewiseConstant, PiecewiseLinear, ChangingVariance, Autoregressive, ExponentialDecay, Oscillating };

inline constexpr std::array<Family, 6> kAllFamilies = {Family::PiecewiseConstant, Family::PiecewiseLinear,
                                                       Family::ChangingVariance,  Family::Autoregressive,
                                                       Family::ExponentialDecay,  Family::Oscillating};

inline std::string_view to_string(Family f) {
    switch (f) {
    case Family::PiecewiseConstant: return "piecewise_constant";
    case Family::PiecewiseLinear: return "piecewise_linear";
    case Family::ChangingVariance: return "changing_variance";
    case Family::Autoregressive: return "autoregressive";
    case Family::ExponentialDecay: return "exponential_decay";
    case Family::Oscillating: return "oscillating";
    }
    return "?";
}

inline Family parse_family(std::string_view name) {
    for (Family f : kAllFamilies) {
        if (to_string(f) == name) {
            return f;
        }
    }
    fail(ErrorCode::InvalidArgument, "unknown family '" + std::string(name) + "'");
}

inline std::size_t default_segments(Family f) {
    switch (f) {
    case Family::PiecewiseConstant:
    case Family::ChangingVariance: return 7;
    case Family::PiecewiseLinear:
    case Family::Autoregressive:
    case Family::ExponentialDecay: return 6;
    case Family::Oscillating: return 12;
    }
    return 7;
}

inline double default_noise(Family f) {
    switch (f) {
    case Family::PiecewiseConstant:
    case Family::ChangingVariance:
    case Family::Autoregressive: return 1.0;
    case Family::PiecewiseLinear:
    case Family::ExponentialDecay:
    case Family::Oscillating: return 0.1;
    }
    return 1.0;
}

/// Generator settings. `segments == 0` and an empty `noise` select the
/// family defaults. `trend` adds a global linear ramp from 0 to `trend`.
struct SimSpec {
    Family family = Family::PiecewiseConstant;
    std::size_t n = 1400;
    std::size_t segments = 0;
    std::uint64_t seed = 0;
    std::optional<double> noise;
    double trend = 0.0;

    std::size_t segment_count() const { return segments == 0 ? default_segments(family) : segments; }
    double noise_level() const { return noise.value_or(default_noise(family)); }

    void validate() const {
        const std::size_t s = segment_count();
        require(s >= 1, ErrorCode::InvalidArgument, "need at least one segment");
        require(n >= 10 * s, ErrorCode::InvalidArgument, "n must be at least 10 samples per segment");
        require(std::isfinite(noise_level()) && noise_level() >= 0.0, ErrorCode::InvalidArgument,
                "noise must be >= 0");
        require(std::isfinite(trend), ErrorCode::InvalidArgument, "trend must be finite");
    }
};

namespace sim_detail {

using Rng = std::mt19937_64;

inline double uniform(Rng &rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// Boundaries 0 = b_0 < b_1 < ... < b_S = n: near-equal parts, each inner
/// boundary jittered by up to 10% of the nominal segment length.
inline std::vector<std::size_t> boundaries(Rng &rng, std::size_t n, std::size_t segments) {
    const double len = static_cast<double>(n) / static_cast<double>(segments);
    std::vector<std::size_t> b{0};
    for (std::size_t j = 1; j < segments; ++j) {
        const double pos = static_cast<double>(j) * len + uniform(rng, -0.1, 0.1) * len;
        b.push_back(static_cast<std::size_t>(std::llround(pos)));
    }
    b.push_back(n);
    return b;
}

/// Standard normal draws for every sample, taken up front so the noise
/// stream does not depend on the noise level.
inline std::vector<double> gaussian(Rng &rng, std::size_t n) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> out(n);
    for (auto &v : out) {
        v = z(rng);
    }
    return out;
}

inline std::vector<double> piecewise_constant(Rng &rng, const std::vector<std::size_t> &b, double noise) {
    const std::size_t segs = b.size() - 1;
    std::vector<double> mu(segs);
    std::vector<double> sigma(segs);
    for (std::size_t j = 0; j < segs; ++j) {
        // Adjacent means at least 1 apart so every boundary is a real change.
        do {
            mu[j] = uniform(rng, -10.0, 10.0);
        } while (j > 0 && std::abs(mu[j] - mu[j - 1]) < 1.0);
        sigma[j] = std::abs(uniform(rng, -1.0, 1.0));
    }
    const auto z = gaussian(rng, b.back());
    std::vector<double> y(b.back());
    for (std::size_t j = 0; j < segs; ++j) {
        for (std::size_t t = b[j]; t < b[j + 1]; ++t) {
            y[t] = mu[j] + noise * sigma[j] * z[t];
        }
    }
    return y;
}

inline std::vector<double> piecewise_linear(Rng &rng, const std::vector<std::size_t> &b, double noise) {
    const std::size_t segs = b.size() - 1;
    std::vector<double> knot(segs + 1);
    for (std::size_t j = 0; j <= segs; ++j) {
        // Successive rises differ by at least 0.5 so the slope changes at every knot.
        do {
            knot[j] = uniform(rng, -1.0, 1.0);
        } while (j >= 2 && std::abs((knot[j] - knot[j - 1]) - (knot[j - 1] - knot[j - 2])) < 0.5);
    }
    const auto [lo, hi] = std::minmax_element(knot.begin(), knot.end());
    const double k_lo = *lo;
    const double span = *hi - *lo;
    for (auto &k : knot) {
        k = span > 0.0 ? 2.0 * (k - k_lo) / span - 1.0 : 0.0;
    }
    const auto z = gaussian(rng, b.back());
    std::vector<double> y(b.back());
    for (std::size_t j = 0; j < segs; ++j) {
        const double len = static_cast<double>(b[j + 1] - b[j]);
        for (std::size_t t = b[j]; t < b[j + 1]; ++t) {
            const double u = static_cast<double>(t - b[j]) / len;
            y[t] = knot[j] + (knot[j + 1] - knot[j]) * u + noise * z[t];
        }
    }
    return y;
}

inline std::vector<double> changing_variance(Rng &rng, const std::vector<std::size_t> &b, double noise) {
    const std::size_t segs = b.size() - 1;
    std::vector<double> sigma(segs);
    for (std::size_t j = 0; j < segs; ++j) {
        // Adjacent standard deviations differ by a factor of at least 1.5.
        do {
            sigma[j] = std::abs(uniform(rng, -1.0, 1.0));
        } while (sigma[j] == 0.0 ||
                 (j > 0 && std::max(sigma[j], sigma[j - 1]) < 1.5 * std::min(sigma[j], sigma[j - 1])));
    }
    const auto z = gaussian(rng, b.back());
    std::vector<double> y(b.back());
    for (std::size_t j = 0; j < segs; ++j) {
        for (std::size_t t = b[j]; t < b[j + 1]; ++t) {
            y[t] = noise * sigma[j] * z[t];
        }
    }
    return y;
}

struct ArParams {
    double c;
    double phi;
};

/// Two-segment motif: one persistent and one alternating AR(1) regime,
/// cycled over the segments. The state carries across boundaries.
inline std::vector<double> autoregressive(Rng &rng, const std::vector<std::size_t> &b, double noise,
                                          std::vector<ArParams> *params_out = nullptr) {
    const std::array<ArParams, 2> motif = {ArParams{uniform(rng, -1.0, 1.0), uniform(rng, 0.5, 0.95)},
                                           ArParams{uniform(rng, -1.0, 1.0), uniform(rng, -0.95, -0.5)}};
    const auto z = gaussian(rng, b.back());
    std::vector<double> y(b.back());
    double prev = motif[0].c / (1.0 - motif[0].phi);
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
        const ArParams p = motif[j % 2];
        if (params_out) {
            params_out->push_back(p);
        }
        for (std::size_t t = b[j]; t < b[j + 1]; ++t) {
            prev = p.c + p.phi * prev + noise * z[t];
            y[t] = prev;
        }
    }
    return y;
}

/// Alternating exponential decay from 1 and linear rise back to 1.
inline std::vector<double> exponential_decay(Rng &rng, const std::vector<std::size_t> &b, double noise) {
    const std::size_t segs = b.size() - 1;
    std::vector<double> rate(segs);
    for (auto &r : rate) {
        r = uniform(rng, 2.0, 5.0);
    }
    const auto z = gaussian(rng, b.back());
    std::vector<double> y(b.back());
    double level = 1.0;
    for (std::size_t j = 0; j < segs; ++j) {
        const double len = static_cast<double>(b[j + 1] - b[j]);
        const double start = level;
        for (std::size_t t = b[j]; t < b[j + 1]; ++t) {
            const double u = static_cast<double>(t - b[j]) / len;
            y[t] = j % 2 == 0 ? start * std::exp(-rate[j] * u) : start + (1.0 - start) * u;
        }
        level = j % 2 == 0 ? start * std::exp(-rate[j]) : 1.0;
    }
    for (std::size_t t = 0; t < y.size(); ++t) {
        y[t] += noise * z[t];
    }
    return y;
}

struct OscParams {
    double amplitude;
    double steepness;
    double damping;
    double omega;
    double kick;
};

/// Four-phase motif cycled over the segments: sigmoid rise to the
/// amplitude, damped oscillation around it, stable plateau, linear decay.
inline std::vector<double> oscillating(Rng &rng, const std::vector<std::size_t> &b, double noise,
                                       std::vector<OscParams> *params_out = nullptr) {
    const std::size_t segs = b.size() - 1;
    std::vector<OscParams> cycle;
    for (std::size_t j = 0; j < segs; j += 4) {
        cycle.push_back({uniform(rng, 0.8, 1.2), uniform(rng, 10.0, 14.0), uniform(rng, 0.02, 0.05),
                         uniform(rng, 0.2, 0.5), uniform(rng, 0.2, 0.4)});
    }
    if (params_out) {
        *params_out = cycle;
    }
    const auto z = gaussian(rng, b.back());
    std::vector<double> y(b.back());
    for (std::size_t j = 0; j < segs; ++j) {
        const OscParams &p = cycle[j / 4];
        const double len = static_cast<double>(b[j + 1] - b[j]);
        for (std::size_t t = b[j]; t < b[j + 1]; ++t) {
            const double steps = static_cast<double>(t - b[j]);
            const double u = steps / len;
            double v = 0.0;
            switch (j % 4) {
            case 0: v = p.amplitude / (1.0 + std::exp(-p.steepness * (u - 0.5))); break;
            case 1: v = p.amplitude + p.kick * p.amplitude * std::exp(-p.damping * steps) * std::cos(p.omega * steps); break;
            case 2: v = p.amplitude; break;
            default: v = p.amplitude * (1.0 - u); break;
            }
            y[t] = v + noise * z[t];
        }
    }
    return y;
}

} // namespace sim_detail

/// Draws one dataset. The output is a pure function of the spec.
inline SignalBundle simulate(const SimSpec &spec) {
    spec.validate();
    sim_detail::Rng rng(spec.seed);
    const auto b = sim_detail::boundaries(rng, spec.n, spec.segment_count());
    const double noise = spec.noise_level();
    std::vector<double> y;
    switch (spec.family) {
    case Family::PiecewiseConstant: y = sim_detail::piecewise_constant(rng, b, noise); break;
    case Family::PiecewiseLinear: y = sim_detail::piecewise_linear(rng, b, noise); break;
    case Family::ChangingVariance: y = sim_detail::changing_variance(rng, b, noise); break;
    case Family::Autoregressive: y = sim_detail::autoregressive(rng, b, noise); break;
    case Family::ExponentialDecay: y = sim_detail::exponential_decay(rng, b, noise); break;
    case Family::Oscillating: y = sim_detail::oscillating(rng, b, noise); break;
    }
    if (spec.trend != 0.0) {
        const double denom = static_cast<double>(spec.n - 1);
        for (std::size_t t = 0; t < y.size(); ++t) {
            y[t] += spec.trend * static_cast<double>(t) / denom;
        }
    }
    SignalBundle out;
    out.series.emplace_back(std::move(y), 1.0, 0.0, std::string(to_string(spec.family)));
    out.truth = ChangePointSet(spec.n, std::vector<std::size_t>(b.begin() + 1, b.end() - 1));
    return out;
}

inline SignalBundle gen_piecewise_constant(SimSpec spec) {
    spec.family = Family::PiecewiseConstant;
    return simulate(spec);
}
inline SignalBundle gen_piecewise_linear(SimSpec spec) {
    spec.family = Family::PiecewiseLinear;
    return simulate(spec);
}
inline SignalBundle gen_changing_variance(SimSpec spec) {
    spec.family = Family::ChangingVariance;
    return simulate(spec);
}
inline SignalBundle gen_autoregressive(SimSpec spec) {
    spec.family = Family::Autoregressive;
    return simulate(spec);
}
inline SignalBundle gen_exponential_decay(SimSpec spec) {
    spec.family = Family::ExponentialDecay;
    return simulate(spec);
}
inline SignalBundle gen_oscillating(SimSpec spec) {
    spec.family = Family::Oscillating;
    return simulate(spec);
}

} // namespace cpd
