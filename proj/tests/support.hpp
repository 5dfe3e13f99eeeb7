#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "cpd/changepoints.hpp"
#include "cpd/series.hpp"

namespace testkit {

using Rng = std::mt19937_64;

inline std::vector<double> gaussian(Rng &rng, std::size_t n, double mu = 0.0, double sigma = 1.0) {
    std::normal_distribution<double> d(mu, sigma);
    std::vector<double> out(n);
    for (auto &v : out) {
        v = d(rng);
    }
    return out;
}

inline std::size_t uniform_index(Rng &rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform(Rng &rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// Random piecewise-Gaussian signal with a few level and scale shifts.
inline std::vector<double> shifted_signal(Rng &rng, std::size_t n, std::size_t max_changes = 4) {
    std::vector<double> y(n);
    const std::size_t k = uniform_index(rng, 0, max_changes);
    std::vector<std::size_t> cuts;
    for (std::size_t i = 0; i < k; ++i) {
        cuts.push_back(uniform_index(rng, 1, n - 1));
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(n);
    std::size_t start = 0;
    for (std::size_t c : cuts) {
        const double mu = uniform(rng, -3.0, 3.0);
        const double sigma = uniform(rng, 0.2, 2.0);
        std::normal_distribution<double> d(mu, sigma);
        for (std::size_t t = start; t < c; ++t) {
            y[t] = d(rng);
        }
        start = c;
    }
    return y;
}

/// Random change point set on n with up to max_k intermediates.
inline cpd::ChangePointSet random_cps(Rng &rng, std::size_t n, std::size_t max_k) {
    std::vector<std::size_t> pts;
    const std::size_t k = uniform_index(rng, 0, max_k);
    for (std::size_t i = 0; i < k; ++i) {
        pts.push_back(uniform_index(rng, 1, n - 1));
    }
    return cpd::ChangePointSet::normalised(n, pts);
}

inline std::vector<double> step(std::size_t left, std::size_t right, double a, double b) {
    std::vector<double> y(left, a);
    y.insert(y.end(), right, b);
    return y;
}

} // namespace testkit
