#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace cpd {

/// Local maxima of `x` whose value exceeds `height`, thinned so that kept
/// peaks are at least `distance` indices apart.
///
/// A peak is a sample (or the midpoint of a flat run) strictly greater than
/// both neighbours; the first and last samples never qualify. Thinning is
/// greedy by height, ties to the lower index. Output is sorted.
inline std::vector<std::size_t> find_peaks(std::span<const double> x, double height, std::size_t distance) {
    std::vector<std::size_t> candidates;
    const std::size_t n = x.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        if (x[i - 1] < x[i]) {
            std::size_t ahead = i + 1;
            while (ahead + 1 < n && x[ahead] == x[i]) {
                ++ahead;
            }
            if (x[ahead] < x[i]) {
                const std::size_t mid = (i + ahead - 1) / 2;
                if (x[mid] > height) {
                    candidates.push_back(mid);
                }
                i = ahead;
                continue;
            }
        }
        ++i;
    }
    if (distance <= 1 || candidates.size() < 2) {
        return candidates;
    }
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[candidates[a]] > x[candidates[b]]; });
    std::vector<bool> removed(candidates.size(), false);
    for (std::size_t idx : order) {
        if (removed[idx]) {
            continue;
        }
        const std::size_t p = candidates[idx];
        for (std::size_t j = idx; j-- > 0 && p - candidates[j] < distance;) {
            removed[j] = true;
        }
        for (std::size_t j = idx + 1; j < candidates.size() && candidates[j] - p < distance; ++j) {
            removed[j] = true;
        }
    }
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        if (!removed[j]) {
            kept.push_back(candidates[j]);
        }
    }
    return kept;
}

} // namespace cpd
