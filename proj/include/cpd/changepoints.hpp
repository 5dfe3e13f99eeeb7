#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cpd/error.hpp"

namespace cpd {

/// Sorted intermediate change points of a series of length n.
///
/// An index tau marks the first sample of a new segment, so the segments are
/// [0, tau_1), [tau_1, tau_2), ..., [tau_K, n). The artificial endpoint n is
/// implicit; `k_pred()` and `with_endpoint()` include it, matching the
/// endpoint-inclusive counts used when predictions are scored.
class ChangePointSet {
public:
    ChangePointSet() = default;

    ChangePointSet(std::size_t n, std::vector<std::size_t> intermediate)
        : n_(n), points_(std::move(intermediate)) {
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (points_[i] == 0 || points_[i] >= n_) {
                fail(ErrorCode::IndexOutOfRange,
                     "change point " + std::to_string(points_[i]) + " outside (0, " + std::to_string(n_) + ")",
                     points_[i]);
            }
            if (i > 0 && points_[i] <= points_[i - 1]) {
                fail(ErrorCode::InvalidArgument, "change points must be strictly increasing");
            }
        }
    }

    /// Sorts, deduplicates and drops out-of-range indices before constructing.
    static ChangePointSet normalised(std::size_t n, std::vector<std::size_t> points) {
        std::sort(points.begin(), points.end());
        points.erase(std::unique(points.begin(), points.end()), points.end());
        std::erase_if(points, [n](std::size_t p) { return p == 0 || p >= n; });
        return ChangePointSet(n, std::move(points));
    }

    std::size_t n() const noexcept { return n_; }
    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }
    std::span<const std::size_t> intermediate() const noexcept { return points_; }

    std::size_t k_pred() const noexcept { return points_.size() + 1; }

    std::vector<std::size_t> with_endpoint() const {
        std::vector<std::size_t> out(points_);
        out.push_back(n_);
        return out;
    }

    /// Boundaries 0, tau_1, ..., tau_K, n.
    std::vector<std::size_t> boundaries() const {
        std::vector<std::size_t> out;
        out.reserve(points_.size() + 2);
        out.push_back(0);
        out.insert(out.end(), points_.begin(), points_.end());
        out.push_back(n_);
        return out;
    }

    bool contains(std::size_t index) const { return std::binary_search(points_.begin(), points_.end(), index); }

    friend bool operator==(const ChangePointSet &, const ChangePointSet &) = default;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> points_;
};

} // namespace cpd
