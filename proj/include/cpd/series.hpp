#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpd/changepoints.hpp"
#include "cpd/error.hpp"

namespace cpd {

/// Equidistant univariate samples. Immutable once constructed.
class TimeSeries {
public:
    TimeSeries(std::vector<double> values, double dt = 1.0, double t0 = 0.0, std::string label = {})
        : values_(std::move(values)), dt_(dt), t0_(t0), label_(std::move(label)) {
        require(values_.size() >= 2, ErrorCode::SeriesTooShort, "a time series needs at least 2 samples");
        require(std::isfinite(dt_) && dt_ > 0.0, ErrorCode::InvalidArgument, "dt must be positive and finite");
        require(std::isfinite(t0_), ErrorCode::InvalidArgument, "t0 must be finite");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                fail(ErrorCode::InvalidArgument, "non-finite sample at index " + std::to_string(i), i);
            }
        }
    }

    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double dt() const noexcept { return dt_; }
    double t0() const noexcept { return t0_; }
    const std::string &label() const noexcept { return label_; }
    double time_at(std::size_t i) const noexcept { return t0_ + static_cast<double>(i) * dt_; }

private:
    std::vector<double> values_;
    double dt_;
    double t0_;
    std::string label_;
};

/// Several series on one index grid plus optional annotated change points.
struct SignalBundle {
    std::vector<TimeSeries> series;
    std::optional<ChangePointSet> truth;
    std::size_t dropped_rows = 0;

    std::size_t length() const { return series.empty() ? 0 : series.front().size(); }

    void validate() const {
        require(!series.empty(), ErrorCode::InvalidArgument, "bundle holds no series");
        for (const auto &s : series) {
            require(s.size() == series.front().size(), ErrorCode::MismatchedLength,
                    "bundle series differ in length");
            require(s.dt() == series.front().dt(), ErrorCode::InvalidArgument, "bundle series differ in dt");
        }
        if (truth) {
            require(truth->n() == length(), ErrorCode::MismatchedLength, "truth length differs from series length");
        }
    }
};

namespace detail {

inline double mean(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Two-pass sample standard deviation (n - 1 denominator).
inline double sample_stddev(std::span<const double> x, double mu) {
    double ss = 0.0;
    for (double v : x) {
        ss += (v - mu) * (v - mu);
    }
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

} // namespace detail

/// Z-score: sample mean 0, sample standard deviation 1.
inline TimeSeries normalise(const TimeSeries &ts) {
    const auto x = ts.values();
    const double mu = detail::mean(x);
    const double sd = detail::sample_stddev(x, mu);
    if (!(sd > 0.0)) {
        fail(ErrorCode::ZeroVariance, "cannot normalise a constant series");
    }
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = (x[i] - mu) / sd;
    }
    // One correction pass removes the rounding left by the first division.
    const double mu2 = detail::mean(out);
    const double sd2 = detail::sample_stddev(out, mu2);
    for (double &v : out) {
        v = (v - mu2) / sd2;
    }
    return TimeSeries(std::move(out), ts.dt(), ts.t0(), ts.label());
}

/// Piecewise aggregate approximation: mean of consecutive windows, the last
/// one possibly partial.
inline TimeSeries paa(const TimeSeries &ts, std::size_t window) {
    require(window >= 1, ErrorCode::InvalidArgument, "PAA window must be at least 1");
    if (window == 1) {
        return ts;
    }
    const auto x = ts.values();
    const std::size_t out_len = (x.size() + window - 1) / window;
    require(out_len >= 2, ErrorCode::SeriesTooShort, "PAA window leaves fewer than 2 samples");
    std::vector<double> out;
    out.reserve(out_len);
    for (std::size_t start = 0; start < x.size(); start += window) {
        const std::size_t stop = std::min(start + window, x.size());
        out.push_back(detail::mean(x.subspan(start, stop - start)));
    }
    return TimeSeries(std::move(out), ts.dt() * static_cast<double>(window), ts.t0(), ts.label());
}

/// Discrete jump at index i: y[i+1] - y[i-1], one-sided y[i] - y[i-1] at the
/// last sample.
inline double jump(const TimeSeries &ts, std::size_t i) {
    const std::size_t n = ts.size();
    if (i < 1 || i > n - 1) {
        fail(ErrorCode::IndexOutOfRange, "jump index " + std::to_string(i) + " outside [1, n-1]", i);
    }
    if (i + 1 < n) {
        return ts[i + 1] - ts[i - 1];
    }
    return ts[i] - ts[i - 1];
}

} // namespace cpd
