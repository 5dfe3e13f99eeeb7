#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace cpd::linalg {

/// Row-major dense square matrix, sized for the handful of coefficients a
/// segment model carries.
struct Matrix {
    std::size_t dim = 0;
    std::vector<double> data;

    explicit Matrix(std::size_t d = 0) : dim(d), data(d * d, 0.0) {}
    double &operator()(std::size_t r, std::size_t c) { return data[r * dim + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * dim + c]; }
};

/// Solves (A + jitter I) x = b for symmetric positive semi-definite A by
/// Cholesky. Returns false if a pivot is not positive even after jitter.
inline bool cholesky_solve(Matrix a, std::vector<double> b, double jitter, std::vector<double> &x) {
    const std::size_t n = a.dim;
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) += jitter;
    }
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) {
            d -= a(j, k) * a(j, k);
        }
        if (!(d > 0.0)) {
            return false;
        }
        const double l = std::sqrt(d);
        a(j, j) = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                s -= a(i, k) * a(j, k);
            }
            a(i, j) = s / l;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) {
            s -= a(i, k) * b[k];
        }
        b[i] = s / a(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) {
            s -= a(k, i) * b[k];
        }
        b[i] = s / a(i, i);
    }
    x = std::move(b);
    return true;
}

inline double soft_threshold(double z, double t) {
    if (z > t) {
        return z - t;
    }
    if (z < -t) {
        return z + t;
    }
    return 0.0;
}

struct LassoFit {
    std::vector<double> coef;
    double objective = 0.0;
    std::size_t sweeps = 0;
    bool converged = false;
};

/// Quadratic-form objective yy - 2 b'xty + b'Gb + penalty(b) for centred
/// sufficient statistics (the intercept is profiled out).
inline double quadratic_objective(const Matrix &gram, const std::vector<double> &xty, double yy,
                                  const std::vector<double> &b) {
    double obj = yy;
    for (std::size_t i = 0; i < b.size(); ++i) {
        obj -= 2.0 * b[i] * xty[i];
        for (std::size_t j = 0; j < b.size(); ++j) {
            obj += b[i] * gram(i, j) * b[j];
        }
    }
    return obj;
}

/// Cyclic coordinate descent for min_b yy - 2 b'xty + b'Gb + gamma * |b|_1
/// on centred statistics. Stops when the largest coefficient update in a
/// sweep drops below `tol`, or after `max_sweeps`.
inline LassoFit lasso_coordinate_descent(const Matrix &gram, const std::vector<double> &xty, double yy, double gamma,
                                         double tol = 1e-8, std::size_t max_sweeps = 1000) {
    const std::size_t p = xty.size();
    LassoFit fit;
    fit.coef.assign(p, 0.0);
    auto objective = [&](const std::vector<double> &b) {
        double l1 = 0.0;
        for (double v : b) {
            l1 += std::abs(v);
        }
        return quadratic_objective(gram, xty, yy, b) + gamma * l1;
    };
    std::vector<double> best = fit.coef;
    double best_obj = objective(best);
    while (fit.sweeps < max_sweeps) {
        ++fit.sweeps;
        double max_step = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (!(gram(j, j) > 0.0)) {
                continue;
            }
            double partial = xty[j];
            for (std::size_t k = 0; k < p; ++k) {
                if (k != j) {
                    partial -= gram(j, k) * fit.coef[k];
                }
            }
            const double updated = soft_threshold(partial, gamma / 2.0) / gram(j, j);
            max_step = std::max(max_step, std::abs(updated - fit.coef[j]));
            fit.coef[j] = updated;
        }
        const double obj = objective(fit.coef);
        if (obj <= best_obj) {
            best_obj = obj;
            best = fit.coef;
        }
        if (max_step < tol) {
            fit.converged = true;
            break;
        }
    }
    fit.coef = std::move(best);
    fit.objective = best_obj;
    return fit;
}

} // namespace cpd::linalg
