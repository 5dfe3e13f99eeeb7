#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cpd/search.hpp"
#include "support.hpp"

using Catch::Approx;
using cpd::ChangePointSet;
using cpd::CostKind;
using cpd::CostModel;
using cpd::ErrorCode;
using cpd::SearchConfig;
using cpd::TimeSeries;

namespace {

ErrorCode code_of(auto &&fn) {
    try {
        fn();
    } catch (const cpd::Error &e) {
        return e.code();
    }
    FAIL("expected cpd::Error");
    return ErrorCode::InvalidArgument;
}

double naive_l2(const std::vector<double> &y, std::size_t a, std::size_t b) {
    double mu = 0.0;
    for (std::size_t t = a; t < b; ++t) {
        mu += y[t];
    }
    mu /= static_cast<double>(b - a);
    double ss = 0.0;
    for (std::size_t t = a; t < b; ++t) {
        ss += (y[t] - mu) * (y[t] - mu);
    }
    return ss;
}

struct Enumerated {
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> argmin;
};

/// Every admissible segmentation of [0, n) by subset enumeration.
Enumerated enumerate_l2(const std::vector<double> &y, double beta, std::size_t min_size) {
    const std::size_t n = y.size();
    Enumerated out;
    for (unsigned long mask = 0; mask < (1ul << (n - 1)); ++mask) {
        std::vector<std::size_t> b{0};
        for (std::size_t i = 1; i < n; ++i) {
            if (mask & (1ul << (i - 1))) {
                b.push_back(i);
            }
        }
        b.push_back(n);
        bool ok = true;
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < b.size() && ok; ++i) {
            ok = b[i + 1] - b[i] >= min_size;
            if (ok) {
                total += naive_l2(y, b[i], b[i + 1]);
            }
        }
        if (!ok) {
            continue;
        }
        total += beta * static_cast<double>(b.size() - 2);
        if (total < out.best - 1e-12) {
            out.best = total;
            out.argmin.assign(b.begin() + 1, b.end() - 1);
        }
    }
    return out;
}

bool respects_min_size(const ChangePointSet &cps, std::size_t m) {
    const auto b = cps.boundaries();
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
        if (b[i + 1] - b[i] < m) {
            return false;
        }
    }
    return true;
}

TimeSeries series(std::vector<double> v) { return TimeSeries(std::move(v)); }

} // namespace

TEST_CASE("pelt recovers a noiseless step", "[search]") {
    const auto ts = series(testkit::step(100, 100, 0.0, 10.0));
    const auto res = cpd::pelt(ts, CostModel::of(CostKind::L2), SearchConfig{1.0});
    CHECK(res.cps == ChangePointSet(200, {100}));
    CHECK(res.objective == Approx(1.0).margin(1e-9));
    const auto oracle = cpd::dp_oracle(ts, CostModel::of(CostKind::L2), 1.0);
    CHECK(oracle.cps == res.cps);
}

TEST_CASE("a huge penalty yields no change points", "[search]") {
    testkit::Rng rng(40);
    for (CostKind kind : cpd::kAllCostKinds) {
        const auto ts = series(testkit::shifted_signal(rng, 150, 4));
        const auto res = cpd::pelt(ts, CostModel::of(kind), SearchConfig{1e12});
        CHECK(res.cps.empty());
    }
}

TEST_CASE("pelt and dp_oracle match exhaustive enumeration", "[search][property]") {
    testkit::Rng rng(41);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = testkit::uniform_index(rng, 4, 14);
        const auto y = testkit::shifted_signal(rng, n, 3);
        const double beta = rep % 3 == 0 ? 0.0 : testkit::uniform(rng, 0.0, 5.0);
        const auto ref = enumerate_l2(y, beta, 2);
        const auto ts = series(y);
        const auto res = cpd::pelt(ts, CostModel::of(CostKind::L2), SearchConfig{beta});
        CHECK(res.objective == Approx(ref.best).margin(1e-9));
        CHECK(cpd::dp_oracle(ts, CostModel::of(CostKind::L2), beta).objective == Approx(ref.best).margin(1e-9));
    }
}

TEST_CASE("pelt objective bounds every oracle candidate for beta zero", "[search][property]") {
    testkit::Rng rng(42);
    const auto model = CostModel::of(CostKind::L2);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = testkit::uniform_index(rng, 20, 60);
        const auto ts = series(testkit::shifted_signal(rng, n, 5));
        const auto res = cpd::pelt(ts, model, SearchConfig{0.0});
        CHECK(respects_min_size(res.cps, 2));
        for (int k = 0; k < 50; ++k) {
            auto cand = testkit::random_cps(rng, n, 8);
            if (!respects_min_size(cand, 2)) {
                continue;
            }
            CHECK(res.objective <= cpd::sum_of_costs(model, ts, cand) + 1e-9);
        }
    }
}

TEST_CASE("pelt equals dp_oracle for every cost kind", "[search][property]") {
    testkit::Rng rng(43);
    for (int rep = 0; rep < 70; ++rep) {
        const CostKind kind = cpd::kAllCostKinds[static_cast<std::size_t>(rep) % cpd::kAllCostKinds.size()];
        const std::size_t n = testkit::uniform_index(rng, 30, 160);
        const auto ts = series(testkit::shifted_signal(rng, n, 4));
        auto model = CostModel::of(kind, testkit::uniform(rng, 0.1, 10.0));
        if (rep % 4 == 1) {
            model.min_size = model.smallest_admissible_size() + 3;
        }
        for (double beta : {0.0, 1.0, 10.0}) {
            const auto a = cpd::pelt(ts, model, SearchConfig{beta});
            const auto b = cpd::dp_oracle(ts, model, beta);
            CHECK(std::abs(a.objective - b.objective) <= 1e-9 * std::max(1.0, std::abs(b.objective)));
            CHECK(a.cps == b.cps);
            CHECK(respects_min_size(a.cps, model.effective_min_size()));
            const double rebuilt = cpd::sum_of_costs(model, ts, a.cps) + beta * static_cast<double>(a.cps.size());
            if (kind != CostKind::Normal) {
                CHECK(a.objective == Approx(rebuilt).margin(1e-9).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("pelt is monotone in the penalty", "[search][property]") {
    testkit::Rng rng(44);
    for (int rep = 0; rep < 20; ++rep) {
        const auto ts = series(testkit::shifted_signal(rng, 300, 6));
        const auto model = CostModel::of(rep % 2 == 0 ? CostKind::L2 : CostKind::LinReg);
        double prev_obj = std::numeric_limits<double>::infinity();
        std::size_t prev_k = 0;
        bool first = true;
        for (double beta : {1000.0, 300.0, 100.0, 30.0, 10.0, 3.0, 1.0, 0.3, 0.0}) {
            const auto res = cpd::pelt(ts, model, SearchConfig{beta});
            CHECK(res.objective <= prev_obj + 1e-9);
            if (!first) {
                CHECK(res.cps.size() >= prev_k);
            }
            prev_obj = res.objective;
            prev_k = res.cps.size();
            first = false;
        }
    }
}

TEST_CASE("dp_oracle edge cases", "[search]") {
    testkit::Rng rng(45);
    for (int rep = 0; rep < 20; ++rep) {
        const auto y = testkit::gaussian(rng, 4);
        const auto res = cpd::dp_oracle(series(y), CostModel::of(CostKind::L2), 0.0);
        const double whole = naive_l2(y, 0, 4);
        const double split = naive_l2(y, 0, 2) + naive_l2(y, 2, 4);
        CHECK(res.objective == Approx(std::min(whole, split)).margin(1e-12));
        CHECK(res.cps == (split < whole ? ChangePointSet(4, {2}) : ChangePointSet(4, {})));
    }
    const auto flat = series(std::vector<double>(50, 2.0));
    for (double beta : {1e-6, 1.0, 100.0}) {
        CHECK(cpd::dp_oracle(flat, CostModel::of(CostKind::L2), beta).cps.empty());
        CHECK(cpd::pelt(flat, CostModel::of(CostKind::L2), SearchConfig{beta}).cps.empty());
    }
    CHECK(code_of([] {
              cpd::dp_oracle(series(std::vector<double>(2001, 0.0)), CostModel::of(CostKind::L2), 1.0);
          }) == ErrorCode::SeriesTooLong);
    CHECK(code_of([] { cpd::pelt(series({1, 2, 3}), CostModel::of(CostKind::L2), SearchConfig{1.0}); }) ==
          ErrorCode::SeriesTooShort);
    CHECK(code_of([] { cpd::pelt(series({1, 2, 3, 4}), CostModel::of(CostKind::L2), SearchConfig{-1.0}); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("win examples", "[search]") {
    const auto l2 = CostModel::of(CostKind::L2);
    testkit::Rng rng(46);
    const auto noise = series(testkit::gaussian(rng, 600));
    const auto disc = cpd::discrepancy(noise, l2, 100);
    const double top = *std::max_element(disc.begin(), disc.end());
    CHECK(cpd::win(noise, l2, SearchConfig{top + 1.0, 100}).empty());

    const auto step = series(testkit::step(100, 100, 0.0, 10.0));
    const auto d = cpd::discrepancy(step, l2, 50);
    REQUIRE(d.size() == 101);
    CHECK(std::max_element(d.begin(), d.end()) - d.begin() == 50);
    // Disc at the step: 100 samples split evenly, 25 * 100 = 2500.
    CHECK(d[50] == Approx(2500.0));
    CHECK(cpd::win(step, l2, SearchConfig{1.0, 50}) == ChangePointSet(200, {100}));

    CHECK(code_of([&] { cpd::win(step, l2, SearchConfig{1.0, 101}); }) == ErrorCode::SeriesTooShort);
    CHECK(code_of([&] { cpd::win(step, CostModel::of(CostKind::AR), SearchConfig{1.0, 3}); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("win properties", "[search][property]") {
    testkit::Rng rng(47);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = testkit::uniform_index(rng, 200, 800);
        const auto ts = series(testkit::shifted_signal(rng, n, 8));
        const std::size_t w = testkit::uniform_index(rng, 5, 60);
        const auto l2 = CostModel::of(CostKind::L2);
        const auto disc = cpd::discrepancy(ts, l2, w);
        for (double v : disc) {
            CHECK(v >= -1e-9);
        }
        const double beta = testkit::uniform(rng, 0.0, 50.0);
        for (CostKind kind : {CostKind::L2, CostKind::L1, CostKind::LinReg}) {
            const auto model = CostModel::of(kind);
            const auto d = cpd::discrepancy(ts, model, w);
            const auto pts = cpd::win(ts, model, SearchConfig{beta, w});
            const auto idx = pts.intermediate();
            for (std::size_t i = 0; i < idx.size(); ++i) {
                CHECK(d[idx[i] - w] > beta);
                if (i > 0) {
                    CHECK(idx[i] - idx[i - 1] >= w);
                }
            }
        }
    }
}
