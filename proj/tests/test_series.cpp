#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cpd/series.hpp"
#include "support.hpp"

using Catch::Approx;
using cpd::ErrorCode;
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

} // namespace

TEST_CASE("time series invariants", "[series]") {
    const TimeSeries ts({1.0, 2.0, 3.0}, 0.5, 10.0, "a");
    CHECK(ts.size() == 3);
    CHECK(ts.time_at(2) == 11.0);
    CHECK(ts.label() == "a");
    CHECK(code_of([] { TimeSeries({1.0}); }) == ErrorCode::SeriesTooShort);
    CHECK(code_of([] { TimeSeries({1.0, NAN}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { TimeSeries({1.0, 2.0}, 0.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("normalise gives zero mean and unit sample std", "[series]") {
    const auto z = cpd::normalise(TimeSeries({1.0, 2.0, 3.0}));
    CHECK(z[0] == Approx(-1.0).margin(1e-12));
    CHECK(z[1] == Approx(0.0).margin(1e-12));
    CHECK(z[2] == Approx(1.0).margin(1e-12));

    testkit::Rng rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        const auto x = testkit::gaussian(rng, 2 + rep * 7, 5.0, 3.0);
        const auto y = cpd::normalise(TimeSeries(x));
        const double mu = cpd::detail::mean(y.values());
        CHECK(std::abs(mu) <= 1e-12);
        CHECK(std::abs(cpd::detail::sample_stddev(y.values(), mu) - 1.0) <= 1e-12);
    }
}

TEST_CASE("normalise rejects constant input", "[series]") {
    CHECK(code_of([] { cpd::normalise(TimeSeries({5.0, 5.0, 5.0})); }) == ErrorCode::ZeroVariance);
}

TEST_CASE("normalise is idempotent and affine invariant", "[series][property]") {
    testkit::Rng rng(12);
    for (int rep = 0; rep < 100; ++rep) {
        const auto x = testkit::shifted_signal(rng, testkit::uniform_index(rng, 3, 200));
        const auto once = cpd::normalise(TimeSeries(x));
        const auto twice = cpd::normalise(once);
        const double alpha = testkit::uniform(rng, 1e-3, 1e3);
        const double beta = testkit::uniform(rng, -1e3, 1e3);
        std::vector<double> moved(x);
        for (auto &v : moved) {
            v = alpha * v + beta;
        }
        const auto shifted = cpd::normalise(TimeSeries(moved));
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(twice[i] == Approx(once[i]).margin(1e-9));
            CHECK(shifted[i] == Approx(once[i]).margin(1e-9));
        }
    }
}

TEST_CASE("paa windowed means", "[series]") {
    const auto a = cpd::paa(TimeSeries({1.0, 1.0, 3.0, 3.0}), 2);
    REQUIRE(a.size() == 2);
    CHECK(a[0] == 1.0);
    CHECK(a[1] == 3.0);
    CHECK(a.dt() == 2.0);

    const TimeSeries five({1.0, 2.0, 3.0, 4.0, 9.0}, 0.25, 3.0);
    const auto b = cpd::paa(five, 2);
    REQUIRE(b.size() == 3);
    CHECK(b[0] == 1.5);
    CHECK(b[1] == 3.5);
    CHECK(b[2] == 9.0);
    CHECK(b.dt() == 0.5);
    CHECK(b.t0() == 3.0);

    const auto same = cpd::paa(five, 1);
    CHECK(std::vector<double>(same.values().begin(), same.values().end()) ==
          std::vector<double>(five.values().begin(), five.values().end()));
    CHECK(code_of([&] { cpd::paa(five, 0); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { cpd::paa(five, 5); }) == ErrorCode::SeriesTooShort);
}

TEST_CASE("paa composes when the product divides n", "[series][property]") {
    testkit::Rng rng(13);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t wa = testkit::uniform_index(rng, 1, 5);
        const std::size_t wb = testkit::uniform_index(rng, 1, 5);
        const std::size_t n = wa * wb * testkit::uniform_index(rng, 2, 20);
        const TimeSeries ts(testkit::gaussian(rng, n));
        const auto nested = cpd::paa(cpd::paa(ts, wa), wb);
        const auto direct = cpd::paa(ts, wa * wb);
        REQUIRE(nested.size() == direct.size());
        for (std::size_t i = 0; i < direct.size(); ++i) {
            CHECK(nested[i] == Approx(direct[i]).margin(1e-12));
        }
    }
}

TEST_CASE("jump is the symmetric difference", "[series]") {
    const TimeSeries flat({2.0, 2.0, 2.0, 2.0});
    for (std::size_t i = 1; i <= 3; ++i) {
        CHECK(cpd::jump(flat, i) == 0.0);
    }
    const TimeSeries s({0.0, 0.0, 10.0, 10.0});
    CHECK(cpd::jump(s, 2) == 10.0);
    CHECK(cpd::jump(s, 1) == 10.0);
    CHECK(cpd::jump(s, 3) == 0.0);
    CHECK(code_of([&] { cpd::jump(s, 0); }) == ErrorCode::IndexOutOfRange);
    CHECK(code_of([&] { cpd::jump(s, 4); }) == ErrorCode::IndexOutOfRange);

    const TimeSeries scaled({0.0, 0.0, 37.0, 37.0});
    CHECK(cpd::jump(scaled, 2) == Approx(3.7 * cpd::jump(s, 2)));
}

TEST_CASE("change point sets validate and normalise", "[series]") {
    const cpd::ChangePointSet cps(10, {3, 7});
    CHECK(cps.k_pred() == 3);
    CHECK(cps.with_endpoint() == std::vector<std::size_t>{3, 7, 10});
    CHECK(cps.boundaries() == std::vector<std::size_t>{0, 3, 7, 10});
    CHECK(code_of([] { cpd::ChangePointSet(10, {0}); }) == ErrorCode::IndexOutOfRange);
    CHECK(code_of([] { cpd::ChangePointSet(10, {10}); }) == ErrorCode::IndexOutOfRange);
    CHECK(code_of([] { cpd::ChangePointSet(10, {5, 5}); }) == ErrorCode::InvalidArgument);
    CHECK(cpd::ChangePointSet::normalised(10, {7, 0, 3, 3, 12}) == cps);
}

TEST_CASE("bundle validation", "[series]") {
    cpd::SignalBundle b;
    b.series.emplace_back(std::vector<double>{1, 2, 3});
    b.series.emplace_back(std::vector<double>{1, 2});
    CHECK(code_of([&] { b.validate(); }) == ErrorCode::MismatchedLength);
}
