#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "cpd/experiment.hpp"
#include "cpd/harness.hpp"
#include "support.hpp"

using Catch::Approx;
using cpd::ChangePointSet;
using cpd::CostKind;
using cpd::CostModel;
using cpd::ErrorCode;
using cpd::Method;

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

cpd::SignalBundle pc(std::uint64_t seed, std::size_t n = 1400) {
    cpd::SimSpec s;
    s.seed = seed;
    s.n = n;
    return cpd::simulate(s);
}

/// Non-decreasing then non-increasing.
bool unimodal(const std::vector<double> &v) {
    std::size_t i = 1;
    while (i < v.size() && v[i] >= v[i - 1]) {
        ++i;
    }
    while (i < v.size() && v[i] <= v[i - 1]) {
        ++i;
    }
    return i == v.size();
}

std::string slurp(const std::filesystem::path &p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("standard grids", "[harness]") {
    const auto grid = cpd::standard_penalty_grid();
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == Approx(1e5));
    CHECK(std::is_sorted(grid.begin(), grid.end()));
    CHECK(std::adjacent_find(grid.begin(), grid.end()) == grid.end());
    // 0..50 plus the 25 log points, of which 1 and 10 are integers already.
    CHECK(grid.size() == 51 + 25 - 2);
    CHECK(cpd::kStandardGammaGrid == std::vector<double>{0.1, 1, 10, 100, 1000, 10000});
}

TEST_CASE("penalty sweep basics", "[harness]") {
    const auto b = pc(3);
    const auto &ts = b.series.front();
    const auto l2 = CostModel::of(CostKind::L2);
    const auto one = cpd::penalty_sweep(ts, *b.truth, l2, Method::Pelt, {1e12}, {14});
    REQUIRE(one.rows.size() == 1);
    CHECK(one.best == 0);
    CHECK(one.rows[0].cps.empty());

    const auto grid = cpd::standard_penalty_grid();
    const auto full = cpd::penalty_sweep(ts, *b.truth, l2, Method::Pelt, grid, {14});
    CHECK(full.rows.size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(full.rows[i].param == grid[i]);
        CHECK(full.best_row().metrics.f1 >= full.rows[i].metrics.f1);
        CHECK(full.rows[i].cps == cpd::pelt(ts, l2, {grid[i]}).cps);
    }
    CHECK(full.best == cpd::select_best(full.rows));
    CHECK(full.selection_rule == cpd::kSelectionRule);

    const auto serial = cpd::penalty_sweep(ts, *b.truth, l2, Method::Win, {1, 10, 100}, {14, 1.0, 1});
    const auto threaded = cpd::penalty_sweep(ts, *b.truth, l2, Method::Win, {1, 10, 100}, {14, 1.0, 4});
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(serial.rows[i].cps == threaded.rows[i].cps);
    }

    CHECK(code_of([&] { cpd::penalty_sweep(ts, *b.truth, l2, Method::Pelt, {}, {}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { cpd::penalty_sweep(ts, ChangePointSet(10, {}), l2, Method::Pelt, {1}, {}); }) ==
          ErrorCode::MismatchedLength);
    CHECK(code_of([&] { cpd::penalty_sweep(ts, *b.truth, l2, Method::Bayes, {1}, {}); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("selection rule is lexicographic", "[harness]") {
    auto row = [](double f1, double mt, std::size_t ae, double precision) {
        cpd::SweepRow r;
        r.metrics.f1 = f1;
        r.metrics.meantime = mt;
        r.metrics.ae = ae;
        r.metrics.precision = precision;
        return r;
    };
    CHECK(cpd::select_best({row(0.5, 1, 0, 1), row(0.9, 50, 4, 0.2), row(0.8, 0, 0, 1)}) == 1);
    CHECK(cpd::select_best({row(0.9, 5, 0, 1), row(0.9, 2, 3, 0.5)}) == 1);
    CHECK(cpd::select_best({row(0.9, 2, 3, 1), row(0.9, 2, 1, 0.5)}) == 1);
    CHECK(cpd::select_best({row(0.9, 2, 1, 0.5), row(0.9, 2, 1, 0.7)}) == 1);
    CHECK(cpd::select_best({row(0.9, 2, 1, 0.5), row(0.9, 2, 1, 0.5)}) == 0);
    CHECK(code_of([] { cpd::select_best({}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("F1 against the penalty is mostly unimodal", "[harness]") {
    const auto grid = cpd::standard_penalty_grid();
    int good = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto b = pc(seed);
        const auto res =
            cpd::penalty_sweep(b.series.front(), *b.truth, CostModel::of(CostKind::L2), Method::Pelt, grid, {14});
        std::vector<double> f1;
        for (const auto &r : res.rows) {
            f1.push_back(r.metrics.f1);
        }
        good += unimodal(f1);
    }
    INFO("unimodal-or-plateau seeds: " << good << "/50");
    CHECK(good >= 40);
}

TEST_CASE("gamma sweep", "[harness]") {
    cpd::SimSpec s;
    s.family = cpd::Family::PiecewiseLinear;
    s.seed = 4;
    const auto b = cpd::simulate(s);
    const auto &ts = b.series.front();
    const auto res = cpd::gamma_sweep(ts, *b.truth, CostKind::Ridge, cpd::kStandardGammaGrid, 100.0, Method::Win, {14});
    REQUIRE(res.rows.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(res.rows[i].param == cpd::kStandardGammaGrid[i]);
    }
    CHECK(res.rows[1].cps == cpd::win(ts, CostModel::of(CostKind::Ridge, 1.0), {100.0, 100}));
    const auto lasso = cpd::gamma_sweep(ts, *b.truth, CostKind::Lasso, {1.0}, 5.0, Method::Pelt, {14});
    CHECK(lasso.rows[0].cps == cpd::pelt(ts, CostModel::of(CostKind::Lasso, 1.0), {5.0}).cps);
    CHECK(code_of([&] { cpd::gamma_sweep(ts, *b.truth, CostKind::L2, {1.0}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("lasso gamma sweep spans linreg and l2", "[harness]") {
    testkit::Rng rng(71);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cpd::SimSpec s;
        s.seed = seed;
        s.trend = testkit::uniform(rng, -2.0, 2.0);
        const auto b = cpd::simulate(s);
        const auto &ts = b.series.front();
        const auto res = cpd::gamma_sweep(ts, *b.truth, CostKind::Lasso, {0.0, 1e7}, 100.0);
        // gamma 0 is least squares; a gamma past every soft-threshold bound
        // zeroes the slope, leaving the flat fit.
        CHECK(res.rows[0].cps == cpd::win(ts, CostModel::of(CostKind::LinReg), {100.0, 100}));
        CHECK(res.rows[1].cps == cpd::win(ts, CostModel::of(CostKind::L2), {100.0, 100}));
    }
}

TEST_CASE("threshold sweep shares one posterior", "[harness]") {
    const auto b = pc(5, 700);
    const auto &ts = b.series.front();
    cpd::BayesConfig cfg;
    cfg.paa_window = 5;
    const auto res = cpd::threshold_sweep(ts, *b.truth, cfg, {0.2, 0.5, 0.9}, {7});
    for (std::size_t i = 0; i < 3; ++i) {
        auto one = cfg;
        one.threshold = res.rows[i].param;
        CHECK(res.rows[i].cps == cpd::bayes_detect(ts, one));
    }
    CHECK(res.rows[0].cps.size() >= res.rows[2].cps.size());
    const cpd::TimeSeries flat(std::vector<double>(100, 1.0));
    CHECK(cpd::threshold_sweep(flat, ChangePointSet(100, {50}), cfg, {0.2}, {1}).rows[0].cps.empty());
}

TEST_CASE("union aggregation", "[harness]") {
    const ChangePointSet a(500, {100, 300});
    CHECK(cpd::aggregate_union({a}, 5) == a);
    CHECK(cpd::aggregate_union({a, ChangePointSet(500, {200, 400})}, 5) == ChangePointSet(500, {100, 200, 300, 400}));
    CHECK(cpd::aggregate_union({ChangePointSet(500, {100}), ChangePointSet(500, {102})}, 5) ==
          ChangePointSet(500, {101}));
    CHECK(cpd::aggregate_union({ChangePointSet(500, {100}), ChangePointSet(500, {100})}, 0) ==
          ChangePointSet(500, {100}));
    // Chains merge transitively: 10, 14, 18 are each within 4 of a neighbour.
    CHECK(cpd::aggregate_union({ChangePointSet(500, {10, 18}), ChangePointSet(500, {14})}, 4) ==
          ChangePointSet(500, {14}));
    CHECK(code_of([] { cpd::aggregate_union({ChangePointSet(5, {}), ChangePointSet(6, {})}, 1); }) ==
          ErrorCode::MismatchedLength);

    testkit::Rng rng(70);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<ChangePointSet> in;
        for (int k = 0; k < 4; ++k) {
            in.push_back(testkit::random_cps(rng, 300, 6));
        }
        const auto out = cpd::aggregate_union(in, testkit::uniform_index(rng, 0, 10));
        CHECK(out.n() == 300);
        CHECK(std::is_sorted(out.intermediate().begin(), out.intermediate().end()));
    }
}

TEST_CASE("experiment config parsing", "[harness]") {
    using cpd::io::json;
    const json ok = {{"dataset", {{"simulate", {{"family", "autoregressive"}, {"seed", 2}, {"n", 600}}}}},
                     {"method", "win"},
                     {"cost", {{"kind", "ar"}, {"lags", 2}}},
                     {"penalties", {1, 10}},
                     {"half_width", 50},
                     {"output", ""}};
    const auto cfg = cpd::experiment_from_json(ok);
    CHECK(cfg.simulate->family == cpd::Family::Autoregressive);
    CHECK(cfg.cost.lags == 2);
    CHECK(cfg.half_width == 50);
    CHECK(cfg.penalties == std::vector<double>{1, 10});

    auto bad = ok;
    bad["pentalties"] = {1};
    CHECK(code_of([&] { cpd::experiment_from_json(bad); }) == ErrorCode::InvalidArgument);
    bad = ok;
    bad["dataset"]["csv"] = {{"path", "x.csv"}};
    CHECK(code_of([&] { cpd::experiment_from_json(bad); }) == ErrorCode::InvalidArgument);
    bad = ok;
    bad["method"] = "bayes";
    CHECK(code_of([&] { cpd::experiment_from_json(bad); }) == ErrorCode::InvalidArgument);
    bad = ok;
    bad["bayes"] = {{"threshold", 0.3}};
    CHECK(code_of([&] { cpd::experiment_from_json(bad); }) == ErrorCode::InvalidArgument);
    bad = ok;
    bad["penalties"] = {-1};
    CHECK(code_of([&] { cpd::experiment_from_json(bad); }) == ErrorCode::InvalidArgument);
    bad = ok;
    bad.erase("output");
    CHECK(code_of([&] { cpd::experiment_from_json(bad); }) == ErrorCode::InvalidArgument);
    bad = ok;
    bad["half_width"] = "wide";
    CHECK(code_of([&] { cpd::experiment_from_json(bad); }) == ErrorCode::InvalidArgument);

    const json bayes = {{"dataset", {{"simulate", {{"seed", 1}}}}},
                        {"method", "bayes"},
                        {"bayes", {{"prior", "geometric"}, {"p", 0.05}, {"paa_window", 10}}},
                        {"output", ""}};
    const auto bc = cpd::experiment_from_json(bayes);
    CHECK(bc.bayes.posterior.prior.kind == cpd::PriorKind::Geometric);
    CHECK(bc.bayes.paa_window == 10);
    CHECK(bc.bayes.threshold == 0.2);
}

TEST_CASE("run_experiment is reproducible", "[harness]") {
    using cpd::io::json;
    const auto dir = std::filesystem::temp_directory_path() / "cpd_harness_test";
    std::filesystem::remove_all(dir);
    json j = {{"dataset", {{"simulate", {{"seed", 11}, {"n", 700}}}}},
              {"method", "pelt"},
              {"cost", "l2"},
              {"penalties", {1, 5, 20, 100}},
              {"threads", 2}};
    j["output"] = (dir / "a" / "run").string();
    const auto first = cpd::run_experiment(cpd::experiment_from_json(j));
    const std::string json_a = slurp(dir / "a" / "run.json");
    const std::string csv_a = slurp(dir / "a" / "run.csv");
    j["output"] = (dir / "b" / "run").string();
    const auto second = cpd::run_experiment(cpd::experiment_from_json(j));
    CHECK(first.prediction == second.prediction);

    auto strip = [](const std::string &text) {
        auto parsed = json::parse(text);
        parsed.erase("generated_at");
        return parsed.dump(2);
    };
    CHECK(strip(json_a) == strip(slurp(dir / "b" / "run.json")));
    CHECK(csv_a == slurp(dir / "b" / "run.csv"));

    const auto report = json::parse(json_a);
    CHECK(report["n"] == 700);
    CHECK(report["series"].size() == 1);
    CHECK(report["series"][0]["sweep"]["rows"].size() == 4);
    CHECK(report["metrics"]["f1"].get<double>() >= 0.0);
    CHECK(csv_a.rfind("series,index\n", 0) == 0);
    CHECK(csv_a.find("union,") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("run_experiment on a CSV without truth", "[harness]") {
    using cpd::io::json;
    const auto dir = std::filesystem::temp_directory_path() / "cpd_harness_csv";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "in.csv");
        out << "t,a,b\n";
        for (int i = 0; i < 200; ++i) {
            out << i << ',' << (i < 120 ? 0.0 : 5.0) + 0.01 * (i % 3) << ',' << (i < 80 ? 1.0 : -1.0) << '\n';
        }
    }
    json j = {{"dataset", {{"csv", {{"path", (dir / "in.csv").string()}}}}},
              {"method", "pelt"},
              {"penalties", {10}},
              {"output", ""}};
    const auto rep = cpd::run_experiment(cpd::experiment_from_json(j));
    CHECK(rep.prediction == ChangePointSet(200, {80, 120}));
    CHECK(rep.json["truth"].is_null());
    CHECK(rep.json["series"].size() == 2);

    j["penalties"] = {1, 10};
    CHECK(code_of([&] { cpd::run_experiment(cpd::experiment_from_json(j)); }) == ErrorCode::InvalidArgument);

    cpd::write_change_points(dir / "truth.csv", ChangePointSet(200, {80, 120}));
    j["dataset"]["csv"]["truth_path"] = (dir / "truth.csv").string();
    const auto scored = cpd::run_experiment(cpd::experiment_from_json(j));
    CHECK(scored.json["metrics"]["f1"] == 1.0);
    std::filesystem::remove_all(dir);
}
