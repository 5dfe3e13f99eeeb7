#pragma once

#include <chrono>
#include <cstddef>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpd/csv.hpp"
#include "cpd/harness.hpp"
#include "cpd/json_io.hpp"
#include "cpd/simulate.hpp"

namespace cpd {

struct CsvSource {
    std::string path;
    std::string time_column = "t";
    std::vector<std::string> value_columns;
    std::string truth_path;
};

struct ExperimentConfig {
    std::optional<SimSpec> simulate;
    std::optional<CsvSource> csv;
    Method method = Method::Pelt;
    CostModel cost;
    std::vector<double> penalties; ///< empty selects the standard grid
    std::size_t half_width = 100;
    BayesConfig bayes;
    double margin_pct = 1.0;
    bool normalise = false;
    double merge_radius_pct = 1.0;
    std::string output;
    unsigned threads = 0;
};

inline ExperimentConfig experiment_from_json(const io::json &j) {
    using namespace io;
    check_keys(j,
               {"dataset", "method", "cost", "penalties", "half_width", "bayes", "margin_pct", "normalise",
                "merge_radius_pct", "output", "threads"},
               "experiment");
    ExperimentConfig cfg;
    const auto &ds = j.at("dataset");
    check_keys(ds, {"simulate", "csv"}, "dataset");
    require(ds.contains("simulate") != ds.contains("csv"), ErrorCode::InvalidArgument,
            "dataset needs exactly one of 'simulate' or 'csv'");
    if (ds.contains("simulate")) {
        cfg.simulate = sim_spec_from_json(ds["simulate"]);
    } else {
        const auto &c = ds["csv"];
        check_keys(c, {"path", "time_column", "value_columns", "truth_path"}, "csv");
        CsvSource src;
        src.path = get_required<std::string>(c, "path");
        src.time_column = get<std::string>(c, "time_column", "t");
        src.value_columns = get<std::vector<std::string>>(c, "value_columns", {});
        src.truth_path = get<std::string>(c, "truth_path", "");
        cfg.csv = src;
    }
    cfg.method = parse_method(get<std::string>(j, "method", "pelt"));
    if (cfg.method == Method::Bayes) {
        require(!j.contains("cost") && !j.contains("penalties") && !j.contains("half_width"),
                ErrorCode::InvalidArgument, "cost, penalties and half_width apply to pelt and win only");
        if (j.contains("bayes")) {
            cfg.bayes = bayes_config_from_json(j["bayes"]);
        }
    } else {
        require(!j.contains("bayes"), ErrorCode::InvalidArgument, "bayes settings apply to method bayes only");
        if (j.contains("cost")) {
            cfg.cost = cost_model_from_json(j["cost"]);
        }
        cfg.penalties = get<std::vector<double>>(j, "penalties", {});
        for (double p : cfg.penalties) {
            require(std::isfinite(p) && p >= 0.0, ErrorCode::InvalidArgument, "penalties must be >= 0");
        }
        cfg.half_width = get<std::size_t>(j, "half_width", 100);
    }
    cfg.margin_pct = get<double>(j, "margin_pct", 1.0);
    cfg.normalise = get<bool>(j, "normalise", false);
    cfg.merge_radius_pct = get<double>(j, "merge_radius_pct", 1.0);
    cfg.output = get_required<std::string>(j, "output");
    cfg.threads = get<unsigned>(j, "threads", 0);
    require(cfg.margin_pct >= 0.0 && cfg.merge_radius_pct >= 0.0, ErrorCode::InvalidArgument,
            "percentages must be >= 0");
    return cfg;
}

inline SignalBundle load_dataset(const ExperimentConfig &cfg) {
    if (cfg.simulate) {
        return simulate(*cfg.simulate);
    }
    require(cfg.csv.has_value(), ErrorCode::InvalidArgument, "experiment has no dataset");
    auto bundle = load_csv(cfg.csv->path, cfg.csv->time_column, cfg.csv->value_columns);
    if (!cfg.csv->truth_path.empty()) {
        bundle.truth = read_change_points(std::filesystem::path(cfg.csv->truth_path));
    }
    bundle.validate();
    return bundle;
}

struct ExperimentReport {
    io::json json;
    ChangePointSet prediction;
};

/// Runs the configured detection on every series, keeps the best sweep row
/// per series (or the single run when there is no truth), and aggregates
/// the union. Writes `<output>.json` and `<output>.csv` when `output` is
/// non-empty.
inline ExperimentReport run_experiment(const ExperimentConfig &cfg) {
    using io::json;
    const SignalBundle bundle = load_dataset(cfg);
    const std::size_t n = bundle.length();
    const std::size_t margin = margin_from_percent(n, cfg.margin_pct);
    const std::size_t radius = margin_from_percent(n, cfg.merge_radius_pct);
    const std::vector<double> grid = cfg.penalties.empty() ? standard_penalty_grid() : cfg.penalties;
    const double dt = bundle.series.front().dt();
    if (cfg.method != Method::Bayes && !bundle.truth) {
        require(grid.size() == 1, ErrorCode::InvalidArgument, "a penalty sweep needs ground truth; give one penalty");
    }

    json series_out = json::array();
    std::vector<ChangePointSet> picks;
    for (const auto &raw : bundle.series) {
        const TimeSeries ts = cfg.normalise ? normalise(raw) : raw;
        json entry = {{"label", ts.label()}};
        ChangePointSet pick;
        if (cfg.method == Method::Bayes) {
            pick = bayes_detect(ts, cfg.bayes);
            if (bundle.truth) {
                entry["metrics"] = io::to_json(evaluate(pick, *bundle.truth, margin, dt));
            }
        } else if (bundle.truth) {
            SweepOptions opt{margin, dt, cfg.threads};
            const auto sweep = penalty_sweep(ts, *bundle.truth, cfg.cost, cfg.method, grid, opt, cfg.half_width);
            entry["sweep"] = io::to_json(sweep);
            entry["best_param"] = sweep.best_row().param;
            entry["metrics"] = io::to_json(sweep.best_row().metrics);
            pick = sweep.best_row().cps;
        } else {
            DetectConfig dc{cfg.method, cfg.cost, grid.front(), cfg.half_width, cfg.bayes};
            pick = detect(ts, dc);
        }
        entry["prediction"] = io::to_json(pick);
        series_out.push_back(entry);
        picks.push_back(pick);
    }
    const ChangePointSet combined = aggregate_union(picks, radius);

    json config = {{"method", std::string(to_string(cfg.method))},
                   {"margin_pct", cfg.margin_pct},
                   {"margin", margin},
                   {"normalise", cfg.normalise},
                   {"merge_radius_pct", cfg.merge_radius_pct},
                   {"merge_radius", radius}};
    if (cfg.simulate) {
        config["dataset"] = {{"simulate", io::to_json(*cfg.simulate)}};
    } else {
        config["dataset"] = {{"csv",
                              {{"path", cfg.csv->path},
                               {"time_column", cfg.csv->time_column},
                               {"value_columns", cfg.csv->value_columns},
                               {"truth_path", cfg.csv->truth_path}}}};
    }
    if (cfg.method == Method::Bayes) {
        config["bayes"] = io::to_json(cfg.bayes);
    } else {
        config["cost"] = io::to_json(cfg.cost);
        config["penalties"] = grid;
        config["half_width"] = cfg.half_width;
    }

    json report = {{"config", config},
                   {"n", n},
                   {"dt", dt},
                   {"dropped_rows", bundle.dropped_rows},
                   {"series", series_out},
                   {"prediction", io::to_json(combined)}};
    report["truth"] = bundle.truth ? io::to_json(*bundle.truth) : json(nullptr);
    if (bundle.truth) {
        report["metrics"] = io::to_json(evaluate(combined, *bundle.truth, margin, dt));
    }
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    report["generated_at"] = stamp;

    if (!cfg.output.empty()) {
        const std::filesystem::path base(cfg.output);
        if (base.has_parent_path()) {
            std::filesystem::create_directories(base.parent_path());
        }
        std::ofstream js(base.string() + ".json");
        require(static_cast<bool>(js), ErrorCode::InvalidArgument, "cannot write " + base.string() + ".json");
        js << report.dump(2) << '\n';
        std::ofstream cs(base.string() + ".csv");
        require(static_cast<bool>(cs), ErrorCode::InvalidArgument, "cannot write " + base.string() + ".csv");
        cs << "series,index\n";
        for (std::size_t s = 0; s < picks.size(); ++s) {
            for (std::size_t p : picks[s].intermediate()) {
                cs << csv_detail::quote_if_needed(bundle.series[s].label()) << ',' << p << '\n';
            }
        }
        for (std::size_t p : combined.intermediate()) {
            cs << "union," << p << '\n';
        }
    }
    return {report, combined};
}

} // namespace cpd
