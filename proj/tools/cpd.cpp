#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cpd/cpd.hpp"
#include "cpd/service.hpp"

namespace {

using cpd::io::json;

struct InputOptions {
    std::string path;
    std::string time_column = "t";
    std::vector<std::string> columns;
    std::string truth;
};

void add_input(CLI::App *cmd, InputOptions &in) {
    cmd->add_option("--input,-i", in.path, "CSV file with a time column")->required()->check(CLI::ExistingFile);
    cmd->add_option("--time-column", in.time_column, "name of the time column");
    cmd->add_option("--columns", in.columns, "value columns (default: all others)")->delimiter(',');
}

cpd::SignalBundle read_input(const InputOptions &in) {
    auto bundle = cpd::load_csv(in.path, in.time_column, in.columns);
    if (!in.truth.empty()) {
        bundle.truth = cpd::read_change_points(std::filesystem::path(in.truth));
    }
    bundle.validate();
    return bundle;
}

struct DetectOptions {
    std::string method = "pelt";
    std::string cost = "l2";
    double penalty = 10.0;
    double gamma = 1.0;
    std::size_t lags = 4;
    std::size_t min_size = 0;
    std::size_t half_width = 100;
    bool normalise = false;
    double threshold = 0.2;
    std::size_t distance = 10;
    std::size_t paa_window = 20;
    std::string prior = "flat";
    double prior_p = 0.01;
    double prior_r = 2.0;
    std::size_t k_max = 0;
    double epsilon = 0.0;
    double margin_pct = 1.0;
    double merge_pct = 1.0;
};

void add_bayes_options(CLI::App *cmd, DetectOptions &o) {
    cmd->add_option("--threshold", o.threshold, "peak threshold on the posterior");
    cmd->add_option("--distance", o.distance, "minimum peak separation in original samples");
    cmd->add_option("--paa-window", o.paa_window, "PAA window before the posterior");
    cmd->add_option("--prior", o.prior, "distance prior: flat, geometric, negbin");
    cmd->add_option("--prior-p", o.prior_p, "geometric / negative binomial p");
    cmd->add_option("--prior-r", o.prior_r, "negative binomial r");
    cmd->add_option("--k-max", o.k_max, "largest change-point count (0 = auto)");
    cmd->add_option("--epsilon", o.epsilon, "recursion truncation threshold");
}

void add_detect_options(CLI::App *cmd, DetectOptions &o) {
    cmd->add_option("--method,-m", o.method, "pelt, win or bayes");
    cmd->add_option("--cost,-c", o.cost, "l2, l1, normal, linreg, ar, ridge, lasso");
    cmd->add_option("--penalty,-p", o.penalty, "penalty beta");
    cmd->add_option("--gamma", o.gamma, "ridge/lasso regularisation constant");
    cmd->add_option("--lags", o.lags, "AR lag count");
    cmd->add_option("--min-size", o.min_size, "minimum segment length (0 = cost default)");
    cmd->add_option("--half-width,-w", o.half_width, "WIN half-width");
    cmd->add_flag("--normalise", o.normalise, "z-score each series first");
    cmd->add_option("--merge-pct", o.merge_pct, "union merge radius, percent of n");
    add_bayes_options(cmd, o);
}

cpd::BayesConfig bayes_config(const DetectOptions &o) {
    cpd::BayesConfig b;
    b.posterior.prior.kind = cpd::parse_prior_kind(o.prior);
    b.posterior.prior.p = o.prior_p;
    b.posterior.prior.r = o.prior_r;
    b.posterior.k_max = o.k_max;
    b.posterior.epsilon = o.epsilon;
    b.threshold = o.threshold;
    b.distance = o.distance;
    b.paa_window = o.paa_window;
    return b;
}

cpd::DetectConfig detect_config(const DetectOptions &o) {
    cpd::DetectConfig cfg;
    cfg.method = cpd::parse_method(o.method);
    cfg.cost = cpd::CostModel::of(cpd::parse_cost_kind(o.cost), o.gamma, o.lags);
    cfg.cost.min_size = o.min_size;
    cfg.penalty = o.penalty;
    cfg.half_width = o.half_width;
    cfg.bayes = bayes_config(o);
    return cfg;
}

void emit(const json &j) { std::cout << j.dump(2) << '\n'; }

int run_simulate(const cpd::SimSpec &spec, const std::string &out, const std::string &truth_out) {
    const auto bundle = cpd::simulate(spec);
    if (out.empty()) {
        cpd::write_csv(std::cout, bundle);
    } else {
        cpd::write_csv(std::filesystem::path(out), bundle);
    }
    if (!truth_out.empty()) {
        cpd::write_change_points(std::filesystem::path(truth_out), *bundle.truth);
    }
    return 0;
}

int run_detect(const InputOptions &in, const DetectOptions &o, const std::string &out) {
    const auto bundle = read_input(in);
    const auto cfg = detect_config(o);
    std::vector<cpd::ChangePointSet> picks;
    json per_series = json::array();
    for (const auto &raw : bundle.series) {
        const auto ts = o.normalise ? cpd::normalise(raw) : raw;
        picks.push_back(cpd::detect(ts, cfg));
        per_series.push_back({{"label", ts.label()}, {"change_points", cpd::io::to_json(picks.back())}});
    }
    const std::size_t n = bundle.length();
    const auto combined = cpd::aggregate_union(picks, cpd::margin_from_percent(n, o.merge_pct));
    json report = {{"n", n}, {"series", per_series}, {"change_points", cpd::io::to_json(combined)}};
    if (bundle.truth) {
        report["metrics"] = cpd::io::to_json(cpd::evaluate(combined, *bundle.truth,
                                                           cpd::margin_from_percent(n, o.margin_pct),
                                                           bundle.series.front().dt()));
    }
    if (!out.empty()) {
        cpd::write_change_points(std::filesystem::path(out), combined);
    }
    emit(report);
    return 0;
}

int run_sweep(const InputOptions &in, const DetectOptions &o, const std::vector<double> &grid, bool over_gamma) {
    const auto bundle = read_input(in);
    const auto &ts0 = bundle.series.front();
    const auto ts = o.normalise ? cpd::normalise(ts0) : ts0;
    const auto cfg = detect_config(o);
    cpd::SweepOptions opt{cpd::margin_from_percent(ts.size(), o.margin_pct), ts.dt(), 0};
    cpd::SweepResult res;
    if (over_gamma) {
        res = cpd::gamma_sweep(ts, *bundle.truth, cfg.cost.kind, grid.empty() ? cpd::kStandardGammaGrid : grid,
                               o.penalty, cfg.method, opt, o.half_width);
    } else if (cfg.method == cpd::Method::Bayes) {
        std::vector<double> thresholds = grid;
        if (thresholds.empty()) {
            for (int i = 1; i <= 19; ++i) {
                thresholds.push_back(0.05 * i);
            }
        }
        res = cpd::threshold_sweep(ts, *bundle.truth, cfg.bayes, thresholds, opt);
    } else {
        res = cpd::penalty_sweep(ts, *bundle.truth, cfg.cost, cfg.method,
                                 grid.empty() ? cpd::standard_penalty_grid() : grid, opt, o.half_width);
    }
    emit(cpd::io::to_json(res));
    return 0;
}

int run_bayes(const InputOptions &in, const DetectOptions &o, const std::string &curve_out) {
    const auto bundle = read_input(in);
    const auto &ts = bundle.series.front();
    const auto b = bayes_config(o);
    const auto curve = cpd::grid_posterior(ts, b);
    if (!curve_out.empty()) {
        std::ofstream f(curve_out);
        cpd::write_probability_curve(f, curve);
    }
    const auto cps = cpd::bayes_detect(ts, b);
    const std::size_t k_max =
        b.posterior.k_max == 0 ? cpd::PosteriorConfig::default_k_max(curve.size()) : b.posterior.k_max;
    json report = {{"n", ts.size()}, {"paa_window", b.paa_window}, {"k_max", k_max},
                   {"change_points", cpd::io::to_json(cps)}};
    if (bundle.truth) {
        report["metrics"] = cpd::io::to_json(
            cpd::evaluate(cps, *bundle.truth, cpd::margin_from_percent(ts.size(), o.margin_pct), ts.dt()));
    }
    emit(report);
    return 0;
}

int run_eval(const std::string &truth, const std::string &pred, double margin_pct, double dt) {
    const auto t = cpd::read_change_points(std::filesystem::path(truth));
    const auto p = cpd::read_change_points(std::filesystem::path(pred));
    emit(cpd::io::to_json(cpd::evaluate(p, t, cpd::margin_from_percent(t.n(), margin_pct), dt)));
    return 0;
}

int run_config(const std::string &path) {
    std::ifstream f(path);
    if (!f) {
        cpd::fail(cpd::ErrorCode::InvalidArgument, "cannot open " + path);
    }
    const auto cfg = cpd::experiment_from_json(json::parse(f));
    const auto report = cpd::run_experiment(cfg);
    json summary = {{"prediction", report.json["prediction"]}};
    if (report.json.contains("metrics")) {
        summary["metrics"] = report.json["metrics"];
    }
    if (!cfg.output.empty()) {
        summary["written"] = {cfg.output + ".json", cfg.output + ".csv"};
    }
    emit(summary);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Offline change-point detection"};
    app.require_subcommand(1);

    cpd::SimSpec spec;
    std::string family = "piecewise_constant";
    double noise = -1.0;
    std::string sim_out;
    std::string sim_truth;
    auto *sim = app.add_subcommand("simulate", "generate a seeded dataset as CSV");
    sim->add_option("--family,-f", family, "piecewise_constant, piecewise_linear, changing_variance, "
                                           "autoregressive, exponential_decay, oscillating");
    sim->add_option("--seed,-s", spec.seed, "RNG seed");
    sim->add_option("--n", spec.n, "number of samples");
    sim->add_option("--segments", spec.segments, "segment count (0 = family default)");
    sim->add_option("--noise", noise, "noise level (default: family default)");
    sim->add_option("--trend", spec.trend, "global linear trend amplitude");
    sim->add_option("--out,-o", sim_out, "CSV output (default stdout)");
    sim->add_option("--truth-out", sim_truth, "change-point file for the ground truth");

    InputOptions in;
    DetectOptions opts;
    std::string detect_out;
    auto *det = app.add_subcommand("detect", "detect change points in a CSV file");
    add_input(det, in);
    add_detect_options(det, opts);
    det->add_option("--truth", in.truth, "ground-truth change-point file")->check(CLI::ExistingFile);
    det->add_option("--margin-pct", opts.margin_pct, "acceptance radius, percent of n");
    det->add_option("--out,-o", detect_out, "write the detected change-point file");

    std::vector<double> grid;
    bool over_gamma = false;
    auto *swp = app.add_subcommand("sweep", "penalty, gamma or threshold sweep against ground truth");
    add_input(swp, in);
    add_detect_options(swp, opts);
    swp->add_option("--truth", in.truth, "ground-truth change-point file")->required()->check(CLI::ExistingFile);
    swp->add_option("--margin-pct", opts.margin_pct, "acceptance radius, percent of n");
    swp->add_option("--grid", grid, "parameter values (default: standard grid)")->delimiter(',');
    swp->add_flag("--gamma-sweep", over_gamma, "sweep gamma at a fixed penalty instead");

    std::string curve_out;
    auto *bay = app.add_subcommand("bayes", "posterior curve and peaks for the first series");
    add_input(bay, in);
    add_bayes_options(bay, opts);
    bay->add_option("--truth", in.truth, "ground-truth change-point file")->check(CLI::ExistingFile);
    bay->add_option("--margin-pct", opts.margin_pct, "acceptance radius, percent of n");
    bay->add_option("--curve-out", curve_out, "write index,probability CSV");

    std::string truth_path;
    std::string pred_path;
    double margin_pct = 1.0;
    double dt = 1.0;
    auto *ev = app.add_subcommand("eval", "score a prediction against ground truth");
    ev->add_option("--truth", truth_path, "ground-truth change-point file")->required()->check(CLI::ExistingFile);
    ev->add_option("--pred", pred_path, "predicted change-point file")->required()->check(CLI::ExistingFile);
    ev->add_option("--margin-pct", margin_pct, "acceptance radius, percent of n");
    ev->add_option("--dt", dt, "seconds per sample for meantime");

    std::string config_path;
    auto *run = app.add_subcommand("run", "run a JSON experiment config");
    run->add_option("config", config_path, "experiment JSON")->required()->check(CLI::ExistingFile);

    std::string host = "127.0.0.1";
    int port = 8080;
    auto *srv = app.add_subcommand("serve", "start the HTTP API (CPD_PORT overrides --port)");
    srv->add_option("--host", host, "bind address");
    srv->add_option("--port", port, "port");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) {
            spec.family = cpd::parse_family(family);
            if (noise >= 0.0) {
                spec.noise = noise;
            }
            return run_simulate(spec, sim_out, sim_truth);
        }
        if (det->parsed()) {
            return run_detect(in, opts, detect_out);
        }
        if (swp->parsed()) {
            return run_sweep(in, opts, grid, over_gamma);
        }
        if (bay->parsed()) {
            return run_bayes(in, opts, curve_out);
        }
        if (ev->parsed()) {
            return run_eval(truth_path, pred_path, margin_pct, dt);
        }
        if (run->parsed()) {
            return run_config(config_path);
        }
        if (srv->parsed()) {
            cpd::Service service;
            std::cerr << "listening on " << host << '\n';
            service.serve(host, port);
            return 0;
        }
    } catch (const cpd::Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
