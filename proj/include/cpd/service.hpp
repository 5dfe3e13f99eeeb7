#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cpd/bayes.hpp"
#include "cpd/csv.hpp"
#include "cpd/harness.hpp"
#include "cpd/json_io.hpp"
#include "cpd/simulate.hpp"

namespace cpd {

/// HTTP reply: status code plus JSON body.
struct Reply {
    int status = 200;
    io::json body;
};

struct Dataset {
    std::string id;
    SignalBundle bundle;
};

/// In-memory steering service. `handle` is the transport-free dispatcher;
/// `install` binds it to an httplib server. Registered datasets are
/// immutable snapshots; detection requests run concurrently.
class Service {
public:
    Reply handle(std::string_view method, std::string_view path, std::string_view body,
                 const std::map<std::string, std::string> &query = {},
                 std::string_view content_type = "application/json") const {
        try {
            return route(method, path, body, query, content_type);
        } catch (const io::json::parse_error &e) {
            return error(400, "InvalidArgument", std::string("malformed JSON: ") + e.what());
        } catch (const Error &e) {
            const bool validation = e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::ParseError ||
                                    e.code() == ErrorCode::MissingColumn;
            return error(validation ? 400 : 422, std::string(to_string(e.code())), e.what());
        } catch (const io::json::exception &e) {
            return error(400, "InvalidArgument", e.what());
        }
    }

    /// Registers every route on `server`.
    void install(httplib::Server &server) const {
        auto bridge = [this](const httplib::Request &req, httplib::Response &res) {
            std::map<std::string, std::string> query;
            for (const auto &[k, v] : req.params) {
                query[k] = v;
            }
            const auto reply = handle(req.method, req.path, req.body, query, req.get_header_value("Content-Type"));
            res.status = reply.status;
            res.set_content(reply.body.dump(), "application/json");
        };
        server.Get(R"(/.*)", bridge);
        server.Post(R"(/.*)", bridge);
    }

    /// Blocking server loop. CPD_PORT overrides `port`.
    void serve(const std::string &host, int port) const {
        if (const char *env = std::getenv("CPD_PORT")) {
            port = std::atoi(env);
        }
        httplib::Server server;
        install(server);
        if (!server.listen(host, port)) {
            fail(ErrorCode::InvalidArgument, "cannot listen on " + host + ":" + std::to_string(port));
        }
    }

    std::size_t dataset_count() const {
        std::shared_lock lock(mutex_);
        return datasets_.size();
    }

private:
    using json = io::json;

    static Reply error(int status, const std::string &code, const std::string &message) {
        return {status, {{"error", code}, {"message", message}}};
    }

    static std::vector<std::string> split_path(std::string_view path) {
        std::vector<std::string> parts;
        std::size_t i = 0;
        while (i < path.size()) {
            while (i < path.size() && path[i] == '/') {
                ++i;
            }
            std::size_t j = i;
            while (j < path.size() && path[j] != '/') {
                ++j;
            }
            if (j > i) {
                parts.emplace_back(path.substr(i, j - i));
            }
            i = j;
        }
        return parts;
    }

    Reply route(std::string_view method, std::string_view path, std::string_view body,
                const std::map<std::string, std::string> &query, std::string_view content_type) const {
        const auto parts = split_path(path.substr(0, path.find('?')));
        if (method == "POST" && parts == std::vector<std::string>{"datasets"}) {
            return post_dataset(body, content_type, query);
        }
        if (method == "GET" && parts.size() == 2 && parts[0] == "datasets") {
            return get_dataset(parts[1]);
        }
        if (method == "GET" && parts.size() == 2 && parts[0] == "sweep") {
            return get_sweep(parts[1], query);
        }
        if (method == "POST") {
            const json req = body.empty() ? json::object() : json::parse(body);
            io::require_object(req, "request body");
            if (parts == std::vector<std::string>{"detect"}) {
                return post_detect(req);
            }
            if (parts == std::vector<std::string>{"bayes", "posterior"}) {
                return post_posterior(req);
            }
            if (parts == std::vector<std::string>{"bayes", "peaks"}) {
                return post_peaks(req);
            }
            if (parts == std::vector<std::string>{"posterior", "fuse"}) {
                return post_fuse(req);
            }
            if (parts == std::vector<std::string>{"annotations"}) {
                return post_annotation(req);
            }
        }
        if (method == "GET" && parts == std::vector<std::string>{"health"}) {
            return {200, {{"status", "ok"}}};
        }
        return error(404, "NotFound", "no route for " + std::string(method) + " " + std::string(path));
    }

    std::shared_ptr<const Dataset> find(const std::string &id) const {
        std::shared_lock lock(mutex_);
        const auto it = datasets_.find(id);
        return it == datasets_.end() ? nullptr : it->second;
    }

    static Reply not_found(const std::string &id) { return error(404, "UnknownDataset", "unknown dataset '" + id + "'"); }

    std::string add(SignalBundle bundle) const {
        bundle.validate();
        std::unique_lock lock(mutex_);
        const std::string id = "d" + std::to_string(++next_id_);
        datasets_[id] = std::make_shared<const Dataset>(Dataset{id, std::move(bundle)});
        return id;
    }

    static json summary(const Dataset &d) {
        json labels = json::array();
        for (const auto &s : d.bundle.series) {
            labels.push_back(s.label());
        }
        return {{"id", d.id},
                {"n", d.bundle.length()},
                {"series", labels},
                {"has_truth", d.bundle.truth.has_value()},
                {"dropped_rows", d.bundle.dropped_rows}};
    }

    Reply post_dataset(std::string_view body, std::string_view content_type,
                       const std::map<std::string, std::string> &query) const {
        SignalBundle bundle;
        const bool raw_csv = content_type.find("text/csv") != std::string_view::npos ||
                             (!body.empty() && body.find_first_not_of(" \t\r\n") != std::string_view::npos &&
                              body[body.find_first_not_of(" \t\r\n")] != '{');
        if (raw_csv) {
            std::istringstream in{std::string(body)};
            const auto it = query.find("time_column");
            bundle = parse_csv(in, it == query.end() ? "t" : it->second);
        } else {
            const json req = json::parse(body);
            io::check_keys(req, {"simulate", "csv", "time_column", "value_columns", "truth"}, "dataset request");
            require(req.contains("simulate") != req.contains("csv"), ErrorCode::InvalidArgument,
                    "give exactly one of 'simulate' or 'csv'");
            if (req.contains("simulate")) {
                require(!req.contains("truth"), ErrorCode::InvalidArgument, "simulated datasets carry their own truth");
                bundle = simulate(io::sim_spec_from_json(req["simulate"]));
            } else {
                std::istringstream in(io::get_required<std::string>(req, "csv"));
                bundle = parse_csv(in, io::get<std::string>(req, "time_column", "t"),
                                   io::get<std::vector<std::string>>(req, "value_columns", {}));
                if (req.contains("truth")) {
                    bundle.truth = ChangePointSet::normalised(bundle.length(), io::index_list(req, "truth"));
                }
            }
        }
        const std::string id = add(std::move(bundle));
        return {201, summary(*find(id))};
    }

    Reply get_dataset(const std::string &id) const {
        const auto d = find(id);
        if (!d) {
            return not_found(id);
        }
        json out = summary(*d);
        json series = json::array();
        for (const auto &s : d->bundle.series) {
            series.push_back({{"label", s.label()},
                              {"dt", s.dt()},
                              {"t0", s.t0()},
                              {"values", std::vector<double>(s.values().begin(), s.values().end())}});
        }
        out["series"] = series;
        out["truth"] = d->bundle.truth ? io::to_json(*d->bundle.truth) : json(nullptr);
        return {200, out};
    }

    /// Resolves {dataset, series} from a request; returns the dataset or an
    /// error reply.
    std::tuple<std::shared_ptr<const Dataset>, std::size_t, std::optional<Reply>> target(const json &req) const {
        const auto id = io::get_required<std::string>(req, "dataset");
        const auto d = find(id);
        if (!d) {
            return {nullptr, 0, not_found(id)};
        }
        const auto s = io::get<std::size_t>(req, "series", 0);
        if (s >= d->bundle.series.size()) {
            return {nullptr, 0, error(400, "InvalidArgument", "series index out of range")};
        }
        return {d, s, std::nullopt};
    }

    static std::size_t margin_for(const json &req, std::size_t n) {
        return margin_from_percent(n, io::get<double>(req, "margin_pct", 1.0));
    }

    static void attach_metrics(json &out, const Dataset &d, const ChangePointSet &cps, const json &req) {
        if (d.bundle.truth) {
            out["metrics"] = io::to_json(
                evaluate(cps, *d.bundle.truth, margin_for(req, d.bundle.length()), d.bundle.series.front().dt()));
        } else {
            out["metrics"] = nullptr;
        }
    }

    static DetectConfig detect_config(const json &req) {
        DetectConfig cfg;
        cfg.method = parse_method(io::get<std::string>(req, "method", "pelt"));
        CostModel cost = CostModel::of(parse_cost_kind(io::get<std::string>(req, "cost", "l2")));
        cost.gamma = io::get<double>(req, "gamma", 1.0);
        cost.lags = io::get<std::size_t>(req, "lags", 4);
        cost.min_size = io::get<std::size_t>(req, "min_size", 0);
        cost.validate();
        cfg.cost = cost;
        cfg.penalty = io::get<double>(req, "penalty", 10.0);
        require(std::isfinite(cfg.penalty) && cfg.penalty >= 0.0, ErrorCode::InvalidArgument, "penalty must be >= 0");
        cfg.half_width = io::get<std::size_t>(req, "half_width", 100);
        cfg.bayes = io::bayes_config_from_fields(req);
        return cfg;
    }

    Reply post_detect(const json &req) const {
        io::check_keys(req,
                       {"dataset", "series", "method", "cost", "gamma", "lags", "min_size", "penalty", "half_width",
                        "margin_pct", "prior", "p", "r", "k_max", "epsilon", "mu0", "kappa0", "alpha0", "beta0",
                        "threshold", "distance", "paa_window", "normalise"},
                       "detect request");
        auto [d, s, err] = target(req);
        if (err) {
            return *err;
        }
        const DetectConfig cfg = detect_config(req);
        const TimeSeries &raw = d->bundle.series[s];
        const TimeSeries ts = io::get<bool>(req, "normalise", false) ? normalise(raw) : raw;
        const auto cps = detect(ts, cfg);
        json out = {{"dataset", d->id}, {"series", s}, {"change_points", io::to_json(cps)}, {"k", cps.k_pred()}};
        attach_metrics(out, *d, cps, req);
        return {200, out};
    }

    using Curve = std::shared_ptr<const std::vector<double>>;

    /// Posterior curve on the PAA grid, cached per dataset, series and
    /// posterior settings.
    Curve posterior_curve(const Dataset &d, std::size_t s, const BayesConfig &b) const {
        const std::string key = d.id + "|" + std::to_string(s) + "|" + io::to_json(b).dump();
        {
            std::lock_guard lock(cache_mutex_);
            if (const auto it = cache_.find(key); it != cache_.end()) {
                return it->second;
            }
        }
        std::vector<double> prob = grid_posterior(d.bundle.series[s], b);
        auto curve = std::make_shared<const std::vector<double>>(std::move(prob));
        std::lock_guard lock(cache_mutex_);
        return cache_.emplace(key, curve).first->second;
    }

    static ChangePointSet peaks_to_cps(const std::vector<double> &prob, const BayesConfig &b, std::size_t n) {
        return grid_peaks(prob, b.threshold, b, n);
    }

    Reply post_posterior(const json &req) const {
        io::check_keys(req, {"dataset", "series", "prior", "p", "r", "k_max", "epsilon", "mu0", "kappa0", "alpha0", "beta0",
                             "paa_window"},
                       "posterior request");
        auto [d, s, err] = target(req);
        if (err) {
            return *err;
        }
        const BayesConfig b = io::bayes_config_from_fields(req);
        const auto curve = posterior_curve(*d, s, b);
        return {200,
                {{"dataset", d->id},
                 {"series", s},
                 {"paa_window", b.paa_window},
                 {"n", d->bundle.length()},
                 {"cp_prob", *curve}}};
    }

    Reply post_peaks(const json &req) const {
        io::check_keys(req, {"dataset", "series", "cp_prob", "prior", "p", "r", "k_max", "epsilon", "mu0", "kappa0",
                             "alpha0", "beta0", "paa_window", "threshold", "distance", "margin_pct"},
                       "peaks request");
        const BayesConfig b = io::bayes_config_from_fields(req);
        if (req.contains("cp_prob") && !req.contains("dataset")) {
            const auto prob = io::get<std::vector<double>>(req, "cp_prob", {});
            const auto cps = detect_peaks(prob, b.threshold, b.distance);
            return {200, {{"change_points", io::to_json(cps)}, {"k", cps.k_pred()}}};
        }
        auto [d, s, err] = target(req);
        if (err) {
            return *err;
        }
        const auto curve = req.contains("cp_prob")
                               ? std::make_shared<const std::vector<double>>(io::get<std::vector<double>>(req, "cp_prob", {}))
                               : posterior_curve(*d, s, b);
        const auto cps = peaks_to_cps(*curve, b, d->bundle.length());
        json out = {{"dataset", d->id}, {"series", s}, {"change_points", io::to_json(cps)}, {"k", cps.k_pred()}};
        attach_metrics(out, *d, cps, req);
        return {200, out};
    }

    Reply post_fuse(const json &req) const {
        io::check_keys(req, {"dataset", "series", "cp_prob", "user_belief", "prior", "p", "r", "k_max", "epsilon", "mu0",
                             "kappa0", "alpha0", "beta0", "paa_window", "threshold", "distance", "margin_pct"},
                       "fuse request");
        const BayesConfig b = io::bayes_config_from_fields(req);
        const auto belief = io::get_required<std::vector<double>>(req, "user_belief");
        std::shared_ptr<const Dataset> d;
        std::size_t s = 0;
        std::vector<double> prob;
        if (req.contains("dataset")) {
            auto [dd, ss, err] = target(req);
            if (err) {
                return *err;
            }
            d = dd;
            s = ss;
        }
        if (req.contains("cp_prob")) {
            prob = io::get<std::vector<double>>(req, "cp_prob", {});
        } else {
            require(d != nullptr, ErrorCode::InvalidArgument, "give 'cp_prob' or a 'dataset'");
            prob = *posterior_curve(*d, s, b);
        }
        const auto fused = fuse_user_belief(prob, belief);
        json out = {{"cp_prob", fused.cp_prob}, {"degenerate", fused.degenerate}};
        if (fused.cp_prob.size() >= 2) {
            if (d) {
                const auto cps = peaks_to_cps(fused.cp_prob, b, d->bundle.length());
                out["change_points"] = io::to_json(cps);
                attach_metrics(out, *d, cps, req);
            } else {
                out["change_points"] = io::to_json(detect_peaks(fused.cp_prob, b.threshold, b.distance));
            }
        }
        return {200, out};
    }

    /// Stateless edit: the client sends its current prediction and one
    /// add/remove action and receives the edited set with fresh metrics.
    Reply post_annotation(const json &req) const {
        io::check_keys(req, {"dataset", "prediction", "action", "index", "margin_pct"}, "annotation request");
        auto [d, s, err] = target(req);
        if (err) {
            return *err;
        }
        const std::size_t n = d->bundle.length();
        auto points = io::index_list(req, "prediction");
        const auto action = io::get_required<std::string>(req, "action");
        const auto index = io::get_required<std::size_t>(req, "index");
        if (!(index > 0 && index < n)) {
            fail(ErrorCode::IndexOutOfRange, "annotation index outside (0, n)", index);
        }
        if (action == "add") {
            points.push_back(index);
        } else if (action == "remove") {
            std::erase(points, index);
        } else {
            fail(ErrorCode::InvalidArgument, "action must be 'add' or 'remove'");
        }
        const auto cps = ChangePointSet::normalised(n, std::move(points));
        json out = {{"dataset", d->id}, {"prediction", io::to_json(cps)}, {"k", cps.k_pred()}};
        attach_metrics(out, *d, cps, req);
        return {200, out};
    }

    Reply get_sweep(const std::string &id, const std::map<std::string, std::string> &query) const {
        const auto d = find(id);
        if (!d) {
            return not_found(id);
        }
        require(d->bundle.truth.has_value(), ErrorCode::InvalidArgument, "sweeps need a dataset with ground truth");
        auto param = [&](const std::string &key, const std::string &fallback) {
            const auto it = query.find(key);
            return it == query.end() ? fallback : it->second;
        };
        auto number = [&](const std::string &key, double fallback) {
            const auto text = param(key, "");
            if (text.empty()) {
                return fallback;
            }
            const auto v = csv_detail::parse_real(text);
            require(v.has_value(), ErrorCode::InvalidArgument, "query parameter '" + key + "' is not a number");
            return *v;
        };
        auto count = [&](const std::string &key, std::size_t fallback) {
            const double v = number(key, static_cast<double>(fallback));
            require(v >= 0.0 && v == std::floor(v), ErrorCode::InvalidArgument,
                    "query parameter '" + key + "' must be a non-negative integer");
            return static_cast<std::size_t>(v);
        };
        const Method method = parse_method(param("method", "pelt"));
        const std::size_t s = count("series", 0);
        require(s < d->bundle.series.size(), ErrorCode::InvalidArgument, "series index out of range");
        const TimeSeries &ts = d->bundle.series[s];
        const std::size_t n = ts.size();
        SweepOptions opt{margin_from_percent(n, number("margin_pct", 1.0)), ts.dt(), 0};
        SweepResult result;
        json out = {{"dataset", id}, {"series", s}, {"method", std::string(to_string(method))}};
        if (method == Method::Bayes) {
            BayesConfig b;
            b.paa_window = count("paa_window", 20);
            require(b.paa_window >= 1, ErrorCode::InvalidArgument, "paa_window must be at least 1");
            std::vector<double> thresholds;
            for (int i = 1; i <= 19; ++i) {
                thresholds.push_back(i * 0.05);
            }
            result = threshold_sweep(ts, *d->bundle.truth, b, thresholds, opt);
            out["param"] = "threshold";
        } else {
            CostModel cost = CostModel::of(parse_cost_kind(param("cost", "l2")), number("gamma", 1.0));
            const std::size_t hw = count("half_width", 100);
            result = penalty_sweep(ts, *d->bundle.truth, cost, method, standard_penalty_grid(), opt, hw);
            out["param"] = "penalty";
            out["cost"] = io::to_json(cost);
        }
        const auto sweep = io::to_json(result);
        out["rows"] = sweep["rows"];
        out["best"] = sweep["best"];
        out["selection_rule"] = sweep["selection_rule"];
        return {200, out};
    }

    mutable std::shared_mutex mutex_;
    mutable std::map<std::string, std::shared_ptr<const Dataset>> datasets_;
    mutable std::size_t next_id_ = 0;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::string, Curve> cache_;
};

} // namespace cpd
