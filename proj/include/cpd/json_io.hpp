#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpd/bayes.hpp"
#include "cpd/changepoints.hpp"
#include "cpd/costs.hpp"
#include "cpd/error.hpp"
#include "cpd/harness.hpp"
#include "cpd/metrics.hpp"
#include "cpd/simulate.hpp"

namespace cpd::io {

using nlohmann::json;

inline void require_object(const json &j, std::string_view context) {
    require(j.is_object(), ErrorCode::InvalidArgument, std::string(context) + " must be a JSON object");
}

/// Rejects keys outside `allowed`, so misspelt or misplaced settings fail
/// loudly instead of being ignored.
inline void check_keys(const json &j, std::initializer_list<std::string_view> allowed, std::string_view context) {
    require_object(j, context);
    for (const auto &[key, _] : j.items()) {
        bool ok = false;
        for (auto a : allowed) {
            ok = ok || key == a;
        }
        require(ok, ErrorCode::InvalidArgument, "unknown key '" + key + "' in " + std::string(context));
    }
}

template <class T>
T get(const json &j, std::string_view key, T fallback) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return fallback;
    }
    try {
        return it->get<T>();
    } catch (const json::exception &) {
        fail(ErrorCode::InvalidArgument, "field '" + std::string(key) + "' has the wrong type");
    }
}

template <class T>
T get_required(const json &j, std::string_view key) {
    const auto it = j.find(key);
    require(it != j.end() && !it->is_null(), ErrorCode::InvalidArgument,
            "missing field '" + std::string(key) + "'");
    try {
        return it->get<T>();
    } catch (const json::exception &) {
        fail(ErrorCode::InvalidArgument, "field '" + std::string(key) + "' has the wrong type");
    }
}

inline json to_json(const MetricsReport &m) {
    return {{"k", m.k_pred},       {"ae", m.ae}, {"mt", m.meantime},   {"precision", m.precision},
            {"recall", m.recall}, {"f1", m.f1}, {"ri", m.rand_index}, {"margin", m.margin}};
}

inline json to_json(const ChangePointSet &cps) {
    return json(std::vector<std::size_t>(cps.intermediate().begin(), cps.intermediate().end()));
}

inline json to_json(const SweepResult &s) {
    json rows = json::array();
    for (const auto &r : s.rows) {
        rows.push_back({{"param", r.param}, {"change_points", to_json(r.cps)}, {"metrics", to_json(r.metrics)}});
    }
    return {{"rows", rows}, {"best", s.best}, {"selection_rule", s.selection_rule}};
}

inline json to_json(const SimSpec &s) {
    json j = {{"family", std::string(to_string(s.family))},
              {"n", s.n},
              {"segments", s.segment_count()},
              {"seed", s.seed},
              {"noise", s.noise_level()}};
    if (s.trend != 0.0) {
        j["trend"] = s.trend;
    }
    return j;
}

inline SimSpec sim_spec_from_json(const json &j) {
    check_keys(j, {"family", "n", "segments", "seed", "noise", "trend"}, "simulate");
    SimSpec s;
    s.family = parse_family(get<std::string>(j, "family", "piecewise_constant"));
    s.n = get<std::size_t>(j, "n", s.n);
    s.segments = get<std::size_t>(j, "segments", 0);
    s.seed = get<std::uint64_t>(j, "seed", 0);
    if (j.contains("noise") && !j["noise"].is_null()) {
        s.noise = get<double>(j, "noise", 0.0);
    }
    s.trend = get<double>(j, "trend", 0.0);
    s.validate();
    return s;
}

inline json to_json(const CostModel &c) {
    return {{"kind", std::string(to_string(c.kind))},
            {"gamma", c.gamma},
            {"lags", c.lags},
            {"min_size", c.effective_min_size()}};
}

inline CostModel cost_model_from_json(const json &j) {
    if (j.is_string()) {
        return CostModel::of(parse_cost_kind(j.get<std::string>()));
    }
    check_keys(j, {"kind", "gamma", "lags", "min_size"}, "cost");
    CostModel c;
    c.kind = parse_cost_kind(get<std::string>(j, "kind", "l2"));
    c.gamma = get<double>(j, "gamma", 1.0);
    c.lags = get<std::size_t>(j, "lags", 4);
    c.min_size = get<std::size_t>(j, "min_size", 0);
    c.validate();
    return c;
}

inline json to_json(const BayesConfig &b) {
    return {{"prior", std::string(to_string(b.posterior.prior.kind))},
            {"p", b.posterior.prior.p},
            {"r", b.posterior.prior.r},
            {"k_max", b.posterior.k_max},
            {"epsilon", b.posterior.epsilon},
            {"mu0", b.posterior.hyper.mu0},
            {"kappa0", b.posterior.hyper.kappa0},
            {"alpha0", b.posterior.hyper.alpha0},
            {"beta0", b.posterior.hyper.beta0},
            {"threshold", b.threshold},
            {"distance", b.distance},
            {"paa_window", b.paa_window}};
}

/// Reads the Bayes fields present in `j`, ignoring other keys.
inline BayesConfig bayes_config_from_fields(const json &j, BayesConfig b = {}) {
    require_object(j, "bayes settings");
    auto &post = b.posterior;
    post.prior.kind = parse_prior_kind(get<std::string>(j, "prior", std::string(to_string(post.prior.kind))));
    post.prior.p = get<double>(j, "p", post.prior.p);
    post.prior.r = get<double>(j, "r", post.prior.r);
    post.k_max = get<std::size_t>(j, "k_max", post.k_max);
    post.epsilon = get<double>(j, "epsilon", post.epsilon);
    post.hyper.mu0 = get<double>(j, "mu0", post.hyper.mu0);
    post.hyper.kappa0 = get<double>(j, "kappa0", post.hyper.kappa0);
    post.hyper.alpha0 = get<double>(j, "alpha0", post.hyper.alpha0);
    post.hyper.beta0 = get<double>(j, "beta0", post.hyper.beta0);
    b.threshold = get<double>(j, "threshold", b.threshold);
    b.distance = get<std::size_t>(j, "distance", b.distance);
    b.paa_window = get<std::size_t>(j, "paa_window", b.paa_window);
    post.prior.validate();
    post.hyper.validate();
    require(b.threshold >= 0.0 && b.threshold <= 1.0, ErrorCode::InvalidArgument, "threshold must lie in [0, 1]");
    require(b.distance >= 1, ErrorCode::InvalidArgument, "distance must be at least 1");
    require(b.paa_window >= 1, ErrorCode::InvalidArgument, "paa_window must be at least 1");
    return b;
}

inline BayesConfig bayes_config_from_json(const json &j) {
    check_keys(j,
               {"prior", "p", "r", "k_max", "epsilon", "mu0", "kappa0", "alpha0", "beta0", "threshold", "distance",
                "paa_window"},
               "bayes");
    return bayes_config_from_fields(j);
}

inline std::vector<std::size_t> index_list(const json &j, std::string_view key) {
    return get<std::vector<std::size_t>>(j, key, {});
}

} // namespace cpd::io
