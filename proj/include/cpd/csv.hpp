#pragma once

#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cpd/changepoints.hpp"
#include "cpd/error.hpp"
#include "cpd/series.hpp"

namespace cpd {

namespace csv_detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

// Splits one line on ','; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(trim(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.emplace_back(trim(current));
    return fields;
}

inline bool is_missing(std::string_view field) {
    return field.empty() || field == "NA" || field == "na" || field == "NaN" || field == "nan" || field == "null" ||
           field == "NULL";
}

inline std::optional<double> parse_real(std::string_view s) {
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0.0;
    const auto *end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        return std::nullopt;
    }
    return v;
}

inline std::optional<int> parse_int(std::string_view s) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

// YYYY-MM-DD[(T| )hh:mm[:ss[.frac]]][Z|(+|-)hh[:]mm], returned as seconds
// since the Unix epoch.
inline std::optional<double> parse_iso8601(std::string_view s) {
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') {
        return std::nullopt;
    }
    const auto y = parse_int(s.substr(0, 4));
    const auto mo = parse_int(s.substr(5, 2));
    const auto d = parse_int(s.substr(8, 2));
    if (!y || !mo || !d) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*mo)},
                                          std::chrono::day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    double seconds = static_cast<double>(std::chrono::sys_days{ymd}.time_since_epoch().count()) * 86400.0;
    std::string_view rest = s.substr(10);
    if (rest.empty()) {
        return seconds;
    }
    if (rest.front() != 'T' && rest.front() != ' ') {
        return std::nullopt;
    }
    rest.remove_prefix(1);
    if (rest.size() < 5 || rest[2] != ':') {
        return std::nullopt;
    }
    const auto hh = parse_int(rest.substr(0, 2));
    const auto mm = parse_int(rest.substr(3, 2));
    if (!hh || !mm || *hh > 24 || *mm > 59) {
        return std::nullopt;
    }
    seconds += *hh * 3600.0 + *mm * 60.0;
    rest.remove_prefix(5);
    if (!rest.empty() && rest.front() == ':') {
        std::size_t len = 1;
        while (len < rest.size() && (std::isdigit(static_cast<unsigned char>(rest[len])) || rest[len] == '.')) {
            ++len;
        }
        const auto ss = parse_real(rest.substr(1, len - 1));
        if (!ss || *ss < 0.0 || *ss >= 61.0) {
            return std::nullopt;
        }
        seconds += *ss;
        rest.remove_prefix(len);
    }
    if (rest.empty() || rest == "Z") {
        return seconds;
    }
    if (rest.front() == '+' || rest.front() == '-') {
        const double sign = rest.front() == '+' ? 1.0 : -1.0;
        std::string digits;
        for (char c : rest.substr(1)) {
            if (c != ':') {
                digits.push_back(c);
            }
        }
        if (digits.size() != 4) {
            return std::nullopt;
        }
        const auto oh = parse_int(std::string_view(digits).substr(0, 2));
        const auto om = parse_int(std::string_view(digits).substr(2, 2));
        if (!oh || !om) {
            return std::nullopt;
        }
        return seconds - sign * (*oh * 3600.0 + *om * 60.0);
    }
    return std::nullopt;
}

inline std::optional<double> parse_time(std::string_view s) {
    if (auto v = parse_real(s)) {
        return v;
    }
    return parse_iso8601(s);
}

inline std::string quote_if_needed(const std::string &field) {
    if (field.find_first_of(",\"") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        out += c;
        if (c == '"') {
            out += '"';
        }
    }
    return out + "\"";
}

inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace csv_detail

/// Parses CSV text. An empty `value_columns` selects every column except the
/// time column. Rows with a missing field in any selected column are dropped
/// and counted in `dropped_rows`; the equidistance check runs over every row
/// that carries a timestamp and reports the 1-based data row that breaks it.
inline SignalBundle parse_csv(std::istream &in, const std::string &time_column,
                              std::vector<std::string> value_columns = {}) {
    using namespace csv_detail;
    std::string line;
    if (!std::getline(in, line)) {
        fail(ErrorCode::EmptyAfterCleaning, "CSV input is empty");
    }
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
        line.erase(0, 3); // UTF-8 BOM
    }
    const auto header = split_line(line);
    auto column_of = [&](const std::string &name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        fail(ErrorCode::MissingColumn, "column '" + name + "' not in header");
    };
    const std::size_t time_idx = column_of(time_column);
    if (value_columns.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i != time_idx) {
                value_columns.push_back(header[i]);
            }
        }
    }
    require(!value_columns.empty(), ErrorCode::MissingColumn, "no value columns selected");
    std::vector<std::size_t> value_idx;
    for (const auto &name : value_columns) {
        value_idx.push_back(column_of(name));
    }

    std::vector<std::vector<double>> columns(value_idx.size());
    std::vector<double> kept_times;
    std::size_t dropped = 0;
    std::size_t row = 0;
    std::optional<double> prev_time;
    std::optional<double> step;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        ++row;
        const auto fields = split_line(line);
        auto field = [&](std::size_t idx) -> std::string_view {
            return idx < fields.size() ? std::string_view(fields[idx]) : std::string_view{};
        };
        if (is_missing(field(time_idx))) {
            ++dropped;
            continue;
        }
        const auto t = parse_time(field(time_idx));
        if (!t) {
            fail(ErrorCode::ParseError, "unparseable timestamp on data row " + std::to_string(row), row);
        }
        if (prev_time) {
            const double diff = *t - *prev_time;
            if (!(diff > 0.0)) {
                fail(ErrorCode::NonEquidistantTimestamps,
                     "timestamps not strictly increasing at data row " + std::to_string(row), row);
            }
            if (!step) {
                step = diff;
            } else if (std::abs(diff - *step) > 1e-6 * std::abs(*step)) {
                fail(ErrorCode::NonEquidistantTimestamps,
                     "timestamps not equidistant at data row " + std::to_string(row), row);
            }
        }
        prev_time = t;

        std::vector<double> values;
        values.reserve(value_idx.size());
        bool missing = false;
        for (std::size_t idx : value_idx) {
            const auto f = field(idx);
            if (is_missing(f)) {
                missing = true;
                break;
            }
            const auto v = parse_real(f);
            if (!v) {
                fail(ErrorCode::ParseError,
                     "unparseable value '" + std::string(f) + "' on data row " + std::to_string(row), row);
            }
            if (!std::isfinite(*v)) {
                missing = true;
                break;
            }
            values.push_back(*v);
        }
        if (missing) {
            ++dropped;
            continue;
        }
        kept_times.push_back(*t);
        for (std::size_t c = 0; c < values.size(); ++c) {
            columns[c].push_back(values[c]);
        }
    }
    if (kept_times.size() < 2) {
        fail(ErrorCode::EmptyAfterCleaning, "fewer than 2 complete rows after dropping missing values");
    }
    const double dt = step.value_or(1.0);
    SignalBundle bundle;
    bundle.dropped_rows = dropped;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        bundle.series.emplace_back(std::move(columns[c]), dt, kept_times.front(), value_columns[c]);
    }
    return bundle;
}

inline SignalBundle load_csv(const std::filesystem::path &path, const std::string &time_column,
                             std::vector<std::string> value_columns = {}) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::InvalidArgument, "cannot open " + path.string());
    }
    return parse_csv(in, time_column, std::move(value_columns));
}

inline void write_csv(std::ostream &out, const SignalBundle &bundle, const std::string &time_column = "t") {
    using namespace csv_detail;
    bundle.validate();
    out << quote_if_needed(time_column);
    for (const auto &s : bundle.series) {
        out << ',' << quote_if_needed(s.label());
    }
    out << '\n';
    const auto &first = bundle.series.front();
    for (std::size_t i = 0; i < first.size(); ++i) {
        out << format_real(first.time_at(i));
        for (const auto &s : bundle.series) {
            out << ',' << format_real(s[i]);
        }
        out << '\n';
    }
}

inline void write_csv(const std::filesystem::path &path, const SignalBundle &bundle,
                      const std::string &time_column = "t") {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorCode::InvalidArgument, "cannot write " + path.string());
    }
    write_csv(out, bundle, time_column);
}

/// Change-point files hold one column `index`: the sorted intermediate
/// change points followed by the series length n as the final row.
inline void write_change_points(std::ostream &out, const ChangePointSet &cps) {
    out << "index\n";
    for (std::size_t p : cps.with_endpoint()) {
        out << p << '\n';
    }
}

inline void write_change_points(const std::filesystem::path &path, const ChangePointSet &cps) {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorCode::InvalidArgument, "cannot write " + path.string());
    }
    write_change_points(out, cps);
}

inline ChangePointSet read_change_points(std::istream &in) {
    std::string line;
    std::vector<std::size_t> points;
    bool header_seen = false;
    while (std::getline(in, line)) {
        const auto field = csv_detail::trim(csv_detail::split_line(line).front());
        if (field.empty()) {
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            if (field == "index") {
                continue;
            }
        }
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc{} || ptr != field.data() + field.size()) {
            fail(ErrorCode::ParseError, "bad change point '" + std::string(field) + "'");
        }
        points.push_back(v);
    }
    require(!points.empty(), ErrorCode::ParseError, "change point file lacks the endpoint row");
    const std::size_t n = points.back();
    points.pop_back();
    return ChangePointSet(n, std::move(points));
}

inline ChangePointSet read_change_points(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::InvalidArgument, "cannot open " + path.string());
    }
    return read_change_points(in);
}

/// Per-position probability curve as `index,probability`.
inline void write_probability_curve(std::ostream &out, std::span<const double> prob) {
    out << "index,probability\n";
    for (std::size_t i = 0; i < prob.size(); ++i) {
        out << i << ',' << csv_detail::format_real(prob[i]) << '\n';
    }
}

} // namespace cpd
