#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace iterint {

inline constexpr const char* kReportFormat = "iterint-report/1";

/// A pass/fail check with its tolerance window [lo, hi].
struct Gate {
    std::string name;
    double value = 0;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool pass = false;
};

inline Gate make_gate(std::string name, double value, double lo, double hi) {
    Gate g{std::move(name), value, lo, hi, false};
    g.pass = std::isfinite(value) && value >= lo && value <= hi;
    return g;
}

struct SlopeFit {
    double slope = 0;
    double intercept = 0;
    double se = 0;
};

/// Least squares fit of log(y) against log(x). Points are sorted by x before
/// accumulating so the result does not depend on the input order.
inline SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::domain_error("slope fit needs at least two points");
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (auto i : idx) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw std::domain_error("log-log fit needs positive values");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (auto i : idx) {
        const double dx = std::log(x[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y[i]) - my);
    }
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (x.size() > 2) {
        double rss = 0;
        for (auto i : idx) {
            const double e = std::log(y[i]) - f.intercept - f.slope * std::log(x[i]);
            rss += e * e;
        }
        f.se = std::sqrt(rss / (n - 2) / sxx);
    }
    return f;
}

/// Estimates over a grid (truncation levels or step sizes) with a fitted
/// log-log slope, plus everything needed to rerun it.
struct RateReport {
    std::string metric;
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<double> se;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double slope_se = std::numeric_limits<double>::quiet_NaN();
    std::string estimator;
    std::uint64_t seed = 0;
    long long samples = 0;
    nlohmann::json config = nlohmann::json::object();
    std::vector<Gate> gates;

    /// Checks the grid/value invariants and refits the slope.
    void fit() {
        if (grid.size() < 4) throw std::domain_error("rate report needs at least four grid points");
        if (values.size() != grid.size() || se.size() != grid.size())
            throw std::domain_error("rate report columns differ in length");
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1])) throw std::domain_error("rate report grid must be strictly increasing");
        for (double v : values)
            if (!(v > 0)) throw std::domain_error("rate report values must be positive");
        const auto f = fit_loglog(grid, values);
        slope = f.slope;
        slope_se = f.se;
    }

    bool passed() const {
        return std::all_of(gates.begin(), gates.end(), [](const Gate& g) { return g.pass; });
    }
};

inline nlohmann::json gate_json(const Gate& g) {
    return {{"name", g.name}, {"value", g.value}, {"lo", g.lo}, {"hi", g.hi}, {"pass", g.pass}};
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Common envelope of every report: format tag, command, config, gates.
inline nlohmann::json report_envelope(const std::string& command, const nlohmann::json& config,
                                      const std::vector<Gate>& gates) {
    nlohmann::json j;
    j["format"] = kReportFormat;
    j["command"] = command;
    j["config"] = config;
    auto& g = j["gates"] = nlohmann::json::array();
    for (const auto& x : gates) g.push_back(gate_json(x));
    j["timestamp"] = utc_timestamp();
    return j;
}

inline nlohmann::json to_json(const RateReport& r, const std::string& command) {
    auto j = report_envelope(command, r.config, r.gates);
    j["metric"] = r.metric;
    j["grid"] = r.grid;
    j["values"] = r.values;
    j["stderr"] = r.se;
    j["slope"] = r.slope;
    j["slope_se"] = r.slope_se;
    j["estimator"] = r.estimator;
    j["seed"] = r.seed;
    j["samples"] = r.samples;
    return j;
}

namespace detail {
inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}
inline std::string window(const Gate& g) { return "[" + fmt(g.lo) + ";" + fmt(g.hi) + "]"; }
}  // namespace detail

/// CSV mirror: one row per grid point, then one row per gate.
inline std::string to_csv(const RateReport& r) {
    std::ostringstream os;
    os << "metric,grid_value,estimate,stderr,gate,pass\n";
    for (std::size_t i = 0; i < r.grid.size(); ++i)
        os << r.metric << ',' << detail::fmt(r.grid[i]) << ',' << detail::fmt(r.values[i]) << ','
           << detail::fmt(r.se[i]) << ",,\n";
    os << "slope,," << detail::fmt(r.slope) << ',' << detail::fmt(r.slope_se) << ",,\n";
    for (const auto& g : r.gates)
        os << g.name << ",," << detail::fmt(g.value) << ",," << detail::window(g) << ',' << (g.pass ? 1 : 0)
           << '\n';
    return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << text;
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace iterint
