#pragma once

// Experiment configuration: flat `key = value` text, one setting per line,
// '#' starts a comment. Lists are comma separated.
//
//   seed, d, n, n_test, trials   integers
//   kernel                       linear | rbf
//   sigma                        rbf bandwidth, > 0
//   v_grid                       ascending reals starting at 0
//   n_sweep                      strictly increasing positive integers
//   lambda                       optional ridge parameter, > 0
//   cond_matrix                  design | gram (cond-descent only)

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ridgeless/errors.hpp"
#include "ridgeless/kernels.hpp"

namespace ridgeless {

enum class Experiment { mse_vs_norm, cond_descent, pinv_descent, stability_audit, loo_bench, selftest };

inline std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::mse_vs_norm: return "mse-vs-norm";
        case Experiment::cond_descent: return "cond-descent";
        case Experiment::pinv_descent: return "pinv-descent";
        case Experiment::stability_audit: return "stability-audit";
        case Experiment::loo_bench: return "loo-bench";
        case Experiment::selftest: return "selftest";
    }
    return "unknown";
}

/// Which matrix the condition-number sweep measures: the n×d RBF design
/// matrix against d centres, or the n×n Gram of the samples.
enum class CondMatrix { design, gram };

struct ExperimentConfig {
    std::uint64_t seed = 42;
    Index d = 1000;
    Index n = 200;
    Index n_test = 50;
    Index trials = 100;
    KernelSpec kernel = KernelSpec::rbf(5.0);
    std::vector<double> v_grid{0.0, 25.0, 50.0, 75.0, 100.0};
    std::vector<Index> n_sweep;
    std::optional<double> lambda;
    CondMatrix cond_matrix = CondMatrix::design;

    void validate() const {
        auto fail = [](const std::string& field, const std::string& why) {
            throw ConfigError("invalid " + field + ": " + why, field);
        };
        if (d < 1) fail("d", "must be >= 1");
        if (n < 1) fail("n", "must be >= 1");
        if (n_test < 1) fail("n_test", "must be >= 1");
        if (trials < 1) fail("trials", "must be >= 1");
        if (!(kernel.sigma > 0.0) || !std::isfinite(kernel.sigma)) fail("sigma", "must be > 0");
        if (v_grid.empty() || v_grid.front() != 0.0) fail("v_grid", "must start at 0");
        for (std::size_t i = 0; i < v_grid.size(); ++i) {
            if (!(v_grid[i] >= 0.0) || !std::isfinite(v_grid[i])) fail("v_grid", "entries must be finite and >= 0");
            if (i > 0 && v_grid[i] < v_grid[i - 1]) fail("v_grid", "must be sorted ascending");
        }
        for (std::size_t i = 0; i < n_sweep.size(); ++i) {
            if (n_sweep[i] < 1) fail("n_sweep", "entries must be >= 1");
            if (i > 0 && n_sweep[i] <= n_sweep[i - 1]) fail("n_sweep", "must be strictly increasing");
        }
        if (lambda && !(*lambda > 0.0)) fail("lambda", "must be > 0");
    }
};

inline const std::vector<std::string>& valid_config_keys() {
    static const std::vector<std::string> keys{"seed",    "d",      "n",       "n_test", "trials",     "kernel",
                                               "sigma",   "v_grid", "n_sweep", "lambda", "cond_matrix"};
    return keys;
}

inline std::vector<Index> index_range(Index first, Index last) {
    std::vector<Index> out;
    for (Index i = first; i <= last; ++i) out.push_back(i);
    return out;
}

/// Defaults per subcommand. mse-vs-norm uses the d = 1000, n = 200,
/// 50 test points, 100 trials setting; the double-descent sweeps use d = 15,
/// n = 2..45, 20 seeds, σ = 5.
inline ExperimentConfig default_config(Experiment e) {
    ExperimentConfig c;
    switch (e) {
        case Experiment::mse_vs_norm:
            c.kernel = KernelSpec::linear();
            break;
        case Experiment::cond_descent:
        case Experiment::pinv_descent:
            c.d = 15;
            c.trials = 20;
            c.n_sweep = index_range(2, 45);
            if (e == Experiment::pinv_descent) c.kernel = KernelSpec::linear();
            break;
        case Experiment::stability_audit:
            c.d = 20;
            c.n = 30;
            c.trials = 10;
            break;
        case Experiment::loo_bench:
            c.d = 50;
            c.trials = 1;
            c.n_sweep = {3, 50, 100, 200, 400};
            break;
        case Experiment::selftest:
            c.trials = 20;
            break;
    }
    return c;
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& text, const std::string& field, int line) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || text.empty()) {
        throw ConfigError("cannot parse '" + text + "' for " + field + (line > 0 ? " on line " + std::to_string(line) : ""),
                          field, line);
    }
    return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& field, int line) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_number<T>(trim(item), field, line));
    }
    if (out.empty()) {
        throw ConfigError("empty list for " + field, field, line);
    }
    return out;
}

inline std::string join_keys() {
    std::string s;
    for (const auto& k : valid_config_keys()) {
        if (!s.empty()) s += ", ";
        s += k;
    }
    return s;
}

}  // namespace detail

/// Applies one setting. Unknown keys are rejected with the list of valid keys.
inline void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value, int line = 0) {
    const std::string key = detail::trim(raw_key);
    const std::string value = detail::trim(raw_value);
    using detail::parse_number;
    if (key == "seed") {
        c.seed = parse_number<std::uint64_t>(value, key, line);
    } else if (key == "d") {
        c.d = parse_number<Index>(value, key, line);
    } else if (key == "n") {
        c.n = parse_number<Index>(value, key, line);
    } else if (key == "n_test") {
        c.n_test = parse_number<Index>(value, key, line);
    } else if (key == "trials") {
        c.trials = parse_number<Index>(value, key, line);
    } else if (key == "kernel") {
        try {
            c.kernel.kind = parse_kernel_kind(value);
        } catch (const InputError& e) {
            throw ConfigError(e.what(), key, line);
        }
    } else if (key == "sigma") {
        c.kernel.sigma = parse_number<double>(value, key, line);
    } else if (key == "v_grid") {
        c.v_grid = detail::parse_list<double>(value, key, line);
    } else if (key == "n_sweep") {
        c.n_sweep = detail::parse_list<Index>(value, key, line);
    } else if (key == "lambda") {
        c.lambda = parse_number<double>(value, key, line);
    } else if (key == "cond_matrix") {
        if (value == "design") {
            c.cond_matrix = CondMatrix::design;
        } else if (value == "gram") {
            c.cond_matrix = CondMatrix::gram;
        } else {
            throw ConfigError("cond_matrix must be design or gram", key, line);
        }
    } else {
        throw ConfigError("unknown key '" + key + "'" + (line > 0 ? " on line " + std::to_string(line) : "") +
                              "; valid keys: " + detail::join_keys(),
                          key, line);
    }
}

/// Parses `key = value` lines on top of `base` and validates the result.
inline ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base) {
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line) + ": expected key = value", "", line);
        }
        apply_setting(base, body.substr(0, eq), body.substr(eq + 1), line);
    }
    base.validate();
    return base;
}

inline ExperimentConfig load_config(const std::string& path, Experiment e) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'", "config");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), default_config(e));
}

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

template <typename T>
std::string join_list(const std::vector<T>& v) {
    std::string s;
    for (const auto& x : v) {
        if (!s.empty()) s += ",";
        if constexpr (std::is_floating_point_v<T>) {
            s += format_double(x);
        } else {
            s += std::to_string(x);
        }
    }
    return s;
}

}  // namespace detail

/// Serialises a config in the same `key = value` format load_config reads.
inline std::string to_config_text(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "seed = " << c.seed << "\n"
        << "d = " << c.d << "\n"
        << "n = " << c.n << "\n"
        << "n_test = " << c.n_test << "\n"
        << "trials = " << c.trials << "\n"
        << "kernel = " << to_string(c.kernel.kind) << "\n"
        << "sigma = " << detail::format_double(c.kernel.sigma) << "\n"
        << "v_grid = " << detail::join_list(c.v_grid) << "\n";
    if (!c.n_sweep.empty()) out << "n_sweep = " << detail::join_list(c.n_sweep) << "\n";
    if (c.lambda) out << "lambda = " << detail::format_double(*c.lambda) << "\n";
    out << "cond_matrix = " << (c.cond_matrix == CondMatrix::design ? "design" : "gram") << "\n";
    return out.str();
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["d"] = c.d;
    j["n"] = c.n;
    j["n_test"] = c.n_test;
    j["trials"] = c.trials;
    j["kernel"] = to_string(c.kernel.kind);
    j["sigma"] = c.kernel.sigma;
    j["v_grid"] = c.v_grid;
    j["n_sweep"] = c.n_sweep;
    j["lambda"] = c.lambda ? nlohmann::json(*c.lambda) : nlohmann::json(nullptr);
    j["cond_matrix"] = c.cond_matrix == CondMatrix::design ? "design" : "gram";
    return j;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.seed == b.seed && a.d == b.d && a.n == b.n && a.n_test == b.n_test && a.trials == b.trials &&
           a.kernel.kind == b.kernel.kind && a.kernel.sigma == b.kernel.sigma && a.v_grid == b.v_grid &&
           a.n_sweep == b.n_sweep && a.lambda == b.lambda && a.cond_matrix == b.cond_matrix;
}

}  // namespace ridgeless
