#pragma once

// Command-line front end. run_cli() is the whole program minus main(), so the
// test suite can drive it with captured streams.
//
// Exit codes: 0 ok, 1 usage or config error, 2 numerical failure,
// 3 selftest failure.

#include <filesystem>
#include <map>
#include <algorithm>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ridgeless/config.hpp"
#include "ridgeless/errors.hpp"
#include "ridgeless/experiments.hpp"
#include "ridgeless/parallel.hpp"
#include "ridgeless/selftest.hpp"
#include "ridgeless/table.hpp"

namespace ridgeless {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_numerical = 2, exit_selftest = 3 };

/// Parsed command line before the config file is read.
struct CliInvocation {
    Experiment subcommand = Experiment::selftest;
    std::optional<std::string> config_path;
    std::vector<std::pair<std::string, std::string>> overrides;  // in valid_config_keys() order
    std::filesystem::path output_dir = "results";
    bool json = true;
};

/// Config file (or subcommand defaults) with command-line overrides applied.
inline ExperimentConfig resolve_config(const CliInvocation& inv) {
    ExperimentConfig cfg = inv.config_path ? load_config(*inv.config_path, inv.subcommand) : default_config(inv.subcommand);
    for (const auto& [key, value] : inv.overrides) {
        apply_setting(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

namespace detail {

inline void summarize_table(const ResultTable& t, std::ostream& out) {
    for (const auto& c : t.columns) out << c << (&c == &t.columns.back() ? "\n" : "\t");
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << format_real(row[i]) << (i + 1 == row.size() ? "\n" : "\t");
    }
}

inline ResultTable run_experiment(Experiment e, const ExperimentConfig& cfg) {
    const unsigned threads = default_thread_count();
    switch (e) {
        case Experiment::mse_vs_norm: return run_mse_vs_norm(cfg, threads);
        case Experiment::cond_descent: return run_cond_double_descent(cfg, threads);
        case Experiment::pinv_descent: return run_pinv_double_descent(cfg, threads);
        case Experiment::stability_audit: return run_stability_audit(cfg, threads);
        case Experiment::loo_bench: return run_loo_benchmark(cfg);
        case Experiment::selftest: break;
    }
    throw InputError("no table runner for " + to_string(e));
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Ridgeless regression experiments and leave-one-out pseudoinverse tools", "ridgeless"};
    app.require_subcommand(1);
    app.set_version_flag("--version", RIDGELESS_VERSION);

    const std::vector<Experiment> experiments{Experiment::mse_vs_norm,     Experiment::cond_descent,
                                              Experiment::pinv_descent,    Experiment::stability_audit,
                                              Experiment::loo_bench,       Experiment::selftest};
    struct Bound {
        CLI::App* app;
        Experiment e;
        std::string config;
        std::string out = "results";
        bool no_json = false;
        std::map<std::string, std::string> values;
        std::map<std::string, CLI::Option*> options;
    };
    std::vector<Bound> bound(experiments.size());
    for (std::size_t s = 0; s < experiments.size(); ++s) {
        Bound& b = bound[s];
        b.e = experiments[s];
        b.app = app.add_subcommand(to_string(b.e), "run " + to_string(b.e));
        b.app->add_option("--config", b.config, "key = value config file")->check(CLI::ExistingFile);
        b.app->add_option("--out", b.out, "output directory (created if missing)");
        b.app->add_flag("--no-json", b.no_json, "skip the JSON mirror of the result table");
        for (const auto& key : valid_config_keys()) {
            std::string names = "--" + key;
            if (key.find('_') != std::string::npos) {
                std::string dashed = key;
                std::replace(dashed.begin(), dashed.end(), '_', '-');
                names += ",--" + dashed;
            }
            b.options[key] = b.app->add_option(names, b.values[key], "override '" + key + "'");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::CallForVersion&) {
        out << RIDGELESS_VERSION << "\n";
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return exit_usage;
    }

    const Bound* chosen = nullptr;
    for (const auto& b : bound) {
        if (b.app->parsed()) chosen = &b;
    }
    CliInvocation inv;
    inv.subcommand = chosen->e;
    if (!chosen->config.empty()) inv.config_path = chosen->config;
    inv.output_dir = chosen->out;
    inv.json = !chosen->no_json;
    for (const auto& key : valid_config_keys()) {
        if (chosen->options.at(key)->count() > 0) inv.overrides.emplace_back(key, chosen->values.at(key));
    }

    try {
        const ExperimentConfig cfg = resolve_config(inv);
        err << "# " << to_string(inv.subcommand) << " effective config\n";
        std::istringstream lines(to_config_text(cfg));
        for (std::string line; std::getline(lines, line);) err << "#   " << line << "\n";

        if (inv.subcommand == Experiment::selftest) {
            bool ok = true;
            for (const auto& r : run_selftest(cfg.seed, cfg.trials)) {
                out << format_selftest(r) << "\n";
                ok = ok && r.passed;
            }
            out << (ok ? "selftest passed" : "selftest FAILED") << "\n";
            return ok ? exit_ok : exit_selftest;
        }

        const ResultTable table = detail::run_experiment(inv.subcommand, cfg);
        const std::string stem = to_string(inv.subcommand) + "_" + std::to_string(cfg.seed);
        const auto path = write_table(table, inv.output_dir, stem, inv.json);
        detail::summarize_table(table, out);
        err << "# wrote " << path.string() << (inv.json ? " (+ .json)" : "") << "\n";
        return exit_ok;
    } catch (const ConfigError& e) {
        err << "config error";
        if (!e.field().empty()) err << " [" << e.field() << "]";
        err << ": " << e.what() << "\n";
        return exit_usage;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << "\n";
        return exit_usage;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "i/o error: " << e.what() << "\n";
        return exit_usage;
    }
}

}  // namespace ridgeless
