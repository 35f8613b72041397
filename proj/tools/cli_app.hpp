#pragma once

// Command-line front end: `test`, `detect`, `critval` and `simulate`.
// Exit codes: 0 ran (and did not reject), 2 ran and rejected H0, 1 error.

#include "mmcpd/mmcpd.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mmcpd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitReject = 2;

using nlohmann::ordered_json;

namespace detail {

inline std::string fmt_double(double x) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

inline ordered_json vec_json(const Vec& v) {
    ordered_json j = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

inline ordered_json mat_json(const Mat& m) {
    ordered_json j = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        j.push_back(row);
    }
    return j;
}

inline ordered_json nullable(double x) { return std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr); }

inline std::string vec_text(const Vec& v, char sep = ' ') {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        s += fmt_double(v(i));
    }
    return s;
}

inline void dump_path(const std::string& path, const std::vector<double>& t_path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write path file '" + path + "'");
    out << "k,u,t\n";
    const double n = static_cast<double>(t_path.size() - 1);
    for (std::size_t k = 0; k < t_path.size(); ++k) {
        out << k << ',' << fmt_double(static_cast<double>(k) / n) << ',' << fmt_double(t_path[k]) << '\n';
    }
}

inline ordered_json report_json(const std::string& command, const std::string& data_path,
                                const MomentModel& model, const TestReport& r) {
    ordered_json j;
    j["command"] = command;
    j["data"] = data_path;
    j["model"] = model.name;
    j["n"] = r.n;
    j["theta_hat"] = vec_json(r.theta_hat());
    j["mme_method"] = to_string(r.mme.method);
    j["mme_residual"] = r.mme.residual_norm;
    j["sigma_hat"] = mat_json(r.sigma_hat);
    j["t_stat"] = r.t_stat;
    if (r.has_decision()) {
        j["level"] = r.level;
        j["critical_value"] = r.critical_value;
        j["reject"] = r.reject;
    }
    j["u_hat"] = r.u_hat;
    j["k_hat"] = r.k_hat;
    j["significant"] = r.has_decision() ? ordered_json(r.reject) : ordered_json(nullptr);
    return j;
}

inline void report_text(std::ostream& out, const MomentModel& model, const TestReport& r) {
    out << "model:          " << model.name << "\n";
    out << "n:              " << r.n << "\n";
    out << "theta_hat:      " << vec_text(r.theta_hat()) << "  (" << to_string(r.mme.method) << ")\n";
    out << "T_n:            " << fmt_double(r.t_stat) << "\n";
    if (r.has_decision()) {
        out << "critical value: " << fmt_double(r.critical_value) << "  (level " << fmt_double(r.level) << ")\n";
        out << "decision:       " << (r.reject ? "reject H0 (change detected)" : "do not reject H0") << "\n";
        out << "u_hat:          " << fmt_double(r.u_hat) << "  (k_hat " << r.k_hat << ")"
            << (r.reject ? "" : "  [not significant]") << "\n";
    } else {
        out << "u_hat:          " << fmt_double(r.u_hat) << "  (k_hat " << r.k_hat << ")\n";
    }
}

// --- simulation config -------------------------------------------------------

inline const std::set<std::string>& config_keys() {
    static const std::set<std::string> keys = {"model", "theta0", "theta1", "ustar", "n", "m",
                                               "level", "seed", "bins", "name"};
    return keys;
}

inline ParamVector param_from_json(const ordered_json& j, const std::string& key) {
    if (!j.is_array() || j.empty()) throw InvalidArgument("config key '" + key + "' must be a non-empty array of numbers");
    ParamVector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InvalidArgument("config key '" + key + "' must contain numbers only");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

template <typename T>
std::vector<T> scalar_or_list(const ordered_json& obj, const std::string& key) {
    const ordered_json& j = obj.at(key);
    std::vector<T> out;
    auto take = [&](const ordered_json& x) {
        if (!x.is_number()) throw InvalidArgument("config key '" + key + "' must be a number or array of numbers");
        if constexpr (std::is_integral_v<T>) {
            if (!x.is_number_integer() || x.get<long long>() < 0) {
                throw InvalidArgument("config key '" + key + "' must be a non-negative integer");
            }
        }
        out.push_back(x.get<T>());
    };
    if (j.is_array()) {
        for (const auto& x : j) take(x);
        if (out.empty()) throw InvalidArgument("config key '" + key + "' is an empty array");
    } else {
        take(j);
    }
    return out;
}

struct NamedConfig {
    std::string name;
    ExperimentConfig config;
};

/**
 * A config file holds one experiment object or an array of them. Within an
 * object `n` and `ustar` may be arrays; every combination becomes one row.
 */
inline std::vector<NamedConfig> parse_simulation_config(const ordered_json& doc) {
    std::vector<NamedConfig> out;
    auto expand = [&](const ordered_json& obj) {
        if (!obj.is_object()) throw InvalidArgument("config entries must be JSON objects");
        for (const auto& [key, _] : obj.items()) {
            if (!config_keys().contains(key)) throw InvalidArgument("unknown config key '" + key + "'");
        }
        for (const char* required : {"model", "theta0", "n", "m"}) {
            if (!obj.contains(required)) throw InvalidArgument(std::string("missing config key '") + required + "'");
        }
        if (obj.contains("theta1") != obj.contains("ustar")) {
            throw InvalidArgument("config keys 'theta1' and 'ustar' must be given together");
        }
        ExperimentConfig base;
        if (!obj["model"].is_string()) throw InvalidArgument("config key 'model' must be a string");
        base.model = obj["model"].get<std::string>();
        base.theta0 = param_from_json(obj["theta0"], "theta0");
        base.m = scalar_or_list<std::size_t>(obj, "m").front();
        if (obj.contains("level")) base.level = scalar_or_list<double>(obj, "level").front();
        if (obj.contains("seed")) base.seed = scalar_or_list<std::uint64_t>(obj, "seed").front();
        if (obj.contains("bins")) base.histogram_bins = scalar_or_list<std::size_t>(obj, "bins").front();
        const std::string name = obj.contains("name") && obj["name"].is_string() ? obj["name"].get<std::string>() : "";
        const MomentModel model = model_by_name(base.model);

        std::vector<std::optional<double>> ustars{std::nullopt};
        ParamVector theta1;
        if (obj.contains("ustar")) {
            theta1 = param_from_json(obj["theta1"], "theta1");
            ustars.clear();
            for (double u : scalar_or_list<double>(obj, "ustar")) ustars.emplace_back(u);
        }
        for (const auto& u : ustars) {
            for (std::size_t n : scalar_or_list<std::size_t>(obj, "n")) {
                ExperimentConfig c = base;
                c.n = n;
                if (u) c.change = ChangeSpec{*u, theta1};
                validate(c, model);
                out.push_back({name, c});
            }
        }
    };
    if (doc.is_array()) {
        for (const auto& obj : doc) expand(obj);
    } else {
        expand(doc);
    }
    if (out.empty()) throw InvalidArgument("config defines no experiments");
    return out;
}

inline std::vector<NamedConfig> read_simulation_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config '" + path + "'");
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_simulation_config(doc);
}

inline std::string results_csv_header() {
    return "name,model,theta0,theta1,ustar,n,m,level,critical_value,rejection_rate,"
           "u_hat_mean,u_hat_sd,u_hat_rmse,completed,failed\n";
}

inline std::string results_csv_row(const NamedConfig& nc, const ExperimentResult& r) {
    const ExperimentConfig& c = nc.config;
    std::ostringstream s;
    s << nc.name << ',' << c.model << ',' << vec_text(c.theta0, ';') << ','
      << (c.change ? vec_text(c.change->theta1, ';') : "") << ','
      << (c.change ? fmt_double(c.change->u_star) : "") << ',' << c.n << ',' << c.m << ','
      << fmt_double(c.level) << ',' << fmt_double(r.critical_value) << ',' << fmt_double(r.rejection_rate)
      << ',' << fmt_double(r.u_hat_mean) << ',' << fmt_double(r.u_hat_sd) << ','
      << (c.change ? fmt_double(r.u_hat_rmse) : "") << ',' << r.completed << ',' << r.failed << '\n';
    return s.str();
}

inline unsigned parse_jobs(int jobs) {
    if (jobs < 0) throw InvalidArgument("--jobs must be >= 0");
    return static_cast<unsigned>(jobs);
}

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Method-of-moments Z-process change point test", "mmcpd"};
    app.require_subcommand(1);
    app.fallthrough();  // lets --format follow the subcommand

    std::string format = "text";
    app.add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "json"}));

    // test / detect
    std::string data_path, model_name = "gamma", dump, table_path;
    double level = 0.05, ridge = 0.0;
    bool simulate_cv = false;
    std::uint64_t seed = 20190401;
    int jobs = 0;

    auto* test_cmd = app.add_subcommand("test", "Test a data file for a change point");
    test_cmd->add_option("data", data_path, "One observation per line")->required();
    test_cmd->add_option("--model", model_name, "gamma|exponential|normal|poisson|bernoulli");
    test_cmd->add_option("--level", level, "Significance level");
    test_cmd->add_option("--table", table_path, "Critical value table file");
    test_cmd->add_flag("--simulate-critval", simulate_cv, "Simulate the critical value for this level");
    test_cmd->add_option("--seed", seed, "Seed for --simulate-critval");
    test_cmd->add_option("--jobs", jobs, "Worker threads (0 = all)");
    test_cmd->add_option("--dump-path", dump, "Write k,u,T_n(u) CSV");
    test_cmd->add_option("--ridge", ridge, "Ridge added to the plug-in covariance diagonal");

    auto* detect_cmd = app.add_subcommand("detect", "Estimate the change point location");
    detect_cmd->add_option("data", data_path, "One observation per line")->required();
    detect_cmd->add_option("--model", model_name, "gamma|exponential|normal|poisson|bernoulli");
    detect_cmd->add_option("--dump-path", dump, "Write k,u,T_n(u) CSV");
    detect_cmd->add_option("--ridge", ridge, "Ridge added to the plug-in covariance diagonal");

    // critval
    int dim = 2;
    std::vector<double> levels;
    std::size_t reps = kDefaultBridgeReplications, grid = kDefaultBridgeGrid;
    std::string out_path;
    auto* cv_cmd = app.add_subcommand("critval", "Simulate critical values of the limit law");
    cv_cmd->add_option("--d", dim, "Moment dimension")->check(CLI::Range(1, kMaxDim));
    cv_cmd->add_option("--level", levels, "Levels (repeatable; default 0.10 0.05 0.01)");
    cv_cmd->add_option("--R", reps, "Replications");
    cv_cmd->add_option("--G", grid, "Grid steps per path");
    cv_cmd->add_option("--seed", seed, "Master seed");
    cv_cmd->add_option("--jobs", jobs, "Worker threads (0 = all)");
    cv_cmd->add_option("--out", out_path, "Table file to create or update");

    // simulate
    std::string config_path, hist_path;
    std::optional<std::size_t> m_override;
    std::optional<std::uint64_t> seed_override;
    auto* sim_cmd = app.add_subcommand("simulate", "Run a configured Monte Carlo study");
    sim_cmd->add_option("config", config_path, "JSON experiment config")->required();
    sim_cmd->add_option("--out", out_path, "Results CSV");
    sim_cmd->add_option("--hist", hist_path, "u_hat histogram CSV");
    sim_cmd->add_option("--m", m_override, "Override the replication count");
    sim_cmd->add_option("--seed", seed_override, "Override the config seed");
    sim_cmd->add_option("--jobs", jobs, "Worker threads (0 = all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
    const bool json = format == "json";

    try {
        if (test_cmd->parsed() || detect_cmd->parsed()) {
            const bool is_test = test_cmd->parsed();
            const MomentModel model = model_by_name(model_name);
            const std::vector<double> data = read_observations(data_path);
            TestReport report;
            if (is_test) {
                TestOptions opts;
                opts.level = level;
                opts.ridge = ridge;
                if (!table_path.empty()) {
                    const auto entries = read_critical_table(table_path);
                    const auto v = lookup_critical_value(entries, model.dim, level);
                    if (!v) throw InvalidArgument("table '" + table_path + "' has no entry for d=" +
                                                  std::to_string(model.dim) + ", level=" + detail::fmt_double(level));
                    opts.critical_value = *v;
                } else if (simulate_cv) {
                    opts.critical_value = critical_value(model.dim, level, kDefaultBridgeReplications,
                                                         kDefaultBridgeGrid, seed, detail::parse_jobs(jobs))
                                              .quantiles.at(level);
                }
                report = run_test(data, model, opts);
            } else {
                report = detect(data, model, ridge);
            }
            if (!dump.empty()) detail::dump_path(dump, report.t_path);
            if (json) {
                out << detail::report_json(is_test ? "test" : "detect", data_path, model, report).dump(2) << "\n";
            } else {
                detail::report_text(out, model, report);
            }
            return is_test && report.reject ? kExitReject : kExitOk;
        }

        if (cv_cmd->parsed()) {
            if (levels.empty()) levels = {0.10, 0.05, 0.01};
            const CriticalValueTable table =
                critical_value(dim, levels, reps, grid, seed, detail::parse_jobs(jobs));
            const auto entries = to_entries(table);
            if (!out_path.empty()) {
                std::vector<CriticalValueEntry> base;
                if (std::filesystem::exists(out_path)) base = read_critical_table(out_path);
                write_critical_table(out_path, merge_critical_tables(base, entries));
            }
            if (json) {
                ordered_json j;
                j["command"] = "critval";
                j["d"] = dim;
                j["R"] = reps;
                j["G"] = grid;
                j["seed"] = seed;
                j["values"] = ordered_json::array();
                for (const auto& e : entries) {
                    j["values"].push_back({{"level", e.level}, {"value", e.value}, {"stderr", e.standard_error}});
                }
                out << j.dump(2) << "\n";
            } else {
                for (const auto& e : entries) {
                    out << "d=" << e.dim << " level=" << detail::fmt_double(e.level)
                        << " critical value=" << detail::fmt_double(e.value) << " +/- "
                        << detail::fmt_double(e.standard_error) << "  (R=" << e.replications << ", G="
                        << e.grid_points << ", seed=" << e.seed << ")\n";
                }
            }
            return kExitOk;
        }

        if (sim_cmd->parsed()) {
            std::vector<detail::NamedConfig> configs = detail::read_simulation_config(config_path);
            std::ostringstream csv, hist;
            csv << detail::results_csv_header();
            hist << "experiment,bin_left,bin_right,count\n";
            ordered_json j;
            j["command"] = "simulate";
            j["config"] = config_path;
            j["experiments"] = ordered_json::array();
            for (std::size_t i = 0; i < configs.size(); ++i) {
                auto& nc = configs[i];
                if (m_override) nc.config.m = *m_override;
                if (seed_override) nc.config.seed = *seed_override;
                const ExperimentResult r = run_experiment(nc.config, detail::parse_jobs(jobs));
                csv << detail::results_csv_row(nc, r);
                for (std::size_t b = 0; b < r.histogram.counts.size(); ++b) {
                    hist << i << ',' << detail::fmt_double(r.histogram.edges[b]) << ','
                         << detail::fmt_double(r.histogram.edges[b + 1]) << ',' << r.histogram.counts[b] << '\n';
                }
                const ExperimentConfig& c = nc.config;
                ordered_json row;
                row["name"] = nc.name;
                row["model"] = c.model;
                row["theta0"] = detail::vec_json(c.theta0);
                row["theta1"] = c.change ? detail::vec_json(c.change->theta1) : ordered_json(nullptr);
                row["ustar"] = c.change ? ordered_json(c.change->u_star) : ordered_json(nullptr);
                row["n"] = c.n;
                row["m"] = c.m;
                row["level"] = c.level;
                row["seed"] = c.seed;
                row["critical_value"] = r.critical_value;
                row["rejection_rate"] = r.rejection_rate;
                row["u_hat_mean"] = detail::nullable(r.u_hat_mean);
                row["u_hat_sd"] = detail::nullable(r.u_hat_sd);
                row["u_hat_rmse"] = detail::nullable(r.u_hat_rmse);
                row["completed"] = r.completed;
                row["failed"] = r.failed;
                j["experiments"].push_back(row);
            }
            if (!out_path.empty()) {
                std::ofstream f(out_path);
                if (!f) throw InvalidArgument("cannot write '" + out_path + "'");
                f << csv.str();
            }
            if (!hist_path.empty()) {
                std::ofstream f(hist_path);
                if (!f) throw InvalidArgument("cannot write '" + hist_path + "'");
                f << hist.str();
            }
            if (json) out << j.dump(2) << "\n";
            else out << csv.str();
            return kExitOk;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

}  // namespace mmcpd::cli
