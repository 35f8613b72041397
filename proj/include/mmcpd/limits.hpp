#pragma once

// Monte Carlo quantiles of sup_{u in [0,1]} ||B(u) - u B(1)||^2 for a
// d-dimensional standard Brownian motion B, the null limit of T_n.

#include "mmcpd/critical_table_data.hpp"
#include "mmcpd/error.hpp"
#include "mmcpd/parallel.hpp"
#include "mmcpd/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace mmcpd {

inline constexpr std::size_t kDefaultBridgeGrid = 10'000;
inline constexpr std::size_t kDefaultBridgeReplications = 100'000;

/**
 * One draw of max_{k=0..G} ||W_k - (k/G) W_G||^2 where W has i.i.d. N(0, 1/G)
 * increments per coordinate. `scratch` is resized to G*d and reused.
 */
inline double simulate_bridge_sup(int d, std::size_t grid, Rng& rng, std::vector<double>& scratch) {
    if (d < 1) throw InvalidArgument("dimension must be positive");
    if (grid < 1) throw InvalidArgument("grid must have at least one step");
    const auto dim = static_cast<std::size_t>(d);
    scratch.resize(grid * dim);
    const double step_sd = 1.0 / std::sqrt(static_cast<double>(grid));

    for (std::size_t j = 0; j < dim; ++j) {
        double w = 0.0;
        double* col = scratch.data() + j * grid;
        for (std::size_t k = 0; k < grid; ++k) {
            w += step_sd * rng.normal();
            col[k] = w;
        }
    }

    double best = 0.0;  // k = 0
    const double inv_g = 1.0 / static_cast<double>(grid);
    for (std::size_t k = 0; k < grid; ++k) {
        const double frac = static_cast<double>(k + 1) * inv_g;
        double sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double* col = scratch.data() + j * grid;
            const double b = col[k] - frac * col[grid - 1];
            sq += b * b;
        }
        best = std::max(best, sq);
    }
    return best;
}

inline double simulate_bridge_sup(int d, std::size_t grid, Rng& rng) {
    std::vector<double> scratch;
    return simulate_bridge_sup(d, grid, rng, scratch);
}

/// R draws of the discretized bridge sup; draw r uses Rng::stream(seed, r).
inline std::vector<double> simulate_bridge_sups(int d, std::size_t replications, std::size_t grid,
                                                std::uint64_t seed, unsigned jobs = 0) {
    std::vector<double> draws(replications);
    std::vector<std::vector<double>> scratch(resolve_jobs(jobs));
    parallel_for(replications, jobs, [&](unsigned worker, std::size_t r) {
        Rng rng = Rng::stream(seed, r);
        draws[r] = simulate_bridge_sup(d, grid, rng, scratch[worker]);
    });
    return draws;
}

/// Order-statistic (type 1) quantile of sorted draws.
inline double empirical_quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw InvalidArgument("no draws");
    const auto r = static_cast<double>(sorted.size());
    auto idx = static_cast<long long>(std::ceil(p * r)) - 1;
    idx = std::clamp<long long>(idx, 0, static_cast<long long>(sorted.size()) - 1);
    return sorted[static_cast<std::size_t>(idx)];
}

/**
 * Standard error of the p-quantile from the binomial interval on order
 * statistics: half the distance between the quantiles at p -/+ sqrt(p(1-p)/R).
 */
inline double quantile_standard_error(const std::vector<double>& sorted, double p) {
    const double delta = std::sqrt(p * (1.0 - p) / static_cast<double>(sorted.size()));
    return 0.5 * (empirical_quantile(sorted, std::min(1.0, p + delta)) -
                  empirical_quantile(sorted, std::max(0.0, p - delta)));
}

struct CriticalValueTable {
    int dim = 0;
    std::size_t grid_points = 0;
    std::size_t replications = 0;
    std::uint64_t seed = 0;
    std::map<double, double> quantiles;       ///< level -> critical value
    std::map<double, double> standard_error;  ///< level -> MC standard error
};

inline CriticalValueTable critical_value(int d, const std::vector<double>& levels,
                                         std::size_t replications = kDefaultBridgeReplications,
                                         std::size_t grid = kDefaultBridgeGrid,
                                         std::uint64_t seed = 20190401, unsigned jobs = 0) {
    if (replications < 1000) throw InvalidArgument("critical values need at least 1000 replications");
    if (grid < 2) throw InvalidArgument("bridge grid must have at least 2 steps");
    for (double level : levels) {
        if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("level must lie in (0, 1)");
    }
    std::vector<double> draws = simulate_bridge_sups(d, replications, grid, seed, jobs);
    std::sort(draws.begin(), draws.end());

    CriticalValueTable table{d, grid, replications, seed, {}, {}};
    for (double level : levels) {
        table.quantiles[level] = empirical_quantile(draws, 1.0 - level);
        table.standard_error[level] = quantile_standard_error(draws, 1.0 - level);
    }
    return table;
}

inline CriticalValueTable critical_value(int d, double level,
                                         std::size_t replications = kDefaultBridgeReplications,
                                         std::size_t grid = kDefaultBridgeGrid,
                                         std::uint64_t seed = 20190401, unsigned jobs = 0) {
    return critical_value(d, std::vector<double>{level}, replications, grid, seed, jobs);
}

// ---------------------------------------------------------------------------
// Plain-text table files: one entry per line, `d level value stderr R G seed`,
// '#' starts a comment.

inline std::vector<CriticalValueEntry> to_entries(const CriticalValueTable& table) {
    std::vector<CriticalValueEntry> out;
    for (const auto& [level, value] : table.quantiles) {
        out.push_back({table.dim, level, value, table.standard_error.at(level),
                       table.replications, table.grid_points, table.seed});
    }
    return out;
}

inline bool same_level(double a, double b) noexcept { return std::abs(a - b) <= 1e-12; }

inline std::vector<CriticalValueEntry> parse_critical_table(std::istream& in) {
    std::vector<CriticalValueEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream fields(line);
        CriticalValueEntry e{};
        if (!(fields >> e.dim >> e.level >> e.value >> e.standard_error >> e.replications >>
              e.grid_points >> e.seed)) {
            throw InvalidArgument("critical value table line " + std::to_string(line_no) +
                                  ": expected `d level value stderr R G seed`");
        }
        entries.push_back(e);
    }
    return entries;
}

inline std::vector<CriticalValueEntry> read_critical_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open critical value table '" + path + "'");
    return parse_critical_table(in);
}

inline void write_critical_table(std::ostream& out, std::vector<CriticalValueEntry> entries) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return a.dim != b.dim ? a.dim < b.dim : a.level > b.level;
    });
    out << "# d level value stderr R G seed\n";
    char buf[256];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof buf, "%d %.4g %.6f %.6f %zu %zu %llu\n", e.dim, e.level, e.value,
                      e.standard_error, e.replications, e.grid_points,
                      static_cast<unsigned long long>(e.seed));
        out << buf;
    }
}

inline void write_critical_table(const std::string& path, const std::vector<CriticalValueEntry>& entries) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write critical value table '" + path + "'");
    write_critical_table(out, entries);
}

/// Replaces entries with the same (d, level) and appends the rest.
inline std::vector<CriticalValueEntry> merge_critical_tables(std::vector<CriticalValueEntry> base,
                                                             const std::vector<CriticalValueEntry>& update) {
    for (const auto& u : update) {
        auto it = std::find_if(base.begin(), base.end(), [&](const auto& e) {
            return e.dim == u.dim && same_level(e.level, u.level);
        });
        if (it != base.end()) *it = u;
        else base.push_back(u);
    }
    return base;
}

inline std::optional<double> lookup_critical_value(std::span<const CriticalValueEntry> entries, int d,
                                                   double level) {
    for (const auto& e : entries) {
        if (e.dim == d && same_level(e.level, level)) return e.value;
    }
    return std::nullopt;
}

/// Critical value used by run_test when none is supplied: the published
/// 2.408 for (d=2, level 0.05), otherwise the shipped simulated table.
inline double default_critical_value(int d, double level) {
    if (d == 2 && same_level(level, 0.05)) return kReferenceCriticalValueD2Level05;
    if (auto v = lookup_critical_value(kShippedCriticalValues, d, level)) return *v;
    throw InvalidArgument("no shipped critical value for d=" + std::to_string(d) + ", level=" +
                          std::to_string(level) + "; supply a table or simulate one");
}

}  // namespace mmcpd
