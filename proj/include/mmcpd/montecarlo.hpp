#pragma once

// Simulation harness for empirical size, power and change point accuracy,
// plus the large-sample quantities under a single change (pseudo-true
// parameter, mixture covariance, limiting drift) used as consistency oracles.

#include "mmcpd/error.hpp"
#include "mmcpd/estimator.hpp"
#include "mmcpd/linalg.hpp"
#include "mmcpd/moment_model.hpp"
#include "mmcpd/parallel.hpp"
#include "mmcpd/random.hpp"
#include "mmcpd/zprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mmcpd {

struct ChangeSpec {
    double u_star = 0.5;
    ParamVector theta1;
};

struct ExperimentConfig {
    std::string model = "gamma";
    ParamVector theta0;
    std::optional<ChangeSpec> change;
    std::size_t n = 100;
    std::size_t m = 1000;
    double level = 0.05;
    std::uint64_t seed = 20190401;
    std::size_t histogram_bins = 50;
    bool keep_records = false;
    std::optional<double> critical_value;
};

struct Histogram {
    std::vector<double> edges;  ///< bins + 1 edges on [0, 1]
    std::vector<std::size_t> counts;

    [[nodiscard]] std::size_t modal_bin() const {
        return static_cast<std::size_t>(
            std::distance(counts.begin(), std::max_element(counts.begin(), counts.end())));
    }
};

struct ReplicationRecord {
    bool ok = false;
    bool reject = false;
    double t_stat = 0.0;
    double u_hat = 0.0;
    std::size_t k_hat = 0;
};

struct ExperimentResult {
    std::size_t replications = 0;
    std::size_t completed = 0;
    std::size_t failed = 0;  ///< replications with estimator or covariance errors
    double critical_value = 0.0;
    double rejection_rate = 0.0;
    double u_hat_mean = std::numeric_limits<double>::quiet_NaN();
    double u_hat_sd = std::numeric_limits<double>::quiet_NaN();
    double u_hat_rmse = std::numeric_limits<double>::quiet_NaN();  ///< change experiments only
    Histogram histogram;
    std::vector<ReplicationRecord> records;
};

namespace detail {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
        else comp_ += (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Number of pre-change observations: k is pre-change iff k <= [u* n].
inline std::size_t pre_change_count(double u_star, std::size_t n) {
    return static_cast<std::size_t>(grid_index(u_star, static_cast<Eigen::Index>(n)));
}

inline void validate(const ExperimentConfig& cfg, const MomentModel& model) {
    if (cfg.theta0.size() != model.dim) {
        throw InvalidArgument("theta0 must have " + std::to_string(model.dim) + " coordinates");
    }
    model.require_in_domain(cfg.theta0, "theta0");
    if (cfg.n < static_cast<std::size_t>(model.dim) + 2) {
        throw InvalidArgument("n must be at least d+2 = " + std::to_string(model.dim + 2));
    }
    if (cfg.m < 1) throw InvalidArgument("m must be at least 1");
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw InvalidArgument("level must lie in (0, 1)");
    if (cfg.histogram_bins < 1) throw InvalidArgument("histogram needs at least one bin");
    if (cfg.change) {
        const ChangeSpec& ch = *cfg.change;
        if (!(ch.u_star > 0.0 && ch.u_star < 1.0)) throw InvalidArgument("ustar must lie in (0, 1)");
        if (ch.theta1.size() != model.dim) {
            throw InvalidArgument("theta1 must have " + std::to_string(model.dim) + " coordinates");
        }
        model.require_in_domain(ch.theta1, "theta1");
        if (ch.theta1 == cfg.theta0) throw InvalidArgument("theta1 must differ from theta0");
    }
}

/// n observations from theta0, switching to theta1 after [u* n] when a change is given.
inline std::vector<double> simulate_sample(const MomentModel& model, const ParamVector& theta0,
                                           const std::optional<ChangeSpec>& change, std::size_t n,
                                           Rng& rng) {
    std::vector<double> x(n);
    const std::size_t switch_at = change ? pre_change_count(change->u_star, n) : n;
    for (std::size_t k = 0; k < n; ++k) {
        x[k] = model.sample(k < switch_at ? theta0 : change->theta1, rng);
    }
    return x;
}

inline Histogram make_histogram(std::span<const double> values, std::size_t bins) {
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = static_cast<double>(b) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double v : values) {
        auto b = static_cast<std::size_t>(std::floor(v * static_cast<double>(bins)));
        ++h.counts[std::min(b, bins - 1)];
    }
    return h;
}

/**
 * Runs m independent replications of the test; replication i draws from
 * Rng::stream(seed, i), so the result does not depend on `jobs`.
 * u_hat aggregates use every successful replication, rejected or not.
 */
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned jobs = 0) {
    const MomentModel model = model_by_name(cfg.model);
    validate(cfg, model);
    const double cv = cfg.critical_value ? *cfg.critical_value : default_critical_value(model.dim, cfg.level);
    TestOptions opts;
    opts.level = cfg.level;
    opts.critical_value = cv;

    std::vector<ReplicationRecord> recs(cfg.m);
    parallel_for(cfg.m, jobs, [&](unsigned, std::size_t i) {
        Rng rng = Rng::stream(cfg.seed, i);
        const std::vector<double> x = simulate_sample(model, cfg.theta0, cfg.change, cfg.n, rng);
        try {
            const TestReport r = run_test(x, model, opts);
            recs[i] = {true, r.reject, r.t_stat, r.u_hat, static_cast<std::size_t>(r.k_hat)};
        } catch (const DegenerateSample&) {
        } catch (const OutOfDomain&) {
        } catch (const SingularCovariance&) {
        } catch (const NoConvergence&) {
        } catch (const SingularJacobian&) {
        }
    });

    ExperimentResult res;
    res.replications = cfg.m;
    res.critical_value = cv;
    detail::CompensatedSum u_sum, rejections;
    std::vector<double> u_values;
    u_values.reserve(cfg.m);
    for (const auto& r : recs) {
        if (!r.ok) {
            ++res.failed;
            continue;
        }
        ++res.completed;
        rejections.add(r.reject ? 1.0 : 0.0);
        u_sum.add(r.u_hat);
        u_values.push_back(r.u_hat);
    }
    const auto done = static_cast<double>(res.completed);
    if (res.completed > 0) {
        res.rejection_rate = rejections.value() / done;
        res.u_hat_mean = u_sum.value() / done;
        detail::CompensatedSum dev2, err2;
        for (double u : u_values) {
            dev2.add((u - res.u_hat_mean) * (u - res.u_hat_mean));
            if (cfg.change) err2.add((u - cfg.change->u_star) * (u - cfg.change->u_star));
        }
        res.u_hat_sd = res.completed > 1 ? std::sqrt(dev2.value() / (done - 1.0)) : 0.0;
        if (cfg.change) res.u_hat_rmse = std::sqrt(err2.value() / done);
    }
    res.histogram = make_histogram(u_values, cfg.histogram_bins);
    if (cfg.keep_records) res.records = std::move(recs);
    return res;
}

/// Large-sample behaviour under a single change from theta0 to theta1 at u*.
struct AlternativeOracle {
    double u_star = 0.5;
    MomentVector e0, e1;
    ParamVector theta_star;  ///< solves e(theta) = u* e(theta0) + (1-u*) e(theta1)
    Mat sigma_star;          ///< u* Sigma(theta0) + (1-u*) Sigma(theta1)
    double lambda_star = 0.0;  ///< smallest eigenvalue of sigma_star^{-1}

    /// Limit of Z_n(u, theta_hat): a tent in u peaking at u*.
    [[nodiscard]] MomentVector drift(double u) const {
        const MomentVector diff = e0 - e1;
        return u <= u_star ? MomentVector(u * (1.0 - u_star) * diff)
                           : MomentVector(u_star * (1.0 - u) * diff);
    }

    /// n u*^2 (1-u*)^2 lambda* ||e(theta0) - e(theta1)||^2, the growth rate of T_n.
    [[nodiscard]] double power_bound(std::size_t n) const {
        const double w = u_star * (1.0 - u_star);
        return static_cast<double>(n) * w * w * lambda_star * (e0 - e1).squaredNorm();
    }
};

inline AlternativeOracle alternative_oracle(const MomentModel& model, const ParamVector& theta0,
                                            const ParamVector& theta1, double u_star) {
    if (!(u_star > 0.0 && u_star < 1.0)) throw InvalidArgument("u* must lie in (0, 1)");
    model.require_in_domain(theta0, "theta0");
    model.require_in_domain(theta1, "theta1");
    AlternativeOracle o;
    o.u_star = u_star;
    o.e0 = model.e(theta0);
    o.e1 = model.e(theta1);
    const MomentVector mixed = u_star * o.e0 + (1.0 - u_star) * o.e1;
    if (model.has_inverse()) {
        o.theta_star = model.inverse_e(mixed);
        if (!model.in_domain(o.theta_star)) {
            throw OutOfDomain("mixed moment lies outside the range of e for model '" + model.name + "'");
        }
        if ((model.e(o.theta_star) - mixed).norm() > 1e-12 * (1.0 + mixed.norm())) {
            o.theta_star = newton_solve(mixed, model, o.theta_star).theta_hat;
        }
    } else {
        o.theta_star = newton_solve(mixed, model, theta0).theta_hat;
    }
    o.sigma_star = u_star * model.covariance(theta0) + (1.0 - u_star) * model.covariance(theta1);
    o.lambda_star = 1.0 / eigen_range(o.sigma_star).second;
    return o;
}

struct ConsistencyRow {
    std::size_t n = 0;
    double bound = 0.0;                 ///< 0.5 n u*^2 (1-u*)^2 lambda* ||e0 - e1||^2
    double fraction_above_bound = 0.0;  ///< share of replications with T_n >= bound
    double median_abs_error = 0.0;      ///< median |u_hat - u*|
    std::size_t failed = 0;
};

/**
 * For each sample size, the share of replications whose T_n clears half the
 * linear growth bound and the median change point error. Both should improve
 * with n under a fixed alternative.
 */
inline std::vector<ConsistencyRow> consistency_diagnostics(const ExperimentConfig& cfg,
                                                           const std::vector<std::size_t>& sizes = {100, 500, 2000},
                                                           unsigned jobs = 0) {
    if (!cfg.change) throw InvalidArgument("consistency diagnostics need a change (theta1, ustar)");
    const MomentModel model = model_by_name(cfg.model);
    const AlternativeOracle oracle = alternative_oracle(model, cfg.theta0, cfg.change->theta1, cfg.change->u_star);

    std::vector<ConsistencyRow> rows;
    for (std::size_t n : sizes) {
        ExperimentConfig c = cfg;
        c.n = n;
        c.keep_records = true;
        c.critical_value = 0.0;  // decision unused
        const ExperimentResult res = run_experiment(c, jobs);

        ConsistencyRow row;
        row.n = n;
        row.bound = 0.5 * oracle.power_bound(n);
        row.failed = res.failed;
        std::vector<double> errors;
        std::size_t above = 0;
        for (const auto& r : res.records) {
            if (!r.ok) continue;
            if (r.t_stat >= row.bound) ++above;
            errors.push_back(std::abs(r.u_hat - c.change->u_star));
        }
        row.fraction_above_bound = errors.empty() ? 0.0 : static_cast<double>(above) / static_cast<double>(errors.size());
        row.median_abs_error = detail::median(std::move(errors));
        rows.push_back(row);
    }
    return rows;
}

/**
 * Mean over replications of sup_k ||Z_n(k/n, theta_hat) - drift(k/n)||, the
 * uniform distance between the Z-process and its limit under the alternative.
 * Without a change the limit is zero and the distance shrinks like n^{-1/2}.
 */
inline double sup_zn_convergence_check(const ExperimentConfig& cfg, unsigned jobs = 0) {
    const MomentModel model = model_by_name(cfg.model);
    validate(cfg, model);
    AlternativeOracle oracle;
    if (cfg.change) {
        oracle = alternative_oracle(model, cfg.theta0, cfg.change->theta1, cfg.change->u_star);
    } else {
        oracle.u_star = 0.5;
        oracle.e0 = oracle.e1 = model.e(cfg.theta0);
    }

    std::vector<double> sups(cfg.m, std::numeric_limits<double>::quiet_NaN());
    parallel_for(cfg.m, jobs, [&](unsigned, std::size_t i) {
        Rng rng = Rng::stream(cfg.seed, i);
        const std::vector<double> x = simulate_sample(model, cfg.theta0, cfg.change, cfg.n, rng);
        try {
            const MMEResult est = mme(x, model);
            const ZProcessState st = build_state(x, model);
            const MomentVector e_hat = model.e(est.theta_hat);
            const auto n = static_cast<double>(st.n);
            double best = 0.0;
            for (Eigen::Index k = 0; k <= st.n; ++k) {
                const Vec z = (st.prefix.col(k) - static_cast<double>(k) * e_hat) / n;
                best = std::max(best, (z - oracle.drift(static_cast<double>(k) / n)).norm());
            }
            sups[i] = best;
        } catch (const Error&) {
        }
    });

    detail::CompensatedSum total;
    std::size_t count = 0;
    for (double s : sups) {
        if (std::isnan(s)) continue;
        total.add(s);
        ++count;
    }
    if (count == 0) throw DegenerateSample("every replication failed");
    return total.value() / static_cast<double>(count);
}

}  // namespace mmcpd
