#include "mmcpd/montecarlo.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace mmcpd;

namespace {

ExperimentConfig gamma_config(ParamVector theta0, std::size_t n, std::size_t m, std::uint64_t seed) {
    ExperimentConfig c;
    c.model = "gamma";
    c.theta0 = std::move(theta0);
    c.n = n;
    c.m = m;
    c.seed = seed;
    return c;
}

ExperimentConfig lambda_change(double u_star, std::size_t n, std::size_t m, std::uint64_t seed) {
    ExperimentConfig c = gamma_config(make_vec({1.0, 0.01}), n, m, seed);
    c.change = ChangeSpec{u_star, make_vec({1.0, 0.05})};
    return c;
}

double binomial_se(double p, std::size_t m) { return std::sqrt(p * (1.0 - p) / static_cast<double>(m)); }

}  // namespace

TEST(Config, Validation) {
    const auto model = gamma_model();
    ExperimentConfig c = gamma_config(make_vec({1.0, 1.0}), 50, 10, 1);
    EXPECT_NO_THROW(validate(c, model));
    c.theta0 = make_vec({1.0});
    EXPECT_THROW(validate(c, model), InvalidArgument);
    c = lambda_change(0.5, 50, 10, 1);
    c.change->theta1 = c.theta0;
    EXPECT_THROW(validate(c, model), InvalidArgument);
    c = lambda_change(1.0, 50, 10, 1);
    EXPECT_THROW(validate(c, model), InvalidArgument);
    c = lambda_change(0.5, 3, 10, 1);
    EXPECT_THROW(validate(c, model), InvalidArgument);
    c = lambda_change(0.5, 50, 10, 1);
    c.change->theta1 = make_vec({-1.0, 1.0});
    EXPECT_THROW(validate(c, model), OutOfDomain);
}

TEST(Sample, ChangePlacementUsesFloor) {
    EXPECT_EQ(pre_change_count(0.5, 100), 50u);
    EXPECT_EQ(pre_change_count(0.75, 50), 37u);
    EXPECT_EQ(pre_change_count(0.9, 50), 45u);
    const auto m = bernoulli_model();
    Rng rng(1);
    // p 0 -> 1 is outside the open domain but the sampler handles the extremes
    const auto x = simulate_sample(m, make_vec({1e-300}), ChangeSpec{0.3, make_vec({1.0 - 1e-16})}, 10, rng);
    for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(x[k], k < 3 ? 0.0 : 1.0);
}

TEST(Histogram, BinsAndMode) {
    const std::vector<double> v = {0.0, 0.01, 0.49, 0.5, 0.51, 0.52, 1.0};
    const Histogram h = make_histogram(v, 10);
    ASSERT_EQ(h.edges.size(), 11u);
    EXPECT_EQ(h.counts[0], 2u);
    EXPECT_EQ(h.counts[4], 1u);
    EXPECT_EQ(h.counts[5], 3u);
    EXPECT_EQ(h.counts[9], 1u);
    EXPECT_EQ(h.modal_bin(), 5u);
}

TEST(RunExperiment, IndependentOfWorkerCount) {
    ExperimentConfig c = lambda_change(0.75, 100, 400, 42);
    const ExperimentResult a = run_experiment(c, 1);
    const ExperimentResult b = run_experiment(c, 4);
    EXPECT_EQ(a.rejection_rate, b.rejection_rate);
    EXPECT_EQ(a.u_hat_mean, b.u_hat_mean);
    EXPECT_EQ(a.u_hat_sd, b.u_hat_sd);
    EXPECT_EQ(a.u_hat_rmse, b.u_hat_rmse);
    EXPECT_EQ(a.histogram.counts, b.histogram.counts);
}

TEST(RunExperiment, RmseIdentity) {
    for (double u : {0.5, 0.75, 0.9}) {
        const ExperimentResult r = run_experiment(lambda_change(u, 100, 500, 7), 0);
        const double m = static_cast<double>(r.completed);
        const double rhs = r.u_hat_sd * r.u_hat_sd * (m - 1.0) / m + (r.u_hat_mean - u) * (r.u_hat_mean - u);
        EXPECT_NEAR(r.u_hat_rmse * r.u_hat_rmse, rhs, 1e-10);
        EXPECT_GE(r.rejection_rate, 0.0);
        EXPECT_LE(r.rejection_rate, 1.0);
    }
}

TEST(RunExperiment, SingleReplicationSmoke) {
    const ExperimentResult r = run_experiment(gamma_config(make_vec({1.0, 1.0}), 50, 1, 3), 0);
    EXPECT_TRUE(r.rejection_rate == 0.0 || r.rejection_rate == 1.0);
    EXPECT_EQ(r.completed + r.failed, 1u);
    EXPECT_TRUE(std::isnan(r.u_hat_rmse));
}

TEST(RunExperiment, DegenerateReplicationsAreCountedNotAggregated) {
    ExperimentConfig c;
    c.model = "bernoulli";
    c.theta0 = make_vec({0.02});
    c.n = 5;
    c.m = 300;
    c.seed = 5;
    const ExperimentResult r = run_experiment(c, 0);
    EXPECT_GT(r.failed, 0u);  // all-zero samples
    EXPECT_EQ(r.completed + r.failed, 300u);
}

TEST(RunExperiment, SizeStaysBelowNominalOnTableOneCells) {
    for (const auto& theta : {make_vec({1.0, 1.0}), make_vec({1.0, 0.01}), make_vec({2.0, 1.0})}) {
        for (std::size_t n : {50u, 100u, 500u}) {
            const ExperimentResult r = run_experiment(gamma_config(theta, n, 2000, 1000 + n), 0);
            EXPECT_LE(r.rejection_rate, 0.05 + 3.0 * binomial_se(0.05, 2000))
                << "theta " << theta.transpose() << " n " << n;
            EXPECT_EQ(r.failed, 0u);
        }
    }
}

TEST(RunExperiment, PublishedPowerRateChange) {
    // lambda 0.01 -> 0.05 at u* = 0.75, n = 100: 0.9953
    const ExperimentResult t2 = run_experiment(lambda_change(0.75, 100, 2000, 21), 0);
    EXPECT_NEAR(t2.rejection_rate, 0.9953, 3.0 * binomial_se(0.9953, 2000) + 0.005);
}

TEST(RunExperiment, PublishedPowerShapeChangeLateSmallSample) {
    // alpha 1 -> 4 at u* = 0.90, n = 50: 0.06
    ExperimentConfig c = gamma_config(make_vec({1.0, 1.0}), 50, 2000, 22);
    c.change = ChangeSpec{0.9, make_vec({4.0, 1.0})};
    const ExperimentResult t4 = run_experiment(c, 0);
    EXPECT_NEAR(t4.rejection_rate, 0.06, 3.0 * binomial_se(0.06, 2000) + 0.005);
}

TEST(RunExperiment, PowerIncreasesWithSampleSize) {
    struct Alt {
        ParamVector theta0, theta1;
    };
    const std::vector<Alt> alts = {{make_vec({1.0, 0.01}), make_vec({1.0, 0.05})},
                                   {make_vec({1.0, 1.0}), make_vec({2.0, 1.0})},
                                   {make_vec({1.0, 1.0}), make_vec({4.0, 1.0})}};
    for (const auto& alt : alts) {
        for (double u : {0.5, 0.75, 0.9}) {
            double prev = -1.0;
            for (std::size_t n : {50u, 100u, 500u}) {
                ExperimentConfig c = gamma_config(alt.theta0, n, 1000, 60 + n);
                c.change = ChangeSpec{u, alt.theta1};
                const double p = run_experiment(c, 0).rejection_rate;
                EXPECT_GE(p, prev - 3.0 * binomial_se(std::max(p, 0.01), 1000))
                    << alt.theta1.transpose() << " u* " << u << " n " << n;
                prev = p;
            }
        }
    }
}

TEST(RunExperiment, HistogramModeContainsTrueChangePoint) {
    for (double u : {0.5, 0.75, 0.9}) {
        const ExperimentResult r = run_experiment(lambda_change(u, 500, 2000, 500), 0);
        const std::size_t mode = r.histogram.modal_bin();
        EXPECT_LE(r.histogram.edges[mode], u) << u;
        EXPECT_GE(r.histogram.edges[mode + 1], u) << u;
    }
}

TEST(AlternativeOracle, NoChange) {
    const auto m = gamma_model();
    const ParamVector t = make_vec({1.5, 0.3});
    const AlternativeOracle o = alternative_oracle(m, t, t, 0.4);
    EXPECT_LT((o.theta_star - t).norm(), 1e-12);
    for (double u : {0.0, 0.2, 0.4, 0.7, 1.0}) EXPECT_EQ(o.drift(u).norm(), 0.0);
}

TEST(AlternativeOracle, ExponentialHandAlgebra) {
    // mixed mean 0.5 * 1 + 0.5 * 0.5 = 0.75 -> lambda* = 4/3
    const AlternativeOracle o = alternative_oracle(exponential_model(), make_vec({1.0}), make_vec({2.0}), 0.5);
    EXPECT_NEAR(o.theta_star(0), 4.0 / 3.0, 1e-14);
    // Sigma* = 0.5 * 1 + 0.5 * 0.25
    EXPECT_NEAR(o.sigma_star(0, 0), 0.625, 1e-15);
    EXPECT_NEAR(o.lambda_star, 1.6, 1e-14);
}

TEST(AlternativeOracle, DriftIsTentPeakingAtChange) {
    const auto m = gamma_model();
    const ParamVector t0 = make_vec({1.0, 0.01}), t1 = make_vec({1.0, 0.05});
    for (double u_star : {0.5, 0.75, 0.9}) {
        const AlternativeOracle o = alternative_oracle(m, t0, t1, u_star);
        const Vec mixed = u_star * m.e(t0) + (1.0 - u_star) * m.e(t1);
        EXPECT_LE((m.e(o.theta_star) - mixed).norm(), 1e-10 * (1.0 + mixed.norm()));
        EXPECT_GT(o.lambda_star, 0.0);
        EXPECT_EQ(o.drift(0.0).norm(), 0.0);
        EXPECT_NEAR(o.drift(1.0).norm(), 0.0, 1e-12);
        const double peak = u_star * (1.0 - u_star) * (m.e(t0) - m.e(t1)).norm();
        EXPECT_NEAR(o.drift(u_star).norm(), peak, 1e-9 * peak);
        double best_u = 0.0, best = -1.0;
        for (int i = 0; i <= 1000; ++i) {
            const double u = i / 1000.0;
            if (o.drift(u).norm() > best) {
                best = o.drift(u).norm();
                best_u = u;
            }
        }
        EXPECT_NEAR(best_u, u_star, 1e-3);
    }
}

TEST(AlternativeOracle, NewtonPathWithoutInverse) {
    MomentModel m = gamma_model();
    const ParamVector t0 = make_vec({1.0, 1.0}), t1 = make_vec({2.0, 1.0});
    const AlternativeOracle closed = alternative_oracle(m, t0, t1, 0.3);
    m.inverse_e = nullptr;
    const AlternativeOracle newton = alternative_oracle(m, t0, t1, 0.3);
    EXPECT_LT((closed.theta_star - newton.theta_star).norm(), 1e-9);
}

TEST(Consistency, RequiresAChange) {
    EXPECT_THROW(consistency_diagnostics(gamma_config(make_vec({1.0, 1.0}), 100, 10, 1)), InvalidArgument);
}

TEST(Consistency, ErrorShrinksAndBoundIsCleared) {
    const auto rows = consistency_diagnostics(lambda_change(0.5, 100, 400, 77), {100, 500, 2000}, 0);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_GT(rows[0].median_abs_error, rows[1].median_abs_error);
    EXPECT_GT(rows[1].median_abs_error, rows[2].median_abs_error);
    EXPECT_LE(rows[1].median_abs_error, 0.01);
    EXPECT_GE(rows[2].fraction_above_bound, rows[0].fraction_above_bound);
    EXPECT_GE(rows[2].fraction_above_bound, 0.95);
}

TEST(SupZnConvergence, DecreasesUnderChange) {
    double prev = INFINITY;
    for (std::size_t n : {100u, 500u, 2000u}) {
        const double v = sup_zn_convergence_check(lambda_change(0.5, n, 300, 88), 0);
        EXPECT_LT(v, prev) << n;
        prev = v;
    }
}

TEST(SupZnConvergence, RootNScalingWithoutChange) {
    const double a = sup_zn_convergence_check(gamma_config(make_vec({2.0, 1.0}), 500, 2000, 89), 0);
    const double b = sup_zn_convergence_check(gamma_config(make_vec({2.0, 1.0}), 2000, 2000, 90), 0);
    EXPECT_GE(a / b, 1.6);
    EXPECT_LE(a / b, 2.5);
}

TEST(SupZnConvergence, TinySample) {
    const double v = sup_zn_convergence_check(lambda_change(0.5, 10, 1, 91), 0);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
}
