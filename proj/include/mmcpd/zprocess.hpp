#pragma once

#include "mmcpd/error.hpp"
#include "mmcpd/estimator.hpp"
#include "mmcpd/limits.hpp"
#include "mmcpd/linalg.hpp"
#include "mmcpd/moment_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmcpd {

/**
 * Prefix sums S_k = psi(X_1) + ... + psi(X_k), S_0 = 0, stored column-wise.
 * Z_n(u, theta) = (S_[un] - [un] e(theta)) / n is then O(d) for any u.
 */
struct ZProcessState {
    Eigen::Index n = 0;
    int d = 0;
    Eigen::MatrixXd prefix;  ///< d x (n+1)

    [[nodiscard]] Vec partial_sum(Eigen::Index k) const { return prefix.col(k); }
};

inline ZProcessState build_state(std::span<const double> data, const MomentModel& model) {
    ZProcessState st;
    st.n = static_cast<Eigen::Index>(data.size());
    st.d = model.dim;
    st.prefix.setZero(model.dim, st.n + 1);
    for (Eigen::Index k = 1; k <= st.n; ++k) {
        st.prefix.col(k) = st.prefix.col(k - 1) + model.psi(data[static_cast<std::size_t>(k - 1)]);
    }
    return st;
}

/// [u n]: the largest k with k/n <= u, exact on the grid u = k/n.
inline Eigen::Index grid_index(double u, Eigen::Index n) {
    if (!(u >= 0.0 && u <= 1.0)) throw InvalidArgument("u must lie in [0, 1]");
    auto k = static_cast<Eigen::Index>(std::floor(u * static_cast<double>(n)));
    k = std::clamp<Eigen::Index>(k, 0, n);
    while (k < n && static_cast<double>(k + 1) / static_cast<double>(n) <= u) ++k;
    while (k > 0 && static_cast<double>(k) / static_cast<double>(n) > u) --k;
    return k;
}

inline MomentVector z_at(const ZProcessState& st, double u, const ParamVector& theta,
                         const MomentModel& model) {
    const Eigen::Index k = grid_index(u, st.n);
    const MomentVector e = model.e(theta);
    return (st.partial_sum(k) - static_cast<double>(k) * e) / static_cast<double>(st.n);
}

/**
 * Plug-in covariance (1/n) sum (psi(X_k) - e(theta_hat)) (psi(X_k) - e(theta_hat))^T.
 * A positive `ridge` is added to the diagonal; the default 0 leaves the
 * statistic's null law untouched. Throws SingularCovariance when the condition
 * number exceeds 1e12.
 */
inline Mat sigma_hat(std::span<const double> data, const ParamVector& theta_hat,
                     const MomentModel& model, double ridge = 0.0) {
    if (data.empty()) throw InvalidArgument("sigma_hat needs a non-empty sample");
    const MomentVector e = model.e(theta_hat);
    Mat s = Mat::Zero(model.dim, model.dim);
    for (double x : data) {
        const Vec c = model.psi(x) - e;
        s.noalias() += c * c.transpose();
    }
    s /= static_cast<double>(data.size());
    s = 0.5 * (s + s.transpose());
    if (ridge > 0.0) s.diagonal().array() += ridge;

    const auto [lo, hi] = eigen_range(s);
    if (!(hi > 0.0) || !std::isfinite(hi) || lo <= hi * 1e-12) {
        throw SingularCovariance("plug-in covariance is singular (condition number above 1e12)");
    }
    return s;
}

/**
 * T_n(k/n) = n Z_n(k/n, theta_hat)^T Sigma_hat^{-1} Z_n(k/n, theta_hat), k = 0..n.
 * One Cholesky factorization of Sigma_hat, then a triangular solve per k;
 * falls back to a symmetric eigendecomposition when Cholesky fails.
 */
inline std::vector<double> t_path(const ZProcessState& st, const MomentModel& model,
                                  const ParamVector& theta_hat, const Mat& sigma) {
    const MomentVector e = model.e(theta_hat);
    const auto n = static_cast<double>(st.n);
    std::vector<double> path(static_cast<std::size_t>(st.n + 1), 0.0);

    Eigen::LLT<Mat> llt(sigma);
    if (llt.info() == Eigen::Success) {
        for (Eigen::Index k = 0; k <= st.n; ++k) {
            Vec z = (st.prefix.col(k) - static_cast<double>(k) * e) / n;
            llt.matrixL().solveInPlace(z);
            path[static_cast<std::size_t>(k)] = n * z.squaredNorm();
        }
        return path;
    }

    Eigen::SelfAdjointEigenSolver<Mat> eig(sigma);
    const Vec lambda = eig.eigenvalues();
    if (!(lambda.maxCoeff() > 0.0) || lambda.minCoeff() <= 1e-12 * lambda.maxCoeff()) {
        throw SingularCovariance("plug-in covariance is not positive definite");
    }
    const Mat q = eig.eigenvectors();
    for (Eigen::Index k = 0; k <= st.n; ++k) {
        const Vec z = (st.prefix.col(k) - static_cast<double>(k) * e) / n;
        const Vec proj = q.transpose() * z;
        const double value = n * (proj.array().square() / lambda.array()).sum();
        path[static_cast<std::size_t>(k)] = value < 0.0 && value >= -1e-12 ? 0.0 : value;
    }
    return path;
}

struct ChangePoint {
    double u_hat = 0.0;
    Eigen::Index k_hat = 0;
};

/// argmax of the path, smallest index on ties; u_hat = k_hat / n.
inline ChangePoint change_point(std::span<const double> path) {
    if (path.size() < 2) throw InvalidArgument("change_point needs a path of length n+1 >= 2");
    const auto it = std::max_element(path.begin(), path.end());
    const auto k = static_cast<Eigen::Index>(std::distance(path.begin(), it));
    return {static_cast<double>(k) / static_cast<double>(path.size() - 1), k};
}

struct TestOptions {
    double level = 0.05;
    /// Overrides the shipped critical value table.
    std::optional<double> critical_value;
    double ridge = 0.0;
};

struct TestReport {
    Eigen::Index n = 0;
    MMEResult mme;
    Mat sigma_hat;
    std::vector<double> t_path;
    double t_stat = 0.0;
    double level = std::numeric_limits<double>::quiet_NaN();
    double critical_value = std::numeric_limits<double>::quiet_NaN();
    bool reject = false;
    double u_hat = 0.0;  ///< reported even when not significant
    Eigen::Index k_hat = 0;

    [[nodiscard]] const ParamVector& theta_hat() const noexcept { return mme.theta_hat; }
    [[nodiscard]] bool has_decision() const noexcept { return std::isfinite(critical_value); }
};

/// Estimate, plug-in covariance, path and change point without a decision.
inline TestReport detect(std::span<const double> data, const MomentModel& model,
                         double ridge = 0.0) {
    TestReport r;
    r.n = static_cast<Eigen::Index>(data.size());
    r.mme = mme(data, model);
    r.sigma_hat = sigma_hat(data, r.mme.theta_hat, model, ridge);
    const ZProcessState st = build_state(data, model);
    r.t_path = t_path(st, model, r.mme.theta_hat, r.sigma_hat);
    r.t_stat = *std::max_element(r.t_path.begin(), r.t_path.end());
    const ChangePoint cp = change_point(r.t_path);
    r.u_hat = cp.u_hat;
    r.k_hat = cp.k_hat;
    return r;
}

/**
 * Sup-quadratic-form change point test. Rejects when T_n exceeds the
 * critical value of sup_u ||B(u) - u B(1)||^2 for dimension d at `level`.
 */
inline TestReport run_test(std::span<const double> data, const MomentModel& model,
                           const TestOptions& opts = {}) {
    if (!(opts.level > 0.0 && opts.level < 1.0)) throw InvalidArgument("level must lie in (0, 1)");
    if (static_cast<Eigen::Index>(data.size()) < model.dim + 2) {
        throw InvalidArgument("the test needs at least d+2 = " + std::to_string(model.dim + 2) +
                              " observations, got " + std::to_string(data.size()));
    }
    const double cv = opts.critical_value ? *opts.critical_value
                                          : default_critical_value(model.dim, opts.level);
    TestReport r = detect(data, model, opts.ridge);
    r.level = opts.level;
    r.critical_value = cv;
    r.reject = r.t_stat > cv;
    return r;
}

}  // namespace mmcpd
