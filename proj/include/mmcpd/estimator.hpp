#pragma once

#include "mmcpd/error.hpp"
#include "mmcpd/linalg.hpp"
#include "mmcpd/moment_model.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string>

namespace mmcpd {

enum class SolveMethod { closed_form, newton };

inline const char* to_string(SolveMethod m) noexcept {
    return m == SolveMethod::closed_form ? "closed_form" : "newton";
}

/// Method-of-moments estimate together with how it was obtained.
struct MMEResult {
    ParamVector theta_hat;
    double residual_norm = 0.0;  ///< ||e(theta_hat) - mean psi||, i.e. ||Z_n(1, theta_hat)||
    int iterations = 0;
    SolveMethod method = SolveMethod::closed_form;
};

struct NewtonOptions {
    int max_iterations = 100;
    int max_halvings = 30;
    double rel_tol = 1e-10;
};

/// Sample mean and biased (1/n) covariance of psi over the data.
struct PsiMoments {
    MomentVector mean;
    Mat covariance;
};

inline PsiMoments psi_moments(std::span<const double> data, const MomentModel& model) {
    const auto n = static_cast<double>(data.size());
    PsiMoments out{MomentVector::Zero(model.dim), Mat::Zero(model.dim, model.dim)};
    for (double x : data) out.mean += model.psi(x);
    out.mean /= n;
    for (double x : data) {
        const Vec c = model.psi(x) - out.mean;
        out.covariance.noalias() += c * c.transpose();
    }
    out.covariance /= n;
    return out;
}

/**
 * Solves e(theta) = target by damped Newton iteration, using V(theta) as the
 * Jacobian. Each step is halved (at most max_halvings times) until the iterate
 * stays inside the parameter domain and the residual norm decreases.
 */
inline MMEResult newton_solve(const MomentVector& target, const MomentModel& model,
                              const ParamVector& theta_init, const NewtonOptions& opts = {}) {
    model.require_in_domain(theta_init, "Newton starting point");
    const double tol = opts.rel_tol * (1.0 + target.norm());

    ParamVector theta = theta_init;
    MomentVector residual = model.e(theta) - target;
    double res_norm = residual.norm();

    for (int iter = 0; iter <= opts.max_iterations; ++iter) {
        if (res_norm <= tol) return {theta, res_norm, iter, SolveMethod::newton};
        if (iter == opts.max_iterations) break;

        const Mat v = model.jacobian(theta);
        if (is_numerically_singular(v)) {
            throw SingularJacobian("moment Jacobian is singular during Newton iteration");
        }
        const ParamVector step = v.partialPivLu().solve(residual);

        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opts.max_halvings; ++h, scale *= 0.5) {
            const ParamVector candidate = theta - scale * step;
            if (!model.in_domain(candidate)) continue;
            const MomentVector cand_residual = model.e(candidate) - target;
            const double cand_norm = cand_residual.norm();
            if (cand_norm < res_norm) {
                theta = candidate;
                residual = cand_residual;
                res_norm = cand_norm;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            throw NoConvergence("Newton line search failed after " +
                                std::to_string(opts.max_halvings) + " step halvings");
        }
    }
    throw NoConvergence("Newton did not converge in " + std::to_string(opts.max_iterations) +
                        " iterations (residual " + std::to_string(res_norm) + ")");
}

/**
 * Method-of-moments estimator: the root of Z_n(1, theta) = mean psi - e(theta).
 *
 * Uses the model's closed-form inverse when available (polished by Newton if
 * its residual misses tolerance), otherwise Newton from the model's initial
 * guess, `theta_init`, or the midpoint of a bounded parameter domain.
 */
inline MMEResult mme(std::span<const double> data, const MomentModel& model,
                     std::optional<ParamVector> theta_init = std::nullopt) {
    const auto n = static_cast<Eigen::Index>(data.size());
    if (n < model.dim + 1) {
        throw InvalidArgument("method of moments needs at least d+1 = " +
                              std::to_string(model.dim + 1) + " observations, got " +
                              std::to_string(n));
    }
    const PsiMoments mom = psi_moments(data, model);
    if (!mom.mean.allFinite() || !mom.covariance.allFinite()) {
        throw DegenerateSample("psi moments of the sample are not finite");
    }
    const auto [lo, hi] = eigen_range(mom.covariance);
    if (!(hi > 0.0) || lo <= 1e-12 * hi) {
        throw DegenerateSample("sample psi-covariance is singular");
    }

    const double tol = 1e-8 * (1.0 + mom.mean.norm());
    if (model.has_inverse() && !theta_init) {
        const ParamVector theta = model.inverse_e(mom.mean);
        if (!model.in_domain(theta)) {
            throw OutOfDomain("moment estimate lies outside the domain of model '" + model.name + "'");
        }
        const double res = (model.e(theta) - mom.mean).norm();
        if (res <= tol) return {theta, res, 0, SolveMethod::closed_form};
        MMEResult polished = newton_solve(mom.mean, model, theta);
        return polished;
    }

    ParamVector start;
    if (theta_init) {
        start = *theta_init;
    } else if (model.initial_guess) {
        start = model.initial_guess(mom.mean);
    } else {
        start.resize(model.dim);
        for (int i = 0; i < model.dim; ++i) {
            const Interval& iv = model.param_domain[static_cast<std::size_t>(i)];
            if (!std::isfinite(iv.lower) || !std::isfinite(iv.upper)) {
                throw InvalidArgument("model '" + model.name +
                                      "' needs an initial guess for Newton (unbounded domain)");
            }
            start(i) = 0.5 * (iv.lower + iv.upper);
        }
    }
    return newton_solve(mom.mean, model, start);
}

}  // namespace mmcpd
