#pragma once

#include "mmcpd/error.hpp"
#include "mmcpd/linalg.hpp"
#include "mmcpd/random.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mmcpd {

/// Open interval (lower, upper) for one parameter coordinate.
struct Interval {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    [[nodiscard]] bool contains(double x) const noexcept { return x > lower && x < upper; }
};

/**
 * Moment machinery of a parametric family with scalar observations.
 *
 * psi maps one observation to a d-vector; e(theta) = E_theta[psi(X)] is the
 * moment curve, jacobian(theta) its derivative V(theta) and covariance(theta)
 * the covariance Sigma(theta) of psi(X). inverse_e, when set, is the closed
 * form of e^{-1}; initial_guess, when set, seeds the Newton solver.
 *
 * A model is immutable once built and can be shared between threads; the
 * sampler takes the caller's generator.
 */
struct MomentModel {
    std::string name;
    int dim = 0;
    std::vector<Interval> param_domain;
    std::function<Vec(double)> psi;
    std::function<MomentVector(const ParamVector&)> e;
    std::function<Mat(const ParamVector&)> jacobian;
    std::function<Mat(const ParamVector&)> covariance;
    std::function<double(const ParamVector&, Rng&)> sample;
    std::function<ParamVector(const MomentVector&)> inverse_e;
    std::function<ParamVector(const MomentVector&)> initial_guess;

    [[nodiscard]] bool has_inverse() const noexcept { return static_cast<bool>(inverse_e); }

    [[nodiscard]] bool in_domain(const ParamVector& theta) const noexcept {
        if (theta.size() != dim) return false;
        for (int i = 0; i < dim; ++i) {
            if (!std::isfinite(theta(i)) || !param_domain[static_cast<std::size_t>(i)].contains(theta(i)))
                return false;
        }
        return true;
    }

    void require_in_domain(const ParamVector& theta, std::string_view what = "parameter") const {
        if (!in_domain(theta)) {
            throw OutOfDomain(std::string(what) + " outside the domain of model '" + name + "'");
        }
    }
};

namespace detail {

// E X^k for Gamma(shape a, rate l): a (a+1) ... (a+k-1) / l^k.
inline double gamma_raw_moment(double a, double l, int k) {
    double m = 1.0;
    for (int j = 0; j < k; ++j) m *= (a + j) / l;
    return m;
}

inline Vec psi_power2(double x) { return make_vec({x, x * x}); }
inline Vec psi_identity(double x) { return make_vec({x}); }

inline Mat mat1(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return m;
}

inline Mat mat2(double a, double b, double c, double d) {
    Mat m(2, 2);
    m << a, b, c, d;
    return m;
}

}  // namespace detail

/// Gamma(alpha, lambda) with density lambda^alpha / Gamma(alpha) x^(alpha-1) e^(-lambda x)
/// and psi(x) = (x, x^2). theta = (alpha, lambda), lambda a rate.
inline MomentModel gamma_model() {
    MomentModel m;
    m.name = "gamma";
    m.dim = 2;
    m.param_domain = {Interval{1e-8, 1e8}, Interval{1e-8, 1e8}};
    m.psi = detail::psi_power2;
    m.e = [](const ParamVector& t) {
        const double a = t(0), l = t(1);
        return make_vec({a / l, a * (a + 1.0) / (l * l)});
    };
    m.jacobian = [](const ParamVector& t) {
        const double a = t(0), l = t(1);
        return detail::mat2(1.0 / l, -a / (l * l),
                            (2.0 * a + 1.0) / (l * l), -2.0 * a * (a + 1.0) / (l * l * l));
    };
    m.covariance = [](const ParamVector& t) {
        const double a = t(0), l = t(1);
        const double m1 = detail::gamma_raw_moment(a, l, 1);
        const double m2 = detail::gamma_raw_moment(a, l, 2);
        const double m3 = detail::gamma_raw_moment(a, l, 3);
        const double m4 = detail::gamma_raw_moment(a, l, 4);
        const double s11 = a / (l * l);
        const double s12 = m3 - m1 * m2;
        const double s22 = m4 - m2 * m2;
        return detail::mat2(s11, s12, s12, s22);
    };
    m.sample = [](const ParamVector& t, Rng& rng) { return rng.gamma(t(0)) / t(1); };
    m.inverse_e = [](const MomentVector& mom) {
        const double mean = mom(0);
        const double var = mom(1) - mean * mean;
        const double alpha = mean * mean / var;
        return make_vec({alpha, alpha / mean});
    };
    m.initial_guess = m.inverse_e;
    return m;
}

/// Exponential(lambda), lambda a rate, psi(x) = x.
inline MomentModel exponential_model() {
    MomentModel m;
    m.name = "exponential";
    m.dim = 1;
    m.param_domain = {Interval{0.0, std::numeric_limits<double>::infinity()}};
    m.psi = detail::psi_identity;
    m.e = [](const ParamVector& t) { return make_vec({1.0 / t(0)}); };
    m.jacobian = [](const ParamVector& t) { return detail::mat1(-1.0 / (t(0) * t(0))); };
    m.covariance = [](const ParamVector& t) { return detail::mat1(1.0 / (t(0) * t(0))); };
    m.sample = [](const ParamVector& t, Rng& rng) { return rng.exponential() / t(0); };
    m.inverse_e = [](const MomentVector& mom) { return make_vec({1.0 / mom(0)}); };
    m.initial_guess = m.inverse_e;
    return m;
}

/// Normal(mu, sigma^2) with psi(x) = (x, x^2); theta = (mu, sigma^2).
inline MomentModel normal_model() {
    MomentModel m;
    m.name = "normal";
    m.dim = 2;
    m.param_domain = {Interval{}, Interval{0.0, std::numeric_limits<double>::infinity()}};
    m.psi = detail::psi_power2;
    m.e = [](const ParamVector& t) { return make_vec({t(0), t(0) * t(0) + t(1)}); };
    m.jacobian = [](const ParamVector& t) { return detail::mat2(1.0, 0.0, 2.0 * t(0), 1.0); };
    m.covariance = [](const ParamVector& t) {
        const double mu = t(0), s2 = t(1);
        const double c12 = 2.0 * mu * s2;
        return detail::mat2(s2, c12, c12, 4.0 * mu * mu * s2 + 2.0 * s2 * s2);
    };
    m.sample = [](const ParamVector& t, Rng& rng) { return t(0) + std::sqrt(t(1)) * rng.normal(); };
    m.inverse_e = [](const MomentVector& mom) {
        return make_vec({mom(0), mom(1) - mom(0) * mom(0)});
    };
    m.initial_guess = m.inverse_e;
    return m;
}

/// Poisson(lambda), psi(x) = x.
inline MomentModel poisson_model() {
    MomentModel m;
    m.name = "poisson";
    m.dim = 1;
    m.param_domain = {Interval{0.0, std::numeric_limits<double>::infinity()}};
    m.psi = detail::psi_identity;
    m.e = [](const ParamVector& t) { return make_vec({t(0)}); };
    m.jacobian = [](const ParamVector&) { return detail::mat1(1.0); };
    m.covariance = [](const ParamVector& t) { return detail::mat1(t(0)); };
    m.sample = [](const ParamVector& t, Rng& rng) { return static_cast<double>(rng.poisson(t(0))); };
    m.inverse_e = [](const MomentVector& mom) { return make_vec({mom(0)}); };
    m.initial_guess = m.inverse_e;
    return m;
}

/// Bernoulli(p), psi(x) = x.
inline MomentModel bernoulli_model() {
    MomentModel m;
    m.name = "bernoulli";
    m.dim = 1;
    m.param_domain = {Interval{0.0, 1.0}};
    m.psi = detail::psi_identity;
    m.e = [](const ParamVector& t) { return make_vec({t(0)}); };
    m.jacobian = [](const ParamVector&) { return detail::mat1(1.0); };
    m.covariance = [](const ParamVector& t) { return detail::mat1(t(0) * (1.0 - t(0))); };
    m.sample = [](const ParamVector& t, Rng& rng) { return rng.uniform() < t(0) ? 1.0 : 0.0; };
    m.inverse_e = [](const MomentVector& mom) { return make_vec({mom(0)}); };
    m.initial_guess = m.inverse_e;
    return m;
}

inline constexpr std::array<std::string_view, 5> kModelNames = {
    "gamma", "exponential", "normal", "poisson", "bernoulli"};

inline MomentModel model_by_name(std::string_view name) {
    if (name == "gamma") return gamma_model();
    if (name == "exponential") return exponential_model();
    if (name == "normal") return normal_model();
    if (name == "poisson") return poisson_model();
    if (name == "bernoulli") return bernoulli_model();
    throw InvalidArgument("unknown model '" + std::string(name) +
                          "' (expected gamma, exponential, normal, poisson or bernoulli)");
}

/**
 * Covariance V^{-1} Sigma V^{-T} of the normal limit of sqrt(n)(theta_hat - theta).
 * Throws SingularJacobian when V(theta) is numerically singular.
 */
inline Mat asymptotic_covariance(const MomentModel& model, const ParamVector& theta) {
    model.require_in_domain(theta);
    const Mat v = model.jacobian(theta);
    if (is_numerically_singular(v)) {
        throw SingularJacobian("moment Jacobian is singular at the given parameter");
    }
    const Mat v_inv = v.inverse();
    Mat cov = v_inv * model.covariance(theta) * v_inv.transpose();
    return 0.5 * (cov + cov.transpose());
}

/**
 * The same family observed through psi'(x) = A psi(x) + b. e, V, Sigma and the
 * inverse map are transformed consistently; A must be invertible.
 */
inline MomentModel affine_transform(const MomentModel& base, const Mat& a, const Vec& b) {
    if (a.rows() != base.dim || a.cols() != base.dim || b.size() != base.dim) {
        throw InvalidArgument("affine transform dimensions do not match the model");
    }
    if (is_numerically_singular(a)) throw InvalidArgument("affine transform matrix is singular");
    const Mat a_inv = a.inverse();

    MomentModel m = base;
    m.name = "affine(" + base.name + ")";
    m.psi = [psi = base.psi, a, b](double x) -> Vec { return a * psi(x) + b; };
    m.e = [e = base.e, a, b](const ParamVector& t) -> MomentVector { return a * e(t) + b; };
    m.jacobian = [jac = base.jacobian, a](const ParamVector& t) -> Mat { return a * jac(t); };
    m.covariance = [cov = base.covariance, a](const ParamVector& t) -> Mat {
        return a * cov(t) * a.transpose();
    };
    auto untransform = [a_inv, b](const MomentVector& mom) -> MomentVector {
        return a_inv * (mom - b);
    };
    if (base.inverse_e) {
        m.inverse_e = [inv = base.inverse_e, untransform](const MomentVector& mom) {
            return inv(untransform(mom));
        };
    }
    if (base.initial_guess) {
        m.initial_guess = [guess = base.initial_guess, untransform](const MomentVector& mom) {
            return guess(untransform(mom));
        };
    }
    return m;
}

}  // namespace mmcpd
