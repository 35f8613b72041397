#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace mmcpd {

// Moment dimensions are small; a fixed upper bound keeps vectors and
// matrices on the stack in the O(n) loops.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Parameter vector theta.
using ParamVector = Vec;
/// Vector of (theoretical or empirical) psi-moments.
using MomentVector = Vec;

inline Vec make_vec(std::initializer_list<double> values) {
    Vec v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

/// Smallest and largest eigenvalue of a symmetric matrix.
inline std::pair<double, double> eigen_range(const Mat& symmetric) {
    Eigen::SelfAdjointEigenSolver<Mat> solver(symmetric, Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    return {ev.minCoeff(), ev.maxCoeff()};
}

/// True when |det| is negligible relative to the Frobenius norm raised to d.
inline bool is_numerically_singular(const Mat& m, double rel_tol = 1e-12) {
    const double norm = m.norm();
    if (norm == 0.0 || !std::isfinite(norm)) return true;
    const double det = m.determinant();
    return !(std::abs(det) > rel_tol * std::pow(norm, static_cast<double>(m.rows())));
}

}  // namespace mmcpd
