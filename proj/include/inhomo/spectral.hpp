#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "error.hpp"
#include "model.hpp"
#include "profile.hpp"
#include "rng.hpp"

namespace inhomo {

/// Largest size for which dense symmetric solves are used.
inline constexpr Eigen::Index kDenseEigenLimit = 2500;
/// Largest size accepted by full_spectrum.
inline constexpr Eigen::Index kFullSpectrumLimit = 4000;

/// (gamma / (sqrt(N) Delta)) (.) Y - gamma^2 diag(d), d_i = sum_a c_a / delta(g(i), a),
/// where gamma = E[x^2]. Fixed points of linear AMP are eigenvectors of this matrix.
inline Eigen::MatrixXd transform(const SpikedInstance& instance, double second_moment) {
  detail::require(std::isfinite(second_moment) && second_moment > 0.0, "transform: second moment must be positive");
  const auto& partition = instance.partition;
  const auto n = static_cast<Eigen::Index>(partition.n());
  const Eigen::MatrixXd weights = instance.profile.inverse() * (second_moment / std::sqrt(static_cast<double>(n)));
  const Eigen::VectorXd row_mass = instance.profile.inverse() * partition.fractions();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int gj = partition.group(static_cast<std::size_t>(j));
    for (Eigen::Index i = j; i < n; ++i)
      out(i, j) = out(j, i) = weights(partition.group(static_cast<std::size_t>(i)), gj) * instance.observed(i, j);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    out(i, i) -= second_moment * second_moment * row_mass[partition.group(static_cast<std::size_t>(i))];
  return out;
}

struct Eigenpair {
  double value = 0.0;
  Eigen::VectorXd vector;
  double residual = 0.0;
  bool converged = false;
  int iterations = 0;
};

namespace detail {

inline void fix_sign(Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

inline Eigen::VectorXd start_vector(Eigen::Index n) {
  Rng rng(0x5eed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v.normalized();
}

inline double residual_norm(const Eigen::MatrixXd& m, const Eigen::VectorXd& v, double value) {
  return (m * v - value * v).norm();
}

// Inverse iteration at a shift just above a known top eigenvalue.
inline Eigenpair refine_top_vector(const Eigen::MatrixXd& m, double top, double scale, double tol, int max_iters) {
  const auto n = m.rows();
  const double shift = top + 1e-10 * std::max(1.0, scale);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m - shift * Eigen::MatrixXd::Identity(n, n));
  Eigenpair pair;
  Eigen::VectorXd v = start_vector(n);
  for (int it = 1; it <= max_iters; ++it) {
    v = lu.solve(v).normalized();
    pair.value = v.dot(m * v);
    pair.residual = residual_norm(m, v, pair.value);
    pair.iterations = it;
    if (pair.residual <= tol * std::max(1.0, scale)) {
      pair.converged = true;
      break;
    }
  }
  detail::fix_sign(v);
  pair.vector = std::move(v);
  return pair;
}

} // namespace detail

/// All eigenvalues, ascending.
inline Eigen::VectorXd full_spectrum(const Eigen::MatrixXd& m) {
  detail::require(m.rows() == m.cols(), "full_spectrum: matrix must be square");
  detail::require(m.rows() <= kFullSpectrumLimit,
                  "full_spectrum: dimension " + std::to_string(m.rows()) + " exceeds the dense limit of " +
                      std::to_string(kFullSpectrumLimit));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

/// Shifted power iteration for the algebraically largest eigenpair, optionally
/// restricted to the orthogonal complement of `deflate`.
///
/// The shift is 1.05 times a power-iteration estimate of the spectral radius,
/// making the largest eigenvalue of M + shift I dominant in magnitude.
inline Eigenpair power_iteration_top(const Eigen::MatrixXd& m, double tol, int max_iters,
                                     const std::vector<Eigen::VectorXd>& deflate = {}) {
  detail::require(m.rows() == m.cols() && m.rows() >= 1, "power_iteration_top: matrix must be square");
  const auto n = m.rows();
  const auto project = [&](Eigen::VectorXd& v) {
    for (const auto& u : deflate) v -= u.dot(v) * u;
  };

  Eigen::VectorXd v = detail::start_vector(n);
  double radius = 0.0;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd w = m * v;
    radius = w.norm();
    if (radius == 0.0) break;
    v = w / radius;
  }
  const double shift = 1.05 * radius;
  const double scale = std::max(1.0, radius);

  Eigenpair pair;
  v = detail::start_vector(n);
  project(v);
  v.normalize();
  for (int it = 1; it <= max_iters; ++it) {
    Eigen::VectorXd w = m * v;
    pair.value = v.dot(w);
    pair.residual = (w - pair.value * v).norm();
    pair.iterations = it;
    if (pair.residual <= tol * scale) {
      pair.converged = true;
      break;
    }
    w += shift * v;
    project(w);
    v = w.normalized();
  }
  detail::fix_sign(v);
  pair.vector = std::move(v);
  return pair;
}

/// Algebraically largest eigenpair with ||M v - theta v|| <= tol ||M||.
/// Dense eigenvalues plus inverse iteration up to kDenseEigenLimit, shifted
/// power iteration above it.
inline Eigenpair top_eigenpair(const Eigen::MatrixXd& m, double tol = 1e-10, int max_iters = 20000) {
  detail::require(m.rows() == m.cols() && m.rows() >= 1, "top_eigenpair: matrix must be square");
  if (m.rows() > kDenseEigenLimit) return power_iteration_top(m, tol, max_iters);
  const Eigen::VectorXd values = full_spectrum(m);
  const double scale = values.cwiseAbs().maxCoeff();
  return detail::refine_top_vector(m, values[values.size() - 1], scale, tol, std::max(max_iters, 1));
}

struct SpectralReport {
  double top_eigenvalue = 0.0;
  double second_eigenvalue = 0.0;
  double top_vector_overlap = 0.0;
  double bulk_edge_gap = 0.0;
  bool converged = false;
  std::optional<Eigen::VectorXd> full_spectrum;
};

/// Top two eigenvalues of m and the spike overlap of the top eigenvector.
inline SpectralReport probe_matrix(const Eigen::MatrixXd& m, const Eigen::VectorXd& spike, double tol,
                                   bool keep_spectrum) {
  detail::require(m.rows() == spike.size(), "probe: spike length mismatch");
  detail::require(m.rows() >= 2, "probe: need at least a 2 x 2 matrix");
  SpectralReport report;
  Eigenpair top;
  if (m.rows() <= kDenseEigenLimit) {
    Eigen::VectorXd values = full_spectrum(m);
    const auto n = values.size();
    top = detail::refine_top_vector(m, values[n - 1], values.cwiseAbs().maxCoeff(), tol, 50);
    report.top_eigenvalue = values[n - 1];
    report.second_eigenvalue = values[n - 2];
    if (keep_spectrum) report.full_spectrum = std::move(values);
  } else {
    detail::require(!keep_spectrum, "probe: full spectrum requested above the dense limit");
    top = power_iteration_top(m, tol, 200000);
    const auto second = power_iteration_top(m, tol, 200000, {top.vector});
    report.top_eigenvalue = top.value;
    report.second_eigenvalue = second.value;
    top.converged = top.converged && second.converged;
  }
  report.converged = top.converged;
  report.top_vector_overlap = std::abs(top.vector.dot(spike)) / (top.vector.norm() * spike.norm());
  report.bulk_edge_gap = report.top_eigenvalue - report.second_eigenvalue;
  return report;
}

/// Probe of the profile-aware transformed matrix.
inline SpectralReport bbp_probe(const SpikedInstance& instance, double second_moment, double tol = 1e-10,
                                bool keep_spectrum = false) {
  return probe_matrix(transform(instance, second_moment), instance.spike, tol, keep_spectrum);
}

/// Probe of Y / sqrt(N) with no profile information.
inline SpectralReport naive_pca_probe(const SpikedInstance& instance, double tol = 1e-10,
                                      bool keep_spectrum = false) {
  const Eigen::MatrixXd scaled = instance.observed / std::sqrt(static_cast<double>(instance.n()));
  return probe_matrix(scaled, instance.spike, tol, keep_spectrum);
}

} // namespace inhomo
