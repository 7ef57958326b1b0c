#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "error.hpp"

namespace inhomo {

/// Quadrature rule for expectations over Z ~ N(0, 1):
///   E[h(Z)] ~= sum_k weights[k] * h(nodes[k]),  sum_k weights[k] == 1.
struct NormalRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

namespace detail {

// Orthonormal probabilists' Hermite polynomials psi_k = He_k / sqrt(k!).
// Returns (psi_n(x), psi_{n-1}(x)).
inline std::pair<double, double> hermite_pair(int n, double x) {
  double prev = 0.0;
  double curr = 1.0;
  for (int k = 0; k < n; ++k) {
    const double next = (x * curr - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(static_cast<double>(k + 1));
    prev = curr;
    curr = next;
  }
  return {curr, prev};
}

} // namespace detail

/// Golub-Welsch on the Jacobi matrix, then Newton polishing of each node;
/// weights are 1 / (n psi_{n-1}(x)^2).
inline NormalRule gauss_hermite(int n) {
  detail::require(n >= 1, "gauss_hermite: need at least one node");
  NormalRule rule;
  if (n == 1) {
    rule.nodes = {0.0};
    rule.weights = {1.0};
    return rule;
  }
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi, Eigen::EigenvaluesOnly);

  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const double root_n = std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) {
    double x = solver.eigenvalues()[i];
    for (int iter = 0; iter < 8; ++iter) {
      const auto [pn, pn1] = detail::hermite_pair(n, x);
      const double step = pn / (root_n * pn1);
      x -= step;
      if (std::abs(step) <= 1e-15 * (1.0 + std::abs(x))) break;
    }
    const double pn1 = detail::hermite_pair(n, x).second;
    rule.nodes[static_cast<std::size_t>(i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = 1.0 / (static_cast<double>(n) * pn1 * pn1);
  }
  // Symmetrize to remove the last-ulp asymmetry of the eigensolver.
  for (int i = 0; i < n / 2; ++i) {
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    const double x = 0.5 * (rule.nodes[hi] - rule.nodes[lo]);
    const double w = 0.5 * (rule.weights[hi] + rule.weights[lo]);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = rule.weights[hi] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

/// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int n) {
  detail::require(n >= 1, "gauss_legendre: need at least one node");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = jacobi(k - 1, k) = b;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  Eigen::VectorXd nodes = solver.eigenvalues();
  Eigen::VectorXd weights = 2.0 * solver.eigenvectors().row(0).transpose().array().square();
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
    const double w = 0.5 * (weights[n - 1 - i] + weights[i]);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
  return {nodes, weights};
}

/// Composite Gauss-Legendre rule for Z ~ N(0, 1) on [-half_range, half_range],
/// split into panels of the given width. Suited to integrands with sharp
/// transitions (posterior means of discrete priors at high signal).
inline NormalRule composite_normal_rule(double panel_width, int order, double half_range) {
  detail::require(panel_width > 0.0 && half_range > 0.0, "composite_normal_rule: widths must be positive");
  const auto panels = static_cast<int>(std::ceil(2.0 * half_range / panel_width));
  const double h = 2.0 * half_range / panels;
  const auto [x, w] = gauss_legendre(order);
  NormalRule rule;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = -half_range + (p + 0.5) * h;
    for (int k = 0; k < order; ++k) {
      const double z = mid + 0.5 * h * x[k];
      const double weight = 0.5 * h * w[k] * std::exp(-0.5 * z * z);
      rule.nodes.push_back(z);
      rule.weights.push_back(weight);
      total += weight;
    }
  }
  for (auto& weight : rule.weights) weight /= total;
  return rule;
}

} // namespace inhomo
