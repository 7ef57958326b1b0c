#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"
#include "priors.hpp"
#include "profile.hpp"
#include "quadrature.hpp"

namespace inhomo {

/// Per-block overlap mu and effective noise variance sigma^2.
struct SeState {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma2;

  std::vector<ChannelParams> channel_params() const {
    std::vector<ChannelParams> out(static_cast<std::size_t>(mu.size()));
    for (Eigen::Index a = 0; a < mu.size(); ++a) out[static_cast<std::size_t>(a)] = {mu[a], sigma2[a]};
    return out;
  }

  static SeState uniform(int q, double mu, double sigma2) {
    return {Eigen::VectorXd::Constant(q, mu), Eigen::VectorXd::Constant(q, sigma2)};
  }
};

/// Rules for the scalar expectations. `hermite` integrates the Gaussian
/// prior and the Z-expectation under it (polynomial integrands);
/// `panels` integrates Z under discrete priors.
struct ExpectationRules {
  NormalRule hermite;
  NormalRule panels;
};

struct QuadratureSpec {
  int gh_nodes = 61;
  double panel_width = 0.25;
  int panel_order = 8;
  double half_range = 12.0;

  ExpectationRules rule() const {
    detail::require(gh_nodes >= 1, "quadrature: gh_nodes must be >= 1");
    detail::require(panel_order >= 1, "quadrature: panel_order must be >= 1");
    detail::require(panel_width > 0.0 && half_range > 0.0, "quadrature: panel sizes must be positive");
    return {gauss_hermite(gh_nodes), composite_normal_rule(panel_width, panel_order, half_range)};
  }
};

/// E[x f(mu x + sigma Z)] and E[f(mu x + sigma Z)^2] for one block.
struct BlockMoments {
  double cross = 0.0;
  double square = 0.0;
};

inline BlockMoments block_moments(const DenoiserFamily& family, const Prior& prior, const ChannelParams& params,
                                  const ExpectationRules& rules) {
  detail::require(params.sigma2 >= 0.0, "state evolution: sigma2 must be non-negative");
  BlockMoments out;
  if (std::holds_alternative<IdentityDenoiser>(family)) {
    const double gamma = prior.second_moment();
    out = {params.mu * gamma, params.mu * params.mu * gamma + params.sigma2};
  } else if (params.mu != 0.0 && prior.is_gaussian() && std::get<BayesDenoiser>(family).prior.is_gaussian()) {
    // Linear denoiser f(r) = alpha r on a Gaussian channel: exact moments.
    const double v = std::get<BayesDenoiser>(family).prior.second_moment();
    const double alpha = params.mu * v / (params.mu * params.mu * v + params.sigma2);
    const double gamma = prior.second_moment();
    out = {alpha * params.mu * gamma, alpha * alpha * (params.mu * params.mu * gamma + params.sigma2)};
  } else if (params.mu != 0.0) {
    const double sigma = std::sqrt(params.sigma2);
    const NormalRule& z_rule = prior.is_gaussian() ? rules.hermite : rules.panels;
    const auto accumulate = [&](double x) {
      double cross = 0.0, square = 0.0;
      for (std::size_t k = 0; k < z_rule.size(); ++k) {
        const double f = evaluate(family, params, params.mu * x + sigma * z_rule.nodes[k]).value;
        cross += z_rule.weights[k] * x * f;
        square += z_rule.weights[k] * f * f;
      }
      return std::pair{cross, square};
    };
    if (prior.is_gaussian()) {
      out.cross = prior.expect(rules.hermite, [&](double x) { return accumulate(x).first; });
      out.square = prior.expect(rules.hermite, [&](double x) { return accumulate(x).second; });
    } else {
      const auto [values, probs] = prior.atoms();
      for (std::size_t j = 0; j < values.size(); ++j) {
        const auto [cross, square] = accumulate(values[j]);
        out.cross += probs[j] * cross;
        out.square += probs[j] * square;
      }
    }
  }
  if (!std::isfinite(out.cross) || !std::isfinite(out.square))
    throw DivergenceError("state evolution: non-finite integrand");
  return out;
}

/// One step of the per-block recursion
///   mu_b'      = sum_a c_a / delta_ab * E[x f_a(mu_a x + sigma_a Z)]
///   sigma2_b'  = sum_a c_a / delta_ab * E[f_a(mu_a x + sigma_a Z)^2].
/// The Bayes family uses (mu_a, sigma2_a) as its channel parameters.
inline SeState se_step(const DenoiserFamily& family, const Prior& prior, const VarianceProfile& profile,
                       const Eigen::VectorXd& fractions, const SeState& state, const ExpectationRules& rule) {
  const int q = profile.q();
  detail::require(fractions.size() == q && state.mu.size() == q && state.sigma2.size() == q,
                  "se_step: dimensions disagree with q");
  Eigen::VectorXd cross(q), square(q);
  for (int a = 0; a < q; ++a) {
    const auto m = block_moments(family, prior, {state.mu[a], state.sigma2[a]}, rule);
    cross[a] = fractions[a] * m.cross;
    square[a] = fractions[a] * m.square;
  }
  const Eigen::MatrixXd inv = profile.inverse();
  return {inv * cross, inv * square};
}

/// Iterates se_step until the sup-norm change in mu drops below tol or
/// t_max steps were taken. The returned trajectory starts with `init`.
inline std::vector<SeState> run_se(const DenoiserFamily& family, const Prior& prior, const VarianceProfile& profile,
                                   const Eigen::VectorXd& fractions, const SeState& init, const QuadratureSpec& quad,
                                   int t_max, double tol) {
  detail::require(t_max >= 0 && tol >= 0.0, "run_se: t_max and tol must be non-negative");
  detail::require(init.mu.size() == profile.q() && init.sigma2.size() == profile.q(), "run_se: init has wrong size");
  detail::require((init.sigma2.array() >= 0.0).all(), "run_se: init sigma2 must be non-negative");
  const auto rule = quad.rule();
  std::vector<SeState> trajectory{init};
  for (int t = 0; t < t_max; ++t) {
    trajectory.push_back(se_step(family, prior, profile, fractions, trajectory.back(), rule));
    const auto& last = trajectory.back();
    if ((last.mu - trajectory[trajectory.size() - 2].mu).cwiseAbs().maxCoeff() < tol) break;
  }
  return trajectory;
}

enum class InitMode { Uninformed, Informed };

inline std::string to_string(InitMode mode) { return mode == InitMode::Uninformed ? "uninformed" : "informed"; }

struct FixedPointResult {
  Eigen::VectorXd mu;
  bool converged = false;
  double residual = 0.0;
  int iterations = 0;
};

/// Right-hand side of the Bayes fixed-point equation,
///   F(mu)_b = sum_a c_a / delta_ab E[x E_post[x | mu_a x + sqrt(mu_a) Z]].
inline Eigen::VectorXd bayes_fixed_point_map(const Prior& prior, const VarianceProfile& profile,
                                             const Eigen::VectorXd& fractions, const Eigen::VectorXd& mu,
                                             const ExpectationRules& rule) {
  const DenoiserFamily family = BayesDenoiser{prior};
  Eigen::VectorXd weighted(mu.size());
  for (Eigen::Index a = 0; a < mu.size(); ++a) {
    detail::require(mu[a] >= 0.0, "bayes fixed point: overlaps must be non-negative");
    weighted[a] = fractions[a] * block_moments(family, prior, {mu[a], mu[a]}, rule).cross;
  }
  return profile.inverse() * weighted;
}

/// Plain fixed-point iteration of the Bayes state evolution with sigma^2 tied
/// to mu. Uninformed starts at epsilon * 1; informed starts from the image of
/// perfect overlap, mu_b = gamma * sum_a c_a / delta_ab, which bounds every
/// fixed point from above so the iteration lands on the largest one.
inline FixedPointResult bayes_fixed_point(const Prior& prior, const VarianceProfile& profile,
                                          const Eigen::VectorXd& fractions, const QuadratureSpec& quad,
                                          InitMode mode, double epsilon = 1e-6, int t_max = 200000,
                                          double tol = 1e-13) {
  const int q = profile.q();
  detail::require(fractions.size() == q, "bayes_fixed_point: fractions length must equal q");
  detail::require(epsilon >= 0.0, "bayes_fixed_point: epsilon must be non-negative");
  const auto rule = quad.rule();
  Eigen::VectorXd mu = mode == InitMode::Uninformed
                           ? Eigen::VectorXd::Constant(q, epsilon)
                           : Eigen::VectorXd(profile.inverse() * fractions * prior.second_moment());
  FixedPointResult result;
  for (int t = 0; t < t_max; ++t) {
    Eigen::VectorXd next = bayes_fixed_point_map(prior, profile, fractions, mu, rule);
    const double change = (next - mu).cwiseAbs().maxCoeff();
    mu = std::move(next);
    result.iterations = t + 1;
    if (change <= tol) {
      result.converged = true;
      break;
    }
  }
  result.residual = (bayes_fixed_point_map(prior, profile, fractions, mu, rule) - mu).cwiseAbs().maxCoeff();
  result.mu = std::move(mu);
  return result;
}

/// Spectral radius of the identity-denoiser overlap map mu -> (1/delta) diag(c) mu,
/// scaled by second_moment^2. Computed from the non-symmetric map directly, so
/// it is an independent route to snr().
inline double linear_threshold(const VarianceProfile& profile, const Eigen::VectorXd& fractions,
                               double second_moment) {
  detail::require(fractions.size() == profile.q(), "linear_threshold: fractions length must equal q");
  detail::require(second_moment > 0.0, "linear_threshold: second moment must be positive");
  const Eigen::MatrixXd map = profile.inverse() * fractions.asDiagonal();
  const Eigen::EigenSolver<Eigen::MatrixXd> solver(map, false);
  return second_moment * second_moment * solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Per-block E[x f_a] for the given state (the overlap of the denoised estimate).
inline Eigen::VectorXd denoised_overlaps(const DenoiserFamily& family, const Prior& prior, const SeState& state,
                                         const ExpectationRules& rule) {
  Eigen::VectorXd out(state.mu.size());
  for (Eigen::Index a = 0; a < out.size(); ++a)
    out[a] = block_moments(family, prior, {state.mu[a], state.sigma2[a]}, rule).cross;
  return out;
}

/// Predicted (1/N^2) ||x* x*^T - xhat xhat^T||_F^2 when E[x xhat] = E[xhat^2]
/// per block: gamma^2 - (sum_a c_a m_a)^2, with m_a = E[x f_a].
inline double se_matrix_mse(const Eigen::VectorXd& overlaps, const Eigen::VectorXd& fractions, double gamma) {
  detail::require(overlaps.size() == fractions.size(), "se_matrix_mse: dimension mismatch");
  const double total = fractions.dot(overlaps);
  return gamma * gamma - total * total;
}

/// Same quantity without assuming the Nishimori identity:
/// gamma^2 + (sum c E[f^2])^2 - 2 (sum c E[x f])^2.
inline double predicted_matrix_mse(const DenoiserFamily& family, const Prior& prior, const SeState& state,
                                   const Eigen::VectorXd& fractions, const ExpectationRules& rule) {
  double cross = 0.0;
  double square = 0.0;
  for (Eigen::Index a = 0; a < state.mu.size(); ++a) {
    const auto m = block_moments(family, prior, {state.mu[a], state.sigma2[a]}, rule);
    cross += fractions[a] * m.cross;
    square += fractions[a] * m.square;
  }
  const double gamma = prior.second_moment();
  return gamma * gamma + square * square - 2.0 * cross * cross;
}

} // namespace inhomo
