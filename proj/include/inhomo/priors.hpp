#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "error.hpp"
#include "profile.hpp"
#include "quadrature.hpp"
#include "rng.hpp"

namespace inhomo {

struct GaussianPrior {
  double variance = 1.0;
};

struct RademacherPrior {};

// 0 with probability 1 - rho, +-1/sqrt(rho) with probability rho/2 each.
struct SparseRademacherPrior {
  double rho = 1.0;
};

/// Law of the i.i.d. spike entries. All supported priors are centred.
class Prior {
public:
  using Kind = std::variant<GaussianPrior, RademacherPrior, SparseRademacherPrior>;

  Prior() : kind_(GaussianPrior{}) {}

  static Prior gaussian(double variance = 1.0) {
    detail::require(std::isfinite(variance) && variance > 0.0, "prior: gaussian variance must be positive");
    return Prior(GaussianPrior{variance});
  }
  static Prior rademacher() { return Prior(RademacherPrior{}); }
  static Prior sparse_rademacher(double rho) {
    detail::require(std::isfinite(rho) && rho > 0.0 && rho <= 1.0, "prior: rho must lie in (0, 1]");
    return Prior(SparseRademacherPrior{rho});
  }

  const Kind& kind() const { return kind_; }
  bool is_gaussian() const { return std::holds_alternative<GaussianPrior>(kind_); }

  std::string name() const {
    return std::visit(
        [](const auto& p) -> std::string {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, GaussianPrior>) return "gaussian";
          else if constexpr (std::is_same_v<T, RademacherPrior>) return "rademacher";
          else return "sparse_rademacher";
        },
        kind_);
  }

  /// E[x^2].
  double second_moment() const {
    return std::visit(
        [](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, GaussianPrior>) return p.variance;
          else return 1.0;
        },
        kind_);
  }

  /// sup |x| over the support, +inf for the Gaussian.
  double support_bound() const {
    return std::visit(
        [](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, GaussianPrior>) return std::numeric_limits<double>::infinity();
          else if constexpr (std::is_same_v<T, RademacherPrior>) return 1.0;
          else return 1.0 / std::sqrt(p.rho);
        },
        kind_);
  }

  /// Atoms and probabilities of a discrete prior; empty for the Gaussian.
  std::pair<std::vector<double>, std::vector<double>> atoms() const {
    return std::visit(
        [](const auto& p) -> std::pair<std::vector<double>, std::vector<double>> {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, GaussianPrior>) return {};
          else if constexpr (std::is_same_v<T, RademacherPrior>) return {{-1.0, 1.0}, {0.5, 0.5}};
          else {
            const double a = 1.0 / std::sqrt(p.rho);
            if (p.rho == 1.0) return {{-a, a}, {0.5, 0.5}};
            return {{-a, 0.0, a}, {0.5 * p.rho, 1.0 - p.rho, 0.5 * p.rho}};
          }
        },
        kind_);
  }

  /// E_x[fn(x)]: exact atom sum for discrete priors, Gauss-Hermite otherwise.
  template <class Fn>
  double expect(const NormalRule& rule, Fn&& fn) const {
    if (const auto* g = std::get_if<GaussianPrior>(&kind_)) {
      const double scale = std::sqrt(g->variance);
      double acc = 0.0;
      for (std::size_t k = 0; k < rule.size(); ++k) acc += rule.weights[k] * fn(scale * rule.nodes[k]);
      return acc;
    }
    const auto [values, probs] = atoms();
    double acc = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) acc += probs[k] * fn(values[k]);
    return acc;
  }

private:
  explicit Prior(Kind kind) : kind_(kind) {}
  Kind kind_;
};

/// n i.i.d. draws.
inline Eigen::VectorXd sample(const Prior& prior, std::size_t n, Rng& rng) {
  detail::require(n >= 1, "sample: n must be >= 1");
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianPrior>) {
          std::normal_distribution<double> normal(0.0, std::sqrt(p.variance));
          for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal(rng);
        } else if constexpr (std::is_same_v<T, RademacherPrior>) {
          std::bernoulli_distribution coin(0.5);
          for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = coin(rng) ? 1.0 : -1.0;
        } else {
          std::uniform_real_distribution<double> uniform(0.0, 1.0);
          const double a = 1.0 / std::sqrt(p.rho);
          for (Eigen::Index i = 0; i < out.size(); ++i) {
            const double u = uniform(rng);
            out[i] = u < 0.5 * p.rho ? a : (u < p.rho ? -a : 0.0);
          }
        }
      },
      prior.kind());
  return out;
}

/// Posterior mean and variance of x under the scalar channel r = mu x + sigma Z.
struct PosteriorMoments {
  double mean = 0.0;
  double variance = 0.0;
};

inline PosteriorMoments posterior_moments(const Prior& prior, double r, double mu, double sigma2) {
  detail::require(std::isfinite(r) && std::isfinite(mu) && std::isfinite(sigma2), "posterior: non-finite input");
  detail::require(sigma2 >= 0.0, "posterior: sigma2 must be non-negative");
  detail::require(!(sigma2 == 0.0 && mu == 0.0), "posterior: channel with mu == 0 and sigma2 == 0 is undefined");
  if (sigma2 == 0.0) return {r / mu, 0.0};

  if (const auto* g = std::get_if<GaussianPrior>(&prior.kind())) {
    const double denom = mu * mu * g->variance + sigma2;
    return {mu * g->variance * r / denom, g->variance * sigma2 / denom};
  }
  if (std::holds_alternative<RademacherPrior>(prior.kind())) {
    const double th = std::tanh(mu * r / sigma2);
    return {th, 1.0 - th * th};
  }
  // Discrete prior: softmax over log-weights log p_k + (mu x_k r - mu^2 x_k^2 / 2) / sigma2.
  const auto [values, probs] = prior.atoms();
  std::vector<double> logw(values.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double x = values[k];
    logw[k] = std::log(probs[k]) + (mu * x * r - 0.5 * mu * mu * x * x) / sigma2;
    top = std::max(top, logw[k]);
  }
  double z = 0.0;
  double first = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    logw[k] = std::exp(logw[k] - top);
    z += logw[k];
    first += logw[k] * values[k];
  }
  const double mean = first / z;
  double var = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) var += logw[k] * (values[k] - mean) * (values[k] - mean);
  return {mean, var / z};
}

/// E[x | mu x + sigma Z = r].
inline double posterior_mean(const Prior& prior, double r, double mu, double sigma2) {
  return posterior_moments(prior, r, mu, sigma2).mean;
}

/// d/dr of posterior_mean, equal to (mu / sigma2) Var[x | r].
inline double posterior_mean_derivative(const Prior& prior, double r, double mu, double sigma2) {
  const auto m = posterior_moments(prior, r, mu, sigma2);
  if (sigma2 == 0.0) return 1.0 / mu;
  return mu / sigma2 * m.variance;
}

/// Per-block channel parameters (mu_a, sigma_a^2) fed to the denoisers.
struct ChannelParams {
  double mu = 0.0;
  double sigma2 = 0.0;
};

struct BayesDenoiser {
  Prior prior;
};

struct IdentityDenoiser {};

/// Separable per-block denoiser family.
using DenoiserFamily = std::variant<BayesDenoiser, IdentityDenoiser>;

inline bool is_bayes(const DenoiserFamily& family) { return std::holds_alternative<BayesDenoiser>(family); }

struct DenoiserValue {
  double value = 0.0;
  double derivative = 0.0;
};

/// f(r) and f'(r) for one block. A Bayes denoiser with mu == 0 carries no
/// information about x and returns the prior mean (zero) with zero slope.
inline DenoiserValue evaluate(const DenoiserFamily& family, const ChannelParams& params, double r) {
  if (const auto* bayes = std::get_if<BayesDenoiser>(&family)) {
    if (params.mu == 0.0) return {0.0, 0.0};
    const auto m = posterior_moments(bayes->prior, r, params.mu, params.sigma2);
    const double slope = params.sigma2 == 0.0 ? 1.0 / params.mu : params.mu / params.sigma2 * m.variance;
    return {m.mean, slope};
  }
  return {r, 1.0};
}

/// Upper bound on |f'| for the given parameters.
inline double lipschitz_bound(const DenoiserFamily& family, const ChannelParams& params) {
  const auto* bayes = std::get_if<BayesDenoiser>(&family);
  if (bayes == nullptr) return 1.0;
  if (params.mu == 0.0) return 0.0;
  if (params.sigma2 == 0.0) return 1.0 / std::abs(params.mu);
  if (const auto* g = std::get_if<GaussianPrior>(&bayes->prior.kind()))
    return std::abs(params.mu) * g->variance / (params.mu * params.mu * g->variance + params.sigma2);
  // Var[x | r] <= sup x^2 for a bounded prior.
  const double bound = bayes->prior.support_bound();
  return std::abs(params.mu) / params.sigma2 * bound * bound;
}

struct DenoisedVector {
  Eigen::VectorXd values;
  Eigen::VectorXd derivatives;
};

/// Applies block g(i)'s denoiser to coordinate i.
inline DenoisedVector apply_denoiser(const DenoiserFamily& family, const std::vector<ChannelParams>& params,
                                     const BlockPartition& partition, const Eigen::VectorXd& x) {
  detail::require(static_cast<int>(params.size()) == partition.q(), "apply_denoiser: need one parameter pair per block");
  detail::require(static_cast<std::size_t>(x.size()) == partition.n(), "apply_denoiser: x has wrong length");
  DenoisedVector out{Eigen::VectorXd(x.size()), Eigen::VectorXd(x.size())};
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto v = evaluate(family, params[static_cast<std::size_t>(partition.group(static_cast<std::size_t>(i)))], x[i]);
    out.values[i] = v.value;
    out.derivatives[i] = v.derivative;
  }
  return out;
}

} // namespace inhomo
