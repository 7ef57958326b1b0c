#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "model.hpp"
#include "priors.hpp"
#include "profile.hpp"
#include "rng.hpp"
#include "spectral.hpp"
#include "state_evolution.hpp"

namespace inhomo {

/// Iterates of the inhomogeneous AMP. f_prev caches f_{t-1}(x^{t-1}) and
/// onsager holds the b_t used to produce x_curr.
struct AmpState {
  int t = 0;
  Eigen::VectorXd x_curr;
  Eigen::VectorXd x_prev;
  Eigen::VectorXd f_prev;
  Eigen::VectorXd onsager;

  static AmpState start(Eigen::VectorXd x0) {
    const auto n = x0.size();
    return {0, std::move(x0), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  }
};

struct AmpInit {
  enum class Kind { Noise, Spectral, Informed };
  Kind kind = Kind::Spectral;
  double epsilon = 1e-3;
};

struct AmpConfig {
  int max_iters = 200;
  double tol = 1e-7;
  AmpInit init;
  bool record_trajectory = false;
};

// ---------------------------------------------------------------------------
// Measurements.

/// mu_a = (1 / (gamma |C_a|)) sum_{i in C_a} xhat_i x*_i.
inline Eigen::VectorXd block_overlap(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& spike,
                                     const BlockPartition& partition, double gamma) {
  detail::require(x_hat.size() == spike.size() && static_cast<std::size_t>(spike.size()) == partition.n(),
                  "block_overlap: length mismatch");
  detail::require(gamma > 0.0, "block_overlap: gamma must be positive");
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(partition.q());
  for (Eigen::Index i = 0; i < spike.size(); ++i) sums[partition.group(static_cast<std::size_t>(i))] += x_hat[i] * spike[i];
  for (int a = 0; a < partition.q(); ++a) {
    detail::require(partition.block_size(a) > 0, "block_overlap: empty block");
    sums[a] /= gamma * static_cast<double>(partition.block_size(a));
  }
  return sums;
}

/// Per-block mean of (x_i - overlap_a x*_i)^2.
inline Eigen::VectorXd block_residual_variance(const Eigen::VectorXd& x, const Eigen::VectorXd& spike,
                                               const BlockPartition& partition, const Eigen::VectorXd& overlap) {
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(partition.q());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const int a = partition.group(static_cast<std::size_t>(i));
    const double r = x[i] - overlap[a] * spike[i];
    sums[a] += r * r;
  }
  for (int a = 0; a < partition.q(); ++a) sums[a] /= static_cast<double>(partition.block_size(a));
  return sums;
}

/// (1/N^2) ||x* x*^T - xhat xhat^T||_F^2 from three inner products.
inline double matrix_mse(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& spike) {
  detail::require(x_hat.size() == spike.size(), "matrix_mse: length mismatch");
  const auto n = static_cast<double>(spike.size());
  const double truth = spike.squaredNorm() / n;
  const double est = x_hat.squaredNorm() / n;
  const double cross = x_hat.dot(spike) / n;
  return truth * truth + est * est - 2.0 * cross * cross;
}

// ---------------------------------------------------------------------------
// Iteration.

namespace detail {

inline std::vector<ChannelParams> resolve_params(const DenoiserFamily& family, const std::vector<ChannelParams>& params,
                                                 int q) {
  if (!params.empty() || is_bayes(family)) {
    require(static_cast<int>(params.size()) == q, "amp_step: need channel parameters for every block");
    return params;
  }
  return std::vector<ChannelParams>(static_cast<std::size_t>(q));
}

struct StepOutput {
  AmpState next;
  Eigen::VectorXd denoised;
};

inline StepOutput amp_step_impl(const SpikedInstance& instance, const DenoiserFamily& family,
                                const std::vector<ChannelParams>& params, const AmpState& state) {
  const auto& partition = instance.partition;
  const auto n = static_cast<Eigen::Index>(partition.n());
  require(state.x_curr.size() == n && state.x_prev.size() == n && state.f_prev.size() == n,
          "amp_step: state dimensions do not match the instance");
  const auto resolved = resolve_params(family, params, partition.q());
  auto denoised = apply_denoiser(family, resolved, partition, state.x_curr);
  Eigen::VectorXd onsager = block_inverse_average(partition, instance.profile, denoised.derivatives);
  const Eigen::MatrixXd weights = instance.profile.inverse() / std::sqrt(static_cast<double>(n));
  Eigen::VectorXd x_next = block_scaled_product(instance.observed, partition, weights, denoised.values);
  x_next -= onsager.cwiseProduct(state.f_prev);
  if (!x_next.allFinite())
    throw DivergenceError("AMP iteration diverged at t = " + std::to_string(state.t + 1));
  AmpState next{state.t + 1, std::move(x_next), state.x_curr, denoised.values, std::move(onsager)};
  return {std::move(next), std::move(denoised.values)};
}

} // namespace detail

/// x^{t+1} = ((1 / (sqrt(N) Delta)) (.) Y) f_t(x^t) - b_t (.) f_{t-1}(x^{t-1}),
/// b_t = (1 / (N Delta)) f_t'(x^t). `params` may be empty for the identity family.
inline AmpState amp_step(const SpikedInstance& instance, const DenoiserFamily& family,
                         const std::vector<ChannelParams>& params, const AmpState& state) {
  return detail::amp_step_impl(instance, family, params, state).next;
}

/// Top eigenvector of the transformed matrix scaled to ||x0||^2 = gamma N.
inline Eigen::VectorXd spectral_init(const SpikedInstance& instance, double second_moment) {
  const auto pair = top_eigenpair(transform(instance, second_moment));
  return pair.vector.normalized() * std::sqrt(second_moment * static_cast<double>(instance.n()));
}

/// Starting iterate for the configured mode. Noise draws come from the
/// instance's init substream.
inline Eigen::VectorXd initial_iterate(const SpikedInstance& instance, const AmpInit& init, double second_moment) {
  detail::require(init.epsilon >= 0.0, "amp init: epsilon must be non-negative");
  if (init.kind == AmpInit::Kind::Spectral) return spectral_init(instance, second_moment);
  Rng rng = make_rng(instance.seed, kInitStream);
  std::normal_distribution<double> normal;
  Eigen::VectorXd noise(static_cast<Eigen::Index>(instance.n()));
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = normal(rng);
  if (init.kind == AmpInit::Kind::Noise) return init.epsilon * noise;
  detail::require(init.epsilon <= 1.0, "amp init: informed epsilon must lie in [0, 1]");
  return init.epsilon * instance.spike + std::sqrt(1.0 - init.epsilon * init.epsilon) * noise;
}

/// Starting state. A spectral start is treated as the stationary point of the
/// linear iteration f(x) = (gamma / lambda) x, so its memory term is
/// f_{-1} = (gamma / lambda) x^0; other starts have no memory.
inline AmpState initial_state(const SpikedInstance& instance, const AmpInit& init, double second_moment) {
  AmpState state = AmpState::start(initial_iterate(instance, init, second_moment));
  if (init.kind == AmpInit::Kind::Spectral) {
    const double lambda = snr(instance.profile, instance.partition.fractions(), second_moment);
    state.f_prev = state.x_curr * (second_moment / lambda);
  }
  return state;
}

/// Measurements taken at one iteration.
struct AmpRecord {
  int t = 0;
  Eigen::VectorXd mu_hat;
  Eigen::VectorXd sigma2_hat;
  double matrix_mse = 0.0;
  double delta_norm = 0.0;
};

struct AmpRun {
  std::vector<AmpRecord> records;
  std::vector<SeState> se;
  std::vector<Eigen::VectorXd> iterates;
  Eigen::VectorXd final_iterate;
  Eigen::VectorXd final_estimate;
  bool converged = false;
  int iters = 0;
};

/// SE starting point measured from an iterate: per-block overlap and
/// residual variance.
inline SeState measured_state(const Eigen::VectorXd& x, const SpikedInstance& instance, double gamma) {
  SeState s;
  s.mu = block_overlap(x, instance.spike, instance.partition, gamma);
  s.sigma2 = block_residual_variance(x, instance.spike, instance.partition, s.mu);
  return s;
}

/// Runs AMP from an explicit starting state. The state evolution comes from
/// `se_trajectory` when given, and otherwise is started at the measured state
/// of x0; the Bayes family takes its channel parameters at step t from it.
inline AmpRun run_amp_from(const SpikedInstance& instance, const DenoiserFamily& family, const Prior& prior,
                           AmpState start, const AmpConfig& config, const QuadratureSpec& quad = {},
                           const std::optional<std::vector<SeState>>& se_trajectory = std::nullopt) {
  detail::require(config.max_iters >= 1, "run_amp: max_iters must be >= 1");
  detail::require(config.tol >= 0.0, "run_amp: tol must be non-negative");
  detail::require(static_cast<std::size_t>(start.x_curr.size()) == instance.n(), "run_amp: x0 has wrong length");
  const Eigen::VectorXd& x0 = start.x_curr;
  const double gamma = prior.second_moment();
  const double root_n = std::sqrt(static_cast<double>(instance.n()));
  const auto rule = quad.rule();
  const bool bayes = is_bayes(family);
  const auto& fractions = instance.partition.fractions();

  AmpRun run;
  if (se_trajectory) {
    run.se = *se_trajectory;
    detail::require(!run.se.empty(), "run_amp: supplied state-evolution trajectory is empty");
  } else {
    run.se.push_back(measured_state(x0, instance, gamma));
  }
  const auto se_at = [&](int t) -> const SeState& {
    if (static_cast<std::size_t>(t) >= run.se.size()) {
      detail::require(!se_trajectory, "run_amp: supplied state-evolution trajectory is too short");
      run.se.push_back(se_step(family, prior, instance.profile, fractions, run.se.back(), rule));
    }
    return run.se[static_cast<std::size_t>(t)];
  };

  AmpState state = std::move(start);
  double last_delta = 0.0;
  const auto record = [&](const AmpState& s, const Eigen::VectorXd& estimate) {
    AmpRecord rec;
    rec.t = s.t;
    rec.mu_hat = block_overlap(s.x_curr, instance.spike, instance.partition, gamma);
    rec.sigma2_hat = block_residual_variance(s.x_curr, instance.spike, instance.partition, rec.mu_hat);
    rec.matrix_mse = matrix_mse(estimate, instance.spike);
    rec.delta_norm = last_delta;
    run.records.push_back(std::move(rec));
    if (config.record_trajectory) run.iterates.push_back(s.x_curr);
  };

  for (int t = 0; t < config.max_iters; ++t) {
    const auto& se_state = se_at(t);
    const auto params = bayes ? se_state.channel_params() : std::vector<ChannelParams>{};
    auto out = detail::amp_step_impl(instance, family, params, state);
    record(state, out.denoised);
    last_delta = (out.next.x_curr - state.x_curr).norm() / root_n;
    state = std::move(out.next);
    run.iters = state.t;
    if (last_delta < config.tol) {
      run.converged = true;
      break;
    }
  }
  const auto& se_final = se_at(state.t);
  const auto params = bayes ? se_final.channel_params() : std::vector<ChannelParams>{};
  const auto final_denoised =
      apply_denoiser(family, detail::resolve_params(family, params, instance.partition.q()), instance.partition,
                     state.x_curr);
  record(state, final_denoised.values);
  run.final_iterate = state.x_curr;
  run.final_estimate = final_denoised.values;
  run.se.resize(static_cast<std::size_t>(state.t) + 1);
  return run;
}

inline AmpRun run_amp_from(const SpikedInstance& instance, const DenoiserFamily& family, const Prior& prior,
                           Eigen::VectorXd x0, const AmpConfig& config, const QuadratureSpec& quad = {},
                           const std::optional<std::vector<SeState>>& se_trajectory = std::nullopt) {
  return run_amp_from(instance, family, prior, AmpState::start(std::move(x0)), config, quad, se_trajectory);
}

inline AmpRun run_amp(const SpikedInstance& instance, const DenoiserFamily& family, const Prior& prior,
                      const AmpConfig& config, const QuadratureSpec& quad = {},
                      const std::optional<std::vector<SeState>>& se_trajectory = std::nullopt) {
  return run_amp_from(instance, family, prior, initial_state(instance, config.init, prior.second_moment()), config,
                      quad, se_trajectory);
}

// ---------------------------------------------------------------------------
// Matrix-AMP embedding.

/// N x q matrix with M(i, g(i)) = v_i and zeros elsewhere.
inline Eigen::MatrixXd blockdiag(const Eigen::VectorXd& v, const BlockPartition& partition) {
  detail::require(static_cast<std::size_t>(v.size()) == partition.n(), "blockdiag: length mismatch");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(v.size(), partition.q());
  for (Eigen::Index i = 0; i < v.size(); ++i) m(i, partition.group(static_cast<std::size_t>(i))) = v[i];
  return m;
}

/// v_i = M(i, g(i)).
inline Eigen::VectorXd blockproj(const Eigen::MatrixXd& m, const BlockPartition& partition) {
  detail::require(static_cast<std::size_t>(m.rows()) == partition.n() && m.cols() == partition.q(),
                  "blockproj: shape mismatch");
  Eigen::VectorXd v(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) v[i] = m(i, partition.group(static_cast<std::size_t>(i)));
  return v;
}

/// Matrix AMP r^{t+1} = (W / sqrt(N)) F_t - F_{t-1} B_t^T on N x q iterates with
///   F_t(i, k) = f_t^{g(i)}(x_i^t) / sqrt(delta(g(i), k)),  x^t = blockproj(r^t),
///   B_t(k, a) = (1/N) sum_{i in C_a} f_t^{a}'(x_i^t) / sqrt(delta(a, k)).
/// `params[t]` holds the channel parameters of step t (ignored for identity).
/// Returns r^0 .. r^{t_max}.
inline std::vector<Eigen::MatrixXd> matrix_amp_oracle(const Eigen::MatrixXd& noise, const VarianceProfile& profile,
                                                      const BlockPartition& partition, const DenoiserFamily& family,
                                                      const std::vector<std::vector<ChannelParams>>& params,
                                                      const Eigen::VectorXd& x0, int t_max) {
  const auto n = static_cast<Eigen::Index>(partition.n());
  const int q = partition.q();
  detail::require(noise.rows() == n && noise.cols() == n, "matrix_amp_oracle: noise has wrong shape");
  detail::require(profile.q() == q, "matrix_amp_oracle: profile and partition disagree on q");
  detail::require(!is_bayes(family) || static_cast<int>(params.size()) >= t_max,
                  "matrix_amp_oracle: need channel parameters for each step");
  const Eigen::MatrixXd inv_root = profile.delta().cwiseSqrt().cwiseInverse();
  const double root_n = std::sqrt(static_cast<double>(n));

  std::vector<Eigen::MatrixXd> iterates{blockdiag(x0, partition)};
  Eigen::MatrixXd f_prev = Eigen::MatrixXd::Zero(n, q);
  for (int t = 0; t < t_max; ++t) {
    const Eigen::VectorXd x = blockproj(iterates.back(), partition);
    const auto step_params = is_bayes(family) ? params[static_cast<std::size_t>(t)] : std::vector<ChannelParams>{};
    const auto d = apply_denoiser(family, detail::resolve_params(family, step_params, q), partition, x);

    Eigen::MatrixXd f(n, q);
    Eigen::VectorXd slope_sums = Eigen::VectorXd::Zero(q);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int g = partition.group(static_cast<std::size_t>(i));
      f.row(i) = d.values[i] * inv_root.row(g);
      slope_sums[g] += d.derivatives[i];
    }
    Eigen::MatrixXd onsager(q, q);
    for (int k = 0; k < q; ++k)
      for (int a = 0; a < q; ++a) onsager(k, a) = slope_sums[a] * inv_root(a, k) / static_cast<double>(n);

    Eigen::MatrixXd next = noise * f / root_n - f_prev * onsager.transpose();
    if (!next.allFinite()) throw DivergenceError("matrix AMP diverged at t = " + std::to_string(t + 1));
    iterates.push_back(std::move(next));
    f_prev = std::move(f);
  }
  return iterates;
}

} // namespace inhomo
