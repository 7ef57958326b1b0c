#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "output.hpp"

namespace inhomo::cli {

namespace fs = std::filesystem;

class VerificationFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One (snr, replicate) point of a sweep.
struct Task {
  std::size_t snr_index = 0;
  int replicate = 0;
  double snr = 0.0;
  std::uint64_t seed = 0;
};

inline std::vector<Task> sweep_tasks(const ExperimentConfig& cfg) {
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < cfg.snr.size(); ++i)
    for (int k = 0; k < cfg.seeds; ++k) {
      const auto index = i * static_cast<std::size_t>(cfg.seeds) + static_cast<std::size_t>(k);
      tasks.push_back({i, k, cfg.snr[i], derive_seed(cfg.seed, index)});
    }
  return tasks;
}

inline SpikedInstance make_instance(const ExperimentConfig& cfg, const Task& task) {
  const auto partition = BlockPartition::contiguous(cfg.n, cfg.fractions);
  const auto profile = scale_to_snr(cfg.profile, partition.fractions(), cfg.prior.second_moment(), task.snr);
  return generate(cfg.prior, partition, profile, task.seed);
}

inline std::string tag(const Task& task) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "snr%g_rep%d", task.snr, task.replicate);
  return buf;
}

// ---------------------------------------------------------------------------

inline void cmd_amp(const ExperimentConfig& cfg, const fs::path& out, int threads) {
  struct Rows {
    std::string trace, summary;
  };
  const auto tasks = sweep_tasks(cfg);
  const auto rules = cfg.quad.rule();
  const auto results = parallel_map<Rows>(tasks.size(), threads, [&](std::size_t i) {
    const auto& task = tasks[i];
    const auto instance = make_instance(cfg, task);
    const auto run = run_amp(instance, cfg.family, cfg.prior, cfg.amp, cfg.quad);
    Rows rows;
    const auto snr = num(task.snr), seed = num(task.seed);
    for (const auto& rec : run.records) {
      const auto& se = run.se[static_cast<std::size_t>(rec.t)];
      for (Eigen::Index a = 0; a < rec.mu_hat.size(); ++a)
        rows.trace += row(snr, seed, num(rec.t), num(static_cast<int>(a)), num(rec.mu_hat[a]), num(rec.sigma2_hat[a]),
                          num(rec.matrix_mse), num(rec.delta_norm), num(se.mu[a]), num(se.sigma2[a]));
    }
    const double predicted =
        predicted_matrix_mse(cfg.family, cfg.prior, run.se.back(), instance.partition.fractions(), rules);
    rows.summary = row(snr, seed, num(run.iters), num(static_cast<int>(run.converged)),
                       num(run.records.back().matrix_mse), num(predicted));
    return rows;
  });
  std::vector<std::string> trace, summary;
  for (const auto& r : results) {
    trace.push_back(r.trace);
    summary.push_back(r.summary);
  }
  write_csv(out / "amp.csv", cfg, "snr,seed,t,block,mu_hat,sigma2_hat,matrix_mse,delta_norm,se_mu,se_sigma2", trace);
  write_csv(out / "amp_summary.csv", cfg, "snr,seed,iters,converged,matrix_mse,se_matrix_mse", summary);
}

// ---------------------------------------------------------------------------

inline void cmd_se(const ExperimentConfig& cfg, const fs::path& out, int threads) {
  struct Rows {
    std::string trajectory, fixed_point, summary;
  };
  const auto modes = cfg.init_modes;
  const std::size_t count = cfg.snr.size() * modes.size();
  const auto rules = cfg.quad.rule();
  const bool bayes = is_bayes(cfg.family);
  const double gamma = cfg.prior.second_moment();

  const auto results = parallel_map<Rows>(count, threads, [&](std::size_t i) {
    const double snr_value = cfg.snr[i / modes.size()];
    const InitMode mode = modes[i % modes.size()];
    const auto profile = scale_to_snr(cfg.profile, cfg.fractions, gamma, snr_value);
    const int q = profile.q();
    const Eigen::VectorXd top = profile.inverse() * cfg.fractions * gamma;
    const SeState init = mode == InitMode::Uninformed ? SeState::uniform(q, cfg.se_epsilon, cfg.se_epsilon)
                                                      : SeState{top, top};
    const auto trajectory = run_se(cfg.family, cfg.prior, profile, cfg.fractions, init, cfg.quad,
                                   cfg.trajectory_steps, cfg.se_tol);
    Rows rows;
    const auto snr = num(snr_value), name = to_string(mode);
    for (std::size_t t = 0; t < trajectory.size(); ++t)
      for (int a = 0; a < q; ++a)
        rows.trajectory += row(snr, name, num(t), num(a), num(trajectory[t].mu[a]), num(trajectory[t].sigma2[a]));

    SeState final_state = trajectory.back();
    bool converged = trajectory.size() >= 2 &&
                     (trajectory.back().mu - trajectory[trajectory.size() - 2].mu).cwiseAbs().maxCoeff() < cfg.se_tol;
    if (bayes) {
      const auto fp = bayes_fixed_point(cfg.prior, profile, cfg.fractions, cfg.quad, mode, cfg.se_epsilon,
                                        cfg.fixed_point_max_iters, cfg.se_tol);
      for (int a = 0; a < q; ++a)
        rows.fixed_point += row(snr, num(a), num(fp.mu[a]), name, num(static_cast<int>(fp.converged)), num(fp.residual));
      final_state = {fp.mu, fp.mu};
      converged = fp.converged;
    }
    const double mse = predicted_matrix_mse(cfg.family, cfg.prior, final_state, cfg.fractions, rules);
    rows.summary = row(snr, name, num(cfg.fractions.dot(final_state.mu)), num(mse), num(static_cast<int>(converged)));
    return rows;
  });
  std::vector<std::string> trajectory, fixed_point, summary;
  for (const auto& r : results) {
    trajectory.push_back(r.trajectory);
    fixed_point.push_back(r.fixed_point);
    summary.push_back(r.summary);
  }
  write_csv(out / "se_trajectory.csv", cfg, "snr,init_mode,t,block,mu,sigma2", trajectory);
  if (bayes) write_csv(out / "fixed_point.csv", cfg, "snr,block,mu_star,init_mode,converged,residual", fixed_point);
  write_csv(out / "se_summary.csv", cfg, "snr,init_mode,overlap,matrix_mse,converged", summary);
}

// ---------------------------------------------------------------------------

inline void cmd_spectrum(const ExperimentConfig& cfg, const fs::path& out, int threads) {
  if (cfg.keep_spectrum && static_cast<Eigen::Index>(cfg.n) > kFullSpectrumLimit)
    throw ConfigError("config error at 'spectrum.keep_spectrum': full spectra need n <= " +
                      std::to_string(kFullSpectrumLimit));
  struct Result {
    std::string report;
    std::vector<std::pair<std::string, std::string>> spectra;
  };
  const auto tasks = sweep_tasks(cfg);
  const double gamma = cfg.prior.second_moment();
  const auto results = parallel_map<Result>(tasks.size(), threads, [&](std::size_t i) {
    const auto& task = tasks[i];
    const auto instance = make_instance(cfg, task);
    Result result;
    for (const auto& method : cfg.methods) {
      const auto report = method == "tilde" ? bbp_probe(instance, gamma, cfg.eig_tol, cfg.keep_spectrum)
                                            : naive_pca_probe(instance, cfg.eig_tol, cfg.keep_spectrum);
      result.report += row(num(task.snr), num(task.seed), num(report.top_eigenvalue), num(report.second_eigenvalue),
                           num(report.top_vector_overlap), num(report.bulk_edge_gap), method);
      if (report.full_spectrum) {
        std::string body;
        const auto& values = *report.full_spectrum;
        for (Eigen::Index k = 0; k < values.size(); ++k) body += row(num(static_cast<long long>(k)), num(values[k]));
        result.spectra.emplace_back("spectrum_" + method + "_" + tag(task) + ".csv", std::move(body));
      }
    }
    return result;
  });
  std::vector<std::string> report;
  for (const auto& r : results) {
    report.push_back(r.report);
    for (const auto& [name, body] : r.spectra) write_csv(out / name, cfg, "index,eigenvalue", {body});
  }
  write_csv(out / "report.csv", cfg, "snr,seed,top_eig,second_eig,overlap,gap,method", report);
}

// ---------------------------------------------------------------------------

inline void cmd_gen(const ExperimentConfig& cfg, const fs::path& out, int threads) {
  const auto tasks = sweep_tasks(cfg);
  const auto manifest = parallel_map<std::string>(tasks.size(), threads, [&](std::size_t i) {
    const auto& task = tasks[i];
    const auto instance = make_instance(cfg, task);
    const auto base = tag(task);
    write_instance((out / ("instance_" + base + ".bin")).string(), instance);
    std::string body;
    for (Eigen::Index k = 0; k < instance.spike.size(); ++k)
      body += row(num(static_cast<long long>(k)), num(instance.spike[k]));
    write_csv(out / ("spike_" + base + ".csv"), cfg, "index,spike", {body});
    return row(num(task.snr), num(task.seed), "instance_" + base + ".bin", "spike_" + base + ".csv");
  });
  write_csv(out / "instances.csv", cfg, "snr,seed,instance,spike", manifest);
}

// ---------------------------------------------------------------------------

struct CheckResult {
  bool pass = false;
  double metric = 0.0;
  double tolerance = 0.0;
};

namespace checks {

inline VarianceProfile reference_profile() {
  Eigen::MatrixXd d(2, 2);
  d << 1.0, 3.0, 3.0, 2.0;
  return VarianceProfile(d);
}

inline CheckResult embedding(const ExperimentConfig& cfg) {
  const Eigen::Vector2d halves(0.5, 0.5);
  const auto prior = Prior::gaussian(1.0);
  const auto partition = BlockPartition::contiguous(cfg.verify_n, halves);
  const auto profile = scale_to_snr(reference_profile(), partition.fractions(), 1.0, 1.5);
  const auto instance = generate(prior, partition, profile, derive_seed(cfg.seed, 0));
  const Eigen::MatrixXd w = instance.observed.cwiseQuotient(expand(partition, profile).cwiseSqrt());
  const Eigen::VectorXd x0 = initial_iterate(instance, {AmpInit::Kind::Informed, 0.5}, 1.0);
  const int steps = 10;
  double worst = 0.0;
  for (const DenoiserFamily family : {DenoiserFamily{IdentityDenoiser{}}, DenoiserFamily{BayesDenoiser{prior}}}) {
    const auto se = run_se(family, prior, profile, partition.fractions(), measured_state(x0, instance, 1.0), cfg.quad,
                           steps, 0.0);
    std::vector<std::vector<ChannelParams>> params;
    for (const auto& s : se) params.push_back(s.channel_params());
    const auto r = matrix_amp_oracle(w, profile, partition, family, params, x0, steps);
    auto state = AmpState::start(x0);
    for (int t = 1; t <= steps; ++t) {
      state = amp_step(instance, family, is_bayes(family) ? params[static_cast<std::size_t>(t - 1)] : std::vector<ChannelParams>{},
                       state);
      worst = std::max(worst, (blockproj(r[static_cast<std::size_t>(t)], partition) - state.x_curr).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-10, worst, 1e-10};
}

inline CheckResult nishimori(const ExperimentConfig& cfg) {
  const auto rules = cfg.quad.rule();
  double worst = 0.0;
  for (const auto& prior : {Prior::gaussian(1.0), Prior::rademacher(), Prior::sparse_rademacher(0.1)})
    for (double mu : {0.1, 1.0, 3.0}) {
      const auto m = block_moments(BayesDenoiser{prior}, prior, {mu, mu}, rules);
      worst = std::max(worst, std::abs(m.cross - m.square));
    }
  return {worst <= 1e-8, worst, 1e-8};
}

inline CheckResult fixed_point(const ExperimentConfig& cfg) {
  double worst = 0.0;
  for (double lambda : {1.5, 2.0, 3.0}) {
    const VarianceProfile profile(Eigen::MatrixXd::Constant(1, 1, 1.0 / lambda));
    const auto fp = bayes_fixed_point(Prior::gaussian(1.0), profile, Eigen::VectorXd::Ones(1), cfg.quad,
                                      InitMode::Uninformed);
    worst = std::max(worst, std::abs(fp.mu[0] - (lambda - 1.0)));
  }
  return {worst <= 1e-6, worst, 1e-6};
}

inline CheckResult nishimori_collapse(const ExperimentConfig& cfg) {
  const Eigen::Vector2d halves(0.5, 0.5);
  double worst = 0.0;
  for (const auto& prior : {Prior::gaussian(1.0), Prior::rademacher(), Prior::sparse_rademacher(0.1)}) {
    const auto profile = scale_to_snr(reference_profile(), halves, prior.second_moment(), 2.0);
    const auto traj = run_se(BayesDenoiser{prior}, prior, profile, halves, SeState::uniform(2, 1e-6, 1e-6), cfg.quad,
                             300, 1e-13);
    for (std::size_t t = 1; t < traj.size(); ++t)
      worst = std::max(worst, (traj[t].mu - traj[t].sigma2).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-6, worst, 1e-6};
}

inline CheckResult snr_closed_form(const ExperimentConfig&) {
  const double err = std::abs(snr(reference_profile(), Eigen::Vector2d(0.5, 0.5), 1.0) - 7.0 / 12.0);
  return {err <= 1e-12, err, 1e-12};
}

inline CheckResult linear_threshold_agreement(const ExperimentConfig& cfg) {
  const double gamma = cfg.prior.second_moment();
  const double a = snr(cfg.profile, cfg.fractions, gamma);
  const double err = std::abs(linear_threshold(cfg.profile, cfg.fractions, gamma) - a) / std::max(1.0, a);
  return {err <= 1e-12, err, 1e-12};
}

} // namespace checks

inline void cmd_verify(const ExperimentConfig& cfg, const fs::path& out, int threads) {
  const auto results = parallel_map<CheckResult>(cfg.checks.size(), threads, [&](std::size_t i) {
    const auto& name = cfg.checks[i];
    if (name == "embedding") return checks::embedding(cfg);
    if (name == "nishimori") return checks::nishimori(cfg);
    if (name == "fixed_point") return checks::fixed_point(cfg);
    if (name == "nishimori_collapse") return checks::nishimori_collapse(cfg);
    if (name == "snr_closed_form") return checks::snr_closed_form(cfg);
    return checks::linear_threshold_agreement(cfg);
  });
  std::vector<std::string> rows;
  int failures = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    failures += r.pass ? 0 : 1;
    rows.push_back(row(cfg.checks[i], std::string(r.pass ? "pass" : "fail"), num(r.metric), num(r.tolerance)));
  }
  write_csv(out / "verify.csv", cfg, "name,status,metric,tolerance", rows);
  if (failures > 0) throw VerificationFailure(std::to_string(failures) + " verification check(s) failed");
}

} // namespace inhomo::cli
