// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// if any selected criterion fails. Usage: acceptance [criterion-number ...]

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "cli_runner.hpp"
#include "inhomo/inhomo.hpp"
#include "test_support.hpp"

using namespace inhomo;
using inhomo::testing::median;
using inhomo::testing::two_block_instance;
using inhomo::testing::two_block_profile;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

Eigen::MatrixXd scaled_noise(const SpikedInstance& inst) {
  return inst.observed.cwiseQuotient(expand(inst.partition, inst.profile).cwiseSqrt());
}

std::vector<testing::RandomProfile> random_three_block_profiles() {
  std::mt19937_64 rng(20240611);
  std::vector<testing::RandomProfile> out;
  for (int k = 0; k < 3; ++k) out.push_back(testing::random_profile(3, rng));
  return out;
}

// Bayes SE configurations: (prior, profile, fractions).
struct SeCase {
  Prior prior;
  VarianceProfile profile;
  Eigen::VectorXd fractions;
};

std::vector<SeCase> multi_block_cases() {
  std::vector<SeCase> cases;
  const Eigen::VectorXd halves = testing::halves();
  for (const auto& prior : {Prior::gaussian(1.0), Prior::rademacher(), Prior::sparse_rademacher(0.1)}) {
    for (double lambda : {1.5, 2.0, 3.0})
      cases.push_back({prior, scale_to_snr(two_block_profile(), halves, prior.second_moment(), lambda), halves});
    for (const auto& rp : random_three_block_profiles())
      cases.push_back({prior, scale_to_snr(rp.profile, rp.fractions, prior.second_moment(), 2.0), rp.fractions});
  }
  return cases;
}

Outcome embedding() {
  const auto prior = Prior::gaussian(1.0);
  const auto inst = two_block_instance(200, 1.5, prior, derive_seed(101, 0));
  const Eigen::MatrixXd w = scaled_noise(inst);
  const Eigen::VectorXd x0 = initial_iterate(inst, {AmpInit::Kind::Informed, 0.5}, 1.0);
  const int steps = 10;
  double worst = 0.0;
  for (const DenoiserFamily family : {DenoiserFamily{IdentityDenoiser{}}, DenoiserFamily{BayesDenoiser{prior}}}) {
    const auto se = run_se(family, prior, inst.profile, inst.partition.fractions(), measured_state(x0, inst, 1.0), {},
                           steps, 0.0);
    std::vector<std::vector<ChannelParams>> params;
    for (const auto& s : se) params.push_back(s.channel_params());
    const auto r = matrix_amp_oracle(w, inst.profile, inst.partition, family, params, x0, steps);
    auto state = AmpState::start(x0);
    for (int t = 1; t <= steps; ++t) {
      state = amp_step(inst, family, is_bayes(family) ? params[static_cast<std::size_t>(t - 1)] : std::vector<ChannelParams>{},
                       state);
      worst = std::max(worst, (blockproj(r[static_cast<std::size_t>(t)], inst.partition) - state.x_curr).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-10, fmt("max deviation %.3g (tol 1e-10)", worst)};
}

struct TrackingError {
  double mu = 0.0;
  double var = 0.0;
  int first_bad_t = -1;
};

// Seed-averaged |mu_hat - mu| and |residual variance - sigma^2| per block and t.
TrackingError tracking_error(const Prior& prior, int seeds, int t_max, double mu_tol, double var_tol) {
  const int q = 2;
  std::vector<Eigen::MatrixXd> mu_gap(static_cast<std::size_t>(t_max) + 1, Eigen::MatrixXd::Zero(q, 1));
  auto var_gap = mu_gap;
  AmpConfig config;
  config.max_iters = t_max;
  config.tol = 0.0;
  config.init = {AmpInit::Kind::Informed, 0.3};
  for (int k = 0; k < seeds; ++k) {
    const auto inst = two_block_instance(2000, 2.0, prior, derive_seed(202, static_cast<std::uint64_t>(k)));
    const auto run = run_amp(inst, BayesDenoiser{prior}, prior, config);
    for (int t = 0; t <= t_max; ++t) {
      const auto& rec = run.records[static_cast<std::size_t>(t)];
      const auto& se = run.se[static_cast<std::size_t>(t)];
      mu_gap[static_cast<std::size_t>(t)] += (rec.mu_hat - se.mu) / seeds;
      var_gap[static_cast<std::size_t>(t)] += (rec.sigma2_hat - se.sigma2) / seeds;
    }
  }
  TrackingError err;
  for (int t = 0; t <= t_max; ++t) {
    const double m = mu_gap[static_cast<std::size_t>(t)].cwiseAbs().maxCoeff();
    const double v = var_gap[static_cast<std::size_t>(t)].cwiseAbs().maxCoeff();
    err.mu = std::max(err.mu, m);
    err.var = std::max(err.var, v);
    if (err.first_bad_t < 0 && (m > mu_tol || v > var_tol)) err.first_bad_t = t;
  }
  return err;
}

Outcome se_tracking() {
  const auto gauss = tracking_error(Prior::gaussian(1.0), 20, 15, 0.05, 0.07);
  const auto rad = tracking_error(Prior::rademacher(), 20, 15, 0.05, 0.07);
  const bool pass = gauss.first_bad_t < 0;
  std::string detail = fmt("gaussian: max |mu_hat-mu| %.3f, max |var-sigma2| %.3f (tol 0.05/0.07)", gauss.mu, gauss.var);
  if (!pass) detail += fmt(", first exceeded at t=%g", gauss.first_bad_t);
  detail += fmt("; rademacher: %.3f, %.3f", rad.mu, rad.var);
  return {pass, detail};
}

Outcome fixed_point() {
  double worst_scalar = 0.0;
  for (double lambda : {1.5, 2.0, 3.0}) {
    const VarianceProfile profile(Eigen::MatrixXd::Constant(1, 1, 1.0 / lambda));
    const auto fp = bayes_fixed_point(Prior::gaussian(1.0), profile, Eigen::VectorXd::Ones(1), {}, InitMode::Uninformed);
    worst_scalar = std::max(worst_scalar, std::abs(fp.mu[0] - (lambda - 1.0)));
  }
  double worst_residual = 0.0;
  for (const auto& c : multi_block_cases())
    for (auto mode : {InitMode::Uninformed, InitMode::Informed})
      worst_residual =
          std::max(worst_residual, bayes_fixed_point(c.prior, c.profile, c.fractions, {}, mode).residual);
  return {worst_scalar <= 1e-6 && worst_residual <= 1e-8,
          fmt("max |mu*-(lambda-1)| %.3g (tol 1e-6), max residual %.3g (tol 1e-8)", worst_scalar, worst_residual)};
}

Outcome nishimori_collapse() {
  double worst = 0.0;
  for (const auto& c : multi_block_cases()) {
    const int q = c.profile.q();
    for (double start : {1e-6, 0.3}) {
      const auto traj = run_se(BayesDenoiser{c.prior}, c.prior, c.profile, c.fractions, SeState::uniform(q, start, start),
                               {}, 300, 1e-13);
      for (std::size_t t = 1; t < traj.size(); ++t)
        worst = std::max(worst, (traj[t].mu - traj[t].sigma2).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-6, fmt("max |mu-sigma2| %.3g (tol 1e-6)", worst)};
}

// Iterates the identity-denoiser SE until the overlap vanishes or blows up.
enum class LinearFate { Vanishes, Diverges, Undecided };

LinearFate identity_fate(const VarianceProfile& profile, const Eigen::VectorXd& fractions) {
  const auto prior = Prior::gaussian(1.0);
  const auto rules = QuadratureSpec{}.rule();
  auto state = SeState::uniform(profile.q(), 0.1, 0.1);
  for (int t = 0; t < 5000; ++t) {
    state = se_step(IdentityDenoiser{}, prior, profile, fractions, state, rules);
    const double size = state.mu.cwiseAbs().maxCoeff();
    if (size < 1e-10) return LinearFate::Vanishes;
    if (size > 1e6) return LinearFate::Diverges;
  }
  return LinearFate::Undecided;
}

Outcome threshold() {
  int wrong = 0;
  int total = 0;
  for (const auto& rp : random_three_block_profiles()) {
    for (double lambda : {0.5, 0.7, 0.9, 1.1, 1.8}) {
      const auto fate = identity_fate(scale_to_snr(rp.profile, rp.fractions, 1.0, lambda), rp.fractions);
      const auto expected = lambda < 1.0 ? LinearFate::Vanishes : LinearFate::Diverges;
      wrong += fate == expected ? 0 : 1;
      ++total;
    }
  }
  const double err = std::abs(snr(two_block_profile(), testing::halves(), 1.0) - 7.0 / 12.0);
  return {wrong == 0 && err <= 1e-12,
          fmt("%g/%g threshold cases correct, |snr-7/12| %.3g (tol 1e-12)", total - wrong, total, err)};
}

Outcome bbp_dichotomy() {
  const auto prior = Prior::gaussian(1.0);
  std::vector<double> below, above;
  for (int k = 0; k < 10; ++k) {
    const auto seed = static_cast<std::uint64_t>(k);
    below.push_back(bbp_probe(two_block_instance(1000, 0.7, prior, derive_seed(606, seed)), 1.0).top_vector_overlap);
    above.push_back(bbp_probe(two_block_instance(1000, 1.8, prior, derive_seed(607, seed)), 1.0).top_vector_overlap);
  }
  const double lo = median(below);
  const double hi = median(above);
  return {lo <= 0.1 && hi >= 0.3, fmt("median overlap %.3f at 0.7 (<= 0.1), %.3f at 1.8 (>= 0.3)", lo, hi)};
}

Outcome naive_pca_failure() {
  const auto prior = Prior::gaussian(1.0);
  std::vector<double> gaps, tilde, naive;
  for (int k = 0; k < 5; ++k) {
    const auto inst = two_block_instance(2500, 1.8, prior, derive_seed(707, static_cast<std::uint64_t>(k)));
    tilde.push_back(bbp_probe(inst, 1.0).top_vector_overlap);
    naive.push_back(naive_pca_probe(inst).top_vector_overlap);
    gaps.push_back(tilde.back() - naive.back());
  }
  const double gap = median(gaps);
  return {gap >= 0.15,
          fmt("median gap %.3f (>= 0.15); median overlaps %.3f tilde, %.3f naive", gap, median(tilde), median(naive))};
}

Outcome gap_witness() {
  const auto prior = Prior::sparse_rademacher(0.02);
  const Eigen::VectorXd halves = testing::halves();
  for (int step = 0; step < 20; ++step) {
    const double lambda = 0.80 + 0.01 * step;
    const auto profile = scale_to_snr(two_block_profile(), halves, prior.second_moment(), lambda);
    const auto informed = bayes_fixed_point(prior, profile, halves, {}, InitMode::Informed);
    const auto uninformed = bayes_fixed_point(prior, profile, halves, {}, InitMode::Uninformed);
    const double hi = halves.dot(informed.mu);
    const double lo = halves.dot(uninformed.mu);
    if (hi >= 0.2 && lo <= 1e-3)
      return {true, fmt("lambda %.2f: informed %.3f (>= 0.2), uninformed %.2g (<= 1e-3)", lambda, hi, lo)};
  }
  return {false, "no lambda in [0.80, 0.99] separates the branches"};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const auto root = testing::fresh_dir("acceptance_determinism");
  int mismatches = 0;
  std::string failed;
  for (const auto& c : testing::small_command_cases()) {
    const auto config = root / (c.command + ".json");
    testing::write_text(config, c.config);
    std::vector<std::map<std::string, std::string>> outputs;
    for (const auto& [tag, threads] : std::vector<std::pair<std::string, std::string>>{{"a", "1"}, {"b", "1"}, {"c", "8"}}) {
      const auto out = root / (c.command + "_" + tag);
      const int code = testing::run_cli({c.command, config.string(), "--out", out.string(), "--threads", threads});
      outputs.push_back(code == 0 ? testing::snapshot(out) : std::map<std::string, std::string>{});
    }
    if (outputs[0].empty() || outputs[0] != outputs[1] || outputs[0] != outputs[2]) {
      ++mismatches;
      failed += " " + c.command;
    }
  }
  fs::remove_all(root);
  if (mismatches == 0) return {true, "amp, se, spectrum, verify, gen identical across runs and threads 1 vs 8"};
  return {false, "differences or errors in:" + failed};
}

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
  double budget_seconds;
};

} // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "embedding equivalence", embedding, 10.0},
      {2, "SE tracking", se_tracking, 120.0},
      {3, "Bayes fixed point", fixed_point, 0.0},
      {4, "Nishimori collapse", nishimori_collapse, 0.0},
      {5, "linear threshold", threshold, 0.0},
      {6, "BBP dichotomy", bbp_dichotomy, 180.0},
      {7, "naive PCA failure", naive_pca_failure, 0.0},
      {8, "gap witness", gap_witness, 0.0},
      {9, "determinism", determinism, 0.0},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0.0 && seconds > c.budget_seconds) {
      outcome.pass = false;
      outcome.detail += fmt("; over the %.0f s budget", c.budget_seconds);
    }
    failures += outcome.pass ? 0 : 1;
    std::printf("%s [%d] %s: %s (%.1f s)\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
