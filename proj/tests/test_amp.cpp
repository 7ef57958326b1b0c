#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "inhomo/amp.hpp"
#include "test_support.hpp"

using namespace inhomo;
using inhomo::testing::halves;
using inhomo::testing::two_block_instance;
using inhomo::testing::two_block_profile;

namespace {

Eigen::MatrixXd dense_operator(const SpikedInstance& inst) {
  const Eigen::MatrixXd delta = expand(inst.partition, inst.profile);
  return inst.observed.cwiseQuotient(delta) / std::sqrt(double(inst.n()));
}

Eigen::MatrixXd scaled_noise(const SpikedInstance& inst) {
  return inst.observed.cwiseQuotient(expand(inst.partition, inst.profile).cwiseSqrt());
}

} // namespace

TEST(AmpStep, ZeroIsAFixedPoint) {
  const auto inst = two_block_instance(50, 1.5, Prior::gaussian(1.0), 1);
  auto state = AmpState::start(Eigen::VectorXd::Zero(50));
  for (int t = 0; t < 3; ++t) state = amp_step(inst, IdentityDenoiser{}, {}, state);
  EXPECT_EQ(state.x_curr.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(state.t, 3);
}

TEST(AmpStep, FirstTwoStepsMatchDenseRecursion) {
  const auto inst = two_block_instance(60, 1.5, Prior::gaussian(1.0), 2);
  const auto m = dense_operator(inst);
  const Eigen::VectorXd x0 = Eigen::VectorXd::LinSpaced(60, -1.0, 1.0);
  const auto s1 = amp_step(inst, IdentityDenoiser{}, {}, AmpState::start(x0));
  EXPECT_LE((s1.x_curr - m * x0).cwiseAbs().maxCoeff(), 1e-12);

  const Eigen::MatrixXd inv = expand(inst.partition, inst.profile).cwiseInverse();
  const Eigen::VectorXd b = inv.rowwise().sum() / 60.0;
  const auto s2 = amp_step(inst, IdentityDenoiser{}, {}, s1);
  EXPECT_LE((s2.x_curr - (m * s1.x_curr - b.cwiseProduct(x0))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AmpStep, RejectsMismatchedStateAndMissingParams) {
  const auto inst = two_block_instance(20, 1.5, Prior::gaussian(1.0), 2);
  EXPECT_THROW(amp_step(inst, IdentityDenoiser{}, {}, AmpState::start(Eigen::VectorXd::Zero(19))), InvalidArgument);
  EXPECT_THROW(amp_step(inst, BayesDenoiser{Prior::gaussian(1.0)}, {}, AmpState::start(Eigen::VectorXd::Zero(20))),
               InvalidArgument);
}

TEST(AmpStep, NonFiniteInstanceDiverges) {
  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(10, 10);
  noise(3, 4) = noise(4, 3) = std::numeric_limits<double>::infinity();
  const auto inst = assemble(BlockPartition::contiguous(10, halves()), two_block_profile(), Eigen::VectorXd::Ones(10), noise);
  EXPECT_THROW(amp_step(inst, IdentityDenoiser{}, {}, AmpState::start(Eigen::VectorXd::Ones(10))), DivergenceError);
}

TEST(MatrixAmp, BlockdiagBlockprojRoundTrip) {
  const auto partition = BlockPartition::contiguous(7, Eigen::Vector3d(0.3, 0.3, 0.4));
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(7, 1.0, 7.0);
  EXPECT_EQ(blockproj(blockdiag(v, partition), partition), v);
  const auto m = blockdiag(v, partition);
  EXPECT_EQ(m.rowwise().sum(), v);
}

TEST(MatrixAmp, EmbeddingReproducesIdentityAmp) {
  const auto inst = two_block_instance(200, 1.4, Prior::gaussian(1.0), 7);
  Rng rng(1);
  std::normal_distribution<double> normal;
  Eigen::VectorXd x0(200);
  for (auto& v : x0) v = normal(rng);
  const auto r = matrix_amp_oracle(scaled_noise(inst), inst.profile, inst.partition, IdentityDenoiser{}, {}, x0, 10);
  auto state = AmpState::start(x0);
  for (int t = 1; t <= 10; ++t) {
    state = amp_step(inst, IdentityDenoiser{}, {}, state);
    const double scale = std::max(1.0, state.x_curr.cwiseAbs().maxCoeff());
    EXPECT_LE((blockproj(r[t], inst.partition) - state.x_curr).cwiseAbs().maxCoeff(), 1e-10 * scale) << t;
  }
}

TEST(MatrixAmp, EmbeddingReproducesBayesAmp) {
  const auto prior = Prior::rademacher();
  const auto inst = two_block_instance(200, 2.0, prior, 8);
  const Eigen::VectorXd x0 = initial_iterate(inst, {AmpInit::Kind::Informed, 0.5}, 1.0);
  const auto se = run_se(BayesDenoiser{prior}, prior, inst.profile, inst.partition.fractions(),
                         measured_state(x0, inst, 1.0), {}, 10, 0.0);
  std::vector<std::vector<ChannelParams>> params;
  for (const auto& s : se) params.push_back(s.channel_params());
  const DenoiserFamily family = BayesDenoiser{prior};
  const auto r = matrix_amp_oracle(scaled_noise(inst), inst.profile, inst.partition, family, params, x0, 10);
  auto state = AmpState::start(x0);
  for (int t = 1; t <= 10; ++t) {
    state = amp_step(inst, family, params[static_cast<std::size_t>(t - 1)], state);
    EXPECT_LE((blockproj(r[t], inst.partition) - state.x_curr).cwiseAbs().maxCoeff(), 1e-10) << t;
  }
}

TEST(MatrixAmp, SingleBlockIsAVector) {
  const auto inst = inhomo::testing::homogeneous_instance(80, 1.2, Prior::gaussian(1.0), 3);
  const Eigen::VectorXd x0 = Eigen::VectorXd::LinSpaced(80, -2.0, 2.0);
  const auto r = matrix_amp_oracle(scaled_noise(inst), inst.profile, inst.partition, IdentityDenoiser{}, {}, x0, 4);
  auto state = AmpState::start(x0);
  for (int t = 1; t <= 4; ++t) {
    state = amp_step(inst, IdentityDenoiser{}, {}, state);
    EXPECT_EQ(r[t].cols(), 1);
    EXPECT_LE((r[t].col(0) - state.x_curr).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Measurements, BlockOverlapAndMse) {
  const auto partition = BlockPartition::contiguous(4, halves());
  const Eigen::Vector4d spike(1.0, -1.0, 1.0, 1.0);
  const Eigen::Vector4d x(2.0, -2.0, 0.0, 1.0);
  const auto mu = block_overlap(x, spike, partition, 1.0);
  EXPECT_DOUBLE_EQ(mu[0], 2.0);
  EXPECT_DOUBLE_EQ(mu[1], 0.5);
  EXPECT_DOUBLE_EQ(block_overlap(x, spike, partition, 2.0)[0], 1.0);
  const auto var = block_residual_variance(x, spike, partition, mu);
  EXPECT_DOUBLE_EQ(var[0], 0.0);
  EXPECT_DOUBLE_EQ(var[1], 0.25);
  EXPECT_DOUBLE_EQ(matrix_mse(spike, spike), 0.0);
  EXPECT_DOUBLE_EQ(matrix_mse(-spike, spike), 0.0);
  EXPECT_DOUBLE_EQ(matrix_mse(Eigen::Vector4d::Zero(), spike), 1.0);
  // Dense oracle for the Frobenius form.
  const Eigen::Matrix4d diff = spike * spike.transpose() - x * x.transpose();
  EXPECT_NEAR(matrix_mse(x, spike), diff.squaredNorm() / 16.0, 1e-14);
}

TEST(Init, SpectralNormAndSign) {
  const auto inst = two_block_instance(400, 2.5, Prior::gaussian(2.0), 4);
  const auto x0 = spectral_init(inst, 2.0);
  EXPECT_NEAR(x0.squaredNorm(), 2.0 * 400.0, 1e-8);
  EXPECT_GT(std::abs(block_overlap(x0, inst.spike, inst.partition, 2.0).mean()), 0.3);
}

TEST(Init, NoiseAndInformedDeterministic) {
  const auto inst = two_block_instance(300, 1.0, Prior::rademacher(), 4);
  const auto a = initial_iterate(inst, {AmpInit::Kind::Noise, 0.1}, 1.0);
  EXPECT_EQ(a, initial_iterate(inst, {AmpInit::Kind::Noise, 0.1}, 1.0));
  EXPECT_NEAR(a.norm() / std::sqrt(300.0), 0.1, 0.01);
  const auto b = initial_iterate(inst, {AmpInit::Kind::Informed, 0.4}, 1.0);
  EXPECT_NEAR(block_overlap(b, inst.spike, inst.partition, 1.0).mean(), 0.4, 0.1);
  EXPECT_THROW(initial_iterate(inst, {AmpInit::Kind::Informed, 1.5}, 1.0), InvalidArgument);
}

TEST(RunAmp, SpectralStartTracksFixedPoint) {
  const auto prior = Prior::gaussian(1.0);
  const auto inst = inhomo::testing::homogeneous_instance(2000, 2.0, prior, 6);
  AmpConfig config;
  config.max_iters = 5;
  config.tol = 0.0;
  const auto run = run_amp(inst, BayesDenoiser{prior}, prior, config);
  EXPECT_NEAR(std::abs(run.records.back().mu_hat[0]), 1.0, 0.05);
  EXPECT_NEAR(std::abs(run.se.back().mu[0]), 1.0, 0.05);
  EXPECT_EQ(run.records.size(), static_cast<std::size_t>(run.iters) + 1);
  EXPECT_EQ(run.se.size(), static_cast<std::size_t>(run.iters) + 1);
}

TEST(RunAmp, RademacherConvergesNearFixedPoint) {
  const auto prior = Prior::rademacher();
  const auto inst = two_block_instance(2000, 2.0, prior, 6);
  AmpConfig config;
  config.max_iters = 60;
  config.tol = 1e-6;
  const auto run = run_amp(inst, BayesDenoiser{prior}, prior, config);
  const auto fp = bayes_fixed_point(prior, inst.profile, halves(), {}, InitMode::Informed);
  EXPECT_TRUE(run.converged);
  EXPECT_LE((run.records.back().mu_hat.cwiseAbs() - fp.mu).cwiseAbs().maxCoeff(), 0.1);
}

TEST(RunAmp, NoRecoveryBelowThreshold) {
  const auto prior = Prior::gaussian(1.0);
  const auto inst = two_block_instance(1500, 0.7, prior, 6);
  AmpConfig config;
  config.max_iters = 30;
  config.init = {AmpInit::Kind::Noise, 1.0};
  const auto run = run_amp(inst, IdentityDenoiser{}, prior, config);
  EXPECT_LT(block_overlap(run.final_iterate.normalized() * std::sqrt(1500.0), inst.spike, inst.partition, 1.0)
                .cwiseAbs()
                .maxCoeff(),
            0.15);
  EXPECT_EQ(run.se.size(), run.records.size());
}

TEST(RunAmp, FlippingSpikeAndStartFlipsIterates) {
  const auto prior = Prior::rademacher();
  const auto partition = BlockPartition::contiguous(300, halves());
  const auto profile = scale_to_snr(two_block_profile(), halves(), 1.0, 1.8);
  Rng spike_rng(1), noise_rng(2);
  const Eigen::VectorXd spike = sample(prior, 300, spike_rng);
  const Eigen::MatrixXd noise = sample_goe(300, noise_rng);
  const auto plus = assemble(partition, profile, spike, noise);
  const auto minus = assemble(partition, profile, -spike, noise);
  const Eigen::VectorXd x0 = 0.3 * spike + Eigen::VectorXd::LinSpaced(300, -1.0, 1.0);
  AmpConfig config;
  config.max_iters = 8;
  config.tol = 0.0;
  const auto a = run_amp_from(plus, BayesDenoiser{prior}, prior, x0, config);
  const auto b = run_amp_from(minus, BayesDenoiser{prior}, prior, Eigen::VectorXd(-x0), config);
  EXPECT_EQ(a.final_iterate, -b.final_iterate);
  EXPECT_EQ(a.records.back().mu_hat, b.records.back().mu_hat);
}

TEST(RunAmp, RecordedTrajectoryAndSuppliedSe) {
  const auto prior = Prior::gaussian(1.0);
  const auto inst = two_block_instance(200, 1.5, prior, 11);
  AmpConfig config;
  config.max_iters = 5;
  config.tol = 0.0;
  config.record_trajectory = true;
  const auto run = run_amp(inst, IdentityDenoiser{}, prior, config);
  EXPECT_EQ(run.iterates.size(), 6u);
  EXPECT_EQ(run.iterates.back(), run.final_iterate);
  const std::vector<SeState> short_se{SeState::uniform(2, 0.1, 1.0)};
  EXPECT_THROW(run_amp(inst, BayesDenoiser{prior}, prior, config, {}, short_se), InvalidArgument);
}

TEST(RunAmp, MatrixMseTracksStateEvolution) {
  const auto prior = Prior::rademacher();
  const auto inst = two_block_instance(2000, 2.0, prior, 12);
  AmpConfig config;
  config.max_iters = 12;
  config.tol = 0.0;
  config.init = {AmpInit::Kind::Informed, 0.3};
  const auto run = run_amp(inst, BayesDenoiser{prior}, prior, config);
  const auto rule = QuadratureSpec{}.rule();
  const auto predicted = predicted_matrix_mse(BayesDenoiser{prior}, prior, run.se.back(), halves(), rule);
  EXPECT_NEAR(run.records.back().matrix_mse, predicted, 0.05);
}
