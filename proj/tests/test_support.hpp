#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <vector>

#include "inhomo/inhomo.hpp"

namespace inhomo::testing {

// The two-block profile [[1, 3], [3, 2]] with equal halves.
inline VarianceProfile two_block_profile() {
  Eigen::MatrixXd d(2, 2);
  d << 1.0, 3.0, 3.0, 2.0;
  return VarianceProfile(d);
}

inline Eigen::VectorXd halves() { return Eigen::Vector2d(0.5, 0.5); }

inline SpikedInstance two_block_instance(std::size_t n, double target_snr, const Prior& prior, std::uint64_t seed) {
  const auto partition = BlockPartition::contiguous(n, halves());
  const auto profile = scale_to_snr(two_block_profile(), partition.fractions(), prior.second_moment(), target_snr);
  return generate(prior, partition, profile, seed);
}

inline SpikedInstance homogeneous_instance(std::size_t n, double target_snr, const Prior& prior, std::uint64_t seed) {
  const auto partition = BlockPartition::contiguous(n, Eigen::VectorXd::Ones(1));
  const auto profile = scale_to_snr(VarianceProfile(Eigen::MatrixXd::Ones(1, 1)), partition.fractions(),
                                    prior.second_moment(), target_snr);
  return generate(prior, partition, profile, seed);
}

// Random symmetric q x q profile with entries in [0.5, 3] and random fractions.
struct RandomProfile {
  VarianceProfile profile;
  Eigen::VectorXd fractions;
};

inline RandomProfile random_profile(int q, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> entry(0.5, 3.0);
  std::uniform_real_distribution<double> weight(0.2, 1.0);
  Eigen::MatrixXd d(q, q);
  for (int a = 0; a < q; ++a)
    for (int b = a; b < q; ++b) d(a, b) = d(b, a) = entry(rng);
  Eigen::VectorXd c(q);
  for (int a = 0; a < q; ++a) c[a] = weight(rng);
  c /= c.sum();
  // Renormalize so the sum is 1 to the last bit the validators check.
  c[q - 1] = 1.0 - (c.sum() - c[q - 1]);
  return {VarianceProfile(d), c};
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace inhomo::testing
