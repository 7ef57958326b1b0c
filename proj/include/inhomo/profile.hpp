#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "error.hpp"

namespace inhomo {

/// Grouping of the indices 0..n-1 into q non-empty blocks.
///
/// Fractions are the exact finite-size ratios |C_a| / n, so they always sum
/// to one up to rounding and are strictly positive.
class BlockPartition {
public:
  BlockPartition() = default;

  /// Builds a partition from an explicit index -> block map (0-based).
  BlockPartition(std::vector<int> assignment, int q) : q_(q), assignment_(std::move(assignment)) {
    detail::require(q_ >= 1, "partition: q must be >= 1");
    detail::require(!assignment_.empty(), "partition: n must be >= 1");
    sizes_.assign(static_cast<std::size_t>(q_), 0);
    for (int g : assignment_) {
      detail::require(g >= 0 && g < q_, "partition: group index out of range");
      ++sizes_[static_cast<std::size_t>(g)];
    }
    for (int a = 0; a < q_; ++a)
      detail::require(sizes_[static_cast<std::size_t>(a)] > 0,
                      "partition: block " + std::to_string(a) + " is empty");
    fractions_.resize(q_);
    for (int a = 0; a < q_; ++a)
      fractions_[a] = static_cast<double>(sizes_[static_cast<std::size_t>(a)]) / static_cast<double>(n());
  }

  /// Contiguous blocks of sizes round(c_a * n); the last block takes the remainder.
  static BlockPartition contiguous(std::size_t n, const Eigen::VectorXd& fractions) {
    const auto q = static_cast<int>(fractions.size());
    detail::require(q >= 1, "partition: need at least one fraction");
    detail::require(n >= static_cast<std::size_t>(q), "partition: n smaller than number of blocks");
    double total = 0.0;
    for (int a = 0; a < q; ++a) {
      detail::require(std::isfinite(fractions[a]) && fractions[a] > 0.0,
                      "partition: fractions must be strictly positive");
      total += fractions[a];
    }
    detail::require(std::abs(total - 1.0) <= 1e-12, "partition: fractions must sum to 1");

    std::vector<int> assignment;
    assignment.reserve(n);
    std::size_t used = 0;
    for (int a = 0; a + 1 < q; ++a) {
      const auto size = static_cast<std::size_t>(std::llround(fractions[a] * static_cast<double>(n)));
      detail::require(size > 0 && used + size < n, "partition: block sizes do not fit in n");
      assignment.insert(assignment.end(), size, a);
      used += size;
    }
    assignment.insert(assignment.end(), n - used, q - 1);
    return BlockPartition(std::move(assignment), q);
  }

  std::size_t n() const { return assignment_.size(); }
  int q() const { return q_; }
  int group(std::size_t i) const { return assignment_[i]; }
  const std::vector<int>& assignment() const { return assignment_; }
  std::size_t block_size(int a) const { return sizes_[static_cast<std::size_t>(a)]; }
  const Eigen::VectorXd& fractions() const { return fractions_; }

private:
  int q_ = 0;
  std::vector<int> assignment_;
  std::vector<std::size_t> sizes_;
  Eigen::VectorXd fractions_;
};

/// Symmetric q x q matrix of strictly positive block noise variances.
class VarianceProfile {
public:
  VarianceProfile() = default;

  explicit VarianceProfile(Eigen::MatrixXd delta) : delta_(std::move(delta)) {
    detail::require(delta_.rows() >= 1 && delta_.rows() == delta_.cols(),
                    "profile: delta must be a non-empty square matrix");
    for (Eigen::Index a = 0; a < delta_.rows(); ++a)
      for (Eigen::Index b = 0; b < delta_.cols(); ++b) {
        detail::require(std::isfinite(delta_(a, b)) && delta_(a, b) > 0.0,
                        "profile: entries must be finite and strictly positive");
        detail::require(delta_(a, b) == delta_(b, a), "profile: delta must be symmetric");
      }
  }

  int q() const { return static_cast<int>(delta_.rows()); }
  const Eigen::MatrixXd& delta() const { return delta_; }
  double operator()(int a, int b) const { return delta_(a, b); }

  Eigen::MatrixXd inverse() const { return delta_.cwiseInverse(); }

  VarianceProfile scaled(double factor) const {
    detail::require(std::isfinite(factor) && factor > 0.0, "profile: scale factor must be positive");
    return VarianceProfile(delta_ * factor);
  }

private:
  Eigen::MatrixXd delta_;
};

/// Dense N x N profile with entries delta(g(i), g(j)).
inline Eigen::MatrixXd expand(const BlockPartition& partition, const VarianceProfile& profile) {
  detail::require(partition.q() == profile.q(), "expand: partition and profile disagree on q");
  const auto n = static_cast<Eigen::Index>(partition.n());
  Eigen::MatrixXd full(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int gj = partition.group(static_cast<std::size_t>(j));
    for (Eigen::Index i = 0; i < n; ++i) full(i, j) = profile(partition.group(static_cast<std::size_t>(i)), gj);
  }
  return full;
}

/// diag(sqrt(c)) (1/delta) diag(sqrt(c)).
inline Eigen::MatrixXd weighted_inverse_profile(const VarianceProfile& profile, const Eigen::VectorXd& fractions) {
  detail::require(fractions.size() == profile.q(), "snr: fractions length must equal q");
  const Eigen::VectorXd root = fractions.cwiseSqrt();
  return root.asDiagonal() * profile.inverse() * root.asDiagonal();
}

/// Inhomogeneous signal-to-noise ratio: second_moment^2 times the largest
/// absolute eigenvalue of diag(sqrt(c)) (1/delta) diag(sqrt(c)).
inline double snr(const VarianceProfile& profile, const Eigen::VectorXd& fractions, double second_moment) {
  detail::require(std::isfinite(second_moment) && second_moment > 0.0, "snr: second moment must be positive");
  double total = 0.0;
  for (Eigen::Index a = 0; a < fractions.size(); ++a) {
    detail::require(fractions[a] > 0.0, "snr: fractions must be strictly positive");
    total += fractions[a];
  }
  detail::require(std::abs(total - 1.0) <= 1e-12, "snr: fractions must sum to 1");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(weighted_inverse_profile(profile, fractions),
                                                              Eigen::EigenvaluesOnly);
  return second_moment * second_moment * solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Rescales the profile so that its snr equals `target`.
inline VarianceProfile scale_to_snr(const VarianceProfile& profile, const Eigen::VectorXd& fractions,
                                    double second_moment, double target) {
  detail::require(std::isfinite(target) && target > 0.0, "scale_to_snr: target must be positive");
  return profile.scaled(snr(profile, fractions, second_moment) / target);
}

/// y_i = sum_j Y_ij * weights(g(i), g(j)) * v_j without forming the N x N
/// Hadamard product. Costs one N x N by N x q product.
inline Eigen::VectorXd block_scaled_product(const Eigen::MatrixXd& matrix, const BlockPartition& partition,
                                            const Eigen::MatrixXd& weights, const Eigen::VectorXd& v) {
  const auto n = static_cast<Eigen::Index>(partition.n());
  const int q = partition.q();
  detail::require(matrix.rows() == n && matrix.cols() == n && v.size() == n,
                  "block_scaled_product: dimension mismatch");
  detail::require(weights.rows() == q && weights.cols() == q, "block_scaled_product: weights must be q x q");
  Eigen::MatrixXd split = Eigen::MatrixXd::Zero(n, q);
  for (Eigen::Index j = 0; j < n; ++j) split(j, partition.group(static_cast<std::size_t>(j))) = v[j];
  const Eigen::MatrixXd products = matrix * split;
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = weights.row(partition.group(static_cast<std::size_t>(i))).dot(products.row(i));
  return out;
}

/// out_i = (1/N) sum_j d_j / delta(g(i), g(j)), computed from per-block sums.
inline Eigen::VectorXd block_inverse_average(const BlockPartition& partition, const VarianceProfile& profile,
                                             const Eigen::VectorXd& d) {
  const auto n = static_cast<Eigen::Index>(partition.n());
  detail::require(d.size() == n, "block_inverse_average: dimension mismatch");
  detail::require(partition.q() == profile.q(), "block_inverse_average: partition and profile disagree on q");
  Eigen::VectorXd block_sums = Eigen::VectorXd::Zero(partition.q());
  for (Eigen::Index j = 0; j < n; ++j) block_sums[partition.group(static_cast<std::size_t>(j))] += d[j];
  block_sums /= static_cast<double>(n);
  const Eigen::VectorXd per_block = profile.inverse() * block_sums;
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = per_block[partition.group(static_cast<std::size_t>(i))];
  return out;
}

} // namespace inhomo
