#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include "error.hpp"
#include "priors.hpp"
#include "profile.hpp"
#include "rng.hpp"

namespace inhomo {

/// Y = x* x*^T / sqrt(N) + A (.) sqrt(Delta), together with what generated it.
struct SpikedInstance {
  BlockPartition partition;
  VarianceProfile profile;
  Eigen::VectorXd spike;
  Eigen::MatrixXd observed;
  std::uint64_t seed = 0;

  std::size_t n() const { return partition.n(); }
};

/// A = G + G^T with G_ij ~ N(0, 1/2): unit off-diagonal variance, diagonal variance 2.
inline Eigen::MatrixXd sample_goe(std::size_t n, Rng& rng) {
  detail::require(n >= 1, "sample_goe: n must be >= 1");
  const auto size = static_cast<Eigen::Index>(n);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  // Draw G in row-major order so the stream layout does not depend on Eigen's storage order.
  Eigen::MatrixXd g(size, size);
  for (Eigen::Index i = 0; i < size; ++i)
    for (Eigen::Index j = 0; j < size; ++j) g(i, j) = normal(rng);
  Eigen::MatrixXd a(size, size);
  for (Eigen::Index j = 0; j < size; ++j)
    for (Eigen::Index i = j; i < size; ++i) a(i, j) = a(j, i) = g(i, j) + g(j, i);
  return a;
}

/// Builds an instance from an explicit spike and GOE noise matrix.
inline SpikedInstance assemble(const BlockPartition& partition, const VarianceProfile& profile,
                               Eigen::VectorXd spike, const Eigen::MatrixXd& noise, std::uint64_t seed = 0) {
  const auto n = static_cast<Eigen::Index>(partition.n());
  detail::require(partition.q() == profile.q(), "assemble: partition and profile disagree on q");
  detail::require(spike.size() == n && noise.rows() == n && noise.cols() == n, "assemble: dimension mismatch");
  const Eigen::MatrixXd root = profile.delta().cwiseSqrt();
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd y(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int gj = partition.group(static_cast<std::size_t>(j));
    for (Eigen::Index i = j; i < n; ++i) {
      const int gi = partition.group(static_cast<std::size_t>(i));
      y(i, j) = y(j, i) = scale * spike[i] * spike[j] + noise(i, j) * root(gi, gj);
    }
  }
  return SpikedInstance{partition, profile, std::move(spike), std::move(y), seed};
}

/// Draws the spike and the noise from independent substreams of `seed`.
inline SpikedInstance generate(const Prior& prior, const BlockPartition& partition, const VarianceProfile& profile,
                               std::uint64_t seed) {
  detail::require(partition.q() == profile.q(), "generate: partition and profile disagree on q");
  Rng spike_rng = make_rng(seed, kSpikeStream);
  Rng noise_rng = make_rng(seed, kNoiseStream);
  Eigen::VectorXd spike = sample(prior, partition.n(), spike_rng);
  const Eigen::MatrixXd noise = sample_goe(partition.n(), noise_rng);
  return assemble(partition, profile, std::move(spike), noise, seed);
}

// ---------------------------------------------------------------------------
// Instance dump: header {n, q, seed} as little-endian u64, then x* and the
// upper triangle of Y (row-major, j >= i) as little-endian f64.

struct InstanceDump {
  std::uint64_t n = 0;
  std::uint64_t q = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd spike;
  Eigen::MatrixXd observed;
};

namespace detail {

template <class T>
void write_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits = 0;
  std::memcpy(&bits, &value, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char bytes[8];
  std::memcpy(bytes, &bits, 8);
  out.write(bytes, 8);
}

template <class T>
T read_le(std::istream& in) {
  char bytes[8];
  in.read(bytes, 8);
  if (!in) throw InvalidArgument("instance dump: truncated file");
  std::uint64_t bits = 0;
  std::memcpy(&bits, bytes, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  T value;
  std::memcpy(&value, &bits, 8);
  return value;
}

} // namespace detail

inline void write_instance(const std::string& path, const SpikedInstance& instance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open " + path + " for writing");
  const auto n = static_cast<Eigen::Index>(instance.n());
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(n));
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(instance.partition.q()));
  detail::write_le<std::uint64_t>(out, instance.seed);
  for (Eigen::Index i = 0; i < n; ++i) detail::write_le<double>(out, instance.spike[i]);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) detail::write_le<double>(out, instance.observed(i, j));
}

inline InstanceDump read_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  InstanceDump dump;
  dump.n = detail::read_le<std::uint64_t>(in);
  dump.q = detail::read_le<std::uint64_t>(in);
  dump.seed = detail::read_le<std::uint64_t>(in);
  const auto n = static_cast<Eigen::Index>(dump.n);
  dump.spike.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) dump.spike[i] = detail::read_le<double>(in);
  dump.observed.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) dump.observed(i, j) = dump.observed(j, i) = detail::read_le<double>(in);
  return dump;
}

inline void write_spike_csv(const std::string& path, const Eigen::VectorXd& spike) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path + " for writing");
  out << "index,spike\n";
  char buf[64];
  for (Eigen::Index i = 0; i < spike.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", spike[i]);
    out << i << ',' << buf << '\n';
  }
}

} // namespace inhomo
