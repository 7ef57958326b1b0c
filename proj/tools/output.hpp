#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"

namespace inhomo::cli {

/// Shortest round-trip representation, so files compare byte for byte.
inline std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string num(long long x) { return std::to_string(x); }
inline std::string num(int x) { return std::to_string(x); }
inline std::string num(std::uint64_t x) { return std::to_string(x); }

/// Joins fields with commas and terminates the row.
template <class... Fields>
std::string row(const Fields&... fields) {
  std::string out;
  ((out += fields, out += ','), ...);
  out.back() = '\n';
  return out;
}

inline void write_csv(const std::filesystem::path& path, const ExperimentConfig& cfg, const std::string& header,
                      const std::vector<std::string>& chunks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "# config_hash=" << cfg.config_hash << " seed=" << cfg.seed << '\n' << header << '\n';
  for (const auto& chunk : chunks) out << chunk;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

/// Runs fn(0) .. fn(count - 1) on `threads` workers and returns the results in
/// index order. If any task throws, the exception of the lowest failing index
/// is rethrown after all workers finish.
template <class Result, class Fn>
std::vector<Result> parallel_map(std::size_t count, int threads, Fn fn) {
  std::vector<Result> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

} // namespace inhomo::cli
