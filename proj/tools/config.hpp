#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "inhomo/inhomo.hpp"

namespace inhomo::cli {

using Json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Every accepted key with its default. Anything not listed here is rejected.
inline Json default_config() {
  return Json::parse(R"({
    "seed": 0,
    "n": 500,
    "seeds": 1,
    "snr": 2.0,
    "prior": {"kind": "gaussian", "variance": 1.0, "rho": 1.0},
    "profile": {"delta": [[1.0]], "fractions": [1.0]},
    "denoiser": "bayes",
    "quadrature": {"gh_nodes": 61, "panel_width": 0.25, "panel_order": 8, "half_range": 12.0},
    "amp": {"init": "spectral", "epsilon": 0.001, "max_iters": 200, "tol": 1e-7},
    "se": {"init_modes": ["uninformed", "informed"], "epsilon": 1e-6, "trajectory_steps": 100,
           "fixed_point_max_iters": 200000, "tol": 1e-13},
    "spectrum": {"methods": ["tilde", "naive"], "keep_spectrum": true, "tol": 1e-10},
    "verify": {"checks": ["embedding", "nishimori", "fixed_point", "nishimori_collapse", "snr_closed_form",
                          "linear_threshold"], "n": 200}
  })");
}

inline const std::set<std::string>& known_checks() {
  static const std::set<std::string> names{"embedding",         "nishimori",       "fixed_point",
                                           "nishimori_collapse", "snr_closed_form", "linear_threshold"};
  return names;
}

namespace detail {

inline std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Overlays `user` onto `base`, rejecting keys that have no default.
inline void merge_into(Json& base, const Json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config error at '" + (path.empty() ? "<root>" : path) + "': expected an object");
  for (const auto& [key, value] : user.items()) {
    const auto here = join(path, key);
    if (!base.contains(key)) throw ConfigError("config error at '" + here + "': unknown key");
    if (base[key].is_object()) merge_into(base[key], value, here);
    else base[key] = value;
  }
}

inline const Json& at_path(const Json& root, const std::string& path) {
  const Json* node = &root;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    node = &node->at(key);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return *node;
}

[[noreturn]] inline void fail(const std::string& path, const std::string& message) {
  throw ConfigError("config error at '" + path + "': " + message);
}

inline double get_double(const Json& root, const std::string& path) {
  const auto& v = at_path(root, path);
  if (!v.is_number()) fail(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "expected a finite number");
  return x;
}

inline long long get_int(const Json& root, const std::string& path) {
  const auto& v = at_path(root, path);
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<long long>();
}

inline std::string get_string(const Json& root, const std::string& path) {
  const auto& v = at_path(root, path);
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

inline std::vector<std::string> get_strings(const Json& root, const std::string& path) {
  const auto& v = at_path(root, path);
  if (!v.is_array()) fail(path, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) fail(path, "expected an array of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

inline Eigen::VectorXd get_vector(const Json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(path + "[" + std::to_string(i) + "]", "expected a number");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

inline std::vector<double> parse_snr(const Json& v) {
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail("snr[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
  } else if (v.is_object()) {
    for (const auto& [key, value] : v.items())
      if (key != "start" && key != "stop" && key != "step") fail("snr." + key, "unknown key");
    for (const char* key : {"start", "stop", "step"})
      if (!v.contains(key) || !v[key].is_number()) fail(std::string("snr.") + key, "expected a number");
    const double start = v["start"].get<double>(), stop = v["stop"].get<double>(), step = v["step"].get<double>();
    if (!(step > 0.0)) fail("snr.step", "must be positive");
    if (stop >= start) {
      const auto count = static_cast<long long>(std::floor((stop - start) / step + 1e-9)) + 1;
      for (long long k = 0; k < count; ++k) out.push_back(start + static_cast<double>(k) * step);
    }
  } else {
    fail("snr", "expected a number, an array or {start, stop, step}");
  }
  if (out.empty()) fail("snr", "grid is empty");
  for (double s : out)
    if (!std::isfinite(s) || s <= 0.0) fail("snr", "values must be positive and finite");
  return out;
}

} // namespace detail

/// Validated experiment parameters.
struct ExperimentConfig {
  Json document;
  std::uint64_t seed = 0;
  std::string config_hash;

  std::size_t n = 0;
  int seeds = 1;
  std::vector<double> snr;
  Prior prior;
  VarianceProfile profile{Eigen::MatrixXd::Ones(1, 1)};
  Eigen::VectorXd fractions;
  DenoiserFamily family;
  QuadratureSpec quad;

  AmpConfig amp;

  std::vector<InitMode> init_modes;
  double se_epsilon = 1e-6;
  int trajectory_steps = 100;
  int fixed_point_max_iters = 200000;
  double se_tol = 1e-13;

  std::vector<std::string> methods;
  bool keep_spectrum = true;
  double eig_tol = 1e-10;

  std::vector<std::string> checks;
  std::size_t verify_n = 200;
};

/// FNV-1a, 64 bit.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Applies one "a.b.c=value" override. The value is read as JSON when it
/// parses, and as a bare string otherwise.
inline void apply_override(Json& user, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("config error: --set expects key=value, got '" + assignment + "'");
  const auto key = assignment.substr(0, eq);
  const auto text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json* node = &user;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("config error: malformed key '" + key + "' in --set");
    if (!node->is_object()) *node = Json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config error: cannot open '" + path + "'");
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config error: '" + path + "' is not valid JSON");
  return doc;
}

/// Merges the user document over the defaults and validates every field.
inline ExperimentConfig build_config(const Json& user, std::optional<std::uint64_t> seed_override) {
  using namespace detail;
  Json doc = default_config();
  merge_into(doc, user, "");

  ExperimentConfig cfg;
  if (seed_override) doc["seed"] = *seed_override;
  const auto& seed = doc["seed"];
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
    fail("seed", "expected a non-negative integer");
  cfg.seed = seed.get<std::uint64_t>();

  const long long n = get_int(doc, "n");
  if (n < 2) fail("n", "must be >= 2");
  if (n > 20000) fail("n", "must be <= 20000");
  cfg.n = static_cast<std::size_t>(n);
  const long long seeds = get_int(doc, "seeds");
  if (seeds < 1 || seeds > 100000) fail("seeds", "must lie in [1, 100000]");
  cfg.seeds = static_cast<int>(seeds);
  cfg.snr = parse_snr(doc["snr"]);

  const auto kind = get_string(doc, "prior.kind");
  try {
    if (kind == "gaussian") cfg.prior = Prior::gaussian(get_double(doc, "prior.variance"));
    else if (kind == "rademacher") cfg.prior = Prior::rademacher();
    else if (kind == "sparse_rademacher") cfg.prior = Prior::sparse_rademacher(get_double(doc, "prior.rho"));
    else fail("prior.kind", "expected gaussian, rademacher or sparse_rademacher");
  } catch (const InvalidArgument& e) {
    fail("prior", e.what());
  }

  const auto& delta = doc["profile"]["delta"];
  if (!delta.is_array() || delta.empty()) fail("profile.delta", "expected a non-empty square array");
  const auto q = static_cast<Eigen::Index>(delta.size());
  Eigen::MatrixXd d(q, q);
  for (Eigen::Index a = 0; a < q; ++a) {
    const auto row_path = "profile.delta[" + std::to_string(a) + "]";
    const auto& row = delta[static_cast<std::size_t>(a)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != q) fail(row_path, "expected " + std::to_string(q) + " entries");
    d.row(a) = get_vector(row, row_path).transpose();
  }
  try {
    cfg.profile = VarianceProfile(d);
  } catch (const InvalidArgument& e) {
    fail("profile.delta", e.what());
  }
  cfg.fractions = get_vector(doc["profile"]["fractions"], "profile.fractions");
  if (cfg.fractions.size() != q) fail("profile.fractions", "expected " + std::to_string(q) + " entries");
  if ((cfg.fractions.array() <= 0.0).any()) fail("profile.fractions", "entries must be positive");
  if (std::abs(cfg.fractions.sum() - 1.0) > 1e-12) fail("profile.fractions", "entries must sum to 1");
  try {
    (void)BlockPartition::contiguous(cfg.n, cfg.fractions);
  } catch (const InvalidArgument& e) {
    fail("profile.fractions", e.what());
  }

  const auto denoiser = get_string(doc, "denoiser");
  if (denoiser == "bayes") cfg.family = BayesDenoiser{cfg.prior};
  else if (denoiser == "identity") cfg.family = IdentityDenoiser{};
  else fail("denoiser", "expected bayes or identity");

  const long long gh = get_int(doc, "quadrature.gh_nodes");
  if (gh < 1 || gh > 400) fail("quadrature.gh_nodes", "must lie in [1, 400]");
  const long long order = get_int(doc, "quadrature.panel_order");
  if (order < 1 || order > 64) fail("quadrature.panel_order", "must lie in [1, 64]");
  const double width = get_double(doc, "quadrature.panel_width");
  const double range = get_double(doc, "quadrature.half_range");
  if (width <= 0.0) fail("quadrature.panel_width", "must be positive");
  if (range <= 0.0 || range / width > 1e5) fail("quadrature.half_range", "must be positive and at most 1e5 panel widths");
  cfg.quad = {static_cast<int>(gh), width, static_cast<int>(order), range};

  const auto init = get_string(doc, "amp.init");
  if (init == "spectral") cfg.amp.init.kind = AmpInit::Kind::Spectral;
  else if (init == "noise") cfg.amp.init.kind = AmpInit::Kind::Noise;
  else if (init == "informed") cfg.amp.init.kind = AmpInit::Kind::Informed;
  else fail("amp.init", "expected spectral, noise or informed");
  cfg.amp.init.epsilon = get_double(doc, "amp.epsilon");
  if (cfg.amp.init.epsilon < 0.0) fail("amp.epsilon", "must be non-negative");
  if (init == "informed" && cfg.amp.init.epsilon > 1.0) fail("amp.epsilon", "must lie in [0, 1] for informed init");
  const long long max_iters = get_int(doc, "amp.max_iters");
  if (max_iters < 1 || max_iters > 100000) fail("amp.max_iters", "must lie in [1, 100000]");
  cfg.amp.max_iters = static_cast<int>(max_iters);
  cfg.amp.tol = get_double(doc, "amp.tol");
  if (cfg.amp.tol < 0.0) fail("amp.tol", "must be non-negative");

  for (const auto& mode : get_strings(doc, "se.init_modes")) {
    if (mode == "uninformed") cfg.init_modes.push_back(InitMode::Uninformed);
    else if (mode == "informed") cfg.init_modes.push_back(InitMode::Informed);
    else fail("se.init_modes", "expected uninformed or informed, got '" + mode + "'");
  }
  if (cfg.init_modes.empty()) fail("se.init_modes", "must not be empty");
  cfg.se_epsilon = get_double(doc, "se.epsilon");
  if (cfg.se_epsilon < 0.0) fail("se.epsilon", "must be non-negative");
  const long long steps = get_int(doc, "se.trajectory_steps");
  if (steps < 0 || steps > 1000000) fail("se.trajectory_steps", "must lie in [0, 1000000]");
  cfg.trajectory_steps = static_cast<int>(steps);
  const long long fp_iters = get_int(doc, "se.fixed_point_max_iters");
  if (fp_iters < 1 || fp_iters > 10000000) fail("se.fixed_point_max_iters", "must lie in [1, 10000000]");
  cfg.fixed_point_max_iters = static_cast<int>(fp_iters);
  cfg.se_tol = get_double(doc, "se.tol");
  if (cfg.se_tol < 0.0) fail("se.tol", "must be non-negative");

  cfg.methods = get_strings(doc, "spectrum.methods");
  if (cfg.methods.empty()) fail("spectrum.methods", "must not be empty");
  for (const auto& m : cfg.methods)
    if (m != "tilde" && m != "naive") fail("spectrum.methods", "expected tilde or naive, got '" + m + "'");
  const auto& keep = doc["spectrum"]["keep_spectrum"];
  if (!keep.is_boolean()) fail("spectrum.keep_spectrum", "expected true or false");
  cfg.keep_spectrum = keep.get<bool>();
  cfg.eig_tol = get_double(doc, "spectrum.tol");
  if (cfg.eig_tol <= 0.0) fail("spectrum.tol", "must be positive");

  cfg.checks = get_strings(doc, "verify.checks");
  for (const auto& c : cfg.checks)
    if (!known_checks().count(c)) fail("verify.checks", "unknown check '" + c + "'");
  const long long vn = get_int(doc, "verify.n");
  if (vn < 4 || vn > 5000) fail("verify.n", "must lie in [4, 5000]");
  cfg.verify_n = static_cast<std::size_t>(vn);

  Json hashed = doc;
  hashed.erase("seed");
  cfg.config_hash = fnv1a_hex(hashed.dump());
  cfg.document = std::move(doc);
  return cfg;
}

} // namespace inhomo::cli
