#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDivergence = 3, kVerificationFailure = 4 };

struct Options {
  std::string positional;
  std::string config;
  std::vector<std::string> overrides;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

void add_options(CLI::App* cmd, Options& opt) {
  cmd->add_option("config_path", opt.positional, "JSON config file");
  cmd->add_option("--config", opt.config, "JSON config file");
  cmd->add_option("--set", opt.overrides, "override a config key, e.g. --set prior.kind=rademacher");
  cmd->add_option("--out", opt.out, "output directory");
  cmd->add_option("--seed", opt.seed, "master seed (overrides the config)");
  cmd->add_option("--threads", opt.threads, "worker threads")->check(CLI::Range(1, 1024));
}

} // namespace

int main(int argc, char** argv) {
  using namespace inhomo::cli;
  CLI::App app{"Inhomogeneous spiked Wigner experiments"};
  app.require_subcommand(1);
  Options opt;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"amp", "run AMP over an snr grid and seeds"},
      {"se", "state evolution trajectories and Bayes fixed points"},
      {"spectrum", "spectra and top-eigenvector overlaps of the transformed and naive matrices"},
      {"verify", "run the built-in consistency checks"},
      {"gen", "dump sampled instances"}};
  for (const auto& [name, help] : commands) add_options(app.add_subcommand(name, help), opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  try {
    if (!opt.positional.empty() && !opt.config.empty())
      throw ConfigError("config error: give the config either positionally or with --config, not both");
    const std::string path = opt.config.empty() ? opt.positional : opt.config;
    Json user = path.empty() ? Json::object() : read_json_file(path);
    for (const auto& assignment : opt.overrides) apply_override(user, assignment);
    const auto cfg = build_config(user, opt.seed);

    const std::filesystem::path out(opt.out);
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw ConfigError("config error: cannot create output directory '" + opt.out + "': " + ec.message());

    if (command == "amp") cmd_amp(cfg, out, opt.threads);
    else if (command == "se") cmd_se(cfg, out, opt.threads);
    else if (command == "spectrum") cmd_spectrum(cfg, out, opt.threads);
    else if (command == "verify") cmd_verify(cfg, out, opt.threads);
    else cmd_gen(cfg, out, opt.threads);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  } catch (const inhomo::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const inhomo::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const VerificationFailure& e) {
    std::cerr << e.what() << '\n';
    return kVerificationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}
