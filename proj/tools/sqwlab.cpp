#include <cstdint>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sqw/config.hpp"
#include "sqw/harness.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
  bool quiet = false;
};

int run_command(const std::string& command, const Globals& g) {
  if (command == "verify") {
    std::string dir = g.out;
    if (dir.empty() && !g.config.empty()) dir = sqw::parse_config(g.config).output;
    if (dir.empty()) throw CLI::ValidationError("verify needs --out DIR or --config PATH");
    const sqw::VerifyReport rep = sqw::verify(dir);
    for (const auto& m : rep.mismatches) std::cerr << "MISMATCH " << m << '\n';
    if (!g.quiet)
      std::cout << fmt::format("verified {} files, {} mismatches\n", rep.checked, rep.mismatches.size());
    return rep.mismatches.empty() ? kExitPass : kExitFail;
  }
  if (g.config.empty()) throw CLI::ValidationError(fmt::format("{} needs --config PATH", command));
  sqw::ExperimentConfig cfg = sqw::parse_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (command != "run") cfg.estimators = {*sqw::parse_estimator(command)};

  const sqw::RunSummary summary = sqw::run(cfg, {g.out, g.threads, g.quiet}, std::cerr);
  if (!g.quiet) {
    for (const auto& path : summary.written) std::cout << path << '\n';
    std::cout << (summary.failures.empty() ? "PASS" : fmt::format("FAIL ({} checks)", summary.failures.size()))
              << '\n';
  }
  return summary.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scattering quantum walk localization lab"};
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "experiment config (YAML, schema 1)");
  app.add_option("--seed", g.seed, "master seed; overrides the config");
  app.add_option("--out", g.out, "output directory; overrides the config");
  app.add_option("--threads", g.threads, "parallel width (0 = hardware)")->check(CLI::NonNegativeNumber);
  app.add_flag("--quiet", g.quiet, "suppress progress output");

  const std::pair<const char*, const char*> commands[] = {
      {"build", "dump the graph and the walk operator"},
      {"spectrum", "eigenvalues and the spectral measure of one realization"},
      {"ec", "eigenfunction correlators and the dynamical probe"},
      {"fracmom", "fractional moments of the resolvent"},
      {"specavg", "single-phase spectral average"},
      {"gapprob", "spectral gap probability of the fully localized walk"},
      {"decay", "fractional-moment decay ladder"},
      {"dynloc", "dynamical localization ladder"},
      {"check-identities", "structural and resolvent identities"},
      {"check-fmec", "eigenfunction correlator versus fractional moment bound"},
      {"smallness", "ball resolvent smallness scaling"},
      {"weakconv", "restriction moments and EC semicontinuity"},
      {"run", "every estimator listed in the config"},
      {"verify", "cross-check output files against their sidecars"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  if (argc < 2) {
    std::cerr << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run_command(command, g);
  } catch (const sqw::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
}
