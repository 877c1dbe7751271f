// aeroimg: synthesize array data and image aeroacoustic sources.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "aeroimg/commands.hpp"

#ifndef AEROIMG_FIXTURE_FILE
#define AEROIMG_FIXTURE_FILE "tests/data/bessel_j0_y0.txt"
#endif

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> tau;
  std::optional<int> rank_cap;
  std::vector<double> bands;
  std::vector<double> frequencies;
  std::vector<std::string> methods;
  std::optional<std::string> out;
  std::optional<std::string> mode;
  std::optional<std::string> scene;
  std::optional<double> mach;
  std::optional<int> snapshots;
  bool print_config = false;
};

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "run configuration file (defaults apply if omitted)");
  cmd->add_option("--seed", o.seed, "top-level random seed");
  cmd->add_option("--threads", o.threads, "worker threads");
  cmd->add_option("--tau", o.tau, "relative eigenvalue threshold");
  cmd->add_option("--rank-cap", o.rank_cap, "keep at most this many eigenpairs (0: no cap)");
  cmd->add_option("--band", o.bands, "third-octave band centre in Hz (repeatable)");
  cmd->add_option("--frequency", o.frequencies, "single frequency in Hz (repeatable)");
  cmd->add_option("--method", o.methods, "fac | capon | cbf | cbfdr (repeatable)")
      ->check(CLI::IsMember({"fac", "capon", "cbf", "cbfdr"}));
  cmd->add_option("-o,--out", o.out, "output directory");
  cmd->add_option("--mode", o.mode, "exact | snapshots | welch");
  cmd->add_option("--scene", o.scene, "scene file");
  cmd->add_option("--mach", o.mach, "Mach number of the flow along x1");
  cmd->add_option("--snapshots", o.snapshots, "snapshot count");
  cmd->add_flag("--print-config", o.print_config, "print the effective configuration");
}

aeroimg::RunConfig effective_config(const Overrides& o) {
  aeroimg::RunConfig cfg = o.config.empty() ? aeroimg::RunConfig{} : aeroimg::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (o.tau) cfg.tau = *o.tau;
  if (o.rank_cap) cfg.rank_cap = *o.rank_cap;
  if (!o.bands.empty() || !o.frequencies.empty()) {
    cfg.bands = o.bands;
    cfg.frequencies = o.frequencies;
  }
  if (!o.methods.empty()) cfg.methods = o.methods;
  if (o.out) cfg.output_dir = *o.out;
  if (o.mode) cfg.mode = *o.mode;
  if (o.scene) cfg.scene_file = *o.scene;
  if (o.mach) cfg.mach = *o.mach;
  if (o.snapshots) cfg.snapshots = *o.snapshots;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aeroimg - aeroacoustic source imaging with microphone arrays"};
  app.require_subcommand(1);
  Overrides o;
  auto* validate = app.add_subcommand("validate", "check configuration, scene and array geometry");
  auto* synth = app.add_subcommand("synth", "synthesize cross-spectral matrices");
  auto* image = app.add_subcommand("image", "compute band-averaged source maps");
  auto* selftest = app.add_subcommand("selftest", "run built-in invariant suites");
  for (auto* cmd : {validate, synth, image}) add_run_options(cmd, o);
  std::string fixtures = AEROIMG_FIXTURE_FILE;
  selftest->add_option("--fixtures", fixtures, "Bessel fixture table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : aeroimg::kExitValidation;
  }

  if (selftest->parsed()) return aeroimg::cmd_selftest(fixtures, std::cout);

  aeroimg::RunConfig cfg;
  try {
    cfg = effective_config(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return aeroimg::kExitIo;
  }
  if (o.print_config) std::cout << aeroimg::format_config(cfg);
  if (validate->parsed()) return aeroimg::cmd_validate(cfg, std::cout);
  if (synth->parsed()) return aeroimg::cmd_synth(cfg, std::cout, std::cerr);
  return aeroimg::cmd_image(cfg, std::cout, std::cerr);
}
