// chi2sim: runs one task from a JSON configuration.
//
//   chi2sim --config run.json [--out DIR] [--threads N] [--seed S] [--validate-only]
//
// Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

#include <chi2/run.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Two-photon transport through a chi(2) cavity: spectra, g2, sweeps, fits and oracle checks"};
  app.set_version_flag("--version", std::string(chi2::version()));

  std::string config;
  std::string out;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  bool validate_only = false;
  app.add_option("--config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  auto* out_opt = app.add_option("--out", out, "Output directory (overrides output.directory)");
  app.add_option("--threads", threads, "Worker threads for sweeps and fit starts")->check(CLI::Range(1u, 1024u));
  auto* seed_opt = app.add_option("--seed", seed, "Seed for fit multi-starts (overrides task.seed)");
  app.add_flag("--validate-only", validate_only, "Check the configuration and print diagnostics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : chi2::exit_config_error;
  }

  chi2::RunOptions opt;
  opt.threads = threads;
  opt.validate_only = validate_only;
  if (*out_opt) opt.out_dir = out;
  if (*seed_opt) opt.seed = seed;
  return chi2::run_main(config, opt, std::cout, std::cerr);
}
