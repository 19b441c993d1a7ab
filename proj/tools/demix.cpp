// Command-line front end: run, diagnose and sweep.
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "demix/config.hpp"
#include "demix/errors.hpp"
#include "demix/pipeline.hpp"

namespace {

int finish(const demix::ExitReport& rep) {
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  if (rep.code == demix::kExitOk) {
    std::cout << "ok";
    if (!rep.output_dir.empty()) std::cout << " (" << rep.output_dir << ")";
    std::cout << '\n';
  } else {
    std::cerr << rep.status << ": " << rep.message << '\n';
  }
  return rep.code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-phase demixing: minimizing-movement solver, reference PDE and diagnostics"};
  app.require_subcommand(1);

  std::string run_path, diag_dir, sweep_path;
  auto* run = app.add_subcommand("run", "Execute the mode selected in a config file");
  run->add_option("config", run_path, "JSON config")->required();
  auto* diag = app.add_subcommand("diagnose", "Recompute all reports for a jko output directory");
  diag->add_option("dir", diag_dir, "Output directory of a jko run")->required();
  auto* sweep = app.add_subcommand("sweep", "Run every member of a sweep config");
  sweep->add_option("config", sweep_path, "JSON config with a sweep list")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : demix::kExitConfigError;
  }

  if (*run) return finish(demix::run_config_file(run_path));
  if (*diag) return finish(demix::diagnose_directory(diag_dir));

  demix::RunConfig cfg;
  try {
    cfg = demix::load_config(sweep_path);
  } catch (const demix::ConfigError& e) {
    std::cerr << "config_error: " << e.what() << '\n';
    return demix::kExitConfigError;
  }
  if (cfg.mode != demix::RunMode::Sweep) {
    if (cfg.sweep.empty()) {
      std::cerr << "config_error: sweep needs a non-empty \"sweep\" list\n";
      return demix::kExitConfigError;
    }
    cfg.mode = demix::RunMode::Sweep;
  }
  return finish(demix::execute(cfg));
}
