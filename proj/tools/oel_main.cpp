#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "oel/common.hpp"
#include "oel/config.hpp"
#include "oel/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"oel: finite-width MLP ensemble laboratory"};
  app.set_version_flag("--version", std::string(oel::version()));
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  bool dry_run = false;
  int workers = 0;
  app.add_option("--config", config_path, "experiment config file")->required();
  app.add_option("--set", overrides, "override: key=value (repeatable)");
  app.add_option("--out", out_dir, "artifact output directory");
  app.add_flag("--dry-run", dry_run, "validate and print the resolved config");
  app.add_option("--workers", workers, "worker thread count");
  CLI11_PARSE(app, argc, argv);

  try {
    oel::Config cfg = oel::Config::from_file(config_path);
    for (const auto& kv : overrides) cfg.apply_override(kv);
    return oel::cli::run_experiment(std::move(cfg), out_dir, dry_run, workers);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
