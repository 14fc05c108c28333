#pragma once

#include <string>

#include "oel/config.hpp"

namespace oel::cli {

/// Dispatch on the `experiment` key: weingarten-check, correlators,
/// ntk-stats, theory, train, or grid. Writes CSV/JSON artifacts plus the
/// resolved config and seed metadata into out_dir. Returns a process exit
/// code.
int run_experiment(Config cfg, const std::string& out_dir, bool dry_run, int workers);

}  // namespace oel::cli
