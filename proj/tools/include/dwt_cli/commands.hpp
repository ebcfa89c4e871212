#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dwt_cli/run_config.hpp"

namespace dwt::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitGradCheck = 4,
};

int cmd_train(const RunConfig& config, std::ostream& out);
int cmd_eval(const RunConfig& config, std::ostream& out);
int cmd_distill(const RunConfig& config, std::ostream& out);
int cmd_gradcheck(const RunConfig& config, std::ostream& out);

/// Full entry point: `<subcommand> --config <path> [--key value ...]`.
/// Errors are reported on `err` and mapped to the exit codes above.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dwt::cli
