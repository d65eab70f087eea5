#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace robustify::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitConfig = 2,
  kExitInfeasible = 3,
  kExitNumerical = 4,
  kExitViolation = 5,
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int cmd_mpc_build(const RunConfig& cfg, std::ostream& out);
int cmd_synthesize(const RunConfig& cfg, std::ostream& out);
int cmd_analyze(const RunConfig& cfg, std::ostream& out);
int cmd_verify(const RunConfig& cfg, std::ostream& out);
int cmd_sweep(const RunConfig& cfg, std::ostream& out);
int cmd_simulate(const RunConfig& cfg, std::ostream& out);

/// Parses arguments, runs one subcommand and maps failures to exit codes.
/// Diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace robustify::cli
