#pragma once

// Subcommand implementations. Each returns the process exit code and writes
// only to the given streams and below its output directory.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace camegrad::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitParse = 2,
  kExitInvariant = 3,
  kExitDivergence = 4,
  kExitCap = 5,
  kExitOracleGap = 6,
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

/// Environment variable that overrides a config's output_dir.
inline constexpr const char* kOutputEnvVar = "CAMEGRAD_OUTPUT";

struct RectifyArgs {
  std::string input;
  double rho = 0.5;
};
int cmd_rectify(const RectifyArgs& args, Streams io);

struct StepArgs {
  std::string input;
  std::optional<std::string> config;
  std::optional<std::string> strategy;
  std::optional<double> rho, kappa, nu, epsilon, sgld_sigma;
  std::uint64_t seed = 0;  // SGLD noise only
};
int cmd_step(const StepArgs& args, Streams io);

struct TrainArgs {
  std::string config;
  std::optional<std::string> output_dir;
  bool quiet = false;
  bool dump_gradients = false;
};
int cmd_train(const TrainArgs& args, Streams io);

struct SweepArgs {
  std::string config;
  std::optional<std::string> output_dir;
  bool quiet = false;
  std::size_t max_runs = 256;
  std::size_t jobs = 1;
};
int cmd_sweep(const SweepArgs& args, Streams io);

struct OracleCheckArgs {
  std::size_t count = 100;
  std::size_t dims = 2;
  std::size_t tasks = 3;
  double rho = 0.5;
  std::uint64_t seed = 1;
  std::size_t resolution = 10000;
  double tolerance = 2e-3;
};
int cmd_oracle_check(const OracleCheckArgs& args, Streams io);

struct DiagnoseArgs {
  std::vector<std::string> logs;
  std::vector<std::string> gradient_streams;
  std::optional<std::string> output_dir;
  std::size_t bins = 40;
  std::size_t window = 100;
  std::optional<double> kappa;
};
int cmd_diagnose(const DiagnoseArgs& args, Streams io);

/// Explicit flag, then $CAMEGRAD_OUTPUT, then the fallback.
std::string resolve_output_dir(const std::optional<std::string>& flag, const std::string& fallback);

}  // namespace camegrad::cli
