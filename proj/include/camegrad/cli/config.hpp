#pragma once

// Experiment configuration file: INI-style, top-level keys plus [came],
// [solver], [train] and optional [sweep] sections. See docs/config.md.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "camegrad/optimizer.hpp"

namespace camegrad::cli {

struct SweepAxes {
  std::vector<double> rho;
  std::vector<double> kappa;
  std::vector<double> nu;
};

struct ExperimentConfig {
  std::string problem = "conflict_landscape";
  std::vector<Strategy> strategies{Strategy::kFull};
  CameGradConfig came;
  double eta = 0.01;
  std::size_t steps = 2000;
  std::vector<std::uint64_t> seeds{7};
  std::optional<SweepAxes> sweep;
  std::string output_dir = "camegrad_out";
};

/// Syntax problems raise ParseError; unknown keys, bad values and violated
/// invariants raise InvariantError naming the key.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::string& path);

/// Comma- or whitespace-separated numbers.
std::vector<double> parse_number_list(const std::string& text, const std::string& key);

}  // namespace camegrad::cli
