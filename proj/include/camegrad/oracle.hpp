#pragma once

// Brute-force references for Stage 1, independent of the dual solver:
//  * primal_maxmin_oracle searches the trust-region sphere directly;
//  * dual_grid_oracle evaluates F exhaustively on a simplex grid.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "camegrad/grad_core.hpp"

namespace camegrad {

inline constexpr std::size_t kOracleMaxDim = 4;
inline constexpr std::size_t kGridOracleMaxTasks = 3;

struct OracleOptions {
  /// Zoom levels of local re-sampling around the incumbent after the global
  /// pass. Zero gives the raw low-discrepancy search, whose value is
  /// monotone in `resolution` because point sets are nested prefixes.
  int refine_levels = 48;
  std::size_t refine_samples = 96;
  std::uint64_t seed = 0x0DDBA11;  // only used for d = 4 and refinement offsets
};

struct OracleResult {
  GradVec best_u;
  double best_value;
  std::size_t samples_evaluated;
};

/// max over |u - mu| <= rho |mu| of min_i g_i . u, by sampling the boundary
/// sphere (plus mu itself). Requires d <= 4 and resolution >= 100.
OracleResult primal_maxmin_oracle(const GradientSet& gs, double rho, std::size_t resolution,
                                  const OracleOptions& options = {});

struct GridOracleResult {
  std::vector<double> alpha;
  double value;
};

/// Exhaustive minimisation of F over the simplex grid with spacing `step`.
/// Requires K+1 <= 3.
GridOracleResult dual_grid_oracle(const GradientSet& gs, double rho, double step);

/// Unit directions used by the global pass, exposed for testing. The first n
/// directions for resolution n are always a prefix of those for any larger n.
std::vector<std::vector<double>> sphere_directions(std::size_t dim, std::size_t count,
                                                   std::uint64_t seed);

}  // namespace camegrad
