#pragma once

// The three-stage update (rectify -> energy injection -> fusion) and the
// ablation family built from the same pieces.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "camegrad/dual_solver.hpp"
#include "camegrad/grad_core.hpp"
#include "camegrad/rng.hpp"

namespace camegrad {

struct CameGradConfig {
  double rho = 0.5;
  double kappa = 1.5;
  double nu = 0.2;
  double epsilon = 1e-8;
  double sgld_sigma = 0.01;  // S1SgldS3 only
  SolverSettings solver;

  void validate() const;
};

enum class Strategy {
  kLinear,     // g_joint
  kS1Only,     // u_rect
  kS1S3,       // fuse(u_rect, g_joint), no magnitude restoration
  kS1SgldS3,   // fuse(u_rect + N(0, sigma^2 I), g_joint)
  kNoS1,       // fuse(inject(g_joint), g_joint)
  kNoS2,       // same computation as kS1S3
  kNoS3,       // u_en
  kFull,       // fuse(inject(u_rect), g_joint)
};

/// linear, s1_only, s1_s3, s1_sgld_s3, no_s1, no_s2, no_s3, full
std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
const std::vector<Strategy>& all_strategies();
/// Baseline plus the three single-stage removals plus the full method.
const std::vector<Strategy>& ablation_grid();

bool uses_rectification(Strategy s);
bool uses_energy_injection(Strategy s);
bool uses_fusion(Strategy s);

struct StepResult {
  GradVec g_joint;
  GradVec mu;
  std::optional<RectificationResult> rectification;
  double tau_mag;
  std::optional<GradVec> u_en;
  GradVec g_final;
  bool degenerate_fallback;
};

/// u * tau / (|u| + epsilon) with tau = kappa |g_joint|.
GradVec energy_inject(const GradVec& u_rect, const GradVec& g_joint, double kappa, double epsilon);

/// (1 - nu) u + nu kappa g_joint
GradVec fuse(const GradVec& u_en, const GradVec& g_joint, double kappa, double nu);

/// One optimizer step. `noise` is required for kS1SgldS3 and advanced by d
/// normal draws; other strategies never touch it.
StepResult came_grad_step(const GradientSet& gs, const CameGradConfig& cfg, Strategy strategy,
                          CounterRng* noise = nullptr);

/// theta - eta * g
std::vector<double> sgd_update(std::span<const double> theta, const GradVec& g, double eta);

}  // namespace camegrad
