#pragma once

// Stage 1: conflict-averse rectification. Solves
//
//   min_{alpha in simplex} F(alpha) = g_alpha . mu + sqrt(xi) |g_alpha|,
//   g_alpha = sum_i alpha_i g_i,  xi = rho^2 |mu|^2,
//
// by projected gradient descent, then recovers the maximiser of
// min_i g_i . u over the ball |u - mu| <= rho |mu| in closed form.

#include <cstddef>
#include <span>
#include <vector>

#include "camegrad/grad_core.hpp"

namespace camegrad {

/// |mu| or |g_alpha| below this makes the closed form undefined.
inline constexpr double kDegenerateEpsilon = 1e-12;

struct SolverSettings {
  int max_iterations = 200;
  /// Converged once |alpha_{t+1} - alpha_t|_inf drops below this.
  double tolerance = 1e-10;

  void validate() const;
};

/// A point of the probability simplex: non-negative, summing to one.
class SimplexWeights {
 public:
  explicit SimplexWeights(std::vector<double> alpha);
  static SimplexWeights uniform(std::size_t n);

  std::size_t size() const noexcept { return alpha_.size(); }
  double operator[](std::size_t i) const { return alpha_[i]; }
  std::span<const double> values() const noexcept { return alpha_; }

 private:
  std::vector<double> alpha_;
};

/// Euclidean projection onto the simplex (sort-based, O(n log n)).
SimplexWeights project_to_simplex(std::span<const double> v);

/// sum_i alpha_i g_i
GradVec weighted_gradient(const SimplexWeights& alpha, const GradientSet& gs);

double dual_objective(const SimplexWeights& alpha, const GradientSet& gs, double xi);

struct DualSolution {
  SimplexWeights alpha_star;
  double dual_value;  // F(alpha_star)
  GradVec g_alpha;
  int iterations;
  bool converged;
};

DualSolution solve_dual(const GradientSet& gs, double rho, const SolverSettings& settings = {});

struct RectificationResult {
  GradVec u_rect;
  DualSolution solution;
  double xi;
  bool degenerate;
};

RectificationResult rectify(const GradientSet& gs, double rho, const SolverSettings& settings = {});

/// min_i g_i . u, the worst-case first-order improvement of direction u.
double worst_case_alignment(const GradientSet& gs, const GradVec& u);

}  // namespace camegrad
