#include "camegrad/dual_solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

#include "camegrad/errors.hpp"

namespace camegrad {

void SolverSettings::validate() const {
  if (max_iterations < 1) throw InvariantError("solver max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw InvariantError("solver tolerance must be > 0");
}

SimplexWeights::SimplexWeights(std::vector<double> alpha) : alpha_(std::move(alpha)) {
  if (alpha_.empty()) throw InvariantError("simplex weights must be non-empty");
  double sum = 0.0;
  for (double a : alpha_) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw InvariantError("simplex weight must be >= 0");
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw InvariantError("simplex weights sum to " + std::to_string(sum) + ", expected 1");
  }
}

SimplexWeights SimplexWeights::uniform(std::size_t n) {
  return SimplexWeights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

SimplexWeights project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw InvariantError("cannot project an empty vector");
  for (double x : v) {
    if (!std::isfinite(x)) throw InvariantError("cannot project a non-finite vector");
  }
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // largest k with sorted[k-1] - (cumsum_k - 1) / k > 0
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumsum += sorted[k];
    const double candidate = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> alpha(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    alpha[i] = std::max(v[i] - theta, 0.0);
    sum += alpha[i];
  }
  // absorb rounding so the sum is 1 to within an ulp or two
  for (double& a : alpha) a /= sum;
  return SimplexWeights(std::move(alpha));
}

GradVec weighted_gradient(const SimplexWeights& alpha, const GradientSet& gs) {
  if (alpha.size() != gs.task_count()) throw DimensionMismatch(alpha.size(), gs.task_count());
  GradVec acc = GradVec::zeros(gs.dim());
  for (std::size_t i = 0; i < gs.task_count(); ++i) acc += gs.grad(i) * alpha[i];
  return acc;
}

double dual_objective(const SimplexWeights& alpha, const GradientSet& gs, double xi) {
  if (!(xi >= 0.0)) throw InvariantError("xi must be >= 0");
  const GradVec g_alpha = weighted_gradient(alpha, gs);
  return dot(g_alpha, mean_gradient(gs)) + std::sqrt(xi) * norm(g_alpha);
}

double worst_case_alignment(const GradientSet& gs, const GradVec& u) {
  double worst = std::numeric_limits<double>::infinity();
  for (const GradVec& g : gs.grads()) worst = std::min(worst, dot(g, u));
  return worst;
}

namespace {

void check_rho(double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw InvariantError("rho must lie in [0, 1), got " + std::to_string(rho));
  }
}

// F and its gradient expressed through the Gram matrix Q = G G^T and
// b = G mu, so each iteration costs O((K+1)^2) regardless of d.
class GramObjective {
 public:
  GramObjective(const GradientSet& gs, double radius) : n_(gs.task_count()), radius_(radius) {
    gram_.assign(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i; j < n_; ++j) {
        gram_[i * n_ + j] = gram_[j * n_ + i] = dot(gs.grad(i), gs.grad(j));
      }
    }
    linear_.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) linear_[i] += gram_[i * n_ + j];
      linear_[i] /= static_cast<double>(n_);
    }
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < n_; ++i) t += gram_[i * n_ + i];
    return t;
  }

  // |g_alpha|
  double weighted_norm(std::span<const double> a, std::vector<double>& qa) const {
    qa.assign(n_, 0.0);
    double quad = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) qa[i] += gram_[i * n_ + j] * a[j];
      quad += a[i] * qa[i];
    }
    return std::sqrt(std::max(quad, 0.0));
  }

  // Gradient b + r Q a / |g_a|; the zero subgradient is used for the norm
  // term when |g_a| is degenerate.
  std::vector<double> gradient(std::span<const double> a) const {
    std::vector<double> qa;
    const double s = weighted_norm(a, qa);
    std::vector<double> g = linear_;
    if (s >= kDegenerateEpsilon) {
      for (std::size_t i = 0; i < n_; ++i) g[i] += radius_ * qa[i] / s;
    }
    return g;
  }

 private:
  std::size_t n_;
  double radius_;
  std::vector<double> gram_;
  std::vector<double> linear_;
};

}  // namespace

DualSolution solve_dual(const GradientSet& gs, double rho, const SolverSettings& settings) {
  check_rho(rho);
  settings.validate();
  const std::size_t n = gs.task_count();
  if (n == 1) {
    SimplexWeights alpha({1.0});
    const GradVec g = gs.grad(0);
    const double xi = rho * rho * dot(g, g);
    return {alpha, dual_objective(alpha, gs, xi), g, 0, true};
  }

  const GradVec mu = mean_gradient(gs);
  const double radius = rho * norm(mu);  // sqrt(xi)
  const GramObjective objective(gs, radius);

  std::vector<double> alpha(n, 1.0 / static_cast<double>(n));
  double step = 1.0 / std::max(objective.trace(), std::numeric_limits<double>::min());
  constexpr int kMaxBacktracks = 60;

  int iterations = 0;
  bool converged = false;
  std::vector<double> trial(n);
  while (iterations < settings.max_iterations) {
    ++iterations;
    const std::vector<double> grad = objective.gradient(alpha);
    std::vector<double> next;
    for (int bt = 0; bt <= kMaxBacktracks; ++bt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = alpha[i] - step * grad[i];
      const SimplexWeights projected = project_to_simplex(trial);
      next.assign(projected.values().begin(), projected.values().end());
      // Secant curvature along the step must not exceed 1/step. Gradient
      // differences stay accurate near the optimum where F differences are
      // lost to rounding.
      const std::vector<double> grad_next = objective.gradient(next);
      double curvature = 0.0;
      double dist2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = next[i] - alpha[i];
        curvature += (grad_next[i] - grad[i]) * d;
        dist2 += d * d;
      }
      if (curvature <= dist2 / step) break;
      step *= 0.5;
    }

    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - alpha[i]));
    alpha = next;
    if (change < settings.tolerance) {
      converged = true;
      break;
    }
    step *= 2.0;
  }

  SimplexWeights alpha_star(alpha);
  GradVec g_alpha = weighted_gradient(alpha_star, gs);
  const double value = dot(g_alpha, mu) + radius * norm(g_alpha);
  return {std::move(alpha_star), value, std::move(g_alpha), iterations, converged};
}

RectificationResult rectify(const GradientSet& gs, double rho, const SolverSettings& settings) {
  DualSolution solution = solve_dual(gs, rho, settings);
  const GradVec mu = mean_gradient(gs);
  const double mu_norm = norm(mu);
  const double xi = rho * rho * mu_norm * mu_norm;
  const double g_norm = norm(solution.g_alpha);
  if (mu_norm < kDegenerateEpsilon || g_norm < kDegenerateEpsilon) {
    return {mu, std::move(solution), xi, true};
  }
  GradVec u = mu + solution.g_alpha * (std::sqrt(xi) / g_norm);
  return {std::move(u), std::move(solution), xi, false};
}

}  // namespace camegrad
