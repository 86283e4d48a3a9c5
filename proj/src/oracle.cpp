#include "camegrad/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "camegrad/errors.hpp"
#include "camegrad/rng.hpp"

namespace camegrad {
namespace {

using Dir = std::vector<double>;

double radical_inverse_base2(std::uint64_t i) {
  double inv = 0.5;
  double out = 0.0;
  while (i > 0) {
    if (i & 1U) out += inv;
    inv *= 0.5;
    i >>= 1U;
  }
  return out;
}

void normalize(Dir& v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  const double n = std::sqrt(n2);
  for (double& x : v) x /= n;
}

// Evaluates min_i g_i . (mu + r dir) from precomputed projections.
class BoundaryObjective {
 public:
  BoundaryObjective(const GradientSet& gs, const GradVec& mu, double radius)
      : gs_(gs), radius_(radius) {
    for (const GradVec& g : gs.grads()) g_dot_mu_.push_back(dot(g, mu));
  }

  double operator()(const Dir& dir) const {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < gs_.task_count(); ++i) {
      const auto g = gs_.grad(i).values();
      double proj = 0.0;
      for (std::size_t j = 0; j < dir.size(); ++j) proj += g[j] * dir[j];
      worst = std::min(worst, g_dot_mu_[i] + radius_ * proj);
    }
    return worst;
  }

 private:
  const GradientSet& gs_;
  double radius_;
  std::vector<double> g_dot_mu_;
};

// Orthonormal basis of the tangent space at unit vector p.
std::vector<Dir> tangent_basis(const Dir& p) {
  const std::size_t d = p.size();
  std::vector<Dir> basis;
  for (std::size_t e = 0; e < d && basis.size() + 1 < d; ++e) {
    Dir v(d, 0.0);
    v[e] = 1.0;
    auto remove = [&](const Dir& q) {
      double c = 0.0;
      for (std::size_t j = 0; j < d; ++j) c += v[j] * q[j];
      for (std::size_t j = 0; j < d; ++j) v[j] -= c * q[j];
    };
    remove(p);
    for (const Dir& b : basis) remove(b);
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (n2 < 1e-8) continue;
    normalize(v);
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace

std::vector<std::vector<double>> sphere_directions(std::size_t dim, std::size_t count,
                                                   std::uint64_t seed) {
  std::vector<Dir> out;
  out.reserve(count);
  if (dim == 1) {
    for (std::size_t i = 0; i < count; ++i) out.push_back({i % 2 == 0 ? 1.0 : -1.0});
  } else if (dim == 2) {
    // van der Corput angles: near-uniform for every prefix length
    for (std::size_t i = 0; i < count; ++i) {
      const double a = 2.0 * std::numbers::pi * radical_inverse_base2(i);
      out.push_back({std::cos(a), std::sin(a)});
    }
  } else if (dim == 3) {
    // Kronecker lattice with the plastic-number (R2) increments, mapped to
    // the sphere by the area-preserving cylinder projection
    constexpr double kPlastic = 1.32471795724474602596;
    const double a1 = 1.0 / kPlastic;
    const double a2 = 1.0 / (kPlastic * kPlastic);
    for (std::size_t i = 0; i < count; ++i) {
      const double x = std::fmod(0.5 + a1 * static_cast<double>(i), 1.0);
      const double y = std::fmod(0.5 + a2 * static_cast<double>(i), 1.0);
      const double z = 1.0 - 2.0 * x;
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = 2.0 * std::numbers::pi * y;
      out.push_back({s * std::cos(phi), s * std::sin(phi), z});
    }
  } else {
    // rejection sampling from the cube, seeded
    CounterRng rng(seed);
    while (out.size() < count) {
      Dir v(dim);
      double n2 = 0.0;
      for (double& x : v) {
        x = rng.uniform(-1.0, 1.0);
        n2 += x * x;
      }
      if (n2 > 1.0 || n2 < 1e-6) continue;
      normalize(v);
      out.push_back(std::move(v));
    }
  }
  return out;
}

OracleResult primal_maxmin_oracle(const GradientSet& gs, double rho, std::size_t resolution,
                                  const OracleOptions& options) {
  const std::size_t d = gs.dim();
  if (d > kOracleMaxDim) {
    throw InvariantError("primal oracle supports d <= " + std::to_string(kOracleMaxDim) +
                         ", got " + std::to_string(d));
  }
  if (resolution < 100) throw InvariantError("oracle resolution must be >= 100");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvariantError("rho must lie in [0, 1)");

  const GradVec mu = mean_gradient(gs);
  const double mu_norm = norm(mu);
  if (mu_norm < 1e-12) return {GradVec::zeros(d), 0.0, 0};

  const double radius = rho * mu_norm;
  double best_value = std::numeric_limits<double>::infinity();
  for (const GradVec& g : gs.grads()) best_value = std::min(best_value, dot(g, mu));
  GradVec best_u = mu;
  std::size_t evaluated = 1;
  if (radius == 0.0) return {best_u, best_value, evaluated};

  const BoundaryObjective objective(gs, mu, radius);
  Dir best_dir;
  for (const Dir& dir : sphere_directions(d, resolution, options.seed)) {
    const double v = objective(dir);
    ++evaluated;
    if (v > best_value) {
      best_value = v;
      best_dir = dir;
    }
  }

  if (!best_dir.empty() && d > 1 && options.refine_levels > 0) {
    // zoom: re-sample a shrinking tangent ball around the incumbent direction
    CounterRng rng(options.seed ^ 0x5EEDULL);
    const double surface_per_point =
        std::pow(1.0 / static_cast<double>(resolution), 1.0 / static_cast<double>(d - 1));
    double h = 8.0 * surface_per_point;
    for (int level = 0; level < options.refine_levels; ++level) {
      const std::vector<Dir> basis = tangent_basis(best_dir);
      Dir center = best_dir;
      for (std::size_t s = 0; s < options.refine_samples; ++s) {
        Dir cand = center;
        for (const Dir& b : basis) {
          const double c = rng.uniform(-h, h);
          for (std::size_t j = 0; j < d; ++j) cand[j] += c * b[j];
        }
        normalize(cand);
        const double v = objective(cand);
        ++evaluated;
        if (v > best_value) {
          best_value = v;
          best_dir = cand;
        }
      }
      h *= 0.7;
    }
  }

  if (!best_dir.empty()) {
    std::vector<double> u(d);
    for (std::size_t j = 0; j < d; ++j) u[j] = mu[j] + radius * best_dir[j];
    best_u = GradVec(std::move(u));
  }
  return {best_u, best_value, evaluated};
}

GridOracleResult dual_grid_oracle(const GradientSet& gs, double rho, double step) {
  const std::size_t n = gs.task_count();
  if (n > kGridOracleMaxTasks) {
    throw InvariantError("grid oracle supports K+1 <= " + std::to_string(kGridOracleMaxTasks));
  }
  if (!(step > 0.0 && step <= 1.0)) throw InvariantError("grid step must lie in (0, 1]");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvariantError("rho must lie in [0, 1)");

  const std::size_t d = gs.dim();
  const GradVec mu = mean_gradient(gs);
  const double radius = rho * norm(mu);

  // F evaluated directly from the combined vector, not via a Gram matrix
  auto evaluate = [&](const std::vector<double>& alpha) {
    double lin = 0.0;
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double comp = 0.0;
      for (std::size_t i = 0; i < n; ++i) comp += alpha[i] * gs.grad(i)[j];
      lin += comp * mu[j];
      sq += comp * comp;
    }
    return lin + radius * std::sqrt(sq);
  };

  if (n == 1) return {{1.0}, evaluate({1.0})};

  const auto steps = static_cast<std::size_t>(std::llround(1.0 / step));
  GridOracleResult best{{}, std::numeric_limits<double>::infinity()};
  std::vector<double> alpha(n);
  for (std::size_t i = 0; i <= steps; ++i) {
    const std::size_t j_max = n == 2 ? 0 : steps - i;
    for (std::size_t j = 0; j <= j_max; ++j) {
      alpha[0] = static_cast<double>(i) / static_cast<double>(steps);
      if (n == 2) {
        alpha[1] = 1.0 - alpha[0];
      } else {
        alpha[1] = static_cast<double>(j) / static_cast<double>(steps);
        alpha[2] = std::max(0.0, 1.0 - alpha[0] - alpha[1]);
      }
      const double v = evaluate(alpha);
      if (v < best.value) best = {alpha, v};
    }
  }
  return best;
}

}  // namespace camegrad
