#include "camegrad/optimizer.hpp"

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "camegrad/errors.hpp"

namespace camegrad {

void CameGradConfig::validate() const {
  if (!(rho >= 0.0 && rho < 1.0)) throw InvariantError("rho must lie in [0, 1)");
  if (!(kappa >= 1.0) || !std::isfinite(kappa)) throw InvariantError("kappa must be >= 1");
  if (!(nu >= 0.0 && nu <= 1.0)) throw InvariantError("nu must lie in [0, 1]");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvariantError("epsilon must be > 0");
  if (!(sgld_sigma >= 0.0) || !std::isfinite(sgld_sigma)) {
    throw InvariantError("sgld_sigma must be >= 0");
  }
  solver.validate();
}

namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 8> kNames{{
    {Strategy::kLinear, "linear"},
    {Strategy::kS1Only, "s1_only"},
    {Strategy::kS1S3, "s1_s3"},
    {Strategy::kS1SgldS3, "s1_sgld_s3"},
    {Strategy::kNoS1, "no_s1"},
    {Strategy::kNoS2, "no_s2"},
    {Strategy::kNoS3, "no_s3"},
    {Strategy::kFull, "full"},
}};

}  // namespace

std::string_view strategy_name(Strategy s) {
  for (const auto& [tag, name] : kNames) {
    if (tag == s) return name;
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (const auto& [tag, n] : kNames) {
    if (n == name) return tag;
  }
  return std::nullopt;
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all = [] {
    std::vector<Strategy> out;
    for (const auto& entry : kNames) out.push_back(entry.first);
    return out;
  }();
  return all;
}

const std::vector<Strategy>& ablation_grid() {
  static const std::vector<Strategy> grid{Strategy::kLinear, Strategy::kNoS1, Strategy::kNoS2,
                                          Strategy::kNoS3, Strategy::kFull};
  return grid;
}

bool uses_rectification(Strategy s) { return s != Strategy::kLinear && s != Strategy::kNoS1; }

bool uses_energy_injection(Strategy s) {
  return s == Strategy::kNoS1 || s == Strategy::kNoS3 || s == Strategy::kFull;
}

bool uses_fusion(Strategy s) {
  return s == Strategy::kS1S3 || s == Strategy::kNoS2 || s == Strategy::kS1SgldS3 ||
         s == Strategy::kNoS1 || s == Strategy::kFull;
}

GradVec energy_inject(const GradVec& u_rect, const GradVec& g_joint, double kappa,
                      double epsilon) {
  if (u_rect.dim() != g_joint.dim()) throw DimensionMismatch(u_rect.dim(), g_joint.dim());
  if (!(kappa >= 1.0)) throw InvariantError("kappa must be >= 1");
  if (!(epsilon > 0.0)) throw InvariantError("epsilon must be > 0");
  const double tau = kappa * norm(g_joint);
  return u_rect * (tau / (norm(u_rect) + epsilon));
}

GradVec fuse(const GradVec& u_en, const GradVec& g_joint, double kappa, double nu) {
  if (u_en.dim() != g_joint.dim()) throw DimensionMismatch(u_en.dim(), g_joint.dim());
  return u_en * (1.0 - nu) + g_joint * (nu * kappa);
}

StepResult came_grad_step(const GradientSet& gs, const CameGradConfig& cfg, Strategy strategy,
                          CounterRng* noise) {
  cfg.validate();
  if (strategy == Strategy::kS1SgldS3 && noise == nullptr) {
    throw InvariantError("s1_sgld_s3 needs a noise generator");
  }

  StepResult out{joint_gradient(gs), mean_gradient(gs), std::nullopt, 0.0, std::nullopt,
                 GradVec::zeros(gs.dim()), false};
  out.tau_mag = cfg.kappa * norm(out.g_joint);

  if (strategy == Strategy::kLinear) {
    out.g_final = out.g_joint;
    return out;
  }
  if (strategy == Strategy::kNoS1) {
    out.u_en = energy_inject(out.g_joint, out.g_joint, cfg.kappa, cfg.epsilon);
    out.g_final = fuse(*out.u_en, out.g_joint, cfg.kappa, cfg.nu);
    return out;
  }

  out.rectification = rectify(gs, cfg.rho, cfg.solver);
  if (out.rectification->degenerate) {
    out.g_final = out.g_joint;
    out.degenerate_fallback = true;
    return out;
  }
  const GradVec& u_rect = out.rectification->u_rect;

  switch (strategy) {
    case Strategy::kS1Only:
      out.g_final = u_rect;
      break;
    case Strategy::kS1S3:
    case Strategy::kNoS2:
      out.g_final = fuse(u_rect, out.g_joint, cfg.kappa, cfg.nu);
      break;
    case Strategy::kS1SgldS3: {
      std::vector<double> noisy(u_rect.values().begin(), u_rect.values().end());
      for (double& v : noisy) v += cfg.sgld_sigma * noise->normal();
      out.g_final = fuse(GradVec(std::move(noisy)), out.g_joint, cfg.kappa, cfg.nu);
      break;
    }
    case Strategy::kNoS3:
      out.u_en = energy_inject(u_rect, out.g_joint, cfg.kappa, cfg.epsilon);
      out.g_final = *out.u_en;
      break;
    case Strategy::kFull:
      out.u_en = energy_inject(u_rect, out.g_joint, cfg.kappa, cfg.epsilon);
      out.g_final = fuse(*out.u_en, out.g_joint, cfg.kappa, cfg.nu);
      break;
    case Strategy::kLinear:
    case Strategy::kNoS1:
      break;  // handled above
  }
  return out;
}

std::vector<double> sgd_update(std::span<const double> theta, const GradVec& g, double eta) {
  if (theta.size() != g.dim()) throw DimensionMismatch(theta.size(), g.dim());
  if (!(eta > 0.0)) throw InvariantError("learning rate must be > 0");
  std::vector<double> out(theta.begin(), theta.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= eta * g[i];
  return out;
}

}  // namespace camegrad
