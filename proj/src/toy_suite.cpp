#include "camegrad/toy_suite.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "camegrad/errors.hpp"

namespace camegrad {
namespace {

void require_dim(std::span<const double> theta, std::size_t d) {
  if (theta.size() != d) throw DimensionMismatch(theta.size(), d);
}

}  // namespace

TaskEvaluation conflict_landscape(std::span<const double> theta) {
  require_dim(theta, 2);
  const double x0 = theta[0] - 2.0;
  const double y0 = theta[1];
  const double x1 = theta[0] + 2.0;
  const double y1 = theta[1];
  TaskEvaluation out;
  out.losses = {0.5 * (x0 * x0 + 10.0 * y0 * y0), 0.5 * (10.0 * x1 * x1 + y1 * y1)};
  out.grads = {GradVec{x0, 10.0 * y0}, GradVec{10.0 * x1, y1}};
  return out;
}

TaskEvaluation sharp_flat_landscape(std::span<const double> theta) {
  require_dim(theta, 1);
  constexpr double kDepth = 0.3;
  constexpr double kCenter = -2.0;
  constexpr double kWidth = 0.15;
  const double t = theta[0];
  const double u = (t - kCenter) / kWidth;
  const double dimple = kDepth * std::exp(-u * u);
  const double loss = 0.05 * t * t * t * t - 0.5 * t * t + 0.1 * t - dimple;
  const double grad = 0.2 * t * t * t - t + 0.1 + dimple * 2.0 * u / kWidth;
  TaskEvaluation out;
  out.losses = {loss};
  out.grads = {GradVec{grad}};
  return out;
}

// ---------------------------------------------------------------------------

std::size_t MlpSpec::param_count() const {
  return hidden_dim * input_dim + hidden_dim + task_count() * (hidden_dim + 1);
}

void MlpSpec::validate() const {
  if (input_dim < 1) throw InvariantError("mlp input_dim must be >= 1");
  if (hidden_dim < 1) throw InvariantError("mlp hidden_dim must be >= 1");
  if (aux_heads < 1) throw InvariantError("mlp needs at least one auxiliary head");
}

Batch synth_data(CounterRng& rng, std::size_t n, std::size_t input_dim, std::size_t aux_heads) {
  if (n < 1) throw InvariantError("batch size must be >= 1");
  if (input_dim < aux_heads + 1) {
    throw InvariantError("input_dim must be >= aux_heads + 1 for distinct label directions");
  }
  const double c = std::cos(2.0 * std::numbers::pi / 3.0);
  const double s = std::sin(2.0 * std::numbers::pi / 3.0);
  Batch b;
  b.size = n;
  b.input_dim = input_dim;
  b.inputs.resize(n * input_dim);
  b.targets.resize(n);
  b.labels.assign(aux_heads, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double* x = &b.inputs[i * input_dim];
    for (std::size_t j = 0; j < input_dim; ++j) x[j] = rng.normal();
    b.targets[i] = x[0];
    for (std::size_t k = 0; k < aux_heads; ++k) {
      b.labels[k][i] = c * x[0] + s * x[k + 1] > 0.0 ? 1.0 : 0.0;
    }
  }
  return b;
}

Batch synth_data(std::uint64_t seed, std::size_t n, std::size_t input_dim, std::size_t aux_heads) {
  CounterRng rng(seed);
  return synth_data(rng, n, input_dim, aux_heads);
}

namespace {

// Parameter layout: W1 (hidden x input, row-major), b1 (hidden), then per
// head h: v_h (hidden), c_h.
struct MlpLayout {
  explicit MlpLayout(const MlpSpec& spec)
      : in(spec.input_dim), hid(spec.hidden_dim), b1(hid * in), heads(b1 + hid) {}
  std::size_t head_v(std::size_t h) const { return heads + h * (hid + 1); }
  std::size_t head_c(std::size_t h) const { return head_v(h) + hid; }

  std::size_t in, hid, b1, heads;
};

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// -log sigma(z) for y = 1, -log(1 - sigma(z)) for y = 0
double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

TaskEvaluation mlp_forward_backward(const MlpSpec& spec, std::span<const double> params,
                                    const Batch& batch) {
  spec.validate();
  if (params.size() != spec.param_count()) throw DimensionMismatch(params.size(), spec.param_count());
  if (batch.size < 1) throw InvariantError("batch must be non-empty");
  if (batch.input_dim != spec.input_dim) throw DimensionMismatch(batch.input_dim, spec.input_dim);
  if (batch.labels.size() != spec.aux_heads) {
    throw DimensionMismatch(batch.labels.size(), spec.aux_heads);
  }

  const MlpLayout lay(spec);
  const std::size_t tasks = spec.task_count();
  const double inv_n = 1.0 / static_cast<double>(batch.size);
  std::vector<double> losses(tasks, 0.0);
  std::vector<std::vector<double>> grads(tasks, std::vector<double>(params.size(), 0.0));
  std::vector<double> act(lay.hid);
  std::vector<double> dz(lay.hid);

  for (std::size_t s = 0; s < batch.size; ++s) {
    const double* x = &batch.inputs[s * lay.in];
    for (std::size_t h = 0; h < lay.hid; ++h) {
      double z = params[lay.b1 + h];
      for (std::size_t j = 0; j < lay.in; ++j) z += params[h * lay.in + j] * x[j];
      act[h] = std::tanh(z);
    }
    for (std::size_t t = 0; t < tasks; ++t) {
      double out = params[lay.head_c(t)];
      for (std::size_t h = 0; h < lay.hid; ++h) out += params[lay.head_v(t) + h] * act[h];

      // dL/d(out) for this sample, already divided by the batch size
      double delta = 0.0;
      if (t == 0) {
        const double r = out - batch.targets[s];
        losses[t] += 0.5 * r * r * inv_n;
        delta = r * inv_n;
      } else {
        const double y = batch.labels[t - 1][s];
        losses[t] += bce_with_logit(out, y) * inv_n;
        delta = (sigmoid(out) - y) * inv_n;
      }

      std::vector<double>& g = grads[t];
      g[lay.head_c(t)] += delta;
      for (std::size_t h = 0; h < lay.hid; ++h) {
        g[lay.head_v(t) + h] += delta * act[h];
        dz[h] = delta * params[lay.head_v(t) + h] * (1.0 - act[h] * act[h]);
      }
      for (std::size_t h = 0; h < lay.hid; ++h) {
        g[lay.b1 + h] += dz[h];
        for (std::size_t j = 0; j < lay.in; ++j) g[h * lay.in + j] += dz[h] * x[j];
      }
    }
  }

  TaskEvaluation out;
  out.losses = std::move(losses);
  for (auto& g : grads) out.grads.emplace_back(std::move(g));
  return out;
}

std::vector<double> mlp_initial_params(const MlpSpec& spec, CounterRng& rng) {
  spec.validate();
  const MlpLayout lay(spec);
  std::vector<double> p(spec.param_count(), 0.0);
  const double s_in = 1.0 / std::sqrt(static_cast<double>(lay.in));
  const double s_hid = 1.0 / std::sqrt(static_cast<double>(lay.hid));
  for (std::size_t i = 0; i < lay.b1; ++i) p[i] = s_in * rng.normal();
  for (std::size_t t = 0; t < spec.task_count(); ++t) {
    for (std::size_t h = 0; h < lay.hid; ++h) p[lay.head_v(t) + h] = s_hid * rng.normal();
  }
  return p;
}

// ---------------------------------------------------------------------------

namespace {

class ConflictLandscapeProblem final : public ToyProblem {
 public:
  std::string_view name() const override { return "conflict_landscape"; }
  std::size_t dim() const override { return 2; }
  std::size_t task_count() const override { return 2; }
  std::vector<double> initial_params(CounterRng& rng) const override {
    const double x = rng.uniform(-4.0, 4.0);
    const double y = rng.uniform(-4.0, 4.0);
    return {x, y};
  }
  TaskEvaluation evaluate(std::span<const double> theta, CounterRng&) const override {
    return conflict_landscape(theta);
  }
};

class SharpFlatProblem final : public ToyProblem {
 public:
  std::string_view name() const override { return "sharp_flat"; }
  std::size_t dim() const override { return 1; }
  std::size_t task_count() const override { return 1; }
  std::vector<double> initial_params(CounterRng& rng) const override {
    return {rng.uniform(-3.0, 3.0)};
  }
  TaskEvaluation evaluate(std::span<const double> theta, CounterRng&) const override {
    return sharp_flat_landscape(theta);
  }
};

class MlpProblem final : public ToyProblem {
 public:
  MlpProblem(const MlpSpec& spec, std::size_t batch_size) : spec_(spec), batch_size_(batch_size) {
    spec_.validate();
    if (batch_size_ < 1) throw InvariantError("batch size must be >= 1");
    if (spec_.input_dim < spec_.aux_heads + 1) {
      throw InvariantError("mlp input_dim must be >= aux_heads + 1");
    }
  }
  std::string_view name() const override { return "mlp"; }
  std::size_t dim() const override { return spec_.param_count(); }
  std::size_t task_count() const override { return spec_.task_count(); }
  std::vector<double> initial_params(CounterRng& rng) const override {
    return mlp_initial_params(spec_, rng);
  }
  TaskEvaluation evaluate(std::span<const double> theta, CounterRng& rng) const override {
    const Batch batch = synth_data(rng, batch_size_, spec_.input_dim, spec_.aux_heads);
    return mlp_forward_backward(spec_, theta, batch);
  }

 private:
  MlpSpec spec_;
  std::size_t batch_size_;
};

}  // namespace

std::unique_ptr<ToyProblem> make_problem(std::string_view name, const MlpSpec& mlp,
                                         std::size_t batch_size) {
  if (name == "conflict_landscape") return std::make_unique<ConflictLandscapeProblem>();
  if (name == "sharp_flat") return std::make_unique<SharpFlatProblem>();
  if (name == "mlp") return std::make_unique<MlpProblem>(mlp, batch_size);
  return nullptr;
}

const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names{"conflict_landscape", "sharp_flat", "mlp"};
  return names;
}

void TrainConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvariantError("eta must be > 0");
  if (steps < 1) throw InvariantError("steps must be >= 1");
  if (trace_window < 2) throw InvariantError("trace window must be >= 2");
  came.validate();
}

double TrainLog::final_mean_loss() const {
  if (records.empty()) throw InvariantError("empty training log");
  const auto& l = records.back().losses;
  double s = 0.0;
  for (double v : l) s += v;
  return s / static_cast<double>(l.size());
}

double TrainLog::final_max_loss() const {
  if (records.empty()) throw InvariantError("empty training log");
  const auto& l = records.back().losses;
  return *std::max_element(l.begin(), l.end());
}

TrainLog train(const ToyProblem& problem, const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  CounterRng rng(cfg.seed);
  TrainLog log{std::string(problem.name()), cfg.strategy, cfg.seed, {}, {}, ConflictStats{},
               std::nullopt, {}, std::nullopt};
  std::vector<double> theta = problem.initial_params(rng);
  std::deque<GradVec> window;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    TaskEvaluation eval;
    try {
      eval = problem.evaluate(theta, rng);
    } catch (const InvariantError&) {
      log.diverged_at = step;  // non-finite gradient
      break;
    }
    const bool finite = std::all_of(eval.losses.begin(), eval.losses.end(),
                                    [](double v) { return std::isfinite(v); });
    if (!finite) {
      log.diverged_at = step;
      break;
    }

    const GradientSet gs = eval.gradient_set();
    double min_cos = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 1; k < gs.task_count(); ++k) {
      const double c = cosine_similarity(gs.grad(0), gs.grad(k)).value;
      min_cos = k == 1 ? c : std::min(min_cos, c);
    }
    log.conflicts.record_set(gs);

    std::vector<double> next;
    double joint_norm = 0.0;
    try {
      const StepResult res = came_grad_step(gs, cfg.came, cfg.strategy, &rng);
      joint_norm = norm(res.g_joint);
      next = sgd_update(theta, res.g_final, cfg.eta);
      if (!std::all_of(next.begin(), next.end(), [](double v) { return std::isfinite(v); })) {
        throw InvariantError("non-finite parameters");
      }
      window.push_back(res.g_final);
      if (window.size() > cfg.trace_window) window.pop_front();
      if (cfg.keep_gradients) log.g_final_history.push_back(res.g_final);
    } catch (const InvariantError&) {
      log.diverged_at = step;
      break;
    }

    const double neg_ratio = log.conflicts.count() > 0 ? log.conflicts.negative_ratio() : 0.0;
    log.records.push_back({step, eval.losses, joint_norm, min_cos, neg_ratio});
    if (progress) progress(log.records.back());
    theta = std::move(next);
  }

  if (window.size() >= 2) {
    const std::vector<GradVec> samples(window.begin(), window.end());
    log.trace = covariance_trace(samples).trace;
  }
  log.final_params = std::move(theta);
  return log;
}

void write_train_log_csv(std::ostream& out, const TrainLog& log) {
  const std::size_t tasks = log.records.empty() ? 0 : log.records.front().losses.size();
  out << "step,strategy,seed";
  for (std::size_t i = 0; i < tasks; ++i) out << ",loss_" << i;
  out << ",joint_norm,min_cosine,negative_ratio\n";
  const std::string_view strategy = strategy_name(log.strategy);
  for (const TrainRecord& r : log.records) {
    out << r.step << ',' << strategy << ',' << log.seed;
    for (double l : r.losses) out << ',' << format_double(l);
    out << ',' << format_double(r.joint_norm) << ','
        << (std::isnan(r.min_cosine) ? std::string("nan") : format_double(r.min_cosine)) << ','
        << format_double(r.negative_ratio) << '\n';
  }
}

std::string train_log_filename(const TrainLog& log) {
  return log.problem + "_" + std::string(strategy_name(log.strategy)) + "_" +
         std::to_string(log.seed) + ".csv";
}

}  // namespace camegrad
