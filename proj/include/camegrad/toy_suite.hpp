#pragma once

// Synthetic multi-task problems with known structure and the deterministic
// SGD loop that drives every strategy over them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "camegrad/diagnostics.hpp"
#include "camegrad/grad_core.hpp"
#include "camegrad/optimizer.hpp"
#include "camegrad/rng.hpp"

namespace camegrad {

struct TaskEvaluation {
  std::vector<double> losses;
  std::vector<GradVec> grads;

  /// Unit task weights.
  GradientSet gradient_set() const { return GradientSet(grads); }
};

// ---------------------------------------------------------------------------
// analytic landscapes (fixtures, constants chosen so the documented
// invariants hold exactly)

/// L_0 = 1/2 (t - a0)^T diag(1, 10) (t - a0), a0 = (2, 0)
/// L_1 = 1/2 (t - a1)^T diag(10, 1) (t - a1), a1 = (-2, 0)
TaskEvaluation conflict_landscape(std::span<const double> theta);

/// Single-task double well 0.05 t^4 - 0.5 t^2 + 0.1 t with a narrow Gaussian
/// dimple -0.3 exp(-(t + 2)^2 / 0.15^2) sharpening the left basin.
TaskEvaluation sharp_flat_landscape(std::span<const double> theta);

// ---------------------------------------------------------------------------
// multi-head MLP

/// One tanh hidden layer shared by a regression head (task 0, half squared
/// error) and `aux_heads` logistic heads (tasks 1..K, binary cross-entropy).
struct MlpSpec {
  std::size_t input_dim = 8;
  std::size_t hidden_dim = 16;
  std::size_t aux_heads = 2;

  std::size_t task_count() const { return aux_heads + 1; }
  std::size_t param_count() const;
  void validate() const;
};

struct Batch {
  std::size_t size = 0;
  std::size_t input_dim = 0;
  std::vector<double> inputs;               // row-major, size x input_dim
  std::vector<double> targets;              // regression targets
  std::vector<std::vector<double>> labels;  // per auxiliary head, 0 or 1
};

/// Standard-normal inputs; target = w.x with teacher w = e_0; label k is
/// [v_k . x > 0] with v_k = cos(120 deg) e_0 + sin(120 deg) e_k.
Batch synth_data(CounterRng& rng, std::size_t n, std::size_t input_dim, std::size_t aux_heads);
Batch synth_data(std::uint64_t seed, std::size_t n, std::size_t input_dim, std::size_t aux_heads);

/// Per-task losses (batch means) and full-length per-task gradients; head
/// parameters not owned by a task get zero gradient.
TaskEvaluation mlp_forward_backward(const MlpSpec& spec, std::span<const double> params,
                                    const Batch& batch);

std::vector<double> mlp_initial_params(const MlpSpec& spec, CounterRng& rng);

// ---------------------------------------------------------------------------
// problems and training

class ToyProblem {
 public:
  virtual ~ToyProblem() = default;
  virtual std::string_view name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t task_count() const = 0;
  virtual std::vector<double> initial_params(CounterRng& rng) const = 0;
  /// Deterministic problems ignore `rng`; stochastic ones draw their batch from it.
  virtual TaskEvaluation evaluate(std::span<const double> theta, CounterRng& rng) const = 0;
};

inline constexpr std::size_t kDefaultMlpBatch = 64;

/// "conflict_landscape", "sharp_flat" or "mlp". Returns nullptr for unknown names.
std::unique_ptr<ToyProblem> make_problem(std::string_view name, const MlpSpec& mlp = {},
                                         std::size_t batch_size = kDefaultMlpBatch);
const std::vector<std::string>& problem_names();

struct TrainConfig {
  double eta = 0.01;
  std::size_t steps = 2000;
  std::uint64_t seed = 7;
  Strategy strategy = Strategy::kFull;
  CameGradConfig came;
  std::size_t trace_window = kDefaultTraceWindow;
  bool keep_gradients = false;  // store every g_final in the log

  void validate() const;
};

struct TrainRecord {
  std::size_t step;
  std::vector<double> losses;  // at the parameters the step started from
  double joint_norm;
  double min_cosine;      // min_k cos(g_0, g_k); NaN when K = 0
  double negative_ratio;  // over all (g_0, g_k) pairs seen so far
};

struct TrainLog {
  std::string problem;
  Strategy strategy;
  std::uint64_t seed;
  std::vector<TrainRecord> records;
  std::vector<double> final_params;
  ConflictStats conflicts;
  /// Covariance trace of g_final over the trailing window, when >= 2 steps ran.
  std::optional<double> trace;
  std::vector<GradVec> g_final_history;  // only with keep_gradients
  std::optional<std::size_t> diverged_at;

  double final_mean_loss() const;
  double final_max_loss() const;
};

using ProgressFn = std::function<void(const TrainRecord&)>;

/// Runs cfg.steps iterations of evaluate -> came_grad_step -> sgd_update.
/// Bit-for-bit deterministic in (problem, cfg). A non-finite loss or update
/// stops the run and sets `diverged_at`.
TrainLog train(const ToyProblem& problem, const TrainConfig& cfg, const ProgressFn& progress = {});

/// step,strategy,seed,loss_0..loss_K,joint_norm,min_cosine,negative_ratio
void write_train_log_csv(std::ostream& out, const TrainLog& log);

/// <problem>_<strategy>_<seed>.csv
std::string train_log_filename(const TrainLog& log);

}  // namespace camegrad
