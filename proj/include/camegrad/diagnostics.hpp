#pragma once

// Conflict statistics over a stream of gradient pairs, and noise-covariance
// trace measurements.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "camegrad/grad_core.hpp"

namespace camegrad {

inline constexpr std::size_t kDefaultHistogramBins = 40;
inline constexpr std::size_t kDefaultTraceWindow = 100;

class ConflictStats {
 public:
  explicit ConflictStats(std::size_t bins = kDefaultHistogramBins);

  /// Records the primary/auxiliary pair (g0, gk); `aux_index` is k >= 1 and
  /// selects the interaction-sum slot.
  void record_pair(const GradVec& g0, const GradVec& gk, double w0 = 1.0, double wk = 1.0,
                   std::size_t aux_index = 1);

  /// Records every (g_0, g_k) pair of the set. With `include_aux_pairs`,
  /// auxiliary/auxiliary pairs are also added to the histogram and counts
  /// (they never touch the interaction sums).
  void record_set(const GradientSet& gs, bool include_aux_pairs = false);

  /// Records a cosine observed elsewhere (e.g. read back from a log).
  void record_cosine(double cosine);

  /// Associative, commutative combination of two accumulators with equal bins.
  void merge(const ConflictStats& other);

  std::size_t count() const noexcept { return count_; }
  std::size_t negative_count() const noexcept { return negative_count_; }
  std::size_t degenerate_count() const noexcept { return degenerate_count_; }
  std::size_t bins() const noexcept { return histogram_.size(); }
  const std::vector<std::size_t>& histogram() const noexcept { return histogram_; }
  const std::vector<double>& interaction_sums() const noexcept { return interaction_sums_; }

  /// Throws InvariantError on an empty accumulator.
  double negative_ratio() const;
  double mean_cosine() const;

  /// [lo, hi) edges of bin i; the last bin is closed at +1.
  std::pair<double, double> bin_edges(std::size_t i) const;
  std::size_t bin_of(double cosine) const;

 private:
  std::size_t count_ = 0;
  std::size_t negative_count_ = 0;
  std::size_t degenerate_count_ = 0;
  double cosine_sum_ = 0.0;
  std::vector<std::size_t> histogram_;
  std::vector<double> interaction_sums_;
};

struct CovarianceTraceEstimate {
  std::size_t sample_count;
  double trace;
};

/// Trace of the unbiased sample covariance, (1/(n-1)) sum |x_i - mean|^2.
CovarianceTraceEstimate covariance_trace(std::span<const GradVec> samples);

/// trace(kappa X) / trace(X); kappa^2 up to rounding.
double kappa_scaling_check(std::span<const GradVec> samples, double kappa);

/// Trailing-window traces: entry t covers samples [t - window + 1, t] and is
/// emitted once at least two samples are available.
std::vector<std::pair<std::size_t, double>> trace_series(std::span<const GradVec> samples,
                                                         std::size_t window = kDefaultTraceWindow);

void write_histogram_csv(std::ostream& out, const ConflictStats& stats);
void write_trace_csv(std::ostream& out, std::span<const std::pair<std::size_t, double>> series);

}  // namespace camegrad
