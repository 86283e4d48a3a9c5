#include "camegrad/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "camegrad/errors.hpp"

namespace camegrad {

ConflictStats::ConflictStats(std::size_t bins) : histogram_(bins, 0) {
  if (bins < 2) throw InvariantError("histogram needs at least 2 bins");
}

std::size_t ConflictStats::bin_of(double cosine) const {
  const double c = std::clamp(cosine, -1.0, 1.0);
  const std::size_t n = histogram_.size();
  auto bin = static_cast<std::size_t>(std::floor((c + 1.0) * 0.5 * static_cast<double>(n)));
  bin = std::min(bin, n - 1);
  // keep the sign split exact when zero is a bin edge
  if (n % 2 == 0) {
    if (c < 0.0) bin = std::min(bin, n / 2 - 1);
    if (c >= 0.0) bin = std::max(bin, n / 2);
  }
  return bin;
}

std::pair<double, double> ConflictStats::bin_edges(std::size_t i) const {
  const auto n = static_cast<double>(histogram_.size());
  return {-1.0 + 2.0 * static_cast<double>(i) / n, -1.0 + 2.0 * static_cast<double>(i + 1) / n};
}

void ConflictStats::record_cosine(double cosine) {
  if (!std::isfinite(cosine)) throw InvariantError("cosine must be finite");
  const double c = std::clamp(cosine, -1.0, 1.0);
  ++count_;
  if (c < 0.0) ++negative_count_;
  cosine_sum_ += c;
  ++histogram_[bin_of(c)];
}

void ConflictStats::record_pair(const GradVec& g0, const GradVec& gk, double w0, double wk,
                                std::size_t aux_index) {
  if (aux_index < 1) throw InvariantError("auxiliary index must be >= 1");
  const Cosine cos = cosine_similarity(g0, gk);
  if (cos.degenerate) ++degenerate_count_;
  record_cosine(cos.value);
  if (interaction_sums_.size() < aux_index) interaction_sums_.resize(aux_index, 0.0);
  interaction_sums_[aux_index - 1] += w0 * wk * dot(g0, gk);
}

void ConflictStats::record_set(const GradientSet& gs, bool include_aux_pairs) {
  for (std::size_t k = 1; k < gs.task_count(); ++k) {
    record_pair(gs.grad(0), gs.grad(k), gs.weight(0), gs.weight(k), k);
  }
  if (!include_aux_pairs) return;
  for (std::size_t a = 1; a < gs.task_count(); ++a) {
    for (std::size_t b = a + 1; b < gs.task_count(); ++b) {
      const Cosine cos = cosine_similarity(gs.grad(a), gs.grad(b));
      if (cos.degenerate) ++degenerate_count_;
      record_cosine(cos.value);
    }
  }
}

void ConflictStats::merge(const ConflictStats& other) {
  if (other.bins() != bins()) throw InvariantError("cannot merge histograms with different bins");
  count_ += other.count_;
  negative_count_ += other.negative_count_;
  degenerate_count_ += other.degenerate_count_;
  cosine_sum_ += other.cosine_sum_;
  for (std::size_t i = 0; i < histogram_.size(); ++i) histogram_[i] += other.histogram_[i];
  if (interaction_sums_.size() < other.interaction_sums_.size()) {
    interaction_sums_.resize(other.interaction_sums_.size(), 0.0);
  }
  for (std::size_t i = 0; i < other.interaction_sums_.size(); ++i) {
    interaction_sums_[i] += other.interaction_sums_[i];
  }
}

double ConflictStats::negative_ratio() const {
  if (count_ == 0) throw InvariantError("negative ratio of an empty stream");
  return static_cast<double>(negative_count_) / static_cast<double>(count_);
}

double ConflictStats::mean_cosine() const {
  if (count_ == 0) throw InvariantError("mean cosine of an empty stream");
  return std::clamp(cosine_sum_ / static_cast<double>(count_), -1.0, 1.0);
}

CovarianceTraceEstimate covariance_trace(std::span<const GradVec> samples) {
  if (samples.size() < 2) throw InvariantError("covariance trace needs at least 2 samples");
  const std::size_t d = samples.front().dim();
  std::vector<double> mean(d, 0.0);
  for (const GradVec& s : samples) {
    if (s.dim() != d) throw DimensionMismatch(d, s.dim());
    for (std::size_t j = 0; j < d; ++j) mean[j] += s[j];
  }
  const auto n = static_cast<double>(samples.size());
  for (double& m : mean) m /= n;
  double ss = 0.0;
  for (const GradVec& s : samples) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = s[j] - mean[j];
      ss += dev * dev;
    }
  }
  return {samples.size(), ss / (n - 1.0)};
}

double kappa_scaling_check(std::span<const GradVec> samples, double kappa) {
  const double base = covariance_trace(samples).trace;
  if (!(base > 0.0)) throw InvariantError("base covariance trace is zero");
  std::vector<GradVec> scaled;
  scaled.reserve(samples.size());
  for (const GradVec& s : samples) scaled.push_back(s * kappa);
  return covariance_trace(scaled).trace / base;
}

std::vector<std::pair<std::size_t, double>> trace_series(std::span<const GradVec> samples,
                                                         std::size_t window) {
  if (window < 2) throw InvariantError("trace window must be >= 2");
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t t = 1; t < samples.size(); ++t) {
    const std::size_t first = t + 1 >= window ? t + 1 - window : 0;
    out.emplace_back(t, covariance_trace(samples.subspan(first, t + 1 - first)).trace);
  }
  return out;
}

void write_histogram_csv(std::ostream& out, const ConflictStats& stats) {
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < stats.bins(); ++i) {
    const auto [lo, hi] = stats.bin_edges(i);
    out << format_double(lo) << ',' << format_double(hi) << ',' << stats.histogram()[i] << '\n';
  }
}

void write_trace_csv(std::ostream& out, std::span<const std::pair<std::size_t, double>> series) {
  out << "step,trace\n";
  for (const auto& [step, trace] : series) out << step << ',' << format_double(trace) << '\n';
}

}  // namespace camegrad
