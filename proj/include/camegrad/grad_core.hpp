#pragma once

// Dense gradient algebra and the containers shared by the rest of the library.

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace camegrad {

/// Threshold below which a vector counts as zero for cosine similarity.
inline constexpr double kCosineEpsilon = 1e-12;

/// A dense, finite, non-empty vector of doubles.
class GradVec {
 public:
  GradVec(std::initializer_list<double> values);
  explicit GradVec(std::vector<double> values);
  static GradVec zeros(std::size_t dim);

  std::size_t dim() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& as_vector() const noexcept { return values_; }

  GradVec& operator+=(const GradVec& rhs);
  GradVec& operator-=(const GradVec& rhs);
  GradVec& operator*=(double s);

  friend GradVec operator+(GradVec lhs, const GradVec& rhs) { return lhs += rhs; }
  friend GradVec operator-(GradVec lhs, const GradVec& rhs) { return lhs -= rhs; }
  friend GradVec operator*(GradVec v, double s) { return v *= s; }
  friend GradVec operator*(double s, GradVec v) { return v *= s; }
  friend bool operator==(const GradVec&, const GradVec&) = default;

 private:
  std::vector<double> values_;
};

double dot(const GradVec& a, const GradVec& b);
double norm(const GradVec& a);

struct Cosine {
  double value = 0.0;
  // true when either input had norm < kCosineEpsilon; value is then 0
  bool degenerate = false;
};

/// dot / (|a| |b|), clamped to [-1, 1]. Never throws on zero vectors.
Cosine cosine_similarity(const GradVec& a, const GradVec& b);

/// K+1 task gradients (index 0 = primary task) and their positive static weights.
class GradientSet {
 public:
  GradientSet(std::vector<GradVec> grads, std::vector<double> weights);
  /// All weights equal to one.
  explicit GradientSet(std::vector<GradVec> grads);

  std::size_t task_count() const noexcept { return grads_.size(); }
  std::size_t aux_count() const noexcept { return grads_.size() - 1; }
  std::size_t dim() const noexcept { return grads_.front().dim(); }

  const GradVec& grad(std::size_t i) const { return grads_.at(i); }
  double weight(std::size_t i) const { return weights_.at(i); }
  const std::vector<GradVec>& grads() const noexcept { return grads_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// Same weights, every gradient multiplied by `c`.
  GradientSet scaled(double c) const;

 private:
  std::vector<GradVec> grads_;
  std::vector<double> weights_;
};

/// g_joint = sum_i w_i g_i
GradVec joint_gradient(const GradientSet& gs);

/// mu = (1 / (K+1)) sum_i g_i. Weights are deliberately not applied.
GradVec mean_gradient(const GradientSet& gs);

/// I_k = w_0 w_k (g_0 . g_k), for 1 <= k <= K.
double interaction_term(const GradientSet& gs, std::size_t k);

struct EnergyDecomposition {
  std::vector<double> squared_terms;       // w_i^2 |g_i|^2, i = 0..K
  std::vector<double> interaction_terms;   // 2 I_k, k = 1..K
  double approximate = 0.0;                // sum of the two lists above
  double exact = 0.0;                      // |g_joint|^2
};

/// Squared joint norm split into per-task energy and primary/auxiliary
/// interactions; auxiliary/auxiliary cross terms are left out of `approximate`.
EnergyDecomposition joint_energy_decomposition(const GradientSet& gs);

// Text format: "d K+1" / K+1 weights / K+1 rows of d components.
GradientSet parse_gradient_set(std::istream& in);
GradientSet read_gradient_set_file(const std::string& path);
void write_gradient_set(std::ostream& out, const GradientSet& gs);

/// Shortest round-trip decimal representation, locale independent.
std::string format_double(double v);

}  // namespace camegrad
