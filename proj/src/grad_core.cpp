#include "camegrad/grad_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "camegrad/errors.hpp"

namespace camegrad {
namespace {

void require_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InvariantError("GradVec component is not finite");
  }
}

void require_same_dim(const GradVec& a, const GradVec& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
}

}  // namespace

GradVec::GradVec(std::initializer_list<double> values) : GradVec(std::vector<double>(values)) {}

GradVec::GradVec(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvariantError("GradVec must have dimension >= 1");
  require_finite(values_);
}

GradVec GradVec::zeros(std::size_t dim) { return GradVec(std::vector<double>(dim, 0.0)); }

GradVec& GradVec::operator+=(const GradVec& rhs) {
  require_same_dim(*this, rhs);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += rhs.values_[i];
  require_finite(values_);
  return *this;
}

GradVec& GradVec::operator-=(const GradVec& rhs) {
  require_same_dim(*this, rhs);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= rhs.values_[i];
  require_finite(values_);
  return *this;
}

GradVec& GradVec::operator*=(double s) {
  for (double& v : values_) v *= s;
  require_finite(values_);
  return *this;
}

double dot(const GradVec& a, const GradVec& b) {
  require_same_dim(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(const GradVec& a) {
  // hypot-style scaling is unnecessary at double range for gradients
  return std::sqrt(dot(a, a));
}

Cosine cosine_similarity(const GradVec& a, const GradVec& b) {
  require_same_dim(a, b);
  const double na = norm(a);
  const double nb = norm(b);
  if (na < kCosineEpsilon || nb < kCosineEpsilon) return {0.0, true};
  return {std::clamp(dot(a, b) / (na * nb), -1.0, 1.0), false};
}

GradientSet::GradientSet(std::vector<GradVec> grads, std::vector<double> weights)
    : grads_(std::move(grads)), weights_(std::move(weights)) {
  if (grads_.empty()) throw InvariantError("GradientSet needs at least one task");
  if (weights_.size() != grads_.size()) {
    throw InvariantError("GradientSet has " + std::to_string(grads_.size()) + " gradients but " +
                         std::to_string(weights_.size()) + " weights");
  }
  for (const GradVec& g : grads_) {
    if (g.dim() != grads_.front().dim()) throw DimensionMismatch(grads_.front().dim(), g.dim());
  }
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvariantError("task weights must be positive");
  }
}

GradientSet::GradientSet(std::vector<GradVec> grads)
    : GradientSet(grads, std::vector<double>(grads.size(), 1.0)) {}

GradientSet GradientSet::scaled(double c) const {
  std::vector<GradVec> out;
  out.reserve(grads_.size());
  for (const GradVec& g : grads_) out.push_back(g * c);
  return GradientSet(std::move(out), weights_);
}

GradVec joint_gradient(const GradientSet& gs) {
  GradVec acc = GradVec::zeros(gs.dim());
  for (std::size_t i = 0; i < gs.task_count(); ++i) acc += gs.grad(i) * gs.weight(i);
  return acc;
}

GradVec mean_gradient(const GradientSet& gs) {
  GradVec acc = GradVec::zeros(gs.dim());
  for (const GradVec& g : gs.grads()) acc += g;
  return acc * (1.0 / static_cast<double>(gs.task_count()));
}

double interaction_term(const GradientSet& gs, std::size_t k) {
  if (k < 1 || k > gs.aux_count()) {
    throw InvariantError("interaction term index " + std::to_string(k) + " outside [1, " +
                         std::to_string(gs.aux_count()) + "]");
  }
  return gs.weight(0) * gs.weight(k) * dot(gs.grad(0), gs.grad(k));
}

EnergyDecomposition joint_energy_decomposition(const GradientSet& gs) {
  EnergyDecomposition out;
  for (std::size_t i = 0; i < gs.task_count(); ++i) {
    const double w = gs.weight(i);
    out.squared_terms.push_back(w * w * dot(gs.grad(i), gs.grad(i)));
    out.approximate += out.squared_terms.back();
  }
  for (std::size_t k = 1; k < gs.task_count(); ++k) {
    out.interaction_terms.push_back(2.0 * interaction_term(gs, k));
    out.approximate += out.interaction_terms.back();
  }
  const GradVec joint = joint_gradient(gs);
  out.exact = dot(joint, joint);
  return out;
}

// ---------------------------------------------------------------------------
// text format

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_number(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("invalid number '" + std::string(tok) + "'", line);
  }
  return v;
}

std::size_t parse_count(std::string_view tok, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("invalid count '" + std::string(tok) + "'", line);
  }
  return v;
}

}  // namespace

GradientSet parse_gradient_set(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::vector<std::string_view> {
    if (!std::getline(in, line)) {
      throw ParseError("unexpected end of input", line_no + 1);
    }
    ++line_no;
    return split_ws(line);
  };

  auto header = next_line();
  if (header.size() != 2) throw ParseError("header must be 'd K+1'", line_no);
  const std::size_t dim = parse_count(header[0], line_no);
  const std::size_t tasks = parse_count(header[1], line_no);
  if (dim < 1 || tasks < 1) throw ParseError("header values must be >= 1", line_no);

  auto weight_toks = next_line();
  if (weight_toks.size() != tasks) {
    throw ParseError("expected " + std::to_string(tasks) + " weights, found " +
                         std::to_string(weight_toks.size()),
                     line_no);
  }
  std::vector<double> weights;
  for (auto tok : weight_toks) {
    const double w = parse_number(tok, line_no);
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw InvariantError("line " + std::to_string(line_no) + ": weights must be positive");
    }
    weights.push_back(w);
  }

  std::vector<GradVec> grads;
  for (std::size_t t = 0; t < tasks; ++t) {
    auto toks = next_line();
    if (toks.size() != dim) {
      throw ParseError("expected " + std::to_string(dim) + " components, found " +
                           std::to_string(toks.size()),
                       line_no);
    }
    std::vector<double> comps;
    for (auto tok : toks) {
      const double v = parse_number(tok, line_no);
      if (!std::isfinite(v)) {
        throw InvariantError("line " + std::to_string(line_no) + ": non-finite component");
      }
      comps.push_back(v);
    }
    grads.emplace_back(std::move(comps));
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!split_ws(line).empty()) throw ParseError("trailing content", line_no);
  }
  return GradientSet(std::move(grads), std::move(weights));
}

GradientSet read_gradient_set_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return parse_gradient_set(in);
}

void write_gradient_set(std::ostream& out, const GradientSet& gs) {
  out << gs.dim() << ' ' << gs.task_count() << '\n';
  for (std::size_t i = 0; i < gs.task_count(); ++i) {
    out << (i ? " " : "") << format_double(gs.weight(i));
  }
  out << '\n';
  for (const GradVec& g : gs.grads()) {
    for (std::size_t j = 0; j < g.dim(); ++j) out << (j ? " " : "") << format_double(g[j]);
    out << '\n';
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace camegrad
