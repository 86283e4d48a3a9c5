#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "camegrad/diagnostics.hpp"
#include "camegrad/errors.hpp"
#include "test_support.hpp"

using namespace camegrad;
using camegrad::testing::random_vec;

namespace {

std::size_t histogram_total(const ConflictStats& s) {
  std::size_t total = 0;
  for (std::size_t c : s.histogram()) total += c;
  return total;
}

// 538 opposing pairs followed by 462 aligned ones
ConflictStats counting_fixture() {
  ConflictStats s;
  for (int i = 0; i < 1000; ++i) {
    if (i < 538) {
      s.record_pair(GradVec{1, 0}, GradVec{-1, 0.5});
    } else {
      s.record_pair(GradVec{1, 0}, GradVec{1, 0.5});
    }
  }
  return s;
}

}  // namespace

TEST_CASE("negative ratio counting") {
  CHECK(counting_fixture().negative_ratio() == 0.538);

  ConflictStats s498;
  for (int i = 0; i < 1000; ++i) s498.record_cosine(i < 498 ? -0.3 : 0.3);
  CHECK(s498.negative_ratio() == 0.498);

  ConflictStats none;
  for (int i = 0; i < 5; ++i) none.record_cosine(0.5);
  CHECK(none.negative_ratio() == 0.0);
  ConflictStats all;
  for (int i = 0; i < 5; ++i) all.record_cosine(-0.5);
  CHECK(all.negative_ratio() == 1.0);

  CHECK_THROWS_AS(ConflictStats().negative_ratio(), InvariantError);
  CHECK_THROWS_AS(ConflictStats().mean_cosine(), InvariantError);
}

TEST_CASE("single aligned pair and alternating stream") {
  ConflictStats one;
  one.record_pair(GradVec{1, 0}, GradVec{1, 0});
  CHECK(one.negative_ratio() == 0.0);
  CHECK(one.mean_cosine() == 1.0);

  ConflictStats alt;
  for (int i = 0; i < 50; ++i) {
    alt.record_pair(GradVec{1, 0}, GradVec{2, 0});
    alt.record_pair(GradVec{1, 0}, GradVec{-2, 0});
  }
  CHECK(alt.mean_cosine() == 0.0);
  CHECK(alt.negative_ratio() == 0.5);
}

TEST_CASE("histogram bins and interaction sums") {
  ConflictStats s(40);
  CHECK(s.bin_of(-1.0) == 0);
  CHECK(s.bin_of(1.0) == 39);
  CHECK(s.bin_of(0.0) == 20);
  CHECK(s.bin_of(-1e-300) == 19);
  CHECK(s.bin_edges(0).first == -1.0);
  CHECK(s.bin_edges(39).second == 1.0);

  s.record_pair(GradVec{1, 1}, GradVec{-1, -1}, 2.0, 0.5, 2);
  REQUIRE(s.interaction_sums().size() >= 2);
  CHECK(s.interaction_sums()[1] == -2.0);
  CHECK_THROWS_AS(s.record_pair(GradVec{1}, GradVec{1, 2}), DimensionMismatch);

  std::ostringstream csv;
  write_histogram_csv(csv, s);
  const std::string text = csv.str();
  CHECK(text.rfind("bin_lo,bin_hi,count\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 41);
}

TEST_CASE("record_set pairs primary with each auxiliary") {
  const GradientSet gs({GradVec{1, 0}, GradVec{-1, 0}, GradVec{0, 1}, GradVec{0, -1}});
  ConflictStats primary;
  primary.record_set(gs);
  CHECK(primary.count() == 3);
  CHECK(primary.negative_count() == 1);
  ConflictStats everything;
  everything.record_set(gs, true);
  CHECK(everything.count() == 6);
  CHECK(everything.negative_count() == 2);
  CHECK(everything.interaction_sums() == primary.interaction_sums());
}

TEST_CASE("property: histogram conservation and sign invariance") {
  CounterRng rng(41);
  ConflictStats s;
  ConflictStats scaled;
  for (int i = 0; i < 2000; ++i) {
    const std::size_t d = 1 + i % 5;
    const GradVec a = random_vec(rng, d);
    const GradVec b = random_vec(rng, d);
    s.record_pair(a, b);
    scaled.record_pair(a * rng.uniform(0.01, 100), b * rng.uniform(0.01, 100));
    CHECK(histogram_total(s) == s.count());
    CHECK(s.negative_count() <= s.count());
    CHECK(std::abs(s.mean_cosine()) <= 1.0);
  }
  CHECK(s.negative_count() == scaled.negative_count());
  CHECK(s.negative_ratio() == scaled.negative_ratio());
}

TEST_CASE("property: merge is associative and additive") {
  CounterRng rng(42);
  std::vector<ConflictStats> parts(3);
  for (auto& p : parts) {
    for (int i = 0; i < 300; ++i) p.record_cosine(rng.uniform(-1, 1));
  }
  ConflictStats left = parts[0];
  left.merge(parts[1]);
  left.merge(parts[2]);
  ConflictStats inner = parts[1];
  inner.merge(parts[2]);
  ConflictStats right = parts[0];
  right.merge(inner);
  CHECK(left.count() == 900);
  CHECK(left.histogram() == right.histogram());
  CHECK(left.negative_count() == right.negative_count());
  CHECK(left.negative_count() ==
        parts[0].negative_count() + parts[1].negative_count() + parts[2].negative_count());
  CHECK(ConflictStats(40).bins() == 40);
  ConflictStats other(20);
  CHECK_THROWS_AS(left.merge(other), InvariantError);
}

TEST_CASE("covariance trace examples") {
  const std::vector<GradVec> same(5, GradVec{1, 2, 3});
  CHECK(covariance_trace(same).trace == 0.0);

  const std::vector<GradVec> two{GradVec{0, 0}, GradVec{2, 0}};
  CHECK(covariance_trace(two).trace == 2.0);
  CHECK(covariance_trace(two).sample_count == 2);

  const std::vector<GradVec> single{GradVec{1}};
  CHECK_THROWS_AS(covariance_trace(single), InvariantError);

  CounterRng rng(43);
  std::vector<GradVec> gauss;
  for (int i = 0; i < 100000; ++i) {
    gauss.push_back(GradVec{rng.normal(0, 0.5), rng.normal(0, 0.5), rng.normal(0, 0.5),
                            rng.normal(0, 0.5)});
  }
  CHECK(std::abs(covariance_trace(gauss).trace - 1.0) <= 0.05);
}

TEST_CASE("kappa scaling examples") {
  CounterRng rng(44);
  std::vector<GradVec> samples;
  for (int i = 0; i < 50; ++i) samples.push_back(random_vec(rng, 3));
  CHECK(std::abs(kappa_scaling_check(samples, 1.5) / 2.25 - 1.0) <= 1e-10);
  CHECK(std::abs(kappa_scaling_check(samples, 1.0) - 1.0) <= 1e-10);
  const std::vector<GradVec> pair{GradVec{0}, GradVec{2}};
  CHECK(kappa_scaling_check(pair, 2.0) == 4.0);
  const std::vector<GradVec> flat(3, GradVec{1});
  CHECK_THROWS_AS(kappa_scaling_check(flat, 2.0), InvariantError);
}

TEST_CASE("property: trace is translation invariant and quadratic in scale") {
  CounterRng rng(45);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + trial % 6;
    std::vector<GradVec> x;
    for (int i = 0; i < 2 + trial % 30; ++i) x.push_back(random_vec(rng, d));
    const GradVec shift = random_vec(rng, d, -5, 5);
    std::vector<GradVec> shifted;
    for (const auto& v : x) shifted.push_back(v + shift);
    const double base = covariance_trace(x).trace;
    CHECK(std::abs(covariance_trace(shifted).trace - base) <= 1e-10 * base);
    const double kappa = rng.uniform(1, 3);
    CHECK(std::abs(kappa_scaling_check(x, kappa) / (kappa * kappa) - 1.0) <= 1e-10);
  }
}

TEST_CASE("trace series") {
  std::vector<GradVec> x;
  for (int i = 0; i < 6; ++i) x.push_back(GradVec{static_cast<double>(i % 2) * 2});
  const auto series = trace_series(x, 2);
  REQUIRE(series.size() == 5);
  CHECK(series.front().first == 1);
  for (const auto& [step, tr] : series) CHECK(tr == 2.0);
  std::ostringstream csv;
  write_trace_csv(csv, series);
  CHECK(csv.str().rfind("step,trace\n1,2\n", 0) == 0);
}
