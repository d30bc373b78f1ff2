#include <cmath>
#include <limits>

#include "doctest.h"
#include "magicpig/attention.hpp"
#include "magicpig/errors.hpp"
#include "magicpig/workload.hpp"
#include "test_support.hpp"

using namespace magicpig;
using magicpig::testing::random_workload;

namespace {

AttentionWorkload three_token_workload() {
  return {{1.0}, Matrix(3, 1, {0.0, 1.0, 2.0}), Matrix(3, 1, {1.0, 2.0, 3.0})};
}

}  // namespace

TEST_CASE("full attention: single token returns its value") {
  AttentionWorkload w{{0.3, -2.0}, Matrix(1, 2, {5.0, 1.0}), Matrix(1, 2, {7.0, -3.0})};
  const auto est = full_attention(w);
  CHECK(est.output == Vector{7.0, -3.0});
  CHECK(est.unique_budget == 1);
  CHECK(est.cost1 == 0.0);
  CHECK(est.cost2 == 1.0);
  CHECK(est.method == Method::full);
}

TEST_CASE("full attention: identical keys give the column mean of V") {
  AttentionWorkload w{{1.0, 2.0}, Matrix(3, 2, {1.0, 1.0, 1.0, 1.0, 1.0, 1.0}),
                      Matrix(3, 2, {1.0, 10.0, 2.0, 20.0, 6.0, 30.0})};
  const auto out = full_attention(w).output;
  CHECK(out[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(20.0).epsilon(1e-15));
}

TEST_CASE("full attention: three-token hand case matches high-precision softmax") {
  // softmax([0, 1, 2]) . [1, 2, 3], evaluated to 40 digits.
  const double expected = 2.575210382604441431530996;
  CHECK(full_attention(three_token_workload()).output[0] ==
        doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("full attention: large logits do not overflow") {
  AttentionWorkload w{{1000.0}, Matrix(2, 1, {1.0, 1.0 - std::log(3.0) / 1000.0}),
                      Matrix(2, 1, {4.0, 0.0})};
  // logits 1000 and 1000 - log 3, weights 3/4 and 1/4
  CHECK(full_attention(w).output[0] == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("full attention rejects invalid workloads") {
  auto w = three_token_workload();
  w.keys(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(full_attention(w), InputError);

  auto inf_q = three_token_workload();
  inf_q.q[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(full_attention(inf_q), InputError);

  AttentionWorkload mismatched{{1.0}, Matrix(3, 1), Matrix(2, 1)};
  CHECK_THROWS_AS(full_attention(mismatched), InputError);

  AttentionWorkload wrong_dim{{1.0, 2.0}, Matrix(3, 1), Matrix(3, 1)};
  CHECK_THROWS_AS(full_attention(wrong_dim), InputError);

  AttentionWorkload empty{{1.0}, Matrix(0, 1), Matrix(0, 1)};
  CHECK_THROWS_AS(full_attention(empty), InputError);
}

TEST_CASE("softmax: normalization and translation invariance") {
  RandomSource rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const auto w = random_workload(rng, 1 + rng.below(200), 1 + rng.below(16), 2.0);
    const auto scores = attention_scores(w);
    double sum = 0.0;
    for (double x : scores.weights) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

    Vector shifted = scores.logits;
    const double c = 50.0 * rng.normal();
    for (double& x : shifted) x += c;
    const Vector again = softmax(shifted);
    CHECK(magicpig::testing::max_abs_diff(again, scores.weights) <= 1e-6);
  }
}

TEST_CASE("softmax: weights are monotone in logits") {
  RandomSource rng(12);
  const auto w = random_workload(rng, 300, 8);
  const auto s = attention_scores(w);
  for (std::size_t i = 0; i < w.n(); ++i) {
    for (std::size_t j = 0; j < w.n(); ++j) {
      if (s.logits[i] > s.logits[j]) CHECK(s.weights[i] > s.weights[j]);
    }
  }
}

TEST_CASE("attention scores keep the normalizer in shifted form") {
  const auto s = attention_scores(three_token_workload());
  CHECK(s.max_logit == 2.0);
  CHECK(s.log_normalizer() ==
        doctest::Approx(std::log(1.0 + std::exp(1.0) + std::exp(2.0))).epsilon(1e-15));
  CHECK(softmax(Vector{}).empty());
}

TEST_CASE("topk: k = n equals full attention") {
  RandomSource rng(13);
  for (int rep = 0; rep < 100; ++rep) {
    const auto w = random_workload(rng, 1 + rng.below(100), 1 + rng.below(8));
    const auto top = topk_attention(w, w.n());
    const auto full = full_attention(w);
    CHECK(relative_error(top.output, full.output) <= 1e-6);
    CHECK(top.unique_budget == w.n());
    CHECK(top.cost2 == 1.0);
  }
}

TEST_CASE("topk: zoo averages") {
  const auto zoo = zoo_workload();
  // All logits tie, so the lowest indices win: 30 heavy animals plus the
  // first 7 or 17 of the 1 lb ones.
  CHECK(topk_attention(zoo, 37).output[0] == doctest::Approx(807.0 / 37.0).epsilon(1e-12));
  CHECK(topk_attention(zoo, 47).output[0] == doctest::Approx(817.0 / 47.0).epsilon(1e-12));
  CHECK(topk_attention(zoo, 10).output[0] == doctest::Approx(50.0).epsilon(1e-12));
  const auto est = topk_attention(zoo, 47);
  CHECK(est.unique_budget == 47);
  CHECK(est.cost1 == 0.5);
  CHECK(est.cost2 == doctest::Approx(0.47));
  CHECK(est.method == Method::topk);
}

TEST_CASE("topk: indices prefer larger weights then lower index") {
  const Vector w{0.1, 0.3, 0.1, 0.3, 0.2};
  CHECK(topk_indices(w, 3) == std::vector<std::size_t>{1, 3, 4});
  CHECK(topk_indices(w, 4) == std::vector<std::size_t>{1, 3, 4, 0});
  CHECK(topk_indices(w, 5) == std::vector<std::size_t>{1, 3, 4, 0, 2});
}

TEST_CASE("topk: output is a convex combination of the selected values") {
  RandomSource rng(14);
  for (int rep = 0; rep < 50; ++rep) {
    const auto w = random_workload(rng, 2 + rng.below(60), 1 + rng.below(6), 1.5);
    const std::size_t k = 1 + rng.below(w.n());
    const auto out = topk_attention(w, k).output;
    const auto chosen = topk_indices(attention_scores(w).weights, k);
    for (std::size_t c = 0; c < w.d(); ++c) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t i : chosen) {
        lo = std::min(lo, w.values(i, c));
        hi = std::max(hi, w.values(i, c));
      }
      CHECK(out[c] >= lo - 1e-12);
      CHECK(out[c] <= hi + 1e-12);
    }
  }
}

TEST_CASE("topk rejects k out of range") {
  const auto w = three_token_workload();
  CHECK_THROWS_AS(topk_attention(w, 0), ArgumentError);
  CHECK_THROWS_AS(topk_attention(w, 4), ArgumentError);
}

TEST_CASE("relative error") {
  const Vector ref{3.0, -4.0};
  CHECK(relative_error(ref, ref) == 0.0);
  CHECK(relative_error(Vector{6.0, -8.0}, ref) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(relative_error(Vector{1.0, 0.0}, Vector{0.0, 1.0}) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(relative_error(Vector{1.0}, Vector{0.0}), DegenerateError);
  CHECK_THROWS_AS(relative_error(Vector{1.0}, Vector{1.0, 2.0}), ArgumentError);
}

TEST_CASE("attention is bit-for-bit deterministic") {
  RandomSource a(99), b(99);
  const auto wa = random_workload(a, 64, 8);
  const auto wb = random_workload(b, 64, 8);
  CHECK(full_attention(wa).output == full_attention(wb).output);
  CHECK(topk_attention(wa, 9).output == topk_attention(wb, 9).output);
}

TEST_CASE("method names") {
  CHECK(to_string(Method::full) == "full");
  CHECK(to_string(Method::topk) == "topk");
  CHECK(to_string(Method::oracle) == "oracle");
  CHECK(to_string(Method::snis) == "snis");
  CHECK(to_string(Method::magicpig) == "magicpig");
}
