#include "magicpig/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "magicpig/errors.hpp"

namespace magicpig {

namespace {

void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw InputError(std::string("non-finite entry in ") + what);
  }
}

}  // namespace

void validate(const AttentionWorkload& w) {
  if (w.q.empty()) throw InputError("head dimension d must be at least 1");
  if (w.keys.rows() == 0) throw InputError("context length n must be at least 1");
  if (w.keys.cols() != w.d() || w.values.cols() != w.d()) {
    throw InputError("keys/values have " + std::to_string(w.keys.cols()) + "/" +
                     std::to_string(w.values.cols()) + " columns, query has " +
                     std::to_string(w.d()));
  }
  if (w.values.rows() != w.keys.rows()) {
    throw InputError("keys have " + std::to_string(w.keys.rows()) + " rows, values have " +
                     std::to_string(w.values.rows()));
  }
  require_finite(w.q, "query");
  require_finite(w.keys.data(), "keys");
  require_finite(w.values.data(), "values");
}

double AttentionScores::log_normalizer() const { return max_logit + std::log(shifted_sum); }

std::string_view to_string(Method method) {
  switch (method) {
    case Method::full: return "full";
    case Method::topk: return "topk";
    case Method::oracle: return "oracle";
    case Method::snis: return "snis";
    case Method::magicpig: return "magicpig";
  }
  return "unknown";
}

double scaled_logit(std::span<const double> q, std::span<const double> key) {
  return dot(q, key) / std::sqrt(static_cast<double>(q.size()));
}

Vector softmax(std::span<const double> logits) {
  Vector out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

AttentionScores attention_scores(const AttentionWorkload& workload) {
  validate(workload);
  AttentionScores s;
  const std::size_t n = workload.n();
  s.logits.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.logits[i] = scaled_logit(workload.q, workload.keys.row(i));
  s.max_logit = *std::max_element(s.logits.begin(), s.logits.end());
  s.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.weights[i] = std::exp(s.logits[i] - s.max_logit);
    s.shifted_sum += s.weights[i];
  }
  for (double& x : s.weights) x /= s.shifted_sum;
  return s;
}

Vector combine_rows(const Matrix& values, std::span<const std::size_t> rows,
                    std::span<const double> weights) {
  Vector out(values.cols(), 0.0);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    auto v = values.row(rows[j]);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += weights[j] * v[c];
  }
  return out;
}

AttentionEstimate full_attention(const AttentionWorkload& workload) {
  const AttentionScores s = attention_scores(workload);
  std::vector<std::size_t> all(workload.n());
  std::iota(all.begin(), all.end(), std::size_t{0});
  AttentionEstimate e;
  e.output = combine_rows(workload.values, all, s.weights);
  e.unique_budget = workload.n();
  e.cost1 = 0.0;
  e.cost2 = 1.0;
  e.method = Method::full;
  return e;
}

std::vector<std::size_t> topk_indices(std::span<const double> weights, std::size_t k) {
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return weights[a] > weights[b] || (weights[a] == weights[b] && a < b);
                    });
  order.resize(k);
  return order;
}

AttentionEstimate topk_attention(const AttentionWorkload& workload, std::size_t k) {
  if (k < 1 || k > workload.n()) {
    throw ArgumentError("topk: k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(workload.n()) + "]");
  }
  const AttentionScores s = attention_scores(workload);
  // Ranking by logit is equivalent to ranking by weight and keeps ties exact.
  std::vector<std::size_t> chosen = topk_indices(s.logits, k);
  std::sort(chosen.begin(), chosen.end());

  Vector sub(k);
  for (std::size_t j = 0; j < k; ++j) sub[j] = s.logits[chosen[j]];
  const Vector w = softmax(sub);

  AttentionEstimate e;
  e.output = combine_rows(workload.values, chosen, w);
  e.unique_budget = k;
  e.cost1 = 0.5;
  e.cost2 = static_cast<double>(k) / static_cast<double>(workload.n());
  e.method = Method::topk;
  return e;
}

double relative_error(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size()) {
    throw ArgumentError("relative_error: length " + std::to_string(estimate.size()) + " vs " +
                        std::to_string(reference.size()));
  }
  const double ref = norm(reference);
  if (!(ref > 0.0)) throw DegenerateError("relative_error: reference has zero norm");
  double diff = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double t = estimate[i] - reference[i];
    diff += t * t;
  }
  return std::sqrt(diff) / ref;
}

}  // namespace magicpig
