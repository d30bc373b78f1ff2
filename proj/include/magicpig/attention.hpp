#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "magicpig/matrix.hpp"

namespace magicpig {

/// One decoding step of a single attention head: query q, keys K and values V.
struct AttentionWorkload {
  Vector q;
  Matrix keys;
  Matrix values;

  std::size_t n() const { return keys.rows(); }
  std::size_t d() const { return q.size(); }
};

/// Throws InputError unless n >= 1, d >= 1, shapes agree and every entry is finite.
void validate(const AttentionWorkload& workload);

/// Softmax scores of one query against all keys.
///
/// The normalizer is kept in shifted form: Z = exp(max_logit) * shifted_sum,
/// so log Z is available even when exp(max_logit) overflows.
struct AttentionScores {
  Vector logits;   // q k_i / sqrt(d)
  Vector weights;  // softmax(logits)
  double max_logit = 0.0;
  double shifted_sum = 0.0;  // sum_i exp(logit_i - max_logit)

  double log_normalizer() const;
};

enum class Method { full, topk, oracle, snis, magicpig };

std::string_view to_string(Method method);

struct AttentionEstimate {
  Vector output;
  std::size_t unique_budget = 0;  // |S|: tokens whose key and value were touched
  double cost1 = 0.0;             // search / sampling cost relative to full attention
  double cost2 = 0.0;             // attention computation cost, touched tokens / n
  Method method = Method::full;
};

/// q k / sqrt(d).
double scaled_logit(std::span<const double> q, std::span<const double> key);

/// Max-shifted softmax. Empty input yields an empty vector.
Vector softmax(std::span<const double> logits);

AttentionScores attention_scores(const AttentionWorkload& workload);

/// Exact Softmax(q K^T / sqrt(d)) V.
AttentionEstimate full_attention(const AttentionWorkload& workload);

/// Renormalized attention over the k highest-weight tokens. Ties are broken
/// toward the lower token index.
///
/// Exact TopK has to score every key, so cost1 is reported as 0.5, the
/// dot-product half of full attention.
AttentionEstimate topk_attention(const AttentionWorkload& workload, std::size_t k);

/// Indices of the k largest weights, largest first, ties by ascending index.
std::vector<std::size_t> topk_indices(std::span<const double> weights, std::size_t k);

/// ||estimate - reference||_2 / ||reference||_2. Throws DegenerateError for a
/// zero-norm reference and ArgumentError for mismatched lengths.
double relative_error(std::span<const double> estimate, std::span<const double> reference);

/// sum_j weights[j] * values.row(rows[j]), without normalization.
Vector combine_rows(const Matrix& values, std::span<const std::size_t> rows,
                    std::span<const double> weights);

}  // namespace magicpig
