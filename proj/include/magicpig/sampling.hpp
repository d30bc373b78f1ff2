#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "magicpig/attention.hpp"
#include "magicpig/random.hpp"

namespace magicpig {

/// A sampled token together with how many of the B draws landed on it.
struct Draw {
  std::size_t index = 0;
  std::size_t multiplicity = 0;

  bool operator==(const Draw&) const = default;
};

/// B draws with replacement, deduplicated. Draws are sorted by token index and
/// the multiplicities sum to total_draws.
struct DrawMultiset {
  std::vector<Draw> draws;
  std::size_t total_draws = 0;

  std::size_t unique_count() const { return draws.size(); }
  bool operator==(const DrawMultiset&) const = default;
};

/// Throws ArgumentError if an index is out of [0, n), repeated, has zero
/// multiplicity, or the multiplicities do not sum to total_draws.
void validate(const DrawMultiset& draws, std::size_t n);

enum class ProposalKind { attention_score, score_value_norm, lsh_collision, custom };

/// Per-token sampling probabilities u_i. All kinds except lsh_collision are
/// normalized; lsh_collision holds independent inclusion probabilities.
struct ProposalDistribution {
  Vector probs;
  ProposalKind kind = ProposalKind::custom;

  bool normalized() const { return kind != ProposalKind::lsh_collision; }
};

/// u = w, the exact attention distribution.
ProposalDistribution attention_proposal(const AttentionWorkload& workload);

/// u_i proportional to w_i ||v_i||. Lower variance for the unbiased estimator
/// but flatter than w, so it touches more tokens.
ProposalDistribution value_norm_proposal(const AttentionWorkload& workload);

/// u_i proportional to w_i |v_i - o| for d = 1, the variance-minimizing
/// proposal for self-normalized importance sampling. Falls back to u = w when
/// every value equals the output.
ProposalDistribution min_variance_proposal(const AttentionWorkload& workload);

/// Wraps caller probabilities after checking they form a distribution.
ProposalDistribution custom_proposal(Vector probs);

/// Inverse-CDF sampler over a prefix-sum table, O(log n) per draw.
class CategoricalSampler {
 public:
  /// Throws DistributionError for negative, non-finite or unnormalized
  /// (|sum - 1| > tolerance) probabilities.
  explicit CategoricalSampler(std::span<const double> probs, double tolerance = 1e-6);

  std::size_t size() const { return cumulative_.size(); }
  std::size_t draw(RandomSource& rng) const;
  DrawMultiset sample(std::size_t budget, RandomSource& rng) const;

 private:
  Vector cumulative_;
  std::size_t last_positive_ = 0;
};

/// B iid draws from the attention weights, deduplicated.
DrawMultiset oracle_sample(std::span<const double> weights, std::size_t budget, RandomSource& rng);

/// sum_{i in S} (f_i / B) v_i. Scores are needed to draw the sample, so cost1
/// is 0.5 as for TopK.
AttentionEstimate oracle_estimate(const AttentionWorkload& workload, const DrawMultiset& draws);

/// sqrt((E_{i~w} ||v_i||^2 - ||o||^2) / B): the square root of the trace of the
/// oracle estimator's covariance.
double oracle_theoretical_stddev(const AttentionWorkload& workload, std::size_t budget);

struct UniqueCountExpectation {
  double expected = 0.0;  // n - sum_i (1 - w_i)^B
  double bound = 0.0;     // 1 + B * (1 - max_i w_i)
};

UniqueCountExpectation expected_unique_count(std::span<const double> weights, std::size_t budget);

/// Self-normalized importance sampling with B iid draws from a normalized
/// proposal. Importance ratios are formed in log space and exponentiated
/// after subtracting their maximum.
AttentionEstimate snis_estimate(const AttentionWorkload& workload,
                                const ProposalDistribution& proposal, std::size_t budget,
                                RandomSource& rng);

/// Same estimator on a fixed set of draws from `proposal`.
AttentionEstimate snis_estimate(const AttentionWorkload& workload,
                                const ProposalDistribution& proposal, const DrawMultiset& draws);

/// (1 / (B Z^2)) E_{i~u}[w~_i^2 / u_i^2 (v_i - o)^2], summed exactly over all
/// tokens. Only d = 1 is supported; other dimensions throw ArgumentError.
/// Returns +inf when some u_i = 0 carries nonzero w_i (v_i - o).
double snis_variance_estimate(const AttentionWorkload& workload,
                              const ProposalDistribution& proposal, std::size_t budget);

}  // namespace magicpig
