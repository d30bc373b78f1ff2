#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "magicpig/attention.hpp"
#include "magicpig/lsh.hpp"

namespace magicpig {

/// Tokens kept exact outside of LSH sampling: the first sink_count tokens and
/// the last local_window tokens.
struct StaticCachePolicy {
  std::size_t sink_count = 4;
  std::size_t local_window = 64;
};

struct StaticPartition {
  std::vector<std::size_t> static_ids;   // ascending
  std::vector<std::size_t> dynamic_ids;  // ascending complement
};

StaticPartition partition_static(std::size_t n, const StaticCachePolicy& policy);

struct MagicPigReport {
  AttentionEstimate estimate;
  std::size_t sampled_count = 0;  // |S|, static tokens excluded
  std::size_t static_count = 0;   // t
  std::vector<std::size_t> sampled_ids;
  Vector sampling_probs;          // u_i for each sampled id
  bool empty_sample = false;      // no candidate survived; output is static-only
};

/// Builds the SimHash index over the workload's dynamic (non-static) keys.
/// Returns nullopt when the static cache covers every token.
std::optional<LshIndex> build_dynamic_index(const AttentionWorkload& workload,
                                            const StaticCachePolicy& policy,
                                            const LshConfig& config);

/// Evaluates
///   o = sum_{i in S u T} exp(l_i - log u_i) v_i / sum_{i in S u T} exp(l_i - log u_i)
/// with l_i = q k_i / sqrt(d), u_i taken from `candidates` for i in S and
/// u_i = 1 for the static tokens T, as one max-shifted softmax.
///
/// Throws ArgumentError if S and T overlap or reference a token outside [0, n),
/// and DegenerateError if both are empty.
Vector estimate_given_candidates(const AttentionWorkload& workload, const CandidateSet& candidates,
                                 std::span<const std::size_t> static_ids);

/// One decoding step: query the dynamic index, then fuse the sampled tokens
/// with the static cache through estimate_given_candidates.
///
/// `dynamic_index` must cover exactly the dynamic ids of `policy`, or be null
/// when there are none. An empty sample with a nonempty static cache falls
/// back to static-only attention and sets empty_sample.
MagicPigReport magicpig_estimate(const AttentionWorkload& workload, const LshIndex* dynamic_index,
                                 const StaticCachePolicy& policy);

}  // namespace magicpig
