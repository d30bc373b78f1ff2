#include "magicpig/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "magicpig/errors.hpp"

namespace magicpig {

StaticPartition partition_static(std::size_t n, const StaticCachePolicy& policy) {
  StaticPartition out;
  const std::size_t sink_end = std::min(policy.sink_count, n);
  const std::size_t local_begin = n - std::min(policy.local_window, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < sink_end || i >= local_begin) {
      out.static_ids.push_back(i);
    } else {
      out.dynamic_ids.push_back(i);
    }
  }
  return out;
}

std::optional<LshIndex> build_dynamic_index(const AttentionWorkload& workload,
                                            const StaticCachePolicy& policy,
                                            const LshConfig& config) {
  validate(workload);
  const StaticPartition part = partition_static(workload.n(), policy);
  if (part.dynamic_ids.empty()) return std::nullopt;
  return build_index(workload.keys, part.dynamic_ids, config);
}

Vector estimate_given_candidates(const AttentionWorkload& workload, const CandidateSet& candidates,
                                 std::span<const std::size_t> static_ids) {
  validate(workload);
  const std::size_t n = workload.n();
  if (candidates.probs.size() != candidates.indices.size()) {
    throw ArgumentError("candidate set has mismatched index/probability lengths");
  }
  if (candidates.empty() && static_ids.empty()) {
    throw DegenerateError("no sampled and no static tokens to attend to");
  }

  std::vector<char> used(n, 0);
  std::vector<std::size_t> rows;
  Vector logits;
  rows.reserve(candidates.size() + static_ids.size());
  logits.reserve(rows.capacity());
  auto add = [&](std::size_t id, double log_u) {
    if (id >= n) throw ArgumentError("token id " + std::to_string(id) + " out of range");
    if (used[id]) throw ArgumentError("token " + std::to_string(id) + " listed twice");
    used[id] = 1;
    rows.push_back(id);
    logits.push_back(scaled_logit(workload.q, workload.keys.row(id)) - log_u);
  };
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const double u = candidates.probs[j];
    if (!(u > 0.0 && u <= 1.0)) {
      throw ArgumentError("sampling probability " + std::to_string(u) + " outside (0, 1]");
    }
    add(candidates.indices[j], std::log(u));
  }
  for (std::size_t id : static_ids) add(id, 0.0);

  return combine_rows(workload.values, rows, softmax(logits));
}

MagicPigReport magicpig_estimate(const AttentionWorkload& workload, const LshIndex* dynamic_index,
                                 const StaticCachePolicy& policy) {
  validate(workload);
  const std::size_t n = workload.n();
  const StaticPartition part = partition_static(n, policy);

  CandidateSet candidates;
  if (!part.dynamic_ids.empty()) {
    if (dynamic_index == nullptr) {
      throw ArgumentError("magicpig_estimate: dynamic tokens present but no index given");
    }
    const auto ids = dynamic_index->ids();
    if (!std::equal(ids.begin(), ids.end(), part.dynamic_ids.begin(), part.dynamic_ids.end())) {
      throw ArgumentError("magicpig_estimate: index does not cover exactly the dynamic tokens");
    }
    candidates = query_candidates(*dynamic_index, workload.q);
  }
  if (candidates.empty() && part.static_ids.empty()) {
    throw DegenerateError("magicpig_estimate: empty sample and empty static cache");
  }

  MagicPigReport report;
  report.estimate.output = estimate_given_candidates(workload, candidates, part.static_ids);
  report.sampled_count = candidates.size();
  report.static_count = part.static_ids.size();
  report.sampled_ids = candidates.indices;
  report.sampling_probs = candidates.probs;
  report.empty_sample = candidates.empty();
  report.estimate.unique_budget = report.sampled_count + report.static_count;
  report.estimate.cost1 = 0.0;
  report.estimate.cost2 = static_cast<double>(report.estimate.unique_budget) / static_cast<double>(n);
  report.estimate.method = Method::magicpig;
  return report;
}

}  // namespace magicpig
