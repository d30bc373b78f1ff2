#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "magicpig/attention.hpp"

namespace magicpig {

/// Numbers behind the 100-animal zoo example: exact mean, TopK averages and
/// the oracle sampler's standard deviation, analytic and measured.
struct ZooReport {
  double true_average = 0.0;
  double topk_37 = 0.0;
  double topk_47 = 0.0;
  double stddev_b10 = 0.0;
  double stddev_b20 = 0.0;
  double empirical_stddev_b10 = 0.0;
  double empirical_stddev_b20 = 0.0;
  std::size_t trials = 0;
};

ZooReport zoo_demo(std::uint64_t seed, std::size_t trials = 10000);
std::string format_zoo_report(const ZooReport& report);

struct BudgetCell {
  unsigned bits_per_table = 0;
  unsigned tables = 0;
  double theoretical = 0.0;           // expected_budget(K, L)
  std::optional<double> empirical;    // mean sampled fraction over reseeded indexes
};

/// Theoretical sampled fraction for every (K, L) pair, K-major.
std::vector<BudgetCell> budget_table(std::span<const unsigned> bits, std::span<const unsigned> tables,
                                     unsigned min_collisions = 2);

/// Adds the measured fraction |S| / n on `workload`, averaged over `reseeds`
/// indexes built over all of its keys.
std::vector<BudgetCell> budget_table(std::span<const unsigned> bits, std::span<const unsigned> tables,
                                     unsigned min_collisions, const AttentionWorkload& workload,
                                     std::size_t reseeds, std::uint64_t seed);

/// CSV with header `K,L,theoretical,empirical` (empirical blank when absent).
std::string budget_csv(std::span<const BudgetCell> cells);

}  // namespace magicpig
