#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "magicpig/config.hpp"

namespace magicpig {

struct SweepRow {
  std::string method;
  std::string config;     // method parameters, e.g. "k=327" or "K=10 L=150 m=2 sink=4 local=64"
  double budget = 0.0;    // requested fraction of n (theoretical expected_budget for magicpig)
  double err_mean = 0.0;  // mean relative L2 error vs full attention
  double err_std = 0.0;   // sample standard deviation of the error
  double cost1 = 0.0;
  double cost2 = 0.0;
  std::size_t trials = 0;

  bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  bool operator==(const SweepResult&) const = default;
};

/// Runs every (method, budget or (K, L), trial) cell of the config on one
/// generated workload.
///
/// Rows come out in config order: methods as listed, budgets as listed,
/// magicpig cells K-major. TopK is deterministic and runs once per budget.
/// Every other trial draws from its own stream derived from (seed, row, trial),
/// so results do not depend on `threads`.
SweepResult run_sweep(const ExperimentConfig& config, unsigned threads = 1);

/// Same, on a caller-provided workload.
SweepResult run_sweep(const ExperimentConfig& config, const AttentionWorkload& workload,
                      unsigned threads = 1);

/// CSV with header `method,config,budget,err_mean,err_std,cost1,cost2,trials`.
/// Reals are written in shortest round-trip form.
std::string to_csv(const SweepResult& result);

/// Inverse of to_csv. Throws FormatError on a malformed header or row.
SweepResult parse_csv(std::string_view text);

}  // namespace magicpig
