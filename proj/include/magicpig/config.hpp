#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "magicpig/attention.hpp"
#include "magicpig/estimator.hpp"
#include "magicpig/workload.hpp"

namespace magicpig {

/// Proposal used by the snis method in sweeps.
enum class SnisProposal { attention, value_norm, uniform };

std::string_view to_string(SnisProposal proposal);

/// Everything a sweep needs. Parsed from a flat `key = value` text file:
///
///   # comments and blank lines are ignored
///   workload.kind = longtail        gaussian | cone | longtail | file | zoo
///   workload.n = 16384
///   workload.d = 64
///   workload.temperature = 1.0
///   workload.top_mass = 0.75        longtail only
///   workload.cone_angle = 0.3       cone only
///   workload.sink_flip = true       cone only
///   workload.path = data.mpwl       file only
///   workload.seed = 7               defaults to the master seed
///   methods = topk, oracle, snis, magicpig
///   budgets = 0.01, 0.02            fractions of n, in (0, 1]
///   lsh.K = 10                      list; crossed with lsh.L for magicpig rows
///   lsh.L = 75, 150
///   lsh.min_collisions = 2
///   static.sink = 4
///   static.local = 64
///   snis.proposal = attention       attention | value_norm | uniform
///   trials = 200
///   seed = 42
struct ExperimentConfig {
  WorkloadSpec workload;
  std::optional<std::uint64_t> workload_seed;
  std::vector<Method> methods;
  std::vector<double> budgets;
  std::vector<unsigned> lsh_bits{10};
  std::vector<unsigned> lsh_tables{150};
  unsigned min_collisions = 2;
  StaticCachePolicy static_cache;
  SnisProposal snis_proposal = SnisProposal::attention;
  std::size_t trials = 1;
  std::optional<std::uint64_t> seed;
};

/// Applies one `key = value` setting. Throws ConfigError naming the key.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Parses a whole config file. Later lines override earlier ones.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Checks cross-field constraints; throws ConfigError naming the first
/// offending field.
void validate(const ExperimentConfig& config);

/// The workload spec with its seed resolved against the master seed.
WorkloadSpec resolved_workload(const ExperimentConfig& config);

}  // namespace magicpig
