#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "magicpig/attention.hpp"

namespace magicpig {

enum class WorkloadKind { gaussian, cone, longtail, file, zoo };

std::string_view to_string(WorkloadKind kind);
/// Throws ConfigError("workload.kind", ...) for an unknown name.
WorkloadKind parse_workload_kind(std::string_view name);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::gaussian;
  std::size_t n = 1024;
  std::size_t d = 64;
  double temperature = 1.0;  // logits are divided by this
  double top_mass = 0.0;     // longtail: target weight mass of the top 20% (0 keeps temperature)
  double cone_angle = 0.3;   // cone: half-angle of the key and query cones, radians
  bool sink_flip = true;     // cone: token 0 points opposite the key cone
  std::string path;          // file
  std::uint64_t seed = 0;
};

/// Deterministic workload for a spec.
///
///  gaussian  q, K, V iid N(0, 1); q scaled by 1 / temperature.
///  longtail  K, V iid N(0, 1); q a random direction of norm sqrt(d) / temperature.
///            With top_mass set, the temperature is found by bisection so the
///            top 20% of tokens carry that share of the attention mass.
///  cone      keys of norm sqrt(d) within cone_angle of a random axis mu; the
///            query within cone_angle of -mu with norm sqrt(d) / temperature.
///            With sink_flip, key 0 sits near -mu like an attention sink.
///  file      read_workload(path).
///  zoo       the 100-animal example, see zoo_workload().
AttentionWorkload gen_workload(const WorkloadSpec& spec);

/// n = 100, d = 1, all logits equal; values 10 x 50, 10 x 20, 10 x 10 and
/// 70 x 1 in that order. Its exact attention output is the plain mean, 8.7.
AttentionWorkload zoo_workload();

/// Share of the total weight held by the ceil(fraction * n) largest weights.
double top_fraction_mass(std::span<const double> weights, double fraction = 0.2);

/// Temperature at which the longtail generator with this seed reaches the
/// given top-20% mass.
double calibrate_longtail_temperature(const WorkloadSpec& spec, double target_mass);

/// Binary workload format, little-endian: "MPWL", u16 version = 1, u32 n,
/// u32 d, then f32 q[d], f32 K[n*d] and f32 V[n*d], both row-major.
std::string encode_workload(const AttentionWorkload& workload);
AttentionWorkload decode_workload(std::string_view bytes);

void write_workload(const AttentionWorkload& workload, const std::filesystem::path& path);
AttentionWorkload read_workload(const std::filesystem::path& path);

}  // namespace magicpig
