#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "magicpig/matrix.hpp"

namespace magicpig {

struct LshConfig {
  unsigned bits_per_table = 10;  // K
  unsigned tables = 150;         // L
  unsigned min_collisions = 2;   // tables that must match for a key to be sampled
  std::uint64_t seed = 0;

  /// Throws ArgumentError unless 1 <= K <= 32, min_collisions >= 1 and L >= min_collisions.
  void validate() const;
  bool operator==(const LshConfig&) const = default;
};

struct CenteredKeys {
  Matrix keys;
  Vector center;
};

/// Subtracts the mean key from every key.
CenteredKeys center_keys(const Matrix& keys);

struct MipsTransform {
  Vector query;  // [q, 0]
  Matrix keys;   // [k_i, sqrt(r^2 - |k_i|^2)]
  double radius = 0.0;
};

/// Appends one coordinate so every key has norm r = max |k_i| while inner
/// products with the query are preserved. Throws DegenerateError when r = 0.
MipsTransform mips_transform(std::span<const double> q, const Matrix& keys);

struct CollisionProbability {
  double p = 0.5;
  bool degenerate = false;  // a zero-norm input; p is pinned to 0.5
};

/// Single-bit SimHash collision probability 1 - arccos(cos(q, k)) / pi.
CollisionProbability collision_prob(std::span<const double> q, std::span<const double> k);

/// Probability that a key with per-bit collision probability p matches the
/// query's K-bit code in at least min_collisions of L tables. When the tail is
/// small it is summed term by term instead of as 1 minus the head, so tiny
/// probabilities keep their relative accuracy.
double sampling_prob(double p, unsigned bits_per_table, unsigned tables,
                     unsigned min_collisions = 2);

/// Expected sampled fraction for well-spread keys: sampling_prob(0.5, K, L).
double expected_budget(unsigned bits_per_table, unsigned tables, unsigned min_collisions = 2);

/// d x (K*L) matrix of iid standard normals. Column t*K + b is bit b of table t.
Matrix draw_projections(std::size_t dim, const LshConfig& config);

/// L codes for x. Bit b of table t is set iff x . W[:, t*K + b] >= 0.
std::vector<std::uint32_t> simhash_codes(std::span<const double> x, const Matrix& projections,
                                         unsigned bits_per_table, unsigned tables);

/// Tokens whose code matched the query's in at least min_collisions tables.
struct CandidateSet {
  std::vector<std::size_t> indices;          // strictly ascending token ids
  std::vector<std::uint32_t> collision_counts;
  Vector probs;                              // u_i in (0, 1]

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

/// SimHash index over centered keys.
///
/// The index covers an ascending subset of token ids (all of them by default).
/// Keys are centered over that subset before hashing; the query is hashed as
/// given, since centering only shifts every logit by the same constant.
/// Each table is stored as sorted buckets: code -> ascending token ids.
///
/// A built index is immutable and may be queried from many threads.
class LshIndex {
 public:
  const LshConfig& config() const { return config_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return center_.size(); }

  std::span<const std::size_t> ids() const { return ids_; }
  std::span<const double> center() const { return center_; }
  const Matrix& centered_keys() const { return centered_; }
  const Matrix& projections() const { return projections_; }

  /// Number of nonempty buckets in a table.
  std::size_t bucket_count(unsigned table) const;
  /// Code of the i-th nonempty bucket, ascending.
  std::uint32_t bucket_code(unsigned table, std::size_t bucket) const;
  /// Token ids stored in a bucket, ascending.
  std::vector<std::size_t> bucket_ids(unsigned table, std::size_t bucket) const;
  /// Token ids sharing `code` in `table`; empty if no such bucket.
  std::vector<std::size_t> lookup(unsigned table, std::uint32_t code) const;

  std::vector<std::uint32_t> encode(std::span<const double> x) const;

  friend LshIndex build_index(const Matrix& keys, std::span<const std::size_t> ids,
                              const LshConfig& config);
  friend CandidateSet query_candidates(const LshIndex& index, std::span<const double> q);

 private:
  struct Table {
    std::vector<std::uint32_t> codes;    // ascending bucket codes
    std::vector<std::uint32_t> offsets;  // codes.size() + 1 offsets into entries
    std::vector<std::uint32_t> entries;  // local positions, ascending within a bucket
  };

  std::size_t find_bucket(const Table& table, std::uint32_t code) const;

  LshConfig config_;
  Matrix projections_;
  Vector center_;
  Matrix centered_;
  std::vector<std::size_t> ids_;
  std::vector<Table> tables_;
};

/// SimHash encoding of x against an index's projections.
std::vector<std::uint32_t> simhash_encode(std::span<const double> x, const LshIndex& index);

/// Indexes every row of `keys`. Throws DegenerateError when keys is empty.
LshIndex build_index(const Matrix& keys, const LshConfig& config);

/// Indexes the rows named by `ids` (strictly ascending). Candidate indices
/// refer to these ids.
LshIndex build_index(const Matrix& keys, std::span<const std::size_t> ids,
                     const LshConfig& config);

/// Hashes q, counts per-token bucket matches across tables and keeps tokens
/// with at least min_collisions matches. u_i is computed from the true cosine
/// between q and the centered key; tiny u_i are clamped to 1e-300 and exact
/// zeros are dropped.
CandidateSet query_candidates(const LshIndex& index, std::span<const double> q);

/// Serializes an index: "MPLI", u16 version, u32 n, u32 d, u16 K, u16 L,
/// u64 seed, then per table and per bucket (code u32, count u32, ids u32...),
/// all little-endian.
std::string encode_index(const LshIndex& index);
void write_index(const LshIndex& index, const std::filesystem::path& path);

/// Restores an index. Projections are regenerated from the seed and the
/// centering vector recomputed from `keys` (the full key matrix the index was
/// built over); every stored bucket is checked against a re-encoding.
LshIndex decode_index(std::string_view bytes, const Matrix& keys, unsigned min_collisions = 2);
LshIndex read_index(const std::filesystem::path& path, const Matrix& keys,
                    unsigned min_collisions = 2);

}  // namespace magicpig
