#include "magicpig/lsh.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "magicpig/errors.hpp"
#include "magicpig/random.hpp"

namespace magicpig {

namespace {

constexpr std::uint64_t kProjectionStream = 0x70726f6a;  // "proj"
constexpr double kMinSamplingProb = 1e-300;

// C(L, j) x^j (1 - x)^(L - j). Falls back to log space when the direct
// product over- or underflows.
double binomial_pmf(unsigned trials, unsigned j, double x) {
  double c = 1.0;
  for (unsigned i = 1; i <= j; ++i) c = c * static_cast<double>(trials - j + i) / i;
  const double direct = c * std::pow(x, j) * std::pow(1.0 - x, trials - j);
  if (std::isfinite(c) && std::isnormal(direct)) return direct;
  const double log_c = std::lgamma(trials + 1.0) - std::lgamma(j + 1.0) -
                       std::lgamma(static_cast<double>(trials - j) + 1.0);
  return std::exp(log_c + j * std::log(x) + (trials - j) * std::log1p(-x));
}

}  // namespace

void LshConfig::validate() const {
  if (bits_per_table < 1 || bits_per_table > 32) {
    throw ArgumentError("bits_per_table K=" + std::to_string(bits_per_table) +
                        " must be in [1, 32]");
  }
  if (min_collisions < 1) throw ArgumentError("min_collisions must be at least 1");
  if (tables < min_collisions) {
    throw ArgumentError("tables L=" + std::to_string(tables) + " is below min_collisions=" +
                        std::to_string(min_collisions));
  }
}

CenteredKeys center_keys(const Matrix& keys) {
  CenteredKeys out{keys, Vector(keys.cols(), 0.0)};
  if (keys.rows() == 0) return out;
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    auto k = keys.row(i);
    for (std::size_t c = 0; c < keys.cols(); ++c) out.center[c] += k[c];
  }
  for (double& c : out.center) c /= static_cast<double>(keys.rows());
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    auto k = out.keys.row(i);
    for (std::size_t c = 0; c < keys.cols(); ++c) k[c] -= out.center[c];
  }
  return out;
}

MipsTransform mips_transform(std::span<const double> q, const Matrix& keys) {
  if (q.size() != keys.cols()) throw ArgumentError("mips_transform: dimension mismatch");
  Vector sq(keys.rows());
  double r2 = 0.0;
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    sq[i] = dot(keys.row(i), keys.row(i));
    r2 = std::max(r2, sq[i]);
  }
  if (!(r2 > 0.0)) throw DegenerateError("mips_transform: all keys are zero");

  const std::size_t d = keys.cols();
  MipsTransform out;
  out.radius = std::sqrt(r2);
  out.query.assign(q.begin(), q.end());
  out.query.push_back(0.0);
  out.keys = Matrix(keys.rows(), d + 1);
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    auto src = keys.row(i);
    auto dst = out.keys.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    dst[d] = std::sqrt(std::max(0.0, r2 - sq[i]));
  }
  return out;
}

CollisionProbability collision_prob(std::span<const double> q, std::span<const double> k) {
  const double nq = norm(q);
  const double nk = norm(k);
  if (!(nq > 0.0) || !(nk > 0.0)) return {0.5, true};
  double c = std::clamp(dot(q, k) / (nq * nk), -1.0, 1.0);
  // Parallel inputs can land a few ulps inside +-1; acos would turn that into
  // an angle of ~1e-8.
  if (c > 1.0 - 4 * DBL_EPSILON) c = 1.0;
  if (c < -1.0 + 4 * DBL_EPSILON) c = -1.0;
  return {1.0 - std::acos(c) / std::numbers::pi, false};
}

double sampling_prob(double p, unsigned bits_per_table, unsigned tables, unsigned min_collisions) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("sampling_prob: p must be in [0, 1]");
  LshConfig{bits_per_table, tables, min_collisions, 0}.validate();

  const double x = std::pow(p, bits_per_table);  // match probability in one table
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;

  double below = 0.0;  // P[fewer than min_collisions matches]
  for (unsigned j = 0; j < min_collisions; ++j) below += binomial_pmf(tables, j, x);
  if (below <= 0.5) return std::clamp(1.0 - below, 0.0, 1.0);

  // Small tail: sum it directly instead of cancelling against 1.
  double tail = 0.0;
  const double mode = std::floor((tables + 1) * x);
  for (unsigned j = min_collisions; j <= tables; ++j) {
    const double t = binomial_pmf(tables, j, x);
    tail += t;
    if (j > mode && t <= tail * 1e-18) break;
  }
  return std::clamp(tail, 0.0, 1.0);
}

double expected_budget(unsigned bits_per_table, unsigned tables, unsigned min_collisions) {
  return sampling_prob(0.5, bits_per_table, tables, min_collisions);
}

Matrix draw_projections(std::size_t dim, const LshConfig& config) {
  config.validate();
  const std::size_t cols = std::size_t{config.bits_per_table} * config.tables;
  Matrix w(dim, cols);
  RandomSource rng(config.seed, kProjectionStream);
  for (double& x : w.data()) x = rng.normal();
  return w;
}

std::vector<std::uint32_t> simhash_codes(std::span<const double> x, const Matrix& projections,
                                         unsigned bits_per_table, unsigned tables) {
  if (x.size() != projections.rows()) {
    throw ArgumentError("simhash: vector length " + std::to_string(x.size()) +
                        " does not match projection rows " + std::to_string(projections.rows()));
  }
  const std::size_t cols = projections.cols();
  Vector proj(cols, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double* w = projections.row(i).data();
    for (std::size_t j = 0; j < cols; ++j) proj[j] += xi * w[j];
  }
  std::vector<std::uint32_t> codes(tables, 0);
  for (unsigned t = 0; t < tables; ++t) {
    std::uint32_t code = 0;
    for (unsigned b = 0; b < bits_per_table; ++b) {
      if (proj[std::size_t{t} * bits_per_table + b] >= 0.0) code |= std::uint32_t{1} << b;
    }
    codes[t] = code;
  }
  return codes;
}

std::vector<std::uint32_t> LshIndex::encode(std::span<const double> x) const {
  return simhash_codes(x, projections_, config_.bits_per_table, config_.tables);
}

std::vector<std::uint32_t> simhash_encode(std::span<const double> x, const LshIndex& index) {
  return index.encode(x);
}

std::size_t LshIndex::bucket_count(unsigned table) const { return tables_.at(table).codes.size(); }

std::uint32_t LshIndex::bucket_code(unsigned table, std::size_t bucket) const {
  return tables_.at(table).codes.at(bucket);
}

std::vector<std::size_t> LshIndex::bucket_ids(unsigned table, std::size_t bucket) const {
  const Table& t = tables_.at(table);
  std::vector<std::size_t> out;
  for (std::uint32_t e = t.offsets.at(bucket); e < t.offsets.at(bucket + 1); ++e) {
    out.push_back(ids_[t.entries[e]]);
  }
  return out;
}

std::size_t LshIndex::find_bucket(const Table& table, std::uint32_t code) const {
  auto it = std::lower_bound(table.codes.begin(), table.codes.end(), code);
  if (it == table.codes.end() || *it != code) return table.codes.size();
  return static_cast<std::size_t>(it - table.codes.begin());
}

std::vector<std::size_t> LshIndex::lookup(unsigned table, std::uint32_t code) const {
  const std::size_t b = find_bucket(tables_.at(table), code);
  if (b == tables_[table].codes.size()) return {};
  return bucket_ids(table, b);
}

LshIndex build_index(const Matrix& keys, const LshConfig& config) {
  std::vector<std::size_t> ids(keys.rows());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  return build_index(keys, ids, config);
}

LshIndex build_index(const Matrix& keys, std::span<const std::size_t> ids,
                     const LshConfig& config) {
  config.validate();
  if (ids.empty()) throw DegenerateError("build_index: no keys to index");
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] >= keys.rows()) throw ArgumentError("build_index: token id out of range");
    if (j > 0 && ids[j] <= ids[j - 1]) {
      throw ArgumentError("build_index: token ids must be strictly ascending");
    }
  }
  if (ids.size() > UINT32_MAX) throw ArgumentError("build_index: too many keys");

  LshIndex index;
  index.config_ = config;
  index.ids_.assign(ids.begin(), ids.end());
  CenteredKeys centered = center_keys(keys.gather(ids));
  index.centered_ = std::move(centered.keys);
  index.center_ = std::move(centered.center);
  index.projections_ = draw_projections(keys.cols(), config);

  const std::size_t n = ids.size();
  const unsigned tables = config.tables;
  // codes[t * n + local]
  std::vector<std::uint32_t> codes(std::size_t{tables} * n);
  for (std::size_t local = 0; local < n; ++local) {
    const auto c = index.encode(index.centered_.row(local));
    for (unsigned t = 0; t < tables; ++t) codes[std::size_t{t} * n + local] = c[t];
  }

  index.tables_.resize(tables);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs(n);
  for (unsigned t = 0; t < tables; ++t) {
    for (std::size_t local = 0; local < n; ++local) {
      pairs[local] = {codes[std::size_t{t} * n + local], static_cast<std::uint32_t>(local)};
    }
    std::sort(pairs.begin(), pairs.end());
    LshIndex::Table& table = index.tables_[t];
    table.entries.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == 0 || pairs[j].first != pairs[j - 1].first) {
        table.codes.push_back(pairs[j].first);
        table.offsets.push_back(static_cast<std::uint32_t>(j));
      }
      table.entries[j] = pairs[j].second;
    }
    table.offsets.push_back(static_cast<std::uint32_t>(n));
  }
  return index;
}

CandidateSet query_candidates(const LshIndex& index, std::span<const double> q) {
  if (q.size() != index.dim()) {
    throw ArgumentError("query_candidates: query length " + std::to_string(q.size()) +
                        " does not match index dimension " + std::to_string(index.dim()));
  }
  const LshConfig& cfg = index.config_;
  const auto codes = index.encode(q);

  std::vector<std::uint32_t> counts(index.size(), 0);
  for (unsigned t = 0; t < cfg.tables; ++t) {
    const LshIndex::Table& table = index.tables_[t];
    const std::size_t b = index.find_bucket(table, codes[t]);
    if (b == table.codes.size()) continue;
    for (std::uint32_t e = table.offsets[b]; e < table.offsets[b + 1]; ++e) ++counts[table.entries[e]];
  }

  CandidateSet out;
  for (std::size_t local = 0; local < counts.size(); ++local) {
    if (counts[local] < cfg.min_collisions) continue;
    const double p = collision_prob(q, index.centered_.row(local)).p;
    double u = sampling_prob(p, cfg.bits_per_table, cfg.tables, cfg.min_collisions);
    if (u <= 0.0) continue;
    u = std::max(u, kMinSamplingProb);
    out.indices.push_back(index.ids_[local]);
    out.collision_counts.push_back(counts[local]);
    out.probs.push_back(u);
  }
  return out;
}

}  // namespace magicpig
