#include "magicpig/workload.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "byte_io.hpp"
#include "magicpig/errors.hpp"
#include "magicpig/random.hpp"

namespace magicpig {

namespace {

constexpr std::string_view kWorkloadMagic = "MPWL";
constexpr std::uint16_t kWorkloadVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4;

Vector gaussian_vector(std::size_t d, RandomSource& rng) {
  Vector v(d);
  for (double& x : v) x = rng.normal();
  return v;
}

Vector unit_vector(std::size_t d, RandomSource& rng) {
  for (;;) {
    Vector v = gaussian_vector(d, rng);
    const double nv = norm(v);
    if (nv > 1e-12) {
      for (double& x : v) x /= nv;
      return v;
    }
  }
}

// Random unit vector orthogonal to the unit vector `axis`.
Vector orthogonal_unit(std::span<const double> axis, RandomSource& rng) {
  for (;;) {
    Vector v = gaussian_vector(axis.size(), rng);
    const double along = dot(v, axis);
    for (std::size_t c = 0; c < v.size(); ++c) v[c] -= along * axis[c];
    const double nv = norm(v);
    if (nv > 1e-12) {
      for (double& x : v) x /= nv;
      return v;
    }
  }
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, RandomSource& rng) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

void check_shape(const WorkloadSpec& spec) {
  if (spec.n < 1) throw ConfigError("workload.n", "must be at least 1");
  if (spec.d < 1) throw ConfigError("workload.d", "must be at least 1");
  if (!(spec.temperature > 0.0) || !std::isfinite(spec.temperature)) {
    throw ConfigError("workload.temperature", "must be a positive finite number");
  }
}

AttentionWorkload gen_gaussian(const WorkloadSpec& spec) {
  RandomSource rng(spec.seed, 1);
  AttentionWorkload w;
  w.q = gaussian_vector(spec.d, rng);
  for (double& x : w.q) x /= spec.temperature;
  w.keys = gaussian_matrix(spec.n, spec.d, rng);
  w.values = gaussian_matrix(spec.n, spec.d, rng);
  return w;
}

AttentionWorkload gen_longtail(const WorkloadSpec& spec, double temperature) {
  RandomSource rng(spec.seed, 2);
  AttentionWorkload w;
  w.q = unit_vector(spec.d, rng);
  const double scale = std::sqrt(static_cast<double>(spec.d)) / temperature;
  for (double& x : w.q) x *= scale;
  w.keys = gaussian_matrix(spec.n, spec.d, rng);
  w.values = gaussian_matrix(spec.n, spec.d, rng);
  return w;
}

AttentionWorkload gen_cone(const WorkloadSpec& spec) {
  if (spec.d < 2) throw ConfigError("workload.d", "cone workloads need d >= 2");
  if (!(spec.cone_angle > 0.0 && spec.cone_angle < std::acos(-1.0))) {
    throw ConfigError("workload.cone_angle", "must be in (0, pi)");
  }
  RandomSource rng(spec.seed, 3);
  const double radius = std::sqrt(static_cast<double>(spec.d));
  const Vector axis = unit_vector(spec.d, rng);

  auto in_cone = [&](double sign, double length) {
    const double angle = spec.cone_angle * rng.uniform();
    const Vector side = orthogonal_unit(axis, rng);
    Vector v(spec.d);
    for (std::size_t c = 0; c < spec.d; ++c) {
      v[c] = length * (sign * std::cos(angle) * axis[c] + std::sin(angle) * side[c]);
    }
    return v;
  };

  AttentionWorkload w;
  w.q = in_cone(-1.0, radius / spec.temperature);
  w.keys = Matrix(spec.n, spec.d);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double sign = (i == 0 && spec.sink_flip) ? -1.0 : 1.0;
    const Vector k = in_cone(sign, radius);
    std::copy(k.begin(), k.end(), w.keys.row(i).begin());
  }
  w.values = gaussian_matrix(spec.n, spec.d, rng);
  return w;
}

}  // namespace

std::string_view to_string(WorkloadKind kind) {
  switch (kind) {
    case WorkloadKind::gaussian: return "gaussian";
    case WorkloadKind::cone: return "cone";
    case WorkloadKind::longtail: return "longtail";
    case WorkloadKind::file: return "file";
    case WorkloadKind::zoo: return "zoo";
  }
  return "unknown";
}

WorkloadKind parse_workload_kind(std::string_view name) {
  for (auto k : {WorkloadKind::gaussian, WorkloadKind::cone, WorkloadKind::longtail,
                 WorkloadKind::file, WorkloadKind::zoo}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("workload.kind", "unknown kind '" + std::string(name) + "'");
}

double top_fraction_mass(std::span<const double> weights, double fraction) {
  if (weights.empty()) return 0.0;
  Vector sorted(weights.begin(), weights.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(sorted.size())));
  double top = 0.0, total = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    total += sorted[i];
    if (i < k) top += sorted[i];
  }
  return top / total;
}

double calibrate_longtail_temperature(const WorkloadSpec& spec, double target_mass) {
  if (!(target_mass > 0.2 && target_mass < 1.0)) {
    throw ConfigError("workload.top_mass", "must be in (0.2, 1)");
  }
  // Logits scale as 1 / temperature, so the unit-temperature logits are
  // computed once. Mass falls monotonically toward 0.2 as temperature grows.
  const Vector base = attention_scores(gen_longtail(spec, 1.0)).logits;
  auto mass_at = [&](double temperature) {
    Vector scaled(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) scaled[i] = base[i] / temperature;
    return top_fraction_mass(softmax(scaled));
  };
  double lo = std::log(1e-3), hi = std::log(1e3);
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mass_at(std::exp(mid)) > target_mass) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

AttentionWorkload gen_workload(const WorkloadSpec& spec) {
  switch (spec.kind) {
    case WorkloadKind::file:
      if (spec.path.empty()) throw ConfigError("workload.path", "required for file workloads");
      return read_workload(spec.path);
    case WorkloadKind::zoo:
      return zoo_workload();
    case WorkloadKind::gaussian:
      check_shape(spec);
      return gen_gaussian(spec);
    case WorkloadKind::longtail: {
      check_shape(spec);
      const double t = spec.top_mass > 0.0 ? calibrate_longtail_temperature(spec, spec.top_mass)
                                           : spec.temperature;
      return gen_longtail(spec, t);
    }
    case WorkloadKind::cone:
      check_shape(spec);
      return gen_cone(spec);
  }
  throw ConfigError("workload.kind", "unknown kind");
}

AttentionWorkload zoo_workload() {
  AttentionWorkload w;
  w.q = {0.0};
  w.keys = Matrix(100, 1, 0.0);
  w.values = Matrix(100, 1);
  for (std::size_t i = 0; i < 100; ++i) {
    w.values(i, 0) = i < 10 ? 50.0 : i < 20 ? 20.0 : i < 30 ? 10.0 : 1.0;
  }
  return w;
}

std::string encode_workload(const AttentionWorkload& workload) {
  validate(workload);
  detail::ByteWriter out;
  out.put_bytes(kWorkloadMagic);
  out.put_u16(kWorkloadVersion);
  out.put_u32(static_cast<std::uint32_t>(workload.n()));
  out.put_u32(static_cast<std::uint32_t>(workload.d()));
  auto put = [&](std::span<const double> xs) {
    for (double x : xs) {
      const auto f = static_cast<float>(x);
      if (!std::isfinite(f)) throw InputError("value does not fit in f32");
      out.put_f32(f);
    }
  };
  put(workload.q);
  put(workload.keys.data());
  put(workload.values.data());
  return out.take();
}

AttentionWorkload decode_workload(std::string_view bytes) {
  detail::ByteReader in(bytes);
  in.require(kHeaderBytes, "header");
  if (in.get_bytes(4, "magic") != kWorkloadMagic) throw FormatError("bad magic, expected MPWL", 0);
  const std::size_t version_at = in.offset();
  const std::uint16_t version = in.get_u16("version");
  if (version != kWorkloadVersion) {
    throw FormatError("unsupported workload version " + std::to_string(version), version_at);
  }
  const std::size_t n_at = in.offset();
  const std::size_t n = in.get_u32("n");
  const std::size_t d = in.get_u32("d");
  if (n == 0 || d == 0) throw FormatError("n and d must be positive", n_at);

  const std::size_t expected = kHeaderBytes + 4 * (d + 2 * n * d);
  if (bytes.size() != expected) {
    throw FormatError("workload with n=" + std::to_string(n) + ", d=" + std::to_string(d) +
                          " needs " + std::to_string(expected) + " bytes, file has " +
                          std::to_string(bytes.size()),
                      std::min(bytes.size(), expected));
  }

  AttentionWorkload w;
  w.q.resize(d);
  for (double& x : w.q) x = in.get_f32("q");
  w.keys = Matrix(n, d);
  for (double& x : w.keys.data()) x = in.get_f32("keys");
  w.values = Matrix(n, d);
  for (double& x : w.values.data()) x = in.get_f32("values");
  try {
    validate(w);
  } catch (const InputError& e) {
    throw FormatError(e.what(), kHeaderBytes);
  }
  return w;
}

void write_workload(const AttentionWorkload& workload, const std::filesystem::path& path) {
  detail::write_file(path.string(), encode_workload(workload));
}

AttentionWorkload read_workload(const std::filesystem::path& path) {
  return decode_workload(detail::read_file(path.string()));
}

}  // namespace magicpig
