#include "magicpig/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "byte_io.hpp"
#include "magicpig/errors.hpp"

namespace magicpig {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ConfigError(std::string(key), "cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

std::size_t parse_positive(std::string_view key, std::string_view text) {
  const auto v = parse_number<std::uint64_t>(key, text);
  if (v == 0) throw ConfigError(std::string(key), "must be positive");
  return static_cast<std::size_t>(v);
}

double parse_real(std::string_view key, std::string_view text) {
  const double v = parse_number<double>(key, text);
  if (!std::isfinite(v)) throw ConfigError(std::string(key), "must be finite");
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(std::string(key), "expected true or false, got '" + std::string(text) + "'");
}

Method parse_method(std::string_view key, std::string_view text) {
  for (auto m : {Method::topk, Method::oracle, Method::snis, Method::magicpig}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError(std::string(key), "unknown method '" + std::string(text) +
                                          "' (expected topk, oracle, snis or magicpig)");
}

template <typename T, typename F>
std::vector<T> parse_list(std::string_view key, std::string_view value, F&& parse_one) {
  std::vector<T> out;
  for (auto item : split_list(value)) out.push_back(parse_one(key, item));
  if (out.empty()) throw ConfigError(std::string(key), "empty list");
  return out;
}

}  // namespace

std::string_view to_string(SnisProposal proposal) {
  switch (proposal) {
    case SnisProposal::attention: return "attention";
    case SnisProposal::value_norm: return "value_norm";
    case SnisProposal::uniform: return "uniform";
  }
  return "unknown";
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  value = trim(value);
  WorkloadSpec& w = cfg.workload;
  if (key == "workload.kind") {
    w.kind = parse_workload_kind(value);
  } else if (key == "workload.n") {
    w.n = parse_positive(key, value);
  } else if (key == "workload.d") {
    w.d = parse_positive(key, value);
  } else if (key == "workload.temperature") {
    w.temperature = parse_real(key, value);
  } else if (key == "workload.top_mass") {
    w.top_mass = parse_real(key, value);
  } else if (key == "workload.cone_angle") {
    w.cone_angle = parse_real(key, value);
  } else if (key == "workload.sink_flip") {
    w.sink_flip = parse_bool(key, value);
  } else if (key == "workload.path") {
    w.path = std::string(value);
  } else if (key == "workload.seed") {
    cfg.workload_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "methods") {
    cfg.methods = parse_list<Method>(key, value, parse_method);
  } else if (key == "budgets") {
    cfg.budgets = parse_list<double>(key, value, parse_real);
  } else if (key == "lsh.K") {
    cfg.lsh_bits = parse_list<unsigned>(key, value, [](auto k, auto v) {
      return static_cast<unsigned>(parse_positive(k, v));
    });
  } else if (key == "lsh.L") {
    cfg.lsh_tables = parse_list<unsigned>(key, value, [](auto k, auto v) {
      return static_cast<unsigned>(parse_positive(k, v));
    });
  } else if (key == "lsh.min_collisions") {
    cfg.min_collisions = static_cast<unsigned>(parse_positive(key, value));
  } else if (key == "static.sink") {
    cfg.static_cache.sink_count = parse_number<std::size_t>(key, value);
  } else if (key == "static.local") {
    cfg.static_cache.local_window = parse_number<std::size_t>(key, value);
  } else if (key == "snis.proposal") {
    if (value == "attention") {
      cfg.snis_proposal = SnisProposal::attention;
    } else if (value == "value_norm") {
      cfg.snis_proposal = SnisProposal::value_norm;
    } else if (value == "uniform") {
      cfg.snis_proposal = SnisProposal::uniform;
    } else {
      throw ConfigError(std::string(key), "unknown proposal '" + std::string(value) + "'");
    }
  } else if (key == "trials") {
    cfg.trials = parse_positive(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else {
    throw ConfigError(std::string(key), "unknown key");
  }
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
    }
    set_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_file(path.string()));
}

void validate(const ExperimentConfig& cfg) {
  if (!cfg.seed) throw ConfigError("seed", "a master seed is required");
  if (cfg.methods.empty()) throw ConfigError("methods", "at least one method is required");
  const bool needs_budgets = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                         [](Method m) { return m != Method::magicpig; });
  if (needs_budgets && cfg.budgets.empty()) {
    throw ConfigError("budgets", "required for topk, oracle and snis");
  }
  for (double b : cfg.budgets) {
    if (!(b > 0.0 && b <= 1.0)) {
      throw ConfigError("budgets", "fraction " + std::to_string(b) + " outside (0, 1]");
    }
  }
  for (unsigned k : cfg.lsh_bits) {
    if (k > 32) throw ConfigError("lsh.K", "must be at most 32");
  }
  for (unsigned l : cfg.lsh_tables) {
    if (l < cfg.min_collisions) throw ConfigError("lsh.L", "must be at least lsh.min_collisions");
    if (l > 65535) throw ConfigError("lsh.L", "must fit in 16 bits");
  }
  if (cfg.workload.kind == WorkloadKind::file && cfg.workload.path.empty()) {
    throw ConfigError("workload.path", "required for file workloads");
  }
  if (cfg.workload.top_mass != 0.0 && !(cfg.workload.top_mass > 0.2 && cfg.workload.top_mass < 1.0)) {
    throw ConfigError("workload.top_mass", "must be in (0.2, 1)");
  }
}

WorkloadSpec resolved_workload(const ExperimentConfig& cfg) {
  WorkloadSpec spec = cfg.workload;
  spec.seed = cfg.workload_seed.value_or(cfg.seed.value_or(0));
  return spec;
}

}  // namespace magicpig
