#include "magicpig/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "magicpig/errors.hpp"
#include "magicpig/estimator.hpp"
#include "magicpig/random.hpp"
#include "magicpig/sampling.hpp"

namespace magicpig {

namespace {

constexpr std::string_view kCsvHeader = "method,config,budget,err_mean,err_std,cost1,cost2,trials";

struct Cell {
  Method method;
  std::string config;
  double budget = 0.0;
  std::size_t draws = 0;  // k for topk, B for oracle / snis
  LshConfig lsh;
  std::size_t trials = 1;
};

struct TrialResult {
  double err = 0.0;
  double cost1 = 0.0;
  double cost2 = 0.0;
};

std::vector<Cell> plan_cells(const ExperimentConfig& cfg, std::size_t n) {
  std::vector<Cell> cells;
  const auto nd = static_cast<double>(n);
  for (Method m : cfg.methods) {
    if (m == Method::magicpig) {
      for (unsigned k : cfg.lsh_bits) {
        for (unsigned l : cfg.lsh_tables) {
          Cell c{m, {}, 0.0, 0, {k, l, cfg.min_collisions, 0}, cfg.trials};
          c.budget = expected_budget(k, l, cfg.min_collisions);
          c.config = "K=" + std::to_string(k) + " L=" + std::to_string(l) +
                     " m=" + std::to_string(cfg.min_collisions) +
                     " sink=" + std::to_string(cfg.static_cache.sink_count) +
                     " local=" + std::to_string(cfg.static_cache.local_window);
          cells.push_back(std::move(c));
        }
      }
      continue;
    }
    for (double b : cfg.budgets) {
      Cell c{m, {}, b, 0, {}, cfg.trials};
      if (m == Method::topk) {
        c.draws = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(b * nd - 1e-9)), 1, n);
        c.config = "k=" + std::to_string(c.draws);
        c.trials = 1;
      } else {
        c.draws = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(b * nd)));
        c.config = "B=" + std::to_string(c.draws);
        if (m == Method::snis) c.config += " proposal=" + std::string(to_string(cfg.snis_proposal));
      }
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

ProposalDistribution snis_proposal(const AttentionWorkload& w, SnisProposal kind) {
  switch (kind) {
    case SnisProposal::attention: return attention_proposal(w);
    case SnisProposal::value_norm: return value_norm_proposal(w);
    case SnisProposal::uniform:
      return custom_proposal(Vector(w.n(), 1.0 / static_cast<double>(w.n())));
  }
  return attention_proposal(w);
}

template <typename F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::string format_real(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config, unsigned threads) {
  validate(config);
  return run_sweep(config, gen_workload(resolved_workload(config)), threads);
}

SweepResult run_sweep(const ExperimentConfig& config, const AttentionWorkload& workload,
                      unsigned threads) {
  validate(config);
  validate(workload);
  const std::uint64_t seed = *config.seed;
  const std::size_t n = workload.n();
  const std::vector<Cell> cells = plan_cells(config, n);

  const Vector reference = full_attention(workload).output;
  const AttentionScores scores = attention_scores(workload);
  const CategoricalSampler oracle_sampler(scores.weights);
  const bool wants_snis = std::find(config.methods.begin(), config.methods.end(), Method::snis) !=
                          config.methods.end();
  const ProposalDistribution proposal =
      wants_snis ? snis_proposal(workload, config.snis_proposal) : ProposalDistribution{};

  struct Job {
    std::size_t cell;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  std::vector<std::size_t> first_job(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    first_job[c] = jobs.size();
    for (std::size_t t = 0; t < cells[c].trials; ++t) jobs.push_back({c, t});
  }

  std::vector<TrialResult> results(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const Cell& cell = cells[jobs[j].cell];
    const std::uint64_t stream = derive_stream(jobs[j].cell, jobs[j].trial);
    RandomSource rng(seed, stream);
    AttentionEstimate est;
    switch (cell.method) {
      case Method::topk:
        est = topk_attention(workload, cell.draws);
        break;
      case Method::oracle:
        est = oracle_estimate(workload, oracle_sampler.sample(cell.draws, rng));
        break;
      case Method::snis:
        est = snis_estimate(workload, proposal, cell.draws, rng);
        break;
      case Method::magicpig: {
        LshConfig lsh = cell.lsh;
        lsh.seed = rng.next_u64();
        const auto index = build_dynamic_index(workload, config.static_cache, lsh);
        est = magicpig_estimate(workload, index ? &*index : nullptr, config.static_cache).estimate;
        break;
      }
      case Method::full:
        est = full_attention(workload);
        break;
    }
    results[j] = {relative_error(est.output, reference), est.cost1, est.cost2};
  });

  SweepResult out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Cell& cell = cells[c];
    const auto trials = static_cast<double>(cell.trials);
    SweepRow row;
    row.method = std::string(to_string(cell.method));
    row.config = cell.config;
    row.budget = cell.budget;
    row.trials = cell.trials;
    for (std::size_t t = 0; t < cell.trials; ++t) {
      const TrialResult& r = results[first_job[c] + t];
      row.err_mean += r.err;
      row.cost1 += r.cost1;
      row.cost2 += r.cost2;
    }
    row.err_mean /= trials;
    row.cost1 /= trials;
    row.cost2 /= trials;
    if (cell.trials > 1) {
      double ss = 0.0;
      for (std::size_t t = 0; t < cell.trials; ++t) {
        const double dev = results[first_job[c] + t].err - row.err_mean;
        ss += dev * dev;
      }
      row.err_std = std::sqrt(ss / (trials - 1.0));
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string to_csv(const SweepResult& result) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const SweepRow& r : result.rows) {
    out += r.method + ',' + r.config + ',' + format_real(r.budget) + ',' +
           format_real(r.err_mean) + ',' + format_real(r.err_std) + ',' + format_real(r.cost1) +
           ',' + format_real(r.cost2) + ',' + std::to_string(r.trials) + '\n';
  }
  return out;
}

SweepResult parse_csv(std::string_view text) {
  SweepResult out;
  std::size_t offset = 0;
  bool header = true;
  while (offset < text.size()) {
    const std::size_t nl = text.find('\n', offset);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(offset, end - offset);
    const std::size_t line_at = offset;
    offset = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      if (line != kCsvHeader) throw FormatError("unexpected CSV header", line_at);
      header = false;
      continue;
    }
    std::vector<std::string_view> f;
    for (std::size_t p = 0;;) {
      const std::size_t c = line.find(',', p);
      f.push_back(line.substr(p, c == std::string_view::npos ? std::string_view::npos : c - p));
      if (c == std::string_view::npos) break;
      p = c + 1;
    }
    if (f.size() != 8) {
      throw FormatError("CSV row has " + std::to_string(f.size()) + " fields, expected 8", line_at);
    }
    auto real = [&](std::string_view s) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError("bad number '" + std::string(s) + "'", line_at);
      }
      return v;
    };
    SweepRow r;
    r.method = std::string(f[0]);
    r.config = std::string(f[1]);
    r.budget = real(f[2]);
    r.err_mean = real(f[3]);
    r.err_std = real(f[4]);
    r.cost1 = real(f[5]);
    r.cost2 = real(f[6]);
    const auto [ptr, ec] = std::from_chars(f[7].data(), f[7].data() + f[7].size(), r.trials);
    if (ec != std::errc{} || ptr != f[7].data() + f[7].size()) {
      throw FormatError("bad trial count '" + std::string(f[7]) + "'", line_at);
    }
    out.rows.push_back(std::move(r));
  }
  if (header) throw FormatError("missing CSV header", 0);
  return out;
}

}  // namespace magicpig
