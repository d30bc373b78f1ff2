#include "magicpig/reports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "magicpig/lsh.hpp"
#include "magicpig/random.hpp"
#include "magicpig/sampling.hpp"
#include "magicpig/workload.hpp"

namespace magicpig {

namespace {

double empirical_stddev(const AttentionWorkload& zoo, const CategoricalSampler& sampler,
                        std::size_t budget, std::size_t trials, RandomSource& rng) {
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const double x = oracle_estimate(zoo, sampler.sample(budget, rng)).output[0];
    sum += x;
    sum_sq += x * x;
  }
  const double n = static_cast<double>(trials);
  const double mean = sum / n;
  return std::sqrt(std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)));
}

std::string real(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

ZooReport zoo_demo(std::uint64_t seed, std::size_t trials) {
  const AttentionWorkload zoo = zoo_workload();
  const AttentionScores scores = attention_scores(zoo);
  const CategoricalSampler sampler(scores.weights);

  ZooReport r;
  r.trials = trials;
  r.true_average = full_attention(zoo).output[0];
  r.topk_37 = topk_attention(zoo, 37).output[0];
  r.topk_47 = topk_attention(zoo, 47).output[0];
  r.stddev_b10 = oracle_theoretical_stddev(zoo, 10);
  r.stddev_b20 = oracle_theoretical_stddev(zoo, 20);
  RandomSource rng(seed, 0x7a6f6f);
  if (trials > 1) {
    r.empirical_stddev_b10 = empirical_stddev(zoo, sampler, 10, trials, rng);
    r.empirical_stddev_b20 = empirical_stddev(zoo, sampler, 20, trials, rng);
  }
  return r;
}

std::string format_zoo_report(const ZooReport& r) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "zoo: 10 elephants (50 lb), 10 pigs (20 lb), 10 tigers (10 lb), 70 others (1 lb)\n"
                "  true average            %8.4f lb\n"
                "  TopK average, k=37      %8.4f lb\n"
                "  TopK average, k=47      %8.4f lb\n"
                "  oracle std, B=10        %8.4f lb  (empirical %.4f over %zu trials)\n"
                "  oracle std, B=20        %8.4f lb  (empirical %.4f over %zu trials)\n",
                r.true_average, r.topk_37, r.topk_47, r.stddev_b10, r.empirical_stddev_b10,
                r.trials, r.stddev_b20, r.empirical_stddev_b20, r.trials);
  return buf;
}

std::vector<BudgetCell> budget_table(std::span<const unsigned> bits, std::span<const unsigned> tables,
                                     unsigned min_collisions) {
  std::vector<BudgetCell> cells;
  for (unsigned k : bits) {
    for (unsigned l : tables) cells.push_back({k, l, expected_budget(k, l, min_collisions), {}});
  }
  return cells;
}

std::vector<BudgetCell> budget_table(std::span<const unsigned> bits, std::span<const unsigned> tables,
                                     unsigned min_collisions, const AttentionWorkload& workload,
                                     std::size_t reseeds, std::uint64_t seed) {
  std::vector<BudgetCell> cells = budget_table(bits, tables, min_collisions);
  validate(workload);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    double total = 0.0;
    for (std::size_t r = 0; r < reseeds; ++r) {
      LshConfig cfg{cells[c].bits_per_table, cells[c].tables, min_collisions,
                    derive_stream(seed, derive_stream(c, r))};
      const LshIndex index = build_index(workload.keys, cfg);
      total += static_cast<double>(query_candidates(index, workload.q).size()) /
               static_cast<double>(workload.n());
    }
    if (reseeds > 0) cells[c].empirical = total / static_cast<double>(reseeds);
  }
  return cells;
}

std::string budget_csv(std::span<const BudgetCell> cells) {
  std::string out = "K,L,theoretical,empirical\n";
  for (const BudgetCell& c : cells) {
    out += std::to_string(c.bits_per_table) + ',' + std::to_string(c.tables) + ',' +
           real(c.theoretical) + ',' + (c.empirical ? real(*c.empirical) : std::string()) + '\n';
  }
  return out;
}

}  // namespace magicpig
