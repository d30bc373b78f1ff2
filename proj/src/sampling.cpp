#include "magicpig/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "magicpig/errors.hpp"

namespace magicpig {

namespace {

void check_distribution(std::span<const double> probs, double tolerance) {
  if (probs.empty()) throw DistributionError("empty probability vector");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!std::isfinite(probs[i]) || probs[i] < 0.0) {
      throw DistributionError("probability " + std::to_string(i) + " is negative or non-finite");
    }
    sum += probs[i];
  }
  if (std::abs(sum - 1.0) > tolerance) {
    throw DistributionError("probabilities sum to " + std::to_string(sum) + ", not 1");
  }
}

ProposalDistribution normalized_proposal(Vector raw, ProposalKind kind) {
  double sum = 0.0;
  for (double x : raw) sum += x;
  if (!(sum > 0.0)) throw DegenerateError("proposal has zero total mass");
  for (double& x : raw) x /= sum;
  return {std::move(raw), kind};
}

}  // namespace

void validate(const DrawMultiset& draws, std::size_t n) {
  std::size_t total = 0;
  for (std::size_t j = 0; j < draws.draws.size(); ++j) {
    const Draw& d = draws.draws[j];
    if (d.index >= n) {
      throw ArgumentError("draw index " + std::to_string(d.index) + " out of range for n=" +
                          std::to_string(n));
    }
    if (j > 0 && d.index <= draws.draws[j - 1].index) {
      throw ArgumentError("draw indices must be unique and ascending");
    }
    if (d.multiplicity == 0) throw ArgumentError("draw multiplicity must be positive");
    total += d.multiplicity;
  }
  if (total != draws.total_draws) {
    throw ArgumentError("multiplicities sum to " + std::to_string(total) + ", total_draws is " +
                        std::to_string(draws.total_draws));
  }
}

ProposalDistribution attention_proposal(const AttentionWorkload& workload) {
  return {attention_scores(workload).weights, ProposalKind::attention_score};
}

ProposalDistribution value_norm_proposal(const AttentionWorkload& workload) {
  Vector u = attention_scores(workload).weights;
  for (std::size_t i = 0; i < u.size(); ++i) u[i] *= norm(workload.values.row(i));
  return normalized_proposal(std::move(u), ProposalKind::score_value_norm);
}

ProposalDistribution min_variance_proposal(const AttentionWorkload& workload) {
  if (workload.d() != 1) throw ArgumentError("min_variance_proposal requires d = 1");
  const AttentionScores s = attention_scores(workload);
  const double o = full_attention(workload).output[0];
  Vector u(s.weights.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = s.weights[i] * std::abs(workload.values(i, 0) - o);
    sum += u[i];
  }
  if (!(sum > 0.0)) return {s.weights, ProposalKind::custom};
  return normalized_proposal(std::move(u), ProposalKind::custom);
}

ProposalDistribution custom_proposal(Vector probs) {
  check_distribution(probs, 1e-9);
  return {std::move(probs), ProposalKind::custom};
}

CategoricalSampler::CategoricalSampler(std::span<const double> probs, double tolerance) {
  check_distribution(probs, tolerance);
  cumulative_.resize(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    cumulative_[i] = acc;
    if (probs[i] > 0.0) last_positive_ = i;
  }
}

std::size_t CategoricalSampler::draw(RandomSource& rng) const {
  const double r = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
  const auto i = static_cast<std::size_t>(it - cumulative_.begin());
  return std::min(i, last_positive_);
}

DrawMultiset CategoricalSampler::sample(std::size_t budget, RandomSource& rng) const {
  if (budget == 0) throw ArgumentError("sampling budget must be at least 1");
  std::vector<std::size_t> picks(budget);
  for (auto& p : picks) p = draw(rng);
  std::sort(picks.begin(), picks.end());

  DrawMultiset out;
  out.total_draws = budget;
  for (std::size_t j = 0; j < picks.size();) {
    std::size_t k = j;
    while (k < picks.size() && picks[k] == picks[j]) ++k;
    out.draws.push_back({picks[j], k - j});
    j = k;
  }
  return out;
}

DrawMultiset oracle_sample(std::span<const double> weights, std::size_t budget, RandomSource& rng) {
  return CategoricalSampler(weights).sample(budget, rng);
}

AttentionEstimate oracle_estimate(const AttentionWorkload& workload, const DrawMultiset& draws) {
  validate(workload);
  validate(draws, workload.n());
  if (draws.total_draws == 0) throw ArgumentError("oracle_estimate: no draws");

  const double b = static_cast<double>(draws.total_draws);
  AttentionEstimate e;
  e.output.assign(workload.d(), 0.0);
  for (const Draw& d : draws.draws) {
    const double f = static_cast<double>(d.multiplicity) / b;
    auto v = workload.values.row(d.index);
    for (std::size_t c = 0; c < e.output.size(); ++c) e.output[c] += f * v[c];
  }
  e.unique_budget = draws.unique_count();
  e.cost1 = 0.5;
  e.cost2 = static_cast<double>(e.unique_budget) / static_cast<double>(workload.n());
  e.method = Method::oracle;
  return e;
}

double oracle_theoretical_stddev(const AttentionWorkload& workload, std::size_t budget) {
  if (budget == 0) throw ArgumentError("sampling budget must be at least 1");
  const AttentionScores s = attention_scores(workload);
  const Vector o = full_attention(workload).output;
  double second_moment = 0.0;
  for (std::size_t i = 0; i < workload.n(); ++i) {
    const double vn = norm(workload.values.row(i));
    second_moment += s.weights[i] * vn * vn;
  }
  const double on = norm(o);
  const double trace = std::max(0.0, second_moment - on * on);
  return std::sqrt(trace / static_cast<double>(budget));
}

UniqueCountExpectation expected_unique_count(std::span<const double> weights, std::size_t budget) {
  check_distribution(weights, 1e-6);
  const double b = static_cast<double>(budget);
  double missing = 0.0;
  double max_w = 0.0;
  for (double w : weights) {
    missing += std::pow(1.0 - w, b);
    max_w = std::max(max_w, w);
  }
  UniqueCountExpectation out;
  out.expected = static_cast<double>(weights.size()) - missing;
  out.bound = 1.0 + b * (1.0 - max_w);
  return out;
}

AttentionEstimate snis_estimate(const AttentionWorkload& workload,
                                const ProposalDistribution& proposal, std::size_t budget,
                                RandomSource& rng) {
  if (!proposal.normalized()) {
    throw DistributionError("snis_estimate needs a normalized proposal");
  }
  const DrawMultiset draws = CategoricalSampler(proposal.probs, 1e-9).sample(budget, rng);
  return snis_estimate(workload, proposal, draws);
}

AttentionEstimate snis_estimate(const AttentionWorkload& workload,
                                const ProposalDistribution& proposal, const DrawMultiset& draws) {
  validate(workload);
  validate(draws, workload.n());
  if (proposal.probs.size() != workload.n()) {
    throw ArgumentError("proposal length " + std::to_string(proposal.probs.size()) +
                        " does not match n=" + std::to_string(workload.n()));
  }
  if (draws.draws.empty()) throw ArgumentError("snis_estimate: no draws");

  // log(f_i * w~_i / u_i), one entry per unique sampled token.
  Vector log_ratio(draws.draws.size());
  for (std::size_t j = 0; j < draws.draws.size(); ++j) {
    const Draw& d = draws.draws[j];
    const double u = proposal.probs[d.index];
    if (!(u > 0.0)) {
      throw DistributionError("sampled token " + std::to_string(d.index) + " has u = 0");
    }
    log_ratio[j] = scaled_logit(workload.q, workload.keys.row(d.index)) - std::log(u) +
                   std::log(static_cast<double>(d.multiplicity));
  }
  const double m = *std::max_element(log_ratio.begin(), log_ratio.end());
  Vector ratio(log_ratio.size());
  double total = 0.0;
  for (std::size_t j = 0; j < ratio.size(); ++j) {
    ratio[j] = std::exp(log_ratio[j] - m);
    total += ratio[j];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateError("snis_estimate: importance weights sum to zero");
  }

  AttentionEstimate e;
  e.output.assign(workload.d(), 0.0);
  for (std::size_t j = 0; j < ratio.size(); ++j) {
    const double f = ratio[j] / total;
    auto v = workload.values.row(draws.draws[j].index);
    for (std::size_t c = 0; c < e.output.size(); ++c) e.output[c] += f * v[c];
  }
  e.unique_budget = draws.unique_count();
  e.cost1 = 0.5;
  e.cost2 = static_cast<double>(e.unique_budget) / static_cast<double>(workload.n());
  e.method = Method::snis;
  return e;
}

double snis_variance_estimate(const AttentionWorkload& workload,
                              const ProposalDistribution& proposal, std::size_t budget) {
  if (workload.d() != 1) {
    throw ArgumentError("snis_variance_estimate supports d = 1 only, got d=" +
                        std::to_string(workload.d()));
  }
  if (budget == 0) throw ArgumentError("sampling budget must be at least 1");
  if (proposal.probs.size() != workload.n()) throw ArgumentError("proposal length mismatch");
  check_distribution(proposal.probs, 1e-9);

  // w~_i / Z = w_i, so the sum reduces to sum_i w_i^2 (v_i - o)^2 / u_i.
  const AttentionScores s = attention_scores(workload);
  const double o = full_attention(workload).output[0];
  double acc = 0.0;
  for (std::size_t i = 0; i < workload.n(); ++i) {
    const double dv = workload.values(i, 0) - o;
    const double num = s.weights[i] * s.weights[i] * dv * dv;
    if (num == 0.0) continue;
    if (!(proposal.probs[i] > 0.0)) return std::numeric_limits<double>::infinity();
    acc += num / proposal.probs[i];
  }
  return acc / static_cast<double>(budget);
}

}  // namespace magicpig
