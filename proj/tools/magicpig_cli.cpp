// Command line front end: workload generation, sweeps, the zoo demo, budget
// tables and index serialization.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "magicpig/config.hpp"
#include "magicpig/errors.hpp"
#include "magicpig/estimator.hpp"
#include "magicpig/lsh.hpp"
#include "magicpig/reports.hpp"
#include "magicpig/sweep.hpp"
#include "magicpig/workload.hpp"

namespace {

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw magicpig::Error("cannot open '" + out + "' for writing");
  f << text;
}

void apply_overrides(magicpig::ExperimentConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw magicpig::ConfigError(s, "--set expects key=value");
    magicpig::set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampling-based attention estimation: TopK, oracle sampling, SNIS and MagicPIG"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a workload and write it as an MPWL file");
  std::string gen_config, gen_out, gen_kind = "gaussian";
  std::vector<std::string> gen_sets;
  std::uint64_t gen_seed = 0;
  magicpig::WorkloadSpec gen_spec;
  gen->add_option("--config", gen_config, "Read workload.* keys from a config file");
  gen->add_option("--kind", gen_kind, "gaussian | cone | longtail | zoo");
  gen->add_option("--n", gen_spec.n, "Context length");
  gen->add_option("--d", gen_spec.d, "Head dimension");
  gen->add_option("--temperature", gen_spec.temperature, "Logit temperature");
  gen->add_option("--top-mass", gen_spec.top_mass, "longtail: target top-20% attention mass");
  gen->add_option("--cone-angle", gen_spec.cone_angle, "cone: half-angle in radians");
  gen->add_option("--sink-flip", gen_spec.sink_flip, "cone: place token 0 opposite the cone");
  gen->add_option("--set", gen_sets, "Override a config key (key=value)");
  gen->add_option("--seed", gen_seed, "Workload seed")->required();
  gen->add_option("--out", gen_out, "Output path")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run an estimation-error sweep and write CSV");
  std::string sweep_config, sweep_out;
  std::vector<std::string> sweep_sets;
  std::uint64_t sweep_seed = 0;
  unsigned sweep_threads = 1;
  sweep->add_option("--config", sweep_config, "Experiment config file")->required();
  sweep->add_option("--seed", sweep_seed, "Master seed")->required();
  sweep->add_option("--out", sweep_out, "CSV output path (stdout if omitted)");
  sweep->add_option("--threads", sweep_threads, "Worker threads (speed only)");
  sweep->add_option("--set", sweep_sets, "Override a config key (key=value)");

  // zoo
  auto* zoo = app.add_subcommand("zoo", "Print the 100-animal TopK vs sampling example");
  std::uint64_t zoo_seed = 0;
  std::size_t zoo_trials = 10000;
  zoo->add_option("--seed", zoo_seed, "Seed for the empirical standard deviation");
  zoo->add_option("--trials", zoo_trials, "Trials for the empirical standard deviation");

  // budget
  auto* budget = app.add_subcommand("budget", "Expected sampled fraction over a (K, L) grid");
  std::vector<unsigned> budget_k{8, 9, 10, 11}, budget_l{75, 100, 150, 200, 300};
  unsigned budget_m = 2;
  std::string budget_workload, budget_out;
  std::size_t budget_reseeds = 10;
  std::uint64_t budget_seed = 0;
  budget->add_option("--K", budget_k, "Bits per table")->delimiter(',');
  budget->add_option("--L", budget_l, "Number of tables")->delimiter(',');
  budget->add_option("--min-collisions", budget_m, "Tables that must match");
  budget->add_option("--workload", budget_workload, "MPWL file for empirical fractions");
  budget->add_option("--reseeds", budget_reseeds, "Indexes per cell for empirical fractions");
  budget->add_option("--seed", budget_seed, "Seed for empirical fractions");
  budget->add_option("--out", budget_out, "CSV output path (stdout if omitted)");

  // index
  auto* index = app.add_subcommand("index", "Build an LSH index over a workload and serialize it");
  std::string index_workload, index_out;
  magicpig::LshConfig index_cfg;
  magicpig::StaticCachePolicy index_policy{0, 0};
  index->add_option("--workload", index_workload, "MPWL input file")->required();
  index->add_option("--K", index_cfg.bits_per_table, "Bits per table");
  index->add_option("--L", index_cfg.tables, "Number of tables");
  index->add_option("--min-collisions", index_cfg.min_collisions, "Tables that must match");
  index->add_option("--sink", index_policy.sink_count, "Leading tokens left out of the index");
  index->add_option("--local", index_policy.local_window, "Trailing tokens left out of the index");
  index->add_option("--seed", index_cfg.seed, "Projection seed")->required();
  index->add_option("--out", index_out, "MPLI output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      magicpig::ExperimentConfig cfg;
      if (!gen_config.empty()) cfg = magicpig::load_config(gen_config);
      magicpig::WorkloadSpec& spec = cfg.workload;
      if (gen->count("--kind") || gen_config.empty()) spec.kind = magicpig::parse_workload_kind(gen_kind);
      if (gen->count("--n")) spec.n = gen_spec.n;
      if (gen->count("--d")) spec.d = gen_spec.d;
      if (gen->count("--temperature")) spec.temperature = gen_spec.temperature;
      if (gen->count("--top-mass")) spec.top_mass = gen_spec.top_mass;
      if (gen->count("--cone-angle")) spec.cone_angle = gen_spec.cone_angle;
      if (gen->count("--sink-flip")) spec.sink_flip = gen_spec.sink_flip;
      apply_overrides(cfg, gen_sets);
      spec.seed = gen_seed;
      const auto w = magicpig::gen_workload(spec);
      magicpig::write_workload(w, gen_out);
      std::cerr << "wrote " << gen_out << " (n=" << w.n() << ", d=" << w.d() << ")\n";
    } else if (sweep->parsed()) {
      auto cfg = magicpig::load_config(sweep_config);
      apply_overrides(cfg, sweep_sets);
      cfg.seed = sweep_seed;
      emit(magicpig::to_csv(magicpig::run_sweep(cfg, sweep_threads)), sweep_out);
    } else if (zoo->parsed()) {
      std::cout << magicpig::format_zoo_report(magicpig::zoo_demo(zoo_seed, zoo_trials));
    } else if (budget->parsed()) {
      std::vector<magicpig::BudgetCell> cells;
      if (budget_workload.empty()) {
        cells = magicpig::budget_table(budget_k, budget_l, budget_m);
      } else {
        const auto w = magicpig::read_workload(budget_workload);
        cells = magicpig::budget_table(budget_k, budget_l, budget_m, w, budget_reseeds, budget_seed);
      }
      emit(magicpig::budget_csv(cells), budget_out);
    } else if (index->parsed()) {
      const auto w = magicpig::read_workload(index_workload);
      const auto idx = magicpig::build_dynamic_index(w, index_policy, index_cfg);
      if (!idx) throw magicpig::DegenerateError("static cache covers every token; nothing to index");
      magicpig::write_index(*idx, index_out);
      const auto candidates = magicpig::query_candidates(*idx, w.q);
      std::cerr << "wrote " << index_out << " (" << idx->size() << " keys, K="
                << index_cfg.bits_per_table << ", L=" << index_cfg.tables << "); query samples "
                << candidates.size() << " keys\n";
    }
  } catch (const magicpig::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
