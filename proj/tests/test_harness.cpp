#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "doctest.h"
#include "moe2/harness.hpp"
#include "moe2/rng.hpp"

using namespace moe2;

namespace {

HardwareTier mid_tier(int count) {
  HardwareTier tier;
  tier.count = count;
  tier.flops_per_token = {1e9, 2e9};
  tier.compute_capability = {5e11, 1e12};
  tier.mem_access_size = {1e8, 2e8};
  tier.mem_bandwidth = {1e10, 2e10};
  tier.overhead_seconds = {0.002, 0.01};
  tier.data_rate = {5e4, 1e5};
  tier.energy_base = {0.5, 1.5};
  tier.energy_per_context_token = {1e-4, 5e-4};
  return tier;
}

WorkloadSpec small_workload_spec(int n_prompts, int k_clusters, int n_app_classes) {
  WorkloadSpec spec;
  spec.n_prompts = n_prompts;
  spec.embedding_dim = 2;
  spec.k_clusters = k_clusters;
  spec.vocab_size = 16;
  spec.n_app_classes = n_app_classes;
  spec.prompt_len_min = 16;
  spec.prompt_len_max = 32;
  spec.answer_len_min = 2;
  spec.answer_len_max = 3;
  return spec;
}

FleetSpec small_fleet_spec(int n_experts, int k_clusters) {
  FleetSpec spec;
  spec.n_experts = n_experts;
  spec.k_clusters = k_clusters;
  spec.hardware_tiers = {mid_tier(n_experts)};
  return spec;
}

ExperimentConfig small_experiment() {
  ExperimentConfig cfg;
  cfg.workload = small_workload_spec(24, 2, 2);
  cfg.fleet = small_fleet_spec(3, 2);
  cfg.train.hidden_dims = {8};
  cfg.train.epochs = 2;
  cfg.sweep.tau_rows = {{1e6, 1e6}};
  cfg.sweep.e_cols = {1e6, 1e-9};  // slack cell, then a hopeless one
  cfg.sweep.methods = {Method::kMoe2,        Method::kSmoMv,
                       Method::kRandMv,      Method::kSingleAgent,
                       Method::kMajorityVoteFull, Method::kAverageExpertAccuracy};
  cfg.sweep.replicates = 1;
  cfg.sweep.base_seed = 7;
  cfg.sweep.train_fraction = 0.75;
  return cfg;
}

bool rows_equal(const ResultRow& a, const ResultRow& b) {
  return a.method == b.method && a.tau_max == b.tau_max && a.e_max == b.e_max && a.k == b.k &&
         a.seed == b.seed && a.feasible == b.feasible && a.has_mask == b.has_mask &&
         a.mask_bits == b.mask_bits && a.n_experts == b.n_experts &&
         a.rand_draws == b.rand_draws && a.accuracy == b.accuracy &&
         a.class_mean_delay == b.class_mean_delay && a.mean_energy == b.mean_energy;
}

}  // namespace

TEST_CASE("method names round trip and reject strangers") {
  const Method all[] = {Method::kMoe2,        Method::kSmoMv,
                        Method::kRandMv,      Method::kSingleAgent,
                        Method::kMajorityVoteFull, Method::kAverageExpertAccuracy};
  for (Method m : all) CHECK(method_from_name(method_name(m)) == m);
  CHECK(method_name(Method::kMoe2) == "moe2");
  CHECK(method_name(Method::kMajorityVoteFull) == "majority_vote_full");
  CHECK_THROWS(method_from_name("ensemble"));
  CHECK_THROWS(method_from_name(""));
}

TEST_CASE("workload splits keep metadata and original prompt ids") {
  Workload w = generate_workload(small_workload_spec(10, 2, 2), Rng(41));
  auto [train, eval] = split_workload(w, 0.8);
  CHECK(train.prompts.size() == 8);
  CHECK(eval.prompts.size() == 2);
  CHECK(train.vocab_size == w.vocab_size);
  CHECK(eval.n_app_classes == w.n_app_classes);
  CHECK(eval.n_clusters == w.n_clusters);
  for (int i = 0; i < 8; ++i) CHECK(train.prompts[i].id == w.prompts[i].id);
  for (int i = 0; i < 2; ++i) CHECK(eval.prompts[i].id == w.prompts[8 + i].id);

  // extreme fractions clamp so both sides stay populated
  auto [t2, e2] = split_workload(w, 0.01);
  CHECK(t2.prompts.size() == 1);
  CHECK(e2.prompts.size() == 9);
  auto [t3, e3] = split_workload(w, 0.999);
  CHECK(t3.prompts.size() == 9);
  CHECK(e3.prompts.size() == 1);

  CHECK_THROWS(split_workload(w, 0.0));
  CHECK_THROWS(split_workload(w, 1.0));
  Workload lone = w;
  lone.prompts.resize(1);
  CHECK_THROWS(split_workload(lone, 0.5));
}

TEST_CASE("budget grids cross rows with columns in row-major order") {
  SweepConfig sweep;
  sweep.tau_rows = {{1.0}, {2.0}};
  sweep.e_cols = {10.0, 20.0};
  sweep.methods = {Method::kMoe2};
  const std::vector<ConstraintSet> cells = sweep.cells();
  REQUIRE(cells.size() == 4);
  CHECK(cells[0].tau_max == std::vector<double>{1.0});
  CHECK(cells[0].e_max == 10.0);
  CHECK(cells[1].tau_max == std::vector<double>{1.0});
  CHECK(cells[1].e_max == 20.0);
  CHECK(cells[2].tau_max == std::vector<double>{2.0});
  CHECK(cells[2].e_max == 10.0);
  CHECK(cells[3].tau_max == std::vector<double>{2.0});
  CHECK(cells[3].e_max == 20.0);
}

TEST_CASE("sweep validation rejects malformed grids") {
  SweepConfig good;
  good.tau_rows = {{1.0, 2.0}};
  good.e_cols = {5.0};
  good.methods = {Method::kMoe2};
  CHECK_NOTHROW(good.validate());

  SweepConfig s = good;
  s.tau_rows.clear();
  CHECK_THROWS(s.validate());
  s = good;
  s.tau_rows = {{1.0, 2.0}, {1.0}};
  CHECK_THROWS(s.validate());
  s = good;
  s.tau_rows = {{1.0, 0.0}};
  CHECK_THROWS(s.validate());
  s = good;
  s.e_cols.clear();
  CHECK_THROWS(s.validate());
  s = good;
  s.e_cols = {-1.0};
  CHECK_THROWS(s.validate());
  s = good;
  s.methods.clear();
  CHECK_THROWS(s.validate());
  s = good;
  s.replicates = 0;
  CHECK_THROWS(s.validate());
  s = good;
  s.train_fraction = 1.0;
  CHECK_THROWS(s.validate());
}

TEST_CASE("experiment validation cross-checks grid and generator shapes") {
  ExperimentConfig cfg = small_experiment();
  CHECK_NOTHROW(cfg.validate());

  ExperimentConfig wrong_classes = cfg;
  wrong_classes.sweep.tau_rows = {{1e6}};  // workload declares two app classes
  CHECK_THROWS(wrong_classes.validate());

  ExperimentConfig wrong_clusters = cfg;
  wrong_clusters.fleet.k_clusters = 3;
  CHECK_THROWS(wrong_clusters.validate());
}

TEST_CASE("uniform-vote baseline scores the subset it was given") {
  Workload w = generate_workload(small_workload_spec(6, 2, 2), Rng(42));
  Fleet fleet = generate_fleet(small_fleet_spec(3, 2), Rng(43));
  InferenceConfig ic;
  const CostModelParams model;

  MethodEval ev = run_baseline_majority_vote(SubsetMask::full(3), w, fleet, ic, model);
  CHECK(ev.accuracy >= 0.0);
  CHECK(ev.accuracy <= 1.0);
  REQUIRE(ev.class_mean_delay.size() == 2);
  CHECK(ev.mean_energy > 0.0);

  // a singleton vote is just that expert decoding alone
  MethodEval solo = run_baseline_majority_vote(SubsetMask::single(3, 1), w, fleet, ic, model);
  std::vector<std::vector<int>> outputs;
  for (const Prompt& p : w.prompts) {
    GenerationResult r = generate_with_weights({1}, std::vector<double>{1.0}, p, fleet,
                                               w.vocab_size, ic, model);
    outputs.push_back(r.tokens);
  }
  CHECK(solo.accuracy == score_accuracy(outputs, w));

  CHECK_THROWS(run_baseline_majority_vote(SubsetMask(3, 0), w, fleet, ic, model));
  CHECK_THROWS(run_baseline_majority_vote(SubsetMask::full(4), w, fleet, ic, model));
}

TEST_CASE("random subset draws are uniform over nonempty masks") {
  // one app class: four prompts cannot be guaranteed to cover two classes
  auto w = std::make_shared<Workload>(generate_workload(small_workload_spec(4, 2, 1), Rng(44)));
  auto fleet = std::make_shared<Fleet>(generate_fleet(small_fleet_spec(4, 2), Rng(45)));
  CostCache cache(w, fleet, CostModelParams{});
  ConstraintSet slack;
  slack.tau_max = {1e6};
  slack.e_max = 1e6;
  InferenceConfig ic;

  const int n_draws = 4000;
  std::map<std::uint32_t, int> counts;
  for (int i = 0; i < n_draws; ++i) {
    RandomSubsetResult r = run_baseline_random_subset(
        slack, *w, *fleet, cache, Rng(46).substream(static_cast<std::uint64_t>(i)), ic,
        CostModelParams{});
    CHECK(r.draws == 1);  // everything is feasible, the first draw lands
    counts[r.mask.bits()] += 1;
  }

  // chi-square over the 15 nonempty masks, df = 14, alpha = 0.01
  const double expected = static_cast<double>(n_draws) / 15.0;
  double chi2 = 0.0;
  for (std::uint32_t bits = 1; bits < 16; ++bits) {
    const double diff = counts[bits] - expected;
    chi2 += diff * diff / expected;
  }
  CHECK(chi2 < 29.141);
}

TEST_CASE("random subset search gives up after the draw cap") {
  auto w = std::make_shared<Workload>(generate_workload(small_workload_spec(4, 2, 1), Rng(47)));
  auto fleet = std::make_shared<Fleet>(generate_fleet(small_fleet_spec(4, 2), Rng(48)));
  CostCache cache(w, fleet, CostModelParams{});
  ConstraintSet hopeless;
  hopeless.tau_max = {1e6};
  hopeless.e_max = 1e-12;
  CHECK_THROWS_AS(run_baseline_random_subset(hopeless, *w, *fleet, cache, Rng(49),
                                             InferenceConfig{}, CostModelParams{}),
                  infeasible_error);
}

TEST_CASE("fleet-average accuracy is the mean of singleton runs") {
  Workload w = generate_workload(small_workload_spec(8, 2, 2), Rng(50));
  Fleet fleet = generate_fleet(small_fleet_spec(3, 2), Rng(51));
  InferenceConfig ic;
  const CostModelParams model;

  MethodEval mean = average_expert_accuracy(w, fleet, ic, model);

  double acc = 0.0;
  double energy = 0.0;
  std::vector<double> delay(w.n_app_classes, 0.0);
  for (int id = 0; id < fleet.size(); ++id) {
    MethodEval ev =
        run_baseline_majority_vote(SubsetMask::single(3, id), w, fleet, ic, model);
    acc += ev.accuracy;
    energy += ev.mean_energy;
    for (int m = 0; m < w.n_app_classes; ++m) delay[m] += ev.class_mean_delay[m];
  }
  const double inv = 1.0 / 3.0;
  CHECK(mean.accuracy == doctest::Approx(acc * inv).epsilon(1e-12));
  CHECK(mean.mean_energy == doctest::Approx(energy * inv).epsilon(1e-12));
  for (int m = 0; m < w.n_app_classes; ++m)
    CHECK(mean.class_mean_delay[m] == doctest::Approx(delay[m] * inv).epsilon(1e-12));
}

TEST_CASE("the experiment walks the grid and honors each cell's budgets") {
  ExperimentConfig cfg = small_experiment();
  ResultTable table = run_experiment(cfg);
  const std::size_t n_methods = cfg.sweep.methods.size();
  REQUIRE(table.rows.size() == 2 * n_methods);  // 1 rep x 2 cells x 6 methods

  const std::vector<ConstraintSet> cells = cfg.sweep.cells();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const ResultRow& row = table.rows[i];
    const ConstraintSet& cell = cells[i / n_methods];
    CHECK(row.method == method_name(cfg.sweep.methods[i % n_methods]));
    CHECK(row.tau_max == cell.tau_max);
    CHECK(row.e_max == cell.e_max);
    CHECK(row.seed == cfg.sweep.base_seed);
    CHECK(row.n_experts == 3);
    CHECK(row.accuracy >= 0.0);
    CHECK(row.accuracy <= 1.0);
  }

  // rebuild the replicate's eval split to audit the masks against budgets
  Rng root(cfg.sweep.base_seed);
  const Workload workload = generate_workload(cfg.workload, root.substream(1));
  const Fleet fleet = generate_fleet(cfg.fleet, root.substream(2));
  auto [train_wl, eval_wl] = split_workload(workload, cfg.sweep.train_fraction);

  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const ResultRow& row = table.rows[i];
    const ConstraintSet& cell = cells[i / n_methods];
    if (row.method == "majority_vote_full" || row.method == "average_expert_accuracy") {
      CHECK(!row.has_mask);   // budget-blind references never carry one
      CHECK(row.feasible);
      continue;
    }
    if (i / n_methods == 0) {
      // slack cell: every budgeted method finds a subset
      REQUIRE(row.feasible);
      REQUIRE(row.has_mask);
      const SubsetMask mask(3, row.mask_bits);
      CHECK(is_feasible(eval_wl, fleet, mask, cell, cfg.cost_model));
      if (row.method == "rand_mv") CHECK(row.rand_draws >= 1);
      if (row.method == "single_agent") CHECK(mask.popcount() == 1);
    } else {
      // hopeless energy budget: budgeted methods report infeasible
      CHECK(!row.feasible);
      CHECK(row.accuracy == 0.0);
    }
  }
}

TEST_CASE("experiments replay bit-identically from their config") {
  ExperimentConfig cfg = small_experiment();
  cfg.sweep.e_cols = {1e6};  // one cell is enough here
  ResultTable a = run_experiment(cfg);
  ResultTable b = run_experiment(cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(rows_equal(a.rows[i], b.rows[i]));
}
