#pragma once

// Experiment runner: per replicate it generates a workload and fleet, trains
// the gate on the front split, then walks the budget grid. Each cell picks a
// coarse subset where the method calls for one and decodes the held-out
// split; rows carry accuracy plus realized delay and energy means.

#include <cstdint>
#include <string>
#include <vector>

#include "moe2/costs.hpp"
#include "moe2/gating.hpp"
#include "moe2/inference.hpp"
#include "moe2/smo.hpp"
#include "moe2/synth.hpp"
#include "moe2/types.hpp"

namespace moe2 {

enum class Method {
  kMoe2,               // gate-weighted top-k over the searched subset
  kSmoMv,              // searched subset, uniform weights over all its members
  kRandMv,             // random feasible subset, uniform weights
  kSingleAgent,        // best feasible singleton by the subset score
  kMajorityVoteFull,   // uniform weights over the whole fleet, budget-blind
  kAverageExpertAccuracy,  // mean of per-expert singleton accuracies
};

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct MethodEval {
  double accuracy = 0.0;
  std::vector<double> class_mean_delay;  // realized per app class
  double mean_energy = 0.0;
};

// Uniform fusion over every member of S, greedy decode, exact-match scoring.
MethodEval run_baseline_majority_vote(const SubsetMask& s, const Workload& workload,
                                      const Fleet& fleet, const InferenceConfig& config,
                                      const CostModelParams& cost_model);

struct RandomSubsetResult {
  SubsetMask mask;
  long draws = 0;  // rejection draws spent finding it
  MethodEval eval;
};

// Draws masks uniformly over nonempty subsets until one passes the budget
// check (cap 10,000 draws, then infeasible_error), then uniform fusion.
RandomSubsetResult run_baseline_random_subset(const ConstraintSet& constraints,
                                              const Workload& workload, const Fleet& fleet,
                                              const CostCache& cache, Rng rng,
                                              const InferenceConfig& config,
                                              const CostModelParams& cost_model);

// Mean over experts of their singleton greedy-decode accuracy.
MethodEval average_expert_accuracy(const Workload& workload, const Fleet& fleet,
                                   const InferenceConfig& config,
                                   const CostModelParams& cost_model);

struct SweepConfig {
  std::vector<std::vector<double>> tau_rows;  // per-class delay budgets, one row per table
  std::vector<double> e_cols;                 // energy budgets, one column per table entry
  std::vector<Method> methods;
  int replicates = 20;
  std::uint64_t base_seed = 1;
  double train_fraction = 0.8;

  void validate() const;
  std::vector<ConstraintSet> cells() const;  // row-major cross product
};

struct ExperimentConfig {
  WorkloadSpec workload;
  FleetSpec fleet;
  TrainConfig train;
  CostModelParams cost_model;
  SmoConfig smo;
  SmoObjectiveMode smo_objective = SmoObjectiveMode::kRestrictedGate;
  InferenceConfig inference;
  SweepConfig sweep;

  void validate() const;
};

struct ResultRow {
  std::string method;
  std::vector<double> tau_max;
  double e_max = 0.0;
  int k = 0;
  std::uint64_t seed = 0;
  bool feasible = true;    // false: no subset met this cell's budgets for this method
  bool has_mask = false;   // budget-blind reference methods carry no mask
  std::uint32_t mask_bits = 0;
  int n_experts = 0;
  long rand_draws = 0;
  double accuracy = 0.0;
  std::vector<double> class_mean_delay;
  double mean_energy = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
};

// Front split of the prompts trains, the tail evaluates; both keep the
// workload metadata and original prompt ids.
std::pair<Workload, Workload> split_workload(const Workload& workload, double train_fraction);

ResultTable run_experiment(const ExperimentConfig& config);

}  // namespace moe2
