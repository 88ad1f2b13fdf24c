#pragma once

// Delay and energy model for running a prompt across a subset of experts.
// Token-level delay for a member is local compute plus radio time; the
// ensemble waits for its slowest member, so subset delay is a max and
// subset energy is a sum. Both are monotone in the subset, which the
// subset search relies on.

#include <vector>

#include "moe2/types.hpp"

namespace moe2 {

struct CostModelParams {
  // payload of one generated token on the uplink and downlink, in bytes
  double token_uplink_bytes = 4.0;
  double token_downlink_bytes = 4.0;
  // fixed per-prompt gate evaluation delay, charged once
  double gate_delay_seconds = 0.002;

  void validate() const;
};

// Local compute time for one token at the given context length.
double compute_delay(const ExpertProfile& expert, int context_length_tokens);

// Radio time for `payload_bytes` at the expert's link rate.
double transmission_delay(const ExpertProfile& expert, double payload_bytes);

// Delay of generation step t (1-based) at one expert. Step 1 carries the
// full prompt upload; later steps carry only single-token payloads.
double per_token_delay(const ExpertProfile& expert, const Prompt& prompt, int t,
                       const CostModelParams& model);

// Step-t delay of the ensemble: max over subset members.
double ensemble_token_delay(const Fleet& fleet, const SubsetMask& s, const Prompt& prompt, int t,
                            const CostModelParams& model);

// Energy drawn by the subset for one token at the given context length.
double token_energy(const Fleet& fleet, const SubsetMask& s, int context_length_tokens);

struct CostBreakdown {
  double mean_token_delay = 0.0;   // mean over the answer of max-member step delays
  double gate_delay = 0.0;         // per-prompt gate charge
  double mean_prompt_delay = 0.0;  // mean_token_delay + gate_delay
  double mean_token_energy = 0.0;  // mean over the answer of subset step energies
};

// Per-prompt costs of running `s` for the full answer horizon.
CostBreakdown cost_breakdown(const Fleet& fleet, const SubsetMask& s, const Prompt& prompt,
                             const CostModelParams& model);

struct ExpectedCosts {
  std::vector<double> class_mean_delay;  // indexed by app class
  std::vector<int> class_count;          // prompts seen per class
  double mean_energy = 0.0;              // mean over all prompts

  int n_classes() const { return static_cast<int>(class_mean_delay.size()); }
};

// Workload-level means; throws invalid_argument when a class has no prompts.
ExpectedCosts expected_costs(const Workload& workload, const Fleet& fleet, const SubsetMask& s,
                             const CostModelParams& model);

struct FeasibilityReport {
  bool feasible = false;
  std::vector<double> delay_slack;  // tau_max[m] - class_mean_delay[m]
  double energy_slack = 0.0;        // e_max - mean_energy
  ExpectedCosts costs;
};

FeasibilityReport check_feasibility(const Workload& workload, const Fleet& fleet,
                                    const SubsetMask& s, const ConstraintSet& constraints,
                                    const CostModelParams& model);

bool is_feasible(const Workload& workload, const Fleet& fleet, const SubsetMask& s,
                 const ConstraintSet& constraints, const CostModelParams& model);

}  // namespace moe2
