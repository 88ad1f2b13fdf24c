#pragma once

// Coarse expert-subset search over the Boolean lattice. The objective is a
// score to MAXIMIZE (negated empirical loss) that is monotone nondecreasing
// in the subset on exact-weight instances, while feasibility (delay/energy
// budgets) shrinks as the subset grows. The search keeps a vertex cover of
// the feasible region, polyblock style: every feasible subset stays under
// some vertex, vertices bound the score of everything beneath them, and a
// feasible argmax vertex is therefore optimal.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "moe2/costs.hpp"
#include "moe2/gating.hpp"
#include "moe2/types.hpp"

namespace moe2 {

// Subset score, memoized by mask bits. Wrapped function must be pure.
class SubsetObjective {
 public:
  using Fn = std::function<double(const SubsetMask&)>;

  SubsetObjective(int n_experts, Fn fn);

  double operator()(const SubsetMask& s) const;
  int n_experts() const { return n_; }
  // distinct masks computed so far (repeat lookups hit the memo)
  std::size_t evaluations() const { return evals_; }

 private:
  int n_;
  Fn fn_;
  mutable std::unordered_map<std::uint32_t, double> memo_;
  mutable std::size_t evals_ = 0;
};

// Score of S under the gate trained once on the full fleet: weights are the
// gate's positive scores renormalized over S. Cheap per subset because the
// per-prompt scores and per-token truth probabilities are precomputed.
SubsetObjective restricted_gating_objective(const GatingParams& gate, const LossDataset& data);

// Score of S with per-prompt weights re-optimized exactly over S by the
// convex mixture solver. Monotone in S by construction (a superset can
// always reuse the subset's weights), so the search is exact in this mode.
SubsetObjective tabular_objective(const LossDataset& data, double tol = 1e-9);

// Workload-level expected costs memoized by mask; feasibility against any
// constraint set reuses the cached costs, so a sweep over many budgets pays
// for each subset once.
class CostCache {
 public:
  CostCache(std::shared_ptr<const Workload> workload, std::shared_ptr<const Fleet> fleet,
            CostModelParams model);

  const ExpectedCosts& costs(const SubsetMask& s) const;
  bool feasible(const SubsetMask& s, const ConstraintSet& constraints) const;
  std::size_t evaluations() const { return evals_; }

 private:
  std::shared_ptr<const Workload> workload_;
  std::shared_ptr<const Fleet> fleet_;
  CostModelParams model_;
  mutable std::unordered_map<std::uint32_t, ExpectedCosts> memo_;
  mutable std::size_t evals_ = 0;
};

using FeasibilityFn = std::function<bool(const SubsetMask&)>;

// How Step 4 replaces a processed vertex with smaller ones.
enum class SmoExpansion {
  // one child per member: S minus each single member; sound for any
  // monotone objective because every proper subset of S misses a member
  kAllMembers,
  // one child per member the projection dropped; mirrors the coordinate
  // update of the continuous method but lets feasible sets that contain
  // every dropped member escape the cover, so it can return suboptimal
  // masks (kept for comparison runs)
  kChangedOnly,
};

struct SmoConfig {
  double epsilon = 0.0;  // score slack allowed when pruning cones
  long max_iterations = 1000000;
  SmoExpansion expansion = SmoExpansion::kAllMembers;
};

struct SmoIteration {
  std::size_t vertex_count = 0;  // after pruning, before selection
  SubsetMask chosen;
  std::optional<SubsetMask> projected;  // empty when no feasible subset under chosen
  double cbv = 0.0;                     // best feasible score after this iteration
};

struct SmoTrace {
  std::vector<SmoIteration> iterations;
};

enum class SmoStatus {
  kFixedPointOptimal,   // argmax vertex itself feasible
  kVertexSetExhausted,  // cover emptied; incumbent is epsilon-optimal
};

struct SmoResult {
  SubsetMask best;
  double objective = 0.0;
  SmoStatus status = SmoStatus::kVertexSetExhausted;
  SmoTrace trace;
};

// Largest feasible mask along a declared one-member-at-a-time descent from
// S: members leave in ascending order of their marginal score contribution
// on S (ties toward the smaller id). Returns S itself when feasible. When
// the whole chain is infeasible, falls back to the best feasible singleton
// of S (the chain's endpoints on the axes); throws infeasible_error when no
// nonempty subset of S is feasible, which by downward closure is exactly
// when every singleton fails.
SubsetMask projection_pi_g(const SubsetMask& s, const SubsetObjective& objective,
                           const FeasibilityFn& feasible);

// Vertex-cover search. Per iteration: prune vertices whose bound cannot
// beat the incumbent by more than epsilon; stop when the cover is empty
// (infeasible_error if nothing feasible was ever found); pick the argmax
// vertex (ties: fewer members, then smaller mask value); return it when
// feasible; otherwise project, update the incumbent, and expand. Throws
// iteration_limit_error when max_iterations passes without termination.
SmoResult smo_select(const SubsetObjective& objective, const FeasibilityFn& feasible,
                     const SmoConfig& config);

struct ExhaustiveResult {
  SubsetMask best;
  double objective = 0.0;
};

// Scans every nonempty mask (guarded to 20 experts); best feasible score,
// ties broken by fewer members then smaller mask value. Oracle for the
// vertex search.
ExhaustiveResult exhaustive_select(const SubsetObjective& objective, const FeasibilityFn& feasible);

enum class SmoObjectiveMode { kRestrictedGate, kTabular };

// Wires the pieces for callers holding domain objects: builds the loss
// dataset, the chosen objective, and budget feasibility over the workload.
SmoResult smo_select(const Workload& workload, const Fleet& fleet, const GatingParams& gate,
                     const ConstraintSet& constraints, const SmoConfig& config,
                     const CostModelParams& cost_model = {},
                     SmoObjectiveMode mode = SmoObjectiveMode::kRestrictedGate);

}  // namespace moe2
