#include "moe2/harness.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "moe2/rng.hpp"

namespace moe2 {

namespace {

constexpr long kRandomSubsetDrawCap = 10000;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// decode every prompt with fixed experts and weights; realized means
MethodEval eval_with_weights(const std::vector<int>& selected, std::span<const double> weights,
                             const Workload& workload, const Fleet& fleet,
                             const InferenceConfig& config, const CostModelParams& cost_model) {
  std::vector<std::vector<int>> outputs;
  outputs.reserve(workload.prompts.size());
  std::vector<double> delay_sum(workload.n_app_classes, 0.0);
  std::vector<int> delay_count(workload.n_app_classes, 0);
  double energy = 0.0;
  for (const Prompt& p : workload.prompts) {
    GenerationResult r = generate_with_weights(selected, weights, p, fleet, workload.vocab_size,
                                               config, cost_model);
    outputs.push_back(std::move(r.tokens));
    delay_sum[p.app_class] += r.costs.mean_prompt_delay;
    delay_count[p.app_class] += 1;
    energy += r.costs.mean_token_energy;
  }
  MethodEval ev;
  ev.accuracy = score_accuracy(outputs, workload);
  ev.class_mean_delay.resize(workload.n_app_classes, 0.0);
  for (int m = 0; m < workload.n_app_classes; ++m)
    if (delay_count[m] > 0) ev.class_mean_delay[m] = delay_sum[m] / delay_count[m];
  ev.mean_energy = workload.prompts.empty()
                       ? 0.0
                       : energy / static_cast<double>(workload.prompts.size());
  return ev;
}

// decode with the gate's per-prompt top-k routing inside S
MethodEval eval_with_gate(const GatingParams& gate, const SubsetMask& s,
                          const Workload& workload, const Fleet& fleet,
                          const InferenceConfig& config, const CostModelParams& cost_model) {
  InferenceConfig ic = config;
  ic.k = std::min(config.k, s.popcount());
  std::vector<std::vector<int>> outputs;
  outputs.reserve(workload.prompts.size());
  std::vector<double> delay_sum(workload.n_app_classes, 0.0);
  std::vector<int> delay_count(workload.n_app_classes, 0);
  double energy = 0.0;
  for (const Prompt& p : workload.prompts) {
    GenerationResult r =
        generate_answer(gate, s, p, fleet, workload.vocab_size, ic, cost_model);
    outputs.push_back(std::move(r.tokens));
    delay_sum[p.app_class] += r.costs.mean_prompt_delay;
    delay_count[p.app_class] += 1;
    energy += r.costs.mean_token_energy;
  }
  MethodEval ev;
  ev.accuracy = score_accuracy(outputs, workload);
  ev.class_mean_delay.resize(workload.n_app_classes, 0.0);
  for (int m = 0; m < workload.n_app_classes; ++m)
    if (delay_count[m] > 0) ev.class_mean_delay[m] = delay_sum[m] / delay_count[m];
  ev.mean_energy = workload.prompts.empty()
                       ? 0.0
                       : energy / static_cast<double>(workload.prompts.size());
  return ev;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kMoe2: return "moe2";
    case Method::kSmoMv: return "smo_mv";
    case Method::kRandMv: return "rand_mv";
    case Method::kSingleAgent: return "single_agent";
    case Method::kMajorityVoteFull: return "majority_vote_full";
    case Method::kAverageExpertAccuracy: return "average_expert_accuracy";
  }
  throw std::invalid_argument("unknown method enum value");
}

Method method_from_name(const std::string& name) {
  if (name == "moe2") return Method::kMoe2;
  if (name == "smo_mv") return Method::kSmoMv;
  if (name == "rand_mv") return Method::kRandMv;
  if (name == "single_agent") return Method::kSingleAgent;
  if (name == "majority_vote_full") return Method::kMajorityVoteFull;
  if (name == "average_expert_accuracy") return Method::kAverageExpertAccuracy;
  throw std::invalid_argument("unknown method name: " + name);
}

MethodEval run_baseline_majority_vote(const SubsetMask& s, const Workload& workload,
                                      const Fleet& fleet, const InferenceConfig& config,
                                      const CostModelParams& cost_model) {
  require(!s.empty(), "majority vote over an empty subset");
  require(s.n_experts() == fleet.size(), "subset fleet size mismatch");
  const std::vector<int> members = s.members();
  const std::vector<double> weights(members.size(), 1.0 / static_cast<double>(members.size()));
  return eval_with_weights(members, weights, workload, fleet, config, cost_model);
}

RandomSubsetResult run_baseline_random_subset(const ConstraintSet& constraints,
                                              const Workload& workload, const Fleet& fleet,
                                              const CostCache& cache, Rng rng,
                                              const InferenceConfig& config,
                                              const CostModelParams& cost_model) {
  const int n = fleet.size();
  const std::uint64_t n_masks = (1ull << n) - 1;
  for (long draw = 1; draw <= kRandomSubsetDrawCap; ++draw) {
    const std::uint32_t bits = static_cast<std::uint32_t>(rng.next_below(n_masks)) + 1;
    const SubsetMask mask(n, bits);
    if (!cache.feasible(mask, constraints)) continue;
    RandomSubsetResult out;
    out.mask = mask;
    out.draws = draw;
    out.eval = run_baseline_majority_vote(mask, workload, fleet, config, cost_model);
    return out;
  }
  throw infeasible_error("no feasible subset in " + std::to_string(kRandomSubsetDrawCap) +
                         " uniform draws");
}

MethodEval average_expert_accuracy(const Workload& workload, const Fleet& fleet,
                                   const InferenceConfig& config,
                                   const CostModelParams& cost_model) {
  require(fleet.size() > 0, "average over an empty fleet");
  MethodEval out;
  out.class_mean_delay.assign(workload.n_app_classes, 0.0);
  for (int id = 0; id < fleet.size(); ++id) {
    const std::vector<int> selected{id};
    const std::vector<double> weights{1.0};
    MethodEval ev = eval_with_weights(selected, weights, workload, fleet, config, cost_model);
    out.accuracy += ev.accuracy;
    for (int m = 0; m < workload.n_app_classes; ++m)
      out.class_mean_delay[m] += ev.class_mean_delay[m];
    out.mean_energy += ev.mean_energy;
  }
  const double inv = 1.0 / static_cast<double>(fleet.size());
  out.accuracy *= inv;
  for (double& d : out.class_mean_delay) d *= inv;
  out.mean_energy *= inv;
  return out;
}

void SweepConfig::validate() const {
  require(!tau_rows.empty(), "sweep needs at least one delay row");
  const std::size_t n_classes = tau_rows.front().size();
  require(n_classes >= 1, "delay row must cover at least one app class");
  for (const auto& row : tau_rows) {
    require(row.size() == n_classes, "delay rows must share the class count");
    for (double t : row) require(std::isfinite(t) && t > 0.0, "delay budgets must be positive");
  }
  require(!e_cols.empty(), "sweep needs at least one energy column");
  for (double e : e_cols) require(std::isfinite(e) && e > 0.0, "energy budgets must be positive");
  require(!methods.empty(), "sweep needs at least one method");
  require(replicates >= 1, "sweep needs at least one replicate");
  require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction outside (0,1)");
}

std::vector<ConstraintSet> SweepConfig::cells() const {
  std::vector<ConstraintSet> out;
  out.reserve(tau_rows.size() * e_cols.size());
  for (const auto& tau : tau_rows)
    for (double e : e_cols) out.push_back(ConstraintSet{tau, e});
  return out;
}

void ExperimentConfig::validate() const {
  workload.validate();
  fleet.validate();
  cost_model.validate();
  inference.validate();
  sweep.validate();
  require(static_cast<int>(sweep.tau_rows.front().size()) == workload.n_app_classes,
          "delay rows must match the workload's app class count");
  require(fleet.k_clusters == workload.k_clusters,
          "fleet and workload must agree on the cluster count");
}

std::pair<Workload, Workload> split_workload(const Workload& workload, double train_fraction) {
  workload.validate();
  require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction outside (0,1)");
  const int n = static_cast<int>(workload.prompts.size());
  require(n >= 2, "need at least two prompts to split");
  int n_train = static_cast<int>(std::floor(train_fraction * n));
  n_train = std::clamp(n_train, 1, n - 1);

  Workload train = workload;
  Workload eval = workload;
  train.prompts.assign(workload.prompts.begin(), workload.prompts.begin() + n_train);
  eval.prompts.assign(workload.prompts.begin() + n_train, workload.prompts.end());
  return {std::move(train), std::move(eval)};
}

ResultTable run_experiment(const ExperimentConfig& config) {
  config.validate();
  ResultTable table;
  const int n_experts = config.fleet.n_experts;

  const bool wants_singletons =
      std::count(config.sweep.methods.begin(), config.sweep.methods.end(),
                 Method::kSingleAgent) > 0 ||
      std::count(config.sweep.methods.begin(), config.sweep.methods.end(),
                 Method::kAverageExpertAccuracy) > 0;
  const bool wants_mv_full = std::count(config.sweep.methods.begin(), config.sweep.methods.end(),
                                        Method::kMajorityVoteFull) > 0;

  for (int rep = 0; rep < config.sweep.replicates; ++rep) {
    const std::uint64_t seed = config.sweep.base_seed + static_cast<std::uint64_t>(rep);
    Rng root(seed);

    const Workload workload = generate_workload(config.workload, root.substream(1));
    const Fleet fleet = generate_fleet(config.fleet, root.substream(2));
    auto [train_wl, eval_wl] = split_workload(workload, config.sweep.train_fraction);

    TrainConfig tc = config.train;
    tc.seed = seed;
    const LossDataset train_data = build_loss_dataset(train_wl, fleet);
    const TrainResult trained = train_gating(train_data, n_experts, tc);

    const LossDataset eval_data = build_loss_dataset(eval_wl, fleet);
    const SubsetObjective objective =
        (config.smo_objective == SmoObjectiveMode::kRestrictedGate)
            ? restricted_gating_objective(trained.params, eval_data)
            : tabular_objective(eval_data);
    const CostCache cache(std::make_shared<Workload>(eval_wl), std::make_shared<Fleet>(fleet),
                          config.cost_model);

    std::vector<MethodEval> singleton_evals;
    if (wants_singletons) {
      singleton_evals.reserve(n_experts);
      for (int id = 0; id < n_experts; ++id) {
        const std::vector<int> sel{id};
        const std::vector<double> w{1.0};
        singleton_evals.push_back(
            eval_with_weights(sel, w, eval_wl, fleet, config.inference, config.cost_model));
      }
    }
    std::optional<MethodEval> aea;
    if (std::count(config.sweep.methods.begin(), config.sweep.methods.end(),
                   Method::kAverageExpertAccuracy) > 0) {
      MethodEval mean;
      mean.class_mean_delay.assign(eval_wl.n_app_classes, 0.0);
      for (const MethodEval& ev : singleton_evals) {
        mean.accuracy += ev.accuracy;
        for (int m = 0; m < eval_wl.n_app_classes; ++m)
          mean.class_mean_delay[m] += ev.class_mean_delay[m];
        mean.mean_energy += ev.mean_energy;
      }
      const double inv = 1.0 / static_cast<double>(n_experts);
      mean.accuracy *= inv;
      for (double& d : mean.class_mean_delay) d *= inv;
      mean.mean_energy *= inv;
      aea = mean;
    }
    std::optional<MethodEval> mv_full;
    if (wants_mv_full)
      mv_full = run_baseline_majority_vote(SubsetMask::full(n_experts), eval_wl, fleet,
                                           config.inference, config.cost_model);

    const std::vector<ConstraintSet> cells = config.sweep.cells();
    for (std::size_t cell = 0; cell < cells.size(); ++cell) {
      const ConstraintSet& constraints = cells[cell];
      const FeasibilityFn feas = [&cache, &constraints](const SubsetMask& m) {
        return cache.feasible(m, constraints);
      };

      std::optional<SmoResult> smo;
      bool smo_tried = false;
      bool smo_infeasible = false;
      auto ensure_smo = [&]() {
        if (smo_tried) return;
        smo_tried = true;
        try {
          smo = smo_select(objective, feas, config.smo);
        } catch (const infeasible_error&) {
          smo_infeasible = true;
        }
      };

      for (Method method : config.sweep.methods) {
        ResultRow row;
        row.method = method_name(method);
        row.tau_max = constraints.tau_max;
        row.e_max = constraints.e_max;
        row.k = config.inference.k;
        row.seed = seed;
        row.n_experts = n_experts;
        row.class_mean_delay.assign(eval_wl.n_app_classes, 0.0);

        auto mark_infeasible = [&row]() {
          row.feasible = false;
          row.accuracy = 0.0;
        };

        switch (method) {
          case Method::kMoe2: {
            ensure_smo();
            if (smo_infeasible) {
              mark_infeasible();
              break;
            }
            const MethodEval ev = eval_with_gate(trained.params, smo->best, eval_wl, fleet,
                                                 config.inference, config.cost_model);
            row.has_mask = true;
            row.mask_bits = smo->best.bits();
            row.accuracy = ev.accuracy;
            row.class_mean_delay = ev.class_mean_delay;
            row.mean_energy = ev.mean_energy;
            break;
          }
          case Method::kSmoMv: {
            ensure_smo();
            if (smo_infeasible) {
              mark_infeasible();
              break;
            }
            const MethodEval ev = run_baseline_majority_vote(smo->best, eval_wl, fleet,
                                                             config.inference, config.cost_model);
            row.has_mask = true;
            row.mask_bits = smo->best.bits();
            row.accuracy = ev.accuracy;
            row.class_mean_delay = ev.class_mean_delay;
            row.mean_energy = ev.mean_energy;
            break;
          }
          case Method::kRandMv: {
            try {
              RandomSubsetResult r = run_baseline_random_subset(
                  constraints, eval_wl, fleet, cache,
                  root.substream(1000 + static_cast<std::uint64_t>(cell)), config.inference,
                  config.cost_model);
              row.has_mask = true;
              row.mask_bits = r.mask.bits();
              row.rand_draws = r.draws;
              row.accuracy = r.eval.accuracy;
              row.class_mean_delay = r.eval.class_mean_delay;
              row.mean_energy = r.eval.mean_energy;
            } catch (const infeasible_error&) {
              mark_infeasible();
            }
            break;
          }
          case Method::kSingleAgent: {
            int best_id = -1;
            double best_obj = 0.0;
            for (int id = 0; id < n_experts; ++id) {
              const SubsetMask single = SubsetMask::single(n_experts, id);
              if (!cache.feasible(single, constraints)) continue;
              const double v = objective(single);
              if (best_id < 0 || v > best_obj) {
                best_id = id;
                best_obj = v;
              }
            }
            if (best_id < 0) {
              mark_infeasible();
              break;
            }
            const MethodEval& ev = singleton_evals[best_id];
            row.has_mask = true;
            row.mask_bits = SubsetMask::single(n_experts, best_id).bits();
            row.accuracy = ev.accuracy;
            row.class_mean_delay = ev.class_mean_delay;
            row.mean_energy = ev.mean_energy;
            break;
          }
          case Method::kMajorityVoteFull: {
            row.accuracy = mv_full->accuracy;
            row.class_mean_delay = mv_full->class_mean_delay;
            row.mean_energy = mv_full->mean_energy;
            break;
          }
          case Method::kAverageExpertAccuracy: {
            row.accuracy = aea->accuracy;
            row.class_mean_delay = aea->class_mean_delay;
            row.mean_energy = aea->mean_energy;
            break;
          }
        }
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

}  // namespace moe2
