#include "moe2/costs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace moe2 {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void CostModelParams::validate() const {
  require(std::isfinite(token_uplink_bytes) && token_uplink_bytes >= 0.0,
          "token_uplink_bytes must be nonnegative");
  require(std::isfinite(token_downlink_bytes) && token_downlink_bytes >= 0.0,
          "token_downlink_bytes must be nonnegative");
  require(std::isfinite(gate_delay_seconds) && gate_delay_seconds >= 0.0,
          "gate_delay_seconds must be nonnegative");
}

double compute_delay(const ExpertProfile& expert, int context_length_tokens) {
  require(context_length_tokens >= 0, "negative context length");
  return expert.flops_per_token * context_length_tokens / expert.compute_capability +
         expert.mem_access_size / expert.mem_bandwidth + expert.overhead_seconds;
}

double transmission_delay(const ExpertProfile& expert, double payload_bytes) {
  require(std::isfinite(payload_bytes) && payload_bytes >= 0.0, "negative payload");
  return payload_bytes / expert.data_rate;
}

double per_token_delay(const ExpertProfile& expert, const Prompt& prompt, int t,
                       const CostModelParams& model) {
  require(t >= 1 && t <= static_cast<int>(prompt.answer.size()),
          "token step outside the answer horizon");
  // context grows by one generated token per step
  const int context = prompt.prompt_length_tokens + (t - 1);
  const double up = (t == 1) ? prompt.data_size_bytes : model.token_uplink_bytes;
  const double down = model.token_downlink_bytes;
  return compute_delay(expert, context) + transmission_delay(expert, up + down);
}

double ensemble_token_delay(const Fleet& fleet, const SubsetMask& s, const Prompt& prompt, int t,
                            const CostModelParams& model) {
  require(s.n_experts() == fleet.size(), "subset fleet size mismatch");
  require(!s.empty(), "ensemble delay of an empty subset");
  double worst = 0.0;
  for (int id : s.members())
    worst = std::max(worst, per_token_delay(fleet.experts[id], prompt, t, model));
  return worst;
}

double token_energy(const Fleet& fleet, const SubsetMask& s, int context_length_tokens) {
  require(s.n_experts() == fleet.size(), "subset fleet size mismatch");
  require(!s.empty(), "token energy of an empty subset");
  require(context_length_tokens >= 0, "negative context length");
  double total = 0.0;
  for (int id : s.members()) {
    const ExpertProfile& e = fleet.experts[id];
    total += e.energy_base + e.energy_per_context_token * context_length_tokens;
  }
  return total;
}

CostBreakdown cost_breakdown(const Fleet& fleet, const SubsetMask& s, const Prompt& prompt,
                             const CostModelParams& model) {
  model.validate();
  const int T = static_cast<int>(prompt.answer.size());
  require(T >= 1, "prompt with an empty answer");

  CostBreakdown out;
  for (int t = 1; t <= T; ++t) {
    out.mean_token_delay += ensemble_token_delay(fleet, s, prompt, t, model);
    out.mean_token_energy += token_energy(fleet, s, prompt.prompt_length_tokens + (t - 1));
  }
  out.mean_token_delay /= T;
  out.mean_token_energy /= T;
  out.gate_delay = model.gate_delay_seconds;
  out.mean_prompt_delay = out.mean_token_delay + out.gate_delay;
  return out;
}

ExpectedCosts expected_costs(const Workload& workload, const Fleet& fleet, const SubsetMask& s,
                             const CostModelParams& model) {
  workload.validate();
  fleet.validate();
  require(!workload.prompts.empty(), "expected costs over an empty workload");

  ExpectedCosts out;
  out.class_mean_delay.assign(workload.n_app_classes, 0.0);
  out.class_count.assign(workload.n_app_classes, 0);

  for (const Prompt& p : workload.prompts) {
    const CostBreakdown cb = cost_breakdown(fleet, s, p, model);
    out.class_mean_delay[p.app_class] += cb.mean_prompt_delay;
    out.class_count[p.app_class] += 1;
    out.mean_energy += cb.mean_token_energy;
  }
  for (int m = 0; m < workload.n_app_classes; ++m) {
    require(out.class_count[m] > 0,
            "app class " + std::to_string(m) + " has no prompts; cannot form its mean delay");
    out.class_mean_delay[m] /= out.class_count[m];
  }
  out.mean_energy /= static_cast<double>(workload.prompts.size());
  return out;
}

FeasibilityReport check_feasibility(const Workload& workload, const Fleet& fleet,
                                    const SubsetMask& s, const ConstraintSet& constraints,
                                    const CostModelParams& model) {
  constraints.validate();
  require(constraints.n_classes() == workload.n_app_classes,
          "constraint class count != workload class count");

  FeasibilityReport rep;
  rep.costs = expected_costs(workload, fleet, s, model);
  rep.delay_slack.resize(constraints.n_classes());
  rep.feasible = true;
  for (int m = 0; m < constraints.n_classes(); ++m) {
    rep.delay_slack[m] = constraints.tau_max[m] - rep.costs.class_mean_delay[m];
    if (rep.delay_slack[m] < 0.0) rep.feasible = false;
  }
  rep.energy_slack = constraints.e_max - rep.costs.mean_energy;
  if (rep.energy_slack < 0.0) rep.feasible = false;
  return rep;
}

bool is_feasible(const Workload& workload, const Fleet& fleet, const SubsetMask& s,
                 const ConstraintSet& constraints, const CostModelParams& model) {
  return check_feasibility(workload, fleet, s, constraints, model).feasible;
}

}  // namespace moe2
