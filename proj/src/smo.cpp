#include "moe2/smo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace moe2 {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// vertex preference: higher score, then fewer members, then smaller mask value
bool better(double va, const SubsetMask& a, double vb, const SubsetMask& b) {
  if (va != vb) return va > vb;
  if (a.popcount() != b.popcount()) return a.popcount() < b.popcount();
  return a.bits() < b.bits();
}

}  // namespace

SubsetObjective::SubsetObjective(int n_experts, Fn fn) : n_(n_experts), fn_(std::move(fn)) {
  require(n_ >= 1 && n_ <= 30, "subset objective fleet size outside [1,30]");
  require(static_cast<bool>(fn_), "subset objective needs a function");
}

double SubsetObjective::operator()(const SubsetMask& s) const {
  require(s.n_experts() == n_, "subset objective fleet size mismatch");
  require(!s.empty(), "subset objective of an empty subset");
  auto it = memo_.find(s.bits());
  if (it != memo_.end()) return it->second;
  const double v = fn_(s);
  if (!std::isfinite(v)) throw std::runtime_error("subset objective returned a non-finite value");
  memo_.emplace(s.bits(), v);
  ++evals_;
  return v;
}

SubsetObjective restricted_gating_objective(const GatingParams& gate, const LossDataset& data) {
  gate.validate();
  require(!data.empty(), "restricted objective over an empty dataset");
  const int n = gate.output_dim;

  struct Row {
    std::vector<double> e;                 // positive gate scores for this prompt
    std::vector<std::vector<double>> q;    // truth-token probability per expert per step
  };
  auto rows = std::make_shared<std::vector<Row>>();
  rows->reserve(data.size());

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return data[a].prompt_id < data[b].prompt_id; });
  for (int idx : order) {
    const LossExample& ex = data[idx];
    require(static_cast<int>(ex.q.size()) == n, "loss example q rows != gate output dim");
    Row r;
    r.q = ex.q;
    r.e = positive_scores(gating_forward(gate, ex.x));
    rows->push_back(std::move(r));
  }

  return SubsetObjective(n, [rows](const SubsetMask& s) {
    const std::vector<int> members = s.members();
    double total = 0.0;
    for (const Row& r : *rows) {
      double sum = 0.0;
      for (int id : members) sum += r.e[id];
      const std::size_t T = r.q.front().size();
      double loss = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        double p = 0.0;
        for (int id : members) p += (r.e[id] / sum) * r.q[id][t];
        loss += -std::log(std::max(p, kLossFloor));
      }
      total += loss;
    }
    return -(total / static_cast<double>(rows->size()));
  });
}

SubsetObjective tabular_objective(const LossDataset& data, double tol) {
  require(!data.empty(), "tabular objective over an empty dataset");
  const int n = static_cast<int>(data.front().q.size());

  auto rows = std::make_shared<std::vector<std::vector<std::vector<double>>>>();
  rows->reserve(data.size());
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return data[a].prompt_id < data[b].prompt_id; });
  for (int idx : order) {
    require(static_cast<int>(data[idx].q.size()) == n, "tabular objective: ragged q tables");
    rows->push_back(data[idx].q);
  }

  return SubsetObjective(n, [rows, tol](const SubsetMask& s) {
    const std::vector<int> members = s.members();
    double total = 0.0;
    std::vector<std::vector<double>> sub(members.size());
    for (const auto& q : *rows) {
      for (std::size_t i = 0; i < members.size(); ++i) sub[i] = q[members[i]];
      total += optimal_mixture_weights(sub, tol).loss;
    }
    return -(total / static_cast<double>(rows->size()));
  });
}

CostCache::CostCache(std::shared_ptr<const Workload> workload, std::shared_ptr<const Fleet> fleet,
                     CostModelParams model)
    : workload_(std::move(workload)), fleet_(std::move(fleet)), model_(model) {
  require(workload_ && fleet_, "cost cache needs a workload and a fleet");
  workload_->validate();
  fleet_->validate();
  model_.validate();
}

const ExpectedCosts& CostCache::costs(const SubsetMask& s) const {
  require(s.n_experts() == fleet_->size(), "cost cache fleet size mismatch");
  auto it = memo_.find(s.bits());
  if (it != memo_.end()) return it->second;
  ExpectedCosts c = expected_costs(*workload_, *fleet_, s, model_);
  ++evals_;
  return memo_.emplace(s.bits(), std::move(c)).first->second;
}

bool CostCache::feasible(const SubsetMask& s, const ConstraintSet& constraints) const {
  constraints.validate();
  const ExpectedCosts& c = costs(s);
  require(constraints.n_classes() == c.n_classes(), "constraint class count mismatch");
  for (int m = 0; m < c.n_classes(); ++m)
    if (c.class_mean_delay[m] > constraints.tau_max[m]) return false;
  return c.mean_energy <= constraints.e_max;
}

SubsetMask projection_pi_g(const SubsetMask& s, const SubsetObjective& objective,
                           const FeasibilityFn& feasible) {
  require(!s.empty(), "projection of an empty subset");
  require(s.n_experts() == objective.n_experts(), "projection fleet size mismatch");
  if (feasible(s)) return s;

  const std::vector<int> members = s.members();
  if (members.size() > 1) {
    const double base = objective(s);
    std::vector<std::pair<double, int>> marginal;
    marginal.reserve(members.size());
    for (int id : members) marginal.emplace_back(base - objective(s.without(id)), id);
    std::sort(marginal.begin(), marginal.end());

    SubsetMask cur = s;
    for (std::size_t i = 0; i + 1 < marginal.size(); ++i) {
      cur = cur.without(marginal[i].second);
      if (feasible(cur)) return cur;
    }
  }

  // chain exhausted; its endpoints are the axes, so scan every singleton
  bool found = false;
  SubsetMask best = s;
  double best_obj = 0.0;
  for (int id : members) {
    const SubsetMask single = SubsetMask::single(s.n_experts(), id);
    if (!feasible(single)) continue;
    const double v = objective(single);
    if (!found || better(v, single, best_obj, best)) {
      found = true;
      best = single;
      best_obj = v;
    }
  }
  if (!found)
    throw infeasible_error("no nonempty subset of " + s.to_string() +
                           " satisfies the constraints");
  return best;
}

SmoResult smo_select(const SubsetObjective& objective, const FeasibilityFn& feasible,
                     const SmoConfig& config) {
  require(config.epsilon >= 0.0, "smo epsilon must be nonnegative");
  require(config.max_iterations > 0, "smo iteration budget must be positive");
  const int n = objective.n_experts();

  std::unordered_map<std::uint32_t, bool> fmemo;
  auto feas = [&](const SubsetMask& m) {
    auto it = fmemo.find(m.bits());
    if (it != fmemo.end()) return it->second;
    const bool ok = feasible(m);
    fmemo.emplace(m.bits(), ok);
    return ok;
  };

  std::vector<SubsetMask> vertices{SubsetMask::full(n)};
  double cbv = -std::numeric_limits<double>::infinity();
  bool have_incumbent = false;
  SubsetMask incumbent = SubsetMask::full(n);
  SmoResult res;

  for (long iter = 0; iter < config.max_iterations; ++iter) {
    // Step 1: a vertex bounds everything beneath it, so cones that cannot
    // beat the incumbent by more than epsilon are closed out
    std::erase_if(vertices,
                  [&](const SubsetMask& v) { return objective(v) <= cbv + config.epsilon; });

    if (vertices.empty()) {
      if (!have_incumbent) throw infeasible_error("no nonempty subset satisfies the constraints");
      res.best = incumbent;
      res.objective = cbv;
      res.status = SmoStatus::kVertexSetExhausted;
      return res;
    }

    std::size_t pick = 0;
    for (std::size_t i = 1; i < vertices.size(); ++i)
      if (better(objective(vertices[i]), vertices[i], objective(vertices[pick]), vertices[pick]))
        pick = i;

    SmoIteration rec;
    rec.vertex_count = vertices.size();
    const SubsetMask chosen = vertices[pick];
    rec.chosen = chosen;
    vertices.erase(vertices.begin() + static_cast<std::ptrdiff_t>(pick));

    if (feas(chosen)) {
      // feasible argmax vertex achieves its own bound: optimal
      const double v = objective(chosen);
      if (!have_incumbent || v > cbv) cbv = v;
      rec.projected = chosen;
      rec.cbv = cbv;
      res.trace.iterations.push_back(rec);
      res.best = chosen;
      res.objective = v;
      res.status = SmoStatus::kFixedPointOptimal;
      return res;
    }

    SubsetMask projected = chosen;
    bool cone_dead = false;
    try {
      projected = projection_pi_g(chosen, objective, feas);
    } catch (const infeasible_error&) {
      cone_dead = true;  // nothing feasible under this vertex; drop the cone
    }

    if (!cone_dead) {
      const double pv = objective(projected);
      if (!have_incumbent || pv > cbv ||
          (pv == cbv && better(pv, projected, cbv, incumbent))) {
        cbv = pv;
        incumbent = projected;
        have_incumbent = true;
      }
      rec.projected = projected;

      std::vector<int> removals;
      if (config.expansion == SmoExpansion::kAllMembers) {
        removals = chosen.members();
      } else {
        for (int id : chosen.members())
          if (!projected.contains(id)) removals.push_back(id);
      }
      for (int id : removals) {
        const SubsetMask child = chosen.without(id);
        if (!child.empty()) vertices.push_back(child);
      }

      // keep a maximal antichain: drop duplicates and dominated vertices
      std::sort(vertices.begin(), vertices.end(),
                [](const SubsetMask& a, const SubsetMask& b) { return a.bits() < b.bits(); });
      vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
      std::vector<SubsetMask> maximal;
      maximal.reserve(vertices.size());
      for (const SubsetMask& v : vertices) {
        bool dominated = false;
        for (const SubsetMask& u : vertices)
          if (u.bits() != v.bits() && v.is_subset_of(u)) {
            dominated = true;
            break;
          }
        if (!dominated) maximal.push_back(v);
      }
      vertices = std::move(maximal);
    }

    rec.cbv = cbv;
    res.trace.iterations.push_back(rec);
  }

  std::string msg = "subset search hit the iteration budget (" +
                    std::to_string(config.max_iterations) + ")";
  if (have_incumbent)
    msg += "; best incumbent " + incumbent.to_string() + " with score " + std::to_string(cbv);
  throw iteration_limit_error(msg);
}

ExhaustiveResult exhaustive_select(const SubsetObjective& objective,
                                   const FeasibilityFn& feasible) {
  const int n = objective.n_experts();
  require(n <= 20, "exhaustive subset scan guarded to 20 experts");

  bool found = false;
  ExhaustiveResult out;
  for (std::uint32_t bits = 1; bits < (1u << n); ++bits) {
    const SubsetMask m(n, bits);
    if (!feasible(m)) continue;
    const double v = objective(m);
    if (!found || better(v, m, out.objective, out.best)) {
      found = true;
      out.best = m;
      out.objective = v;
    }
  }
  if (!found) throw infeasible_error("no nonempty subset satisfies the constraints");
  return out;
}

SmoResult smo_select(const Workload& workload, const Fleet& fleet, const GatingParams& gate,
                     const ConstraintSet& constraints, const SmoConfig& config,
                     const CostModelParams& cost_model, SmoObjectiveMode mode) {
  require(gate.output_dim == fleet.size(), "gate output dim != fleet size");
  const LossDataset data = build_loss_dataset(workload, fleet);
  const SubsetObjective objective = (mode == SmoObjectiveMode::kRestrictedGate)
                                        ? restricted_gating_objective(gate, data)
                                        : tabular_objective(data);
  CostCache cache(std::make_shared<Workload>(workload), std::make_shared<Fleet>(fleet),
                  cost_model);
  FeasibilityFn feas = [&cache, &constraints](const SubsetMask& m) {
    return cache.feasible(m, constraints);
  };
  return smo_select(objective, feas, config);
}

}  // namespace moe2
