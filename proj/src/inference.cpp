#include "moe2/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "moe2/rng.hpp"
#include "moe2/synth.hpp"

namespace moe2 {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

int greedy_token(const VocabDistribution& f) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(f.probs.size()); ++j)
    if (f.probs[j] > f.probs[best]) best = j;  // ties keep the smaller id
  return best;
}

int sample_token(const VocabDistribution& f, Rng& rng) {
  const double u = rng.next_unit();
  double acc = 0.0;
  for (int j = 0; j < static_cast<int>(f.probs.size()); ++j) {
    acc += f.probs[j];
    if (u < acc) return j;
  }
  return static_cast<int>(f.probs.size()) - 1;  // u landed in rounding residue
}

// cost_breakdown over a possibly shortened horizon (early stop, token cap)
CostBreakdown realized_costs(const Fleet& fleet, const SubsetMask& queried, const Prompt& prompt,
                             const CostModelParams& model, int generated_len) {
  CostBreakdown out;
  for (int t = 1; t <= generated_len; ++t) {
    out.mean_token_delay += ensemble_token_delay(fleet, queried, prompt, t, model);
    out.mean_token_energy += token_energy(fleet, queried, prompt.prompt_length_tokens + (t - 1));
  }
  out.mean_token_delay /= generated_len;
  out.mean_token_energy /= generated_len;
  out.gate_delay = model.gate_delay_seconds;
  out.mean_prompt_delay = out.mean_token_delay + out.gate_delay;
  return out;
}

}  // namespace

void InferenceConfig::validate() const {
  require(k >= 1, "inference k must be positive");
  require(max_tokens >= 1, "max_tokens must be positive");
  if (stop_token) require(*stop_token >= 0, "stop token id must be nonnegative");
}

std::vector<int> top_k_select(std::span<const double> positive, const SubsetMask& s, int k) {
  require(static_cast<int>(positive.size()) == s.n_experts(),
          "score vector length != fleet size");
  require(k >= 1, "top-k needs k >= 1");
  require(k <= s.popcount(), "top-k k exceeds the subset size");
  std::vector<int> members = s.members();
  std::sort(members.begin(), members.end(), [&](int a, int b) {
    if (positive[a] != positive[b]) return positive[a] > positive[b];
    return a < b;
  });
  members.resize(k);
  return members;
}

std::vector<double> top_k_weights(std::span<const double> positive,
                                  std::span<const int> selected) {
  require(!selected.empty(), "top-k weights over no experts");
  double sum = 0.0;
  for (int id : selected) {
    require(id >= 0 && id < static_cast<int>(positive.size()), "selected id out of range");
    require(std::isfinite(positive[id]) && positive[id] > 0.0,
            "top-k weights need strictly positive scores");
    sum += positive[id];
  }
  std::vector<double> w(selected.size());
  for (std::size_t i = 0; i < selected.size(); ++i) w[i] = positive[selected[i]] / sum;
  return w;
}

GenerationResult generate_answer(const GatingParams& gate, const SubsetMask& s,
                                 const Prompt& prompt, const Fleet& fleet, int vocab_size,
                                 const InferenceConfig& config,
                                 const CostModelParams& cost_model) {
  require(s.n_experts() == fleet.size(), "subset fleet size mismatch");
  require(!s.empty(), "generation over an empty subset");
  const std::vector<double> positive = positive_scores(gating_forward(gate, prompt.embedding));
  const std::vector<int> selected = top_k_select(positive, s, config.k);
  const std::vector<double> weights = top_k_weights(positive, selected);
  return generate_with_weights(selected, weights, prompt, fleet, vocab_size, config, cost_model);
}

GenerationResult generate_with_weights(const std::vector<int>& selected,
                                       std::span<const double> weights, const Prompt& prompt,
                                       const Fleet& fleet, int vocab_size,
                                       const InferenceConfig& config,
                                       const CostModelParams& cost_model) {
  config.validate();
  cost_model.validate();
  require(!selected.empty(), "generation with no experts");
  require(weights.size() == selected.size(), "weight count != expert count");
  for (int id : selected) require(id >= 0 && id < fleet.size(), "selected id out of range");

  Rng sampler = Rng(config.sample_seed).substream(static_cast<std::uint64_t>(prompt.id));

  GenerationResult out;
  out.selected = selected;
  const int horizon = std::min(static_cast<int>(prompt.answer.size()), config.max_tokens);
  std::vector<VocabDistribution> dists(selected.size());
  for (int t = 1; t <= horizon; ++t) {
    for (std::size_t i = 0; i < selected.size(); ++i)
      dists[i] = expert_next_token_dist(fleet.experts[selected[i]], prompt, t, vocab_size);
    const VocabDistribution fused = fuse_distributions(weights, dists);
    const int tok =
        (config.mode == DecodeMode::kGreedy) ? greedy_token(fused) : sample_token(fused, sampler);
    out.tokens.push_back(tok);
    if (config.stop_token && tok == *config.stop_token) break;
  }

  SubsetMask queried = SubsetMask::from_members(fleet.size(), selected);
  out.costs = realized_costs(fleet, queried, prompt, cost_model,
                             static_cast<int>(out.tokens.size()));
  return out;
}

double score_accuracy(const std::vector<std::vector<int>>& outputs, const Workload& workload) {
  require(outputs.size() == workload.prompts.size(),
          "output count != prompt count");
  if (outputs.empty()) return 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i)
    if (outputs[i] == workload.prompts[i].answer) ++hits;
  return static_cast<double>(hits) / static_cast<double>(outputs.size());
}

}  // namespace moe2
