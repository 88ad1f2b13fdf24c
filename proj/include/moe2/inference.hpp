#pragma once

// Per-prompt routing and answer generation. The gate scores a prompt once,
// the k strongest members of the coarse subset are queried, and their token
// distributions are fused each step under weights renormalized over those k.
// Costs are charged to the experts actually queried.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "moe2/costs.hpp"
#include "moe2/gating.hpp"
#include "moe2/types.hpp"

namespace moe2 {

enum class DecodeMode { kGreedy, kSampled };

struct InferenceConfig {
  int k = 2;
  DecodeMode mode = DecodeMode::kGreedy;
  std::uint64_t sample_seed = 1;  // sampled mode only; substreamed per prompt id
  int max_tokens = 64;
  std::optional<int> stop_token;  // appended, then generation stops

  void validate() const;
};

// The k members of S with the largest positive scores, descending; ties
// prefer the smaller expert id. Throws when k exceeds |S|.
std::vector<int> top_k_select(std::span<const double> positive, const SubsetMask& s, int k);

// Scores renormalized over the selected experts, aligned with `selected`.
std::vector<double> top_k_weights(std::span<const double> positive,
                                  std::span<const int> selected);

struct GenerationResult {
  std::vector<int> tokens;
  std::vector<int> selected;  // queried experts, descending score order
  CostBreakdown costs;        // realized costs over the queried experts
};

GenerationResult generate_answer(const GatingParams& gate, const SubsetMask& s,
                                 const Prompt& prompt, const Fleet& fleet, int vocab_size,
                                 const InferenceConfig& config,
                                 const CostModelParams& cost_model = {});

// Same decode loop with caller-fixed experts and weights (uniform-fusion
// baselines bypass the gate through this).
GenerationResult generate_with_weights(const std::vector<int>& selected,
                                       std::span<const double> weights, const Prompt& prompt,
                                       const Fleet& fleet, int vocab_size,
                                       const InferenceConfig& config,
                                       const CostModelParams& cost_model = {});

// Fraction of prompts whose generated tokens match the target exactly.
double score_accuracy(const std::vector<std::vector<int>>& outputs, const Workload& workload);

}  // namespace moe2
