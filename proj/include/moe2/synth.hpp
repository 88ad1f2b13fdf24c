#pragma once

#include <utility>
#include <vector>

#include "moe2/rng.hpp"
#include "moe2/types.hpp"

namespace moe2 {

// Inclusive [lo, hi] draw range for one hardware parameter.
using ParamRange = std::pair<double, double>;

// A batch of identically-distributed experts. Tiers are assigned to expert
// ids in listing order (first tier gets ids 0..count-1, and so on).
struct HardwareTier {
  int count = 0;
  ParamRange flops_per_token{0, 0};
  ParamRange compute_capability{0, 0};
  ParamRange mem_access_size{0, 0};
  ParamRange mem_bandwidth{0, 0};
  ParamRange overhead_seconds{0, 0};
  ParamRange data_rate{0, 0};
  ParamRange energy_base{0, 0};
  ParamRange energy_per_context_token{0, 0};
  ParamRange sharpness{5.0, 5.0};
};

// Experts are hard specialists: strong on the home cluster, close to useless
// elsewhere. The wide home/off gap is what makes routing worth learning and
// keeps uniform vote fusion from matching a trained gate.
struct CompetenceProfile {
  double home = 0.9;
  double off_base = 0.05;
  double off_jitter = 0.02;
};

struct FleetSpec {
  int n_experts = 8;
  int k_clusters = 8;
  CompetenceProfile competence;
  std::vector<HardwareTier> hardware_tiers;  // counts must sum to n_experts

  void validate() const;
};

struct WorkloadSpec {
  int n_prompts = 1000;
  int embedding_dim = 32;
  int k_clusters = 8;
  int vocab_size = 64;
  int n_app_classes = 2;
  double cluster_center_scale = 6.0;  // centers ~ scale * N(0, I) when not given
  double cluster_spread = 1.0;        // per-cluster Gaussian std
  int answer_len_min = 4;
  int answer_len_max = 8;
  int prompt_len_min = 64;
  int prompt_len_max = 256;
  double data_bytes_per_token = 4.0;
  // optional explicit centers (k_clusters x embedding_dim); drawn when empty
  std::vector<std::vector<double>> cluster_centers;
  // optional cluster -> app class map; defaults to k % n_app_classes
  std::vector<int> app_class_map;

  void validate() const;
};

// Gaussian-mixture prompts with cluster-keyed ground-truth answers.
// Pure function of (spec, rng seed).
Workload generate_workload(const WorkloadSpec& spec, Rng rng);

// Experts with home cluster n % k_clusters and tiered hardware draws.
// Pure function of (spec, rng seed).
Fleet generate_fleet(const FleetSpec& spec, Rng rng);
// Variant that checks the fleet covers a given cluster labeling.
Fleet generate_fleet(const FleetSpec& spec, const std::vector<int>& labels, Rng rng);

struct KmeansResult {
  std::vector<int> labels;
  std::vector<std::vector<double>> centers;
  std::vector<double> wcss_history;  // one entry per Lloyd iteration
  double wcss = 0.0;
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding. Stops when the largest center
// shift drops below tol or after max_iters sweeps.
KmeansResult kmeans_cluster(const std::vector<std::vector<double>>& points, int k, Rng rng,
                            int max_iters = 300, double tol = 1e-6);

// Next-token distribution of one simulated expert at step t (1-based,
// t <= answer length). Blend, frozen here:
//   c      = competence[prompt.cluster_label]
//   peak   = sigmoid(sharpness * c) on the true token y_t, remainder uniform
//   noise  = kDecoyMass on a decoy token j* = floor(V * keyed_unit(expert,
//            prompt, t)), remainder uniform over all V tokens
//   dist   = c * peak + (1 - c) * noise
// Deterministic given (expert id, prompt id, t); never references generated
// history contents, so teacher forcing and free-running agree on f.
//
// The decoy makes a low-competence expert confidently wrong rather than
// merely vague: its argmax sits on j*, not near y_t. Decoys are keyed per
// expert, so they only align across experts by 1/V coincidence. Two aligned
// decoys outvote one home expert under uniform fusion of a small ensemble,
// while in a large ensemble the off experts' residual mass on y_t outweighs
// any decoy pair; three aligned decoys are needed there and are rare. That
// collision geometry is what separates gated fusion from uniform voting.
VocabDistribution expert_next_token_dist(const ExpertProfile& expert, const Prompt& prompt,
                                         int t, int vocab_size);

// Probability mass the noise component places on its decoy token.
inline constexpr double kDecoyMass = 0.55;

}  // namespace moe2
