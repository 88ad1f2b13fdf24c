#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "moe2/rng.hpp"
#include "moe2/synth.hpp"
#include "moe2/types.hpp"

namespace moe2 {

// Raw scores are clamped to this band before exponentiation.
inline constexpr double kScoreClamp = 30.0;
// Fused token probabilities are floored here before the log.
inline constexpr double kLossFloor = 1e-12;

struct DenseLayer {
  int in = 0, out = 0;
  std::vector<double> w;  // row-major [out][in]
  std::vector<double> b;  // [out]

  static DenseLayer zeros(int in, int out);
};

// MLP gate: hidden layers with a leaky-rectifier activation; when residual
// is set, the inputs of every layer (x, a1, ..., ah) are concatenated to
// feed the linear output layer. Output scores carry no activation.
struct GatingParams {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;
  double negative_slope = 0.01;
  bool residual = true;
  std::vector<DenseLayer> hidden;
  DenseLayer output;

  static GatingParams zeros(int input_dim, std::vector<int> hidden_dims, int output_dim,
                            double negative_slope = 0.01, bool residual = true);
  // Hidden layers draw Xavier-uniform weights; the output layer stays zero so
  // the initial mixture is uniform for every prompt.
  static GatingParams random_init(int input_dim, std::vector<int> hidden_dims, int output_dim,
                                  Rng& rng, double negative_slope = 0.01, bool residual = true);

  int output_in_dim() const;
  std::size_t parameter_count() const;
  void validate() const;
};

// Raw gate scores g(x, theta), length output_dim.
std::vector<double> gating_forward(const GatingParams& params, std::span<const double> x);

// exp(clamp(raw, -kScoreClamp, kScoreClamp)): strictly positive, finite.
std::vector<double> positive_scores(std::span<const double> raw);

// Fleet-length weight vector: positive[n]/sum over S for members, 0 outside.
std::vector<double> normalize_weights(std::span<const double> positive, const SubsetMask& s);

// Convex combination of member distributions; weights aligned with dists.
VocabDistribution fuse_distributions(std::span<const double> member_weights,
                                     const std::vector<VocabDistribution>& dists);

// Training view of one prompt: embedding plus the per-expert probability of
// each true answer token, q[expert][t] = f_expert(y_t | prompt, t).
struct LossExample {
  int prompt_id = 0;
  std::vector<double> x;
  std::vector<std::vector<double>> q;
};
using LossDataset = std::vector<LossExample>;

LossExample build_loss_example(const Prompt& prompt, const Fleet& fleet, int vocab_size);
LossDataset build_loss_dataset(const Workload& workload, const Fleet& fleet);

// Teacher-forced ensemble loss: weights from x once per prompt, then
// -sum_t log(max(sum_{n in S} w_n q[n][t], kLossFloor)).
double sequence_loss(const GatingParams& params, const SubsetMask& s, const LossExample& ex);
// Mean sequence loss. Prompts are folded in id order regardless of the
// container's order, so permutations of the dataset reproduce the exact sum.
double empirical_loss(const GatingParams& params, const SubsetMask& s, const LossDataset& data);

struct GatingGrad {
  std::vector<DenseLayer> hidden;
  DenseLayer output;

  double global_norm() const;
  void scale(double f);
};

struct LossAndGrad {
  double loss = 0.0;
  GatingGrad grad;
};

// Exact reverse-mode gradient of the mean sequence loss over the batch.
LossAndGrad loss_gradient(const GatingParams& params, const SubsetMask& s,
                          const LossDataset& batch);

struct TrainConfig {
  std::vector<int> hidden_dims{32, 32};
  double negative_slope = 0.01;
  bool residual = true;
  double learning_rate = 0.1;
  int batch_size = 32;
  int epochs = 50;
  double clip_norm = 1.0;
  double plateau_factor = 0.8;
  int plateau_patience = 50;
  double dropout = 0.0;  // hidden-activation dropout during training only
  std::uint64_t seed = 1;
};

struct TrainResult {
  GatingParams params;            // best full-dataset loss seen (init included)
  std::vector<double> loss_steps; // pre-update mini-batch losses
  std::vector<double> lr_steps;   // learning rate at each step
  std::vector<double> epoch_loss; // full-dataset loss after each epoch
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Mini-batch gradient descent with global-norm clipping and plateau decay
// of the learning rate. Throws on divergence (non-finite loss or gradient).
TrainResult train_gating(const LossDataset& data, int n_experts, const TrainConfig& config,
                         const GatingParams* init = nullptr,
                         const SubsetMask* subset = nullptr);

// ---- infinite-capacity (tabular) gate ----

// Free per-prompt positive scores, the infinite-width stand-in used by the
// optimality property tests.
struct TabularGating {
  int n_experts = 0;
  std::map<int, std::vector<double>> scores;  // prompt id -> positive scores

  void validate() const;
};

struct MixtureSolution {
  std::vector<double> weights;  // over the q rows, simplex point
  double loss = 0.0;            // -sum_t log(sum_n w_n q[n][t])
  double kkt_gap = 0.0;         // certified optimality gap bound (nats)
  int iterations = 0;
};

double mixture_loss(std::span<const double> weights, const std::vector<std::vector<double>>& q);

// Minimizes mixture_loss over the simplex by multiplicative (EM) updates
// from the uniform start; stops once the KKT gap certifies tol-optimality.
// Symmetric optima keep the uniform start, which is the declared tie-break.
MixtureSolution optimal_mixture_weights(const std::vector<std::vector<double>>& q,
                                        double tol = 1e-9, int max_iters = 500000);

// Per-prompt optimal weights over the members of s (fleet-length vector,
// zeros outside s), solving the convex per-prompt problem directly.
std::vector<double> tabular_optimal_weights(const Prompt& prompt, const SubsetMask& s,
                                            const Fleet& fleet, int vocab_size,
                                            double tol = 1e-9);

}  // namespace moe2
