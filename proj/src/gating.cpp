#include "moe2/gating.hpp"

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

double clamp_score(double g) { return std::clamp(g, -kScoreClamp, kScoreClamp); }

// y = W x + b
void affine(const DenseLayer& l, std::span<const double> x, std::vector<double>& y) {
  y.assign(l.out, 0.0);
  for (int r = 0; r < l.out; ++r) {
    const double* row = l.w.data() + static_cast<std::size_t>(r) * l.in;
    double acc = l.b[r];
    for (int c = 0; c < l.in; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

struct ForwardCache {
  std::vector<std::vector<double>> z;  // hidden preactivations
  std::vector<std::vector<double>> a;  // hidden activations (post dropout)
  std::vector<double> out_in;
  std::vector<double> scores;
};

void forward_cached(const GatingParams& p, std::span<const double> x, ForwardCache& cache,
                    const std::vector<std::vector<double>>* dropout_scale) {
  const int h = static_cast<int>(p.hidden.size());
  cache.z.resize(h);
  cache.a.resize(h);

  std::span<const double> prev = x;
  for (int i = 0; i < h; ++i) {
    affine(p.hidden[i], prev, cache.z[i]);
    auto& act = cache.a[i];
    act.resize(p.hidden[i].out);
    for (int r = 0; r < p.hidden[i].out; ++r) {
      const double z = cache.z[i][r];
      act[r] = z > 0.0 ? z : p.negative_slope * z;
    }
    if (dropout_scale)
      for (int r = 0; r < p.hidden[i].out; ++r) act[r] *= (*dropout_scale)[i][r];
    prev = act;
  }

  if (p.residual) {
    cache.out_in.clear();
    cache.out_in.reserve(p.output_in_dim());
    cache.out_in.insert(cache.out_in.end(), x.begin(), x.end());
    for (const auto& a : cache.a) cache.out_in.insert(cache.out_in.end(), a.begin(), a.end());
  } else if (h == 0) {
    cache.out_in.assign(x.begin(), x.end());
  } else {
    cache.out_in = cache.a.back();
  }
  affine(p.output, cache.out_in, cache.scores);
}

GatingGrad zero_grad(const GatingParams& p) {
  GatingGrad g;
  g.hidden.reserve(p.hidden.size());
  for (const DenseLayer& l : p.hidden) g.hidden.push_back(DenseLayer::zeros(l.in, l.out));
  g.output = DenseLayer::zeros(p.output.in, p.output.out);
  return g;
}

// Accumulates d(loss)/d(params) for one example given d(loss)/d(scores).
void backward_into(const GatingParams& p, std::span<const double> x, const ForwardCache& cache,
                   const std::vector<double>& dscores,
                   const std::vector<std::vector<double>>* dropout_scale, GatingGrad& grad) {
  const int h = static_cast<int>(p.hidden.size());

  for (int r = 0; r < p.output.out; ++r) {
    double* wrow = grad.output.w.data() + static_cast<std::size_t>(r) * p.output.in;
    const double d = dscores[r];
    grad.output.b[r] += d;
    for (int c = 0; c < p.output.in; ++c) wrow[c] += d * cache.out_in[c];
  }

  std::vector<double> d_out_in(p.output.in, 0.0);
  for (int r = 0; r < p.output.out; ++r) {
    const double d = dscores[r];
    const double* wrow = p.output.w.data() + static_cast<std::size_t>(r) * p.output.in;
    for (int c = 0; c < p.output.in; ++c) d_out_in[c] += d * wrow[c];
  }

  // route the output-layer input gradient back to each hidden activation
  std::vector<std::vector<double>> d_act(h);
  for (int i = 0; i < h; ++i) d_act[i].assign(p.hidden[i].out, 0.0);
  if (p.residual) {
    int off = p.input_dim;  // skip the x segment
    for (int i = 0; i < h; ++i) {
      for (int r = 0; r < p.hidden[i].out; ++r) d_act[i][r] = d_out_in[off + r];
      off += p.hidden[i].out;
    }
  } else if (h > 0) {
    d_act[h - 1] = d_out_in;
  }

  for (int i = h - 1; i >= 0; --i) {
    std::vector<double> dz(p.hidden[i].out);
    for (int r = 0; r < p.hidden[i].out; ++r) {
      double da = d_act[i][r];
      if (dropout_scale) da *= (*dropout_scale)[i][r];
      dz[r] = da * (cache.z[i][r] > 0.0 ? 1.0 : p.negative_slope);
    }
    std::span<const double> below =
        (i == 0) ? x : std::span<const double>(cache.a[i - 1]);
    for (int r = 0; r < p.hidden[i].out; ++r) {
      double* wrow = grad.hidden[i].w.data() + static_cast<std::size_t>(r) * p.hidden[i].in;
      grad.hidden[i].b[r] += dz[r];
      for (int c = 0; c < p.hidden[i].in; ++c) wrow[c] += dz[r] * below[c];
    }
    if (i > 0) {
      for (int c = 0; c < p.hidden[i].in; ++c) {
        double acc = 0.0;
        for (int r = 0; r < p.hidden[i].out; ++r)
          acc += p.hidden[i].w[static_cast<std::size_t>(r) * p.hidden[i].in + c] * dz[r];
        d_act[i - 1][c] += acc;
      }
    }
  }
}

void check_example(const LossExample& ex, int n_experts, int input_dim) {
  require(static_cast<int>(ex.x.size()) == input_dim, "loss example embedding dim mismatch");
  require(static_cast<int>(ex.q.size()) == n_experts, "loss example q rows != n_experts");
  require(!ex.q.empty() && !ex.q.front().empty(), "loss example with empty q");
  const std::size_t T = ex.q.front().size();
  for (const auto& row : ex.q) {
    require(row.size() == T, "loss example q rows ragged");
    for (double v : row)
      require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "loss example q entry outside [0,1]");
  }
}

// indices of data in canonical (prompt id) order; stable for duplicates
std::vector<int> canonical_order(const LossDataset& data) {
  std::vector<int> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return data[a].prompt_id < data[b].prompt_id; });
  return idx;
}

// loss + dL/dscores for one example given the forward scores
double example_loss_backward(std::span<const double> scores, const SubsetMask& s,
                             const LossExample& ex, std::vector<double>* dscores) {
  const std::vector<int> members = s.members();
  require(!members.empty(), "loss over an empty subset");

  std::vector<double> e(members.size());
  double E = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    e[i] = std::exp(clamp_score(scores[members[i]]));
    E += e[i];
  }

  const std::size_t T = ex.q.front().size();
  double loss = 0.0;
  std::vector<double> dw(members.size(), 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double p = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i)
      p += (e[i] / E) * ex.q[members[i]][t];
    loss += -std::log(std::max(p, kLossFloor));
    if (dscores && p > kLossFloor)
      for (std::size_t i = 0; i < members.size(); ++i) dw[i] += -ex.q[members[i]][t] / p;
  }

  if (dscores) {
    dscores->assign(scores.size(), 0.0);
    double wdot = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i) wdot += (e[i] / E) * dw[i];
    for (std::size_t i = 0; i < members.size(); ++i) {
      const double de = (dw[i] - wdot) / E;
      const double raw = scores[members[i]];
      const double pass = (raw > -kScoreClamp && raw < kScoreClamp) ? 1.0 : 0.0;
      (*dscores)[members[i]] = de * e[i] * pass;
    }
  }
  return loss;
}

struct BatchEval {
  double loss = 0.0;
  GatingGrad grad;
};

BatchEval batch_loss_grad(const GatingParams& params, const SubsetMask& s,
                          const LossDataset& data, const std::vector<int>& order,
                          double dropout, Rng* drop_rng) {
  require(!order.empty(), "empty batch");
  BatchEval out;
  out.grad = zero_grad(params);

  ForwardCache cache;
  std::vector<double> dscores;
  std::vector<std::vector<double>> drop_scale;
  for (int idx : order) {
    const LossExample& ex = data[idx];
    check_example(ex, params.output_dim, params.input_dim);

    const std::vector<std::vector<double>>* scale = nullptr;
    if (dropout > 0.0 && drop_rng) {
      drop_scale.resize(params.hidden.size());
      for (std::size_t i = 0; i < params.hidden.size(); ++i) {
        drop_scale[i].assign(params.hidden[i].out, 0.0);
        for (int r = 0; r < params.hidden[i].out; ++r)
          drop_scale[i][r] =
              (drop_rng->next_unit() < dropout) ? 0.0 : 1.0 / (1.0 - dropout);
      }
      scale = &drop_scale;
    }

    forward_cached(params, ex.x, cache, scale);
    out.loss += example_loss_backward(cache.scores, s, ex, &dscores);
    backward_into(params, ex.x, cache, dscores, scale, out.grad);
  }

  const double inv = 1.0 / static_cast<double>(order.size());
  out.loss *= inv;
  out.grad.scale(inv);
  return out;
}

void apply_update(GatingParams& p, const GatingGrad& g, double lr) {
  for (std::size_t i = 0; i < p.hidden.size(); ++i) {
    for (std::size_t j = 0; j < p.hidden[i].w.size(); ++j) p.hidden[i].w[j] -= lr * g.hidden[i].w[j];
    for (std::size_t j = 0; j < p.hidden[i].b.size(); ++j) p.hidden[i].b[j] -= lr * g.hidden[i].b[j];
  }
  for (std::size_t j = 0; j < p.output.w.size(); ++j) p.output.w[j] -= lr * g.output.w[j];
  for (std::size_t j = 0; j < p.output.b.size(); ++j) p.output.b[j] -= lr * g.output.b[j];
}

}  // namespace

DenseLayer DenseLayer::zeros(int in, int out) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.w.assign(static_cast<std::size_t>(in) * out, 0.0);
  l.b.assign(out, 0.0);
  return l;
}

GatingParams GatingParams::zeros(int input_dim, std::vector<int> hidden_dims, int output_dim,
                                 double negative_slope, bool residual) {
  GatingParams p;
  p.input_dim = input_dim;
  p.hidden_dims = std::move(hidden_dims);
  p.output_dim = output_dim;
  p.negative_slope = negative_slope;
  p.residual = residual;
  int prev = input_dim;
  for (int hdim : p.hidden_dims) {
    p.hidden.push_back(DenseLayer::zeros(prev, hdim));
    prev = hdim;
  }
  p.output = DenseLayer::zeros(p.output_in_dim(), output_dim);
  p.validate();
  return p;
}

GatingParams GatingParams::random_init(int input_dim, std::vector<int> hidden_dims,
                                       int output_dim, Rng& rng, double negative_slope,
                                       bool residual) {
  GatingParams p = zeros(input_dim, std::move(hidden_dims), output_dim, negative_slope, residual);
  auto fill = [&rng](DenseLayer& l) {
    const double lim = std::sqrt(6.0 / (l.in + l.out));
    for (double& w : l.w) w = rng.next_uniform(-lim, lim);
  };
  for (DenseLayer& l : p.hidden) fill(l);
  // The output layer stays zero: every prompt then starts from the uniform
  // mixture, and early updates follow the data instead of whichever expert a
  // random score happened to favor. A random output layer lets the softmax
  // saturate on wrong experts, where the corrective gradient vanishes.
  return p;
}

int GatingParams::output_in_dim() const {
  if (residual) {
    int total = input_dim;
    for (int hdim : hidden_dims) total += hdim;
    return total;
  }
  return hidden_dims.empty() ? input_dim : hidden_dims.back();
}

std::size_t GatingParams::parameter_count() const {
  std::size_t n = output.w.size() + output.b.size();
  for (const DenseLayer& l : hidden) n += l.w.size() + l.b.size();
  return n;
}

void GatingParams::validate() const {
  require(input_dim > 0, "gating input_dim must be positive");
  require(output_dim > 0, "gating output_dim must be positive");
  require(std::isfinite(negative_slope) && negative_slope >= 0.0,
          "negative_slope must be nonnegative");
  require(hidden.size() == hidden_dims.size(), "hidden layer count mismatch");
  int prev = input_dim;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    require(hidden_dims[i] > 0, "hidden dim must be positive");
    require(hidden[i].in == prev && hidden[i].out == hidden_dims[i], "hidden layer shape mismatch");
    require(hidden[i].w.size() == static_cast<std::size_t>(prev) * hidden_dims[i] &&
                hidden[i].b.size() == static_cast<std::size_t>(hidden_dims[i]),
            "hidden layer storage mismatch");
    prev = hidden_dims[i];
  }
  require(output.in == output_in_dim() && output.out == output_dim, "output layer shape mismatch");
  require(output.w.size() == static_cast<std::size_t>(output.in) * output.out &&
              output.b.size() == static_cast<std::size_t>(output.out),
          "output layer storage mismatch");
  auto finite = [](const DenseLayer& l) {
    for (double v : l.w)
      if (!std::isfinite(v)) return false;
    for (double v : l.b)
      if (!std::isfinite(v)) return false;
    return true;
  };
  for (const DenseLayer& l : hidden) require(finite(l), "hidden layer has non-finite weight");
  require(finite(output), "output layer has non-finite weight");
}

std::vector<double> gating_forward(const GatingParams& params, std::span<const double> x) {
  params.validate();
  require(static_cast<int>(x.size()) == params.input_dim, "gating_forward input dim mismatch");
  for (double v : x) require(std::isfinite(v), "gating_forward input not finite");
  ForwardCache cache;
  forward_cached(params, x, cache, nullptr);
  return cache.scores;
}

std::vector<double> positive_scores(std::span<const double> raw) {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    require(std::isfinite(raw[i]), "raw score not finite");
    out[i] = std::exp(clamp_score(raw[i]));
  }
  return out;
}

std::vector<double> normalize_weights(std::span<const double> positive, const SubsetMask& s) {
  require(static_cast<int>(positive.size()) == s.n_experts(),
          "score vector length != fleet size");
  require(!s.empty(), "normalize_weights over an empty subset");
  double sum = 0.0;
  for (int id : s.members()) {
    require(std::isfinite(positive[id]) && positive[id] > 0.0,
            "normalize_weights needs strictly positive member scores");
    sum += positive[id];
  }
  std::vector<double> w(positive.size(), 0.0);
  for (int id : s.members()) w[id] = positive[id] / sum;
  return w;
}

VocabDistribution fuse_distributions(std::span<const double> member_weights,
                                     const std::vector<VocabDistribution>& dists) {
  require(member_weights.size() == dists.size(), "fuse: weight/distribution count mismatch");
  require(!dists.empty(), "fuse: no distributions");
  const std::size_t v = dists.front().probs.size();
  double wsum = 0.0;
  for (double w : member_weights) {
    require(std::isfinite(w) && w >= 0.0, "fuse: negative weight");
    wsum += w;
  }
  require(std::fabs(wsum - 1.0) <= 1e-9, "fuse: weights do not sum to 1");

  VocabDistribution out;
  out.probs.assign(v, 0.0);
  for (std::size_t i = 0; i < dists.size(); ++i) {
    require(dists[i].probs.size() == v, "fuse: vocabulary size mismatch");
    for (std::size_t j = 0; j < v; ++j) out.probs[j] += member_weights[i] * dists[i].probs[j];
  }
  out.validate();
  return out;
}

LossExample build_loss_example(const Prompt& prompt, const Fleet& fleet, int vocab_size) {
  LossExample ex;
  ex.prompt_id = prompt.id;
  ex.x = prompt.embedding;
  const int T = static_cast<int>(prompt.answer.size());
  ex.q.assign(fleet.size(), std::vector<double>(T));
  for (int n = 0; n < fleet.size(); ++n)
    for (int t = 1; t <= T; ++t)
      ex.q[n][t - 1] =
          expert_next_token_dist(fleet.experts[n], prompt, t, vocab_size).probs[prompt.answer[t - 1]];
  return ex;
}

LossDataset build_loss_dataset(const Workload& workload, const Fleet& fleet) {
  workload.validate();
  fleet.validate();
  LossDataset data;
  data.reserve(workload.prompts.size());
  for (const Prompt& p : workload.prompts)
    data.push_back(build_loss_example(p, fleet, workload.vocab_size));
  return data;
}

double sequence_loss(const GatingParams& params, const SubsetMask& s, const LossExample& ex) {
  check_example(ex, params.output_dim, params.input_dim);
  require(s.n_experts() == params.output_dim, "subset size != gate output dim");
  ForwardCache cache;
  forward_cached(params, ex.x, cache, nullptr);
  return example_loss_backward(cache.scores, s, ex, nullptr);
}

double empirical_loss(const GatingParams& params, const SubsetMask& s, const LossDataset& data) {
  require(!data.empty(), "empirical_loss over an empty dataset");
  double sum = 0.0;
  for (int idx : canonical_order(data)) sum += sequence_loss(params, s, data[idx]);
  return sum / static_cast<double>(data.size());
}

double GatingGrad::global_norm() const {
  double s = 0.0;
  for (const DenseLayer& l : hidden) {
    for (double v : l.w) s += v * v;
    for (double v : l.b) s += v * v;
  }
  for (double v : output.w) s += v * v;
  for (double v : output.b) s += v * v;
  return std::sqrt(s);
}

void GatingGrad::scale(double f) {
  for (DenseLayer& l : hidden) {
    for (double& v : l.w) v *= f;
    for (double& v : l.b) v *= f;
  }
  for (double& v : output.w) v *= f;
  for (double& v : output.b) v *= f;
}

LossAndGrad loss_gradient(const GatingParams& params, const SubsetMask& s,
                          const LossDataset& batch) {
  params.validate();
  require(s.n_experts() == params.output_dim, "subset size != gate output dim");
  BatchEval ev = batch_loss_grad(params, s, batch, canonical_order(batch), 0.0, nullptr);
  return LossAndGrad{ev.loss, std::move(ev.grad)};
}

TrainResult train_gating(const LossDataset& data, int n_experts, const TrainConfig& config,
                         const GatingParams* init, const SubsetMask* subset) {
  require(!data.empty(), "train_gating: empty dataset");
  require(n_experts > 0, "train_gating: n_experts must be positive");
  require(config.learning_rate > 0.0, "train_gating: learning rate must be positive");
  require(config.batch_size > 0, "train_gating: batch size must be positive");
  require(config.epochs >= 0, "train_gating: negative epoch count");
  require(config.clip_norm > 0.0, "train_gating: clip_norm must be positive");
  require(config.plateau_factor > 0.0 && config.plateau_factor <= 1.0,
          "train_gating: plateau factor outside (0,1]");
  require(config.plateau_patience > 0, "train_gating: plateau patience must be positive");
  require(config.dropout >= 0.0 && config.dropout < 1.0, "train_gating: dropout outside [0,1)");

  const int input_dim = static_cast<int>(data.front().x.size());
  for (const LossExample& ex : data) check_example(ex, n_experts, input_dim);

  Rng root(config.seed);
  GatingParams params;
  if (init) {
    init->validate();
    require(init->input_dim == input_dim && init->output_dim == n_experts,
            "train_gating: init shape mismatch");
    params = *init;
  } else {
    Rng init_rng = root.substream(0);
    params = GatingParams::random_init(input_dim, config.hidden_dims, n_experts, init_rng,
                                       config.negative_slope, config.residual);
  }
  const SubsetMask mask = subset ? *subset : SubsetMask::full(n_experts);
  require(mask.n_experts() == n_experts, "train_gating: subset fleet size mismatch");

  TrainResult res;
  res.initial_loss = empirical_loss(params, mask, data);
  GatingParams best = params;
  double best_full = res.initial_loss;

  Rng drop_rng = root.substream(2);
  double lr = config.learning_rate;
  double best_metric = std::numeric_limits<double>::infinity();
  long best_step = 0;
  long step = 0;

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng = root.substream(100 + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.next_below(i))]);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + stop);
      std::stable_sort(batch.begin(), batch.end(),
                       [&](int a, int b) { return data[a].prompt_id < data[b].prompt_id; });

      BatchEval ev = batch_loss_grad(params, mask, data, batch,
                                     config.dropout, config.dropout > 0.0 ? &drop_rng : nullptr);
      if (!std::isfinite(ev.loss))
        throw std::runtime_error("train_gating: loss diverged (non-finite) at step " +
                                 std::to_string(step));
      const double gnorm = ev.grad.global_norm();
      if (!std::isfinite(gnorm))
        throw std::runtime_error("train_gating: gradient diverged (non-finite) at step " +
                                 std::to_string(step));
      if (gnorm > config.clip_norm) ev.grad.scale(config.clip_norm / gnorm);

      apply_update(params, ev.grad, lr);
      res.loss_steps.push_back(ev.loss);
      res.lr_steps.push_back(lr);
      ++step;

      // plateau decay on the 10-step smoothed batch loss
      const std::size_t win = std::min<std::size_t>(10, res.loss_steps.size());
      double smoothed = 0.0;
      for (std::size_t i = res.loss_steps.size() - win; i < res.loss_steps.size(); ++i)
        smoothed += res.loss_steps[i];
      smoothed /= static_cast<double>(win);
      if (smoothed < best_metric - 1e-12) {
        best_metric = smoothed;
        best_step = step;
      } else if (step - best_step >= config.plateau_patience) {
        lr *= config.plateau_factor;
        best_step = step;
      }
    }

    const double full = empirical_loss(params, mask, data);
    res.epoch_loss.push_back(full);
    if (full < best_full) {
      best_full = full;
      best = params;
    }
  }

  res.params = std::move(best);
  res.final_loss = best_full;
  return res;
}

void TabularGating::validate() const {
  require(n_experts > 0, "tabular gate: n_experts must be positive");
  for (const auto& [id, sc] : scores) {
    require(id >= 0, "tabular gate: negative prompt id");
    require(static_cast<int>(sc.size()) == n_experts, "tabular gate: score length mismatch");
    for (double v : sc)
      require(std::isfinite(v) && v > 0.0, "tabular gate: scores must be strictly positive");
  }
}

double mixture_loss(std::span<const double> weights, const std::vector<std::vector<double>>& q) {
  require(weights.size() == q.size(), "mixture_loss: weight/q row mismatch");
  require(!q.empty(), "mixture_loss: empty q");
  const std::size_t T = q.front().size();
  double loss = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double p = 0.0;
    for (std::size_t n = 0; n < q.size(); ++n) p += weights[n] * q[n][t];
    if (p <= 0.0) return std::numeric_limits<double>::infinity();
    loss += -std::log(p);
  }
  return loss;
}

MixtureSolution optimal_mixture_weights(const std::vector<std::vector<double>>& q, double tol,
                                        int max_iters) {
  require(!q.empty(), "mixture solver: no members");
  const std::size_t m = q.size();
  const std::size_t T = q.front().size();
  require(T >= 1, "mixture solver: empty horizon");
  for (const auto& row : q) {
    require(row.size() == T, "mixture solver: ragged q");
    for (double v : row)
      require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "mixture solver: q outside [0,1]");
  }

  MixtureSolution sol;
  sol.weights.assign(m, 1.0 / static_cast<double>(m));
  std::vector<double> p(T), d(m);

  for (int iter = 0; iter < max_iters; ++iter) {
    sol.iterations = iter + 1;
    for (std::size_t t = 0; t < T; ++t) {
      double acc = 0.0;
      for (std::size_t n = 0; n < m; ++n) acc += sol.weights[n] * q[n][t];
      require(acc > 0.0, "mixture solver: token impossible under every member");
      p[t] = acc;
    }
    double gap = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < m; ++n) {
      double acc = 0.0;
      for (std::size_t t = 0; t < T; ++t) acc += q[n][t] / p[t];
      d[n] = acc;
      gap = std::max(gap, acc - static_cast<double>(T));
    }
    sol.kkt_gap = gap;
    if (gap <= tol || m == 1) break;

    double sum = 0.0;
    for (std::size_t n = 0; n < m; ++n) {
      sol.weights[n] *= d[n] / static_cast<double>(T);
      sum += sol.weights[n];
    }
    for (std::size_t n = 0; n < m; ++n) sol.weights[n] /= sum;
  }

  sol.loss = mixture_loss(sol.weights, q);
  return sol;
}

std::vector<double> tabular_optimal_weights(const Prompt& prompt, const SubsetMask& s,
                                            const Fleet& fleet, int vocab_size, double tol) {
  require(s.n_experts() == fleet.size(), "tabular weights: subset fleet size mismatch");
  require(!s.empty(), "tabular weights: empty subset");
  const std::vector<int> members = s.members();
  const int T = static_cast<int>(prompt.answer.size());
  std::vector<std::vector<double>> q(members.size(), std::vector<double>(T));
  for (std::size_t i = 0; i < members.size(); ++i)
    for (int t = 1; t <= T; ++t)
      q[i][t - 1] = expert_next_token_dist(fleet.experts[members[i]], prompt, t, vocab_size)
                        .probs[prompt.answer[t - 1]];
  MixtureSolution sol = optimal_mixture_weights(q, tol);
  std::vector<double> w(fleet.size(), 0.0);
  for (std::size_t i = 0; i < members.size(); ++i) w[members[i]] = sol.weights[i];
  return w;
}

}  // namespace moe2
