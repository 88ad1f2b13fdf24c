#include "moe2/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace moe2 {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

double draw_range(const ParamRange& r, Rng& rng) {
  require(r.first <= r.second, "parameter range has lo > hi");
  if (r.first == r.second) return r.first;
  return rng.next_uniform(r.first, r.second);
}

// Fixed map from (cluster, position) to the cluster's true token.
constexpr std::uint64_t kTruthSalt = 0xA24BAED4963EE407ULL;

int true_token(int cluster, int t, int vocab_size) {
  const double u = keyed_unit({kTruthSalt, static_cast<std::uint64_t>(cluster),
                               static_cast<std::uint64_t>(t)});
  int tok = static_cast<int>(u * vocab_size);
  return tok < vocab_size ? tok : vocab_size - 1;
}

constexpr std::uint64_t kNoiseSalt = 0x6C62272E07BB0142ULL;

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

void FleetSpec::validate() const {
  require(n_experts > 0 && n_experts <= 30, "n_experts outside [1,30]");
  require(k_clusters > 0, "k_clusters must be positive");
  require(competence.home >= 0.0 && competence.home <= 1.0, "home competence outside [0,1]");
  require(competence.off_base >= 0.0 && competence.off_base + competence.off_jitter <= 1.0,
          "off-home competence range outside [0,1]");
  require(!hardware_tiers.empty(), "fleet spec needs at least one hardware tier");
  int total = 0;
  for (const HardwareTier& t : hardware_tiers) {
    require(t.count > 0, "hardware tier count must be positive");
    total += t.count;
  }
  require(total == n_experts, "hardware tier counts must sum to n_experts");
}

void WorkloadSpec::validate() const {
  require(n_prompts > 0, "n_prompts must be positive");
  require(embedding_dim > 0, "embedding_dim must be positive");
  require(k_clusters > 0, "k_clusters must be positive");
  require(vocab_size > 1, "vocab_size must exceed 1");
  require(n_app_classes > 0 && n_app_classes <= k_clusters,
          "n_app_classes must be in [1, k_clusters]");
  require(cluster_spread > 0.0, "cluster_spread must be positive");
  require(answer_len_min > 0 && answer_len_min <= answer_len_max, "bad answer length range");
  require(prompt_len_min > 0 && prompt_len_min <= prompt_len_max, "bad prompt length range");
  require(data_bytes_per_token > 0.0, "data_bytes_per_token must be positive");
  if (!cluster_centers.empty()) {
    require(static_cast<int>(cluster_centers.size()) == k_clusters,
            "explicit centers must match k_clusters");
    for (const auto& c : cluster_centers)
      require(static_cast<int>(c.size()) == embedding_dim, "center dimension mismatch");
  }
  if (!app_class_map.empty()) {
    require(static_cast<int>(app_class_map.size()) == k_clusters,
            "app_class_map must have one entry per cluster");
    std::vector<bool> seen(n_app_classes, false);
    for (int m : app_class_map) {
      require(m >= 0 && m < n_app_classes, "app_class_map entry out of range");
      seen[m] = true;
    }
    for (bool s : seen) require(s, "every app class must be reachable");
  }
}

Workload generate_workload(const WorkloadSpec& spec, Rng rng) {
  spec.validate();

  std::vector<std::vector<double>> centers = spec.cluster_centers;
  Rng center_rng = rng.substream(0);
  if (centers.empty()) {
    centers.resize(spec.k_clusters, std::vector<double>(spec.embedding_dim));
    for (auto& c : centers)
      for (double& v : c) v = spec.cluster_center_scale * center_rng.next_gaussian();
  }

  std::vector<int> class_map = spec.app_class_map;
  if (class_map.empty()) {
    class_map.resize(spec.k_clusters);
    for (int k = 0; k < spec.k_clusters; ++k) class_map[k] = k % spec.n_app_classes;
  }

  Workload w;
  w.vocab_size = spec.vocab_size;
  w.embedding_dim = spec.embedding_dim;
  w.n_app_classes = spec.n_app_classes;
  w.n_clusters = spec.k_clusters;
  w.prompts.reserve(spec.n_prompts);

  Rng prompt_rng = rng.substream(1);
  for (int i = 0; i < spec.n_prompts; ++i) {
    Prompt p;
    p.id = i;
    const int k = prompt_rng.next_int(0, spec.k_clusters - 1);
    p.cluster_label = k;
    p.app_class = class_map[k];
    p.embedding.resize(spec.embedding_dim);
    for (int d = 0; d < spec.embedding_dim; ++d)
      p.embedding[d] = centers[k][d] + spec.cluster_spread * prompt_rng.next_gaussian();
    p.prompt_length_tokens = prompt_rng.next_int(spec.prompt_len_min, spec.prompt_len_max);
    p.data_size_bytes = spec.data_bytes_per_token * p.prompt_length_tokens;
    const int T = prompt_rng.next_int(spec.answer_len_min, spec.answer_len_max);
    p.answer.resize(T);
    for (int t = 1; t <= T; ++t) p.answer[t - 1] = true_token(k, t, spec.vocab_size);
    w.prompts.push_back(std::move(p));
  }

  w.validate();
  return w;
}

Fleet generate_fleet(const FleetSpec& spec, Rng rng) {
  spec.validate();

  Fleet fleet;
  fleet.n_clusters = spec.k_clusters;
  fleet.experts.reserve(spec.n_experts);

  Rng draw = rng.substream(2);
  int next_id = 0;
  for (const HardwareTier& tier : spec.hardware_tiers) {
    for (int i = 0; i < tier.count; ++i) {
      ExpertProfile e;
      e.id = next_id++;
      e.flops_per_token = draw_range(tier.flops_per_token, draw);
      e.compute_capability = draw_range(tier.compute_capability, draw);
      e.mem_access_size = draw_range(tier.mem_access_size, draw);
      e.mem_bandwidth = draw_range(tier.mem_bandwidth, draw);
      e.overhead_seconds = draw_range(tier.overhead_seconds, draw);
      e.data_rate = draw_range(tier.data_rate, draw);
      e.energy_base = draw_range(tier.energy_base, draw);
      e.energy_per_context_token = draw_range(tier.energy_per_context_token, draw);
      e.sharpness = draw_range(tier.sharpness, draw);

      const int home = e.id % spec.k_clusters;
      e.competence.resize(spec.k_clusters);
      for (int k = 0; k < spec.k_clusters; ++k) {
        e.competence[k] = (k == home)
                              ? spec.competence.home
                              : spec.competence.off_base +
                                    spec.competence.off_jitter * draw.next_unit();
      }
      fleet.experts.push_back(std::move(e));
    }
  }

  fleet.validate();
  return fleet;
}

Fleet generate_fleet(const FleetSpec& spec, const std::vector<int>& labels, Rng rng) {
  for (int l : labels)
    require(l >= 0 && l < spec.k_clusters, "cluster label outside fleet spec's k_clusters");
  return generate_fleet(spec, rng);
}

KmeansResult kmeans_cluster(const std::vector<std::vector<double>>& points, int k, Rng rng,
                            int max_iters, double tol) {
  require(k > 0, "kmeans: k must be positive");
  require(static_cast<int>(points.size()) >= k, "kmeans: fewer points than clusters");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) require(p.size() == dim, "kmeans: ragged points");

  const int n = static_cast<int>(points.size());
  KmeansResult res;
  res.centers.reserve(k);

  // k-means++ seeding
  res.centers.push_back(points[static_cast<int>(rng.next_below(n))]);
  std::vector<double> d2(n);
  while (static_cast<int>(res.centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : res.centers) best = std::min(best, sq_dist(points[i], c));
      d2[i] = best;
      total += best;
    }
    int pick = 0;
    if (total > 0.0) {
      const double target = rng.next_unit() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.next_below(n));
    }
    res.centers.push_back(points[pick]);
  }

  res.labels.assign(n, 0);
  std::vector<std::vector<double>> next(k, std::vector<double>(dim));
  std::vector<int> counts(k);

  for (int iter = 0; iter < max_iters; ++iter) {
    res.iterations = iter + 1;

    double wcss = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(points[i], res.centers[c]);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      res.labels[i] = arg;
      wcss += best;
    }
    res.wcss_history.push_back(wcss);
    res.wcss = wcss;

    for (auto& c : next) std::fill(c.begin(), c.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      counts[res.labels[i]]++;
      for (std::size_t d = 0; d < dim; ++d) next[res.labels[i]][d] += points[i][d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // revive an empty cluster at the point farthest from its center
        int far = 0;
        double best = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = sq_dist(points[i], res.centers[res.labels[i]]);
          if (d > best) {
            best = d;
            far = i;
          }
        }
        next[c] = points[far];
        counts[c] = 1;
      } else {
        for (std::size_t d = 0; d < dim; ++d) next[c][d] /= counts[c];
      }
    }

    double shift = 0.0;
    for (int c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(sq_dist(next[c], res.centers[c])));
    res.centers = next;
    if (shift < tol) break;
  }

  // final labels/WCSS against the converged centers
  double wcss = 0.0;
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int c = 0; c < k; ++c) {
      const double d = sq_dist(points[i], res.centers[c]);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    res.labels[i] = arg;
    wcss += best;
  }
  res.wcss_history.push_back(wcss);
  res.wcss = wcss;
  return res;
}

VocabDistribution expert_next_token_dist(const ExpertProfile& expert, const Prompt& prompt,
                                         int t, int vocab_size) {
  require(vocab_size > 1, "vocab_size must exceed 1");
  require(t >= 1 && t <= static_cast<int>(prompt.answer.size()),
          "generation step outside the prompt's answer range");
  require(prompt.cluster_label >= 0 &&
              prompt.cluster_label < static_cast<int>(expert.competence.size()),
          "prompt cluster outside expert competence table");

  const int y = prompt.answer[t - 1];
  require(y >= 0 && y < vocab_size, "true token outside vocabulary");

  const double c = expert.competence[prompt.cluster_label];
  const double peak_mass = 1.0 / (1.0 + std::exp(-expert.sharpness * c));
  const double off_mass = (1.0 - peak_mass) / (vocab_size - 1);

  // keyed decoy token, identical for identical (expert, prompt, t)
  const double u = keyed_unit({kNoiseSalt, static_cast<std::uint64_t>(expert.id),
                               static_cast<std::uint64_t>(prompt.id),
                               static_cast<std::uint64_t>(t)});
  const int decoy = std::min(vocab_size - 1, static_cast<int>(u * vocab_size));
  const double noise_floor = (1.0 - kDecoyMass) / vocab_size;

  VocabDistribution dist;
  dist.probs.resize(vocab_size);
  for (int j = 0; j < vocab_size; ++j) {
    const double peak = (j == y) ? peak_mass : off_mass;
    const double noise = noise_floor + ((j == decoy) ? kDecoyMass : 0.0);
    dist.probs[j] = c * peak + (1.0 - c) * noise;
  }

  dist.validate();
  return dist;
}

}  // namespace moe2
