#include "moe2/types.hpp"

#include <bit>
#include <cmath>

namespace moe2 {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void require_positive(double v, const char* name) {
  require(std::isfinite(v) && v > 0.0, std::string(name) + " must be positive");
}

}  // namespace

void ExpertProfile::validate() const {
  require(id >= 0, "expert id must be nonnegative");
  require(!competence.empty(), "competence vector is empty");
  for (double c : competence)
    require(std::isfinite(c) && c >= 0.0 && c <= 1.0, "competence outside [0,1]");
  require(std::isfinite(sharpness) && sharpness >= 0.0, "sharpness must be nonnegative");
  require_positive(flops_per_token, "flops_per_token");
  require_positive(compute_capability, "compute_capability");
  require_positive(mem_access_size, "mem_access_size");
  require_positive(mem_bandwidth, "mem_bandwidth");
  require(std::isfinite(overhead_seconds) && overhead_seconds >= 0.0,
          "overhead_seconds must be nonnegative");
  require_positive(data_rate, "data_rate");
  require(std::isfinite(energy_base) && energy_base >= 0.0, "energy_base must be nonnegative");
  require(std::isfinite(energy_per_context_token) && energy_per_context_token >= 0.0,
          "energy_per_context_token must be nonnegative");
}

void Prompt::validate(int vocab_size) const {
  require(id >= 0, "prompt id must be nonnegative");
  require(!embedding.empty(), "prompt embedding is empty");
  for (double e : embedding) require(std::isfinite(e), "prompt embedding not finite");
  require(app_class >= 0, "app_class must be nonnegative");
  require(cluster_label >= 0, "cluster_label must be nonnegative");
  require(prompt_length_tokens > 0, "prompt_length_tokens must be positive");
  require(std::isfinite(data_size_bytes) && data_size_bytes > 0.0,
          "data_size_bytes must be positive");
  require(!answer.empty(), "answer is empty");
  for (int y : answer)
    require(y >= 0 && y < vocab_size, "answer token outside vocabulary");
}

void Workload::validate() const {
  require(vocab_size > 1, "vocab_size must exceed 1");
  require(embedding_dim > 0, "embedding_dim must be positive");
  require(n_app_classes > 0, "n_app_classes must be positive");
  require(n_clusters > 0, "n_clusters must be positive");
  require(!prompts.empty(), "workload has no prompts");
  for (const Prompt& p : prompts) {
    p.validate(vocab_size);
    require(static_cast<int>(p.embedding.size()) == embedding_dim,
            "prompt embedding dimension mismatch");
    require(p.app_class < n_app_classes, "app_class out of range");
    require(p.cluster_label < n_clusters, "cluster_label out of range");
  }
  for (std::size_t i = 1; i < prompts.size(); ++i)
    require(prompts[i - 1].id < prompts[i].id, "prompt ids must be strictly increasing");
}

void Fleet::validate() const {
  require(n_clusters > 0, "fleet n_clusters must be positive");
  require(!experts.empty(), "fleet has no experts");
  require(static_cast<int>(experts.size()) <= 30, "fleet too large for bitmask subsets");
  for (int n = 0; n < size(); ++n) {
    experts[n].validate();
    require(experts[n].id == n, "expert ids must be contiguous 0..N-1");
    require(static_cast<int>(experts[n].competence.size()) == n_clusters,
            "competence length must equal n_clusters");
  }
}

SubsetMask::SubsetMask(int n_experts, std::uint32_t bits) : n_(n_experts), bits_(bits) {
  require(n_experts > 0 && n_experts <= 30, "SubsetMask: n_experts outside [1,30]");
  require(bits < (1u << n_experts), "SubsetMask: bits outside fleet range");
}

SubsetMask SubsetMask::full(int n_experts) {
  require(n_experts > 0 && n_experts <= 30, "SubsetMask: n_experts outside [1,30]");
  return SubsetMask(n_experts, (1u << n_experts) - 1u);
}

SubsetMask SubsetMask::single(int n_experts, int id) {
  require(id >= 0 && id < n_experts, "SubsetMask: expert id out of range");
  return SubsetMask(n_experts, 1u << id);
}

SubsetMask SubsetMask::from_members(int n_experts, const std::vector<int>& members) {
  std::uint32_t bits = 0;
  for (int id : members) {
    require(id >= 0 && id < n_experts, "SubsetMask: expert id out of range");
    bits |= (1u << id);
  }
  return SubsetMask(n_experts, bits);
}

bool SubsetMask::contains(int id) const {
  return id >= 0 && id < n_ && (bits_ & (1u << id)) != 0;
}

int SubsetMask::popcount() const { return std::popcount(bits_); }

bool SubsetMask::is_subset_of(const SubsetMask& other) const {
  return n_ == other.n_ && (bits_ & ~other.bits_) == 0;
}

SubsetMask SubsetMask::without(int id) const {
  require(contains(id), "SubsetMask::without: id not in subset");
  return SubsetMask(n_, bits_ & ~(1u << id));
}

SubsetMask SubsetMask::with(int id) const {
  require(id >= 0 && id < n_, "SubsetMask::with: id out of range");
  return SubsetMask(n_, bits_ | (1u << id));
}

std::vector<int> SubsetMask::members() const {
  std::vector<int> out;
  for (int i = 0; i < n_; ++i)
    if (bits_ & (1u << i)) out.push_back(i);
  return out;
}

std::string SubsetMask::to_string() const {
  std::string s = "{";
  bool first = true;
  for (int id : members()) {
    if (!first) s += ",";
    s += std::to_string(id);
    first = false;
  }
  return s + "}";
}

void ConstraintSet::validate() const {
  require(!tau_max.empty(), "constraint set needs at least one delay class");
  for (double t : tau_max) require_positive(t, "tau_max");
  require_positive(e_max, "e_max");
}

void VocabDistribution::validate() const {
  require(!probs.empty(), "distribution is empty");
  double sum = 0.0;
  for (double p : probs) {
    require(std::isfinite(p) && p >= 0.0, "distribution entry negative or not finite");
    sum += p;
  }
  require(std::fabs(sum - 1.0) <= 1e-9, "distribution does not sum to 1");
}

}  // namespace moe2
