#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace moe2 {

// Thrown when no admissible choice exists (e.g. no nonempty feasible subset).
class infeasible_error : public std::runtime_error {
 public:
  explicit infeasible_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an iterative routine hits its iteration budget.
class iteration_limit_error : public std::runtime_error {
 public:
  explicit iteration_limit_error(const std::string& what) : std::runtime_error(what) {}
};

// Simulated edge LLM: per-cluster competence plus the hardware profile the
// cost model reads. All rates/sizes are positive reals in base SI units
// (FLOPs, FLOPs/s, bytes, bytes/s, seconds, joules).
struct ExpertProfile {
  int id = 0;
  std::vector<double> competence;  // one entry per workload cluster, in [0, 1]
  double sharpness = 5.0;          // peakedness of the truth-token mass
  double flops_per_token = 0.0;    // forward cost per context token
  double compute_capability = 0.0; // FLOPs/s
  double mem_access_size = 0.0;    // bytes touched per token
  double mem_bandwidth = 0.0;      // bytes/s
  double overhead_seconds = 0.0;   // fixed per-token overhead
  double data_rate = 0.0;          // link rate, bytes/s
  double energy_base = 0.0;        // joules per generated token
  double energy_per_context_token = 0.0;  // joules per context token

  void validate() const;
};

// One synthetic prompt. Tokens are dense ints in [0, vocab_size).
struct Prompt {
  int id = 0;
  std::vector<double> embedding;
  int app_class = 0;
  int cluster_label = 0;
  int prompt_length_tokens = 0;
  double data_size_bytes = 0.0;
  std::vector<int> answer;  // ground-truth tokens, answer.size() == T

  void validate(int vocab_size) const;
};

struct Workload {
  int vocab_size = 0;
  int embedding_dim = 0;
  int n_app_classes = 0;
  int n_clusters = 0;
  std::vector<Prompt> prompts;

  void validate() const;
};

struct Fleet {
  int n_clusters = 0;
  std::vector<ExpertProfile> experts;

  int size() const { return static_cast<int>(experts.size()); }
  // unique contiguous ids 0..N-1, consistent competence lengths
  void validate() const;
};

// Subset of the fleet as a bitmask; bit n is expert n. n_experts <= 30.
class SubsetMask {
 public:
  SubsetMask() = default;
  SubsetMask(int n_experts, std::uint32_t bits);

  static SubsetMask full(int n_experts);
  static SubsetMask single(int n_experts, int id);
  static SubsetMask from_members(int n_experts, const std::vector<int>& members);

  int n_experts() const { return n_; }
  std::uint32_t bits() const { return bits_; }
  bool contains(int id) const;
  bool empty() const { return bits_ == 0; }
  int popcount() const;
  bool is_subset_of(const SubsetMask& other) const;
  SubsetMask without(int id) const;
  SubsetMask with(int id) const;
  std::vector<int> members() const;
  std::string to_string() const;  // e.g. "{0,3,5}"

  friend bool operator==(const SubsetMask&, const SubsetMask&) = default;

 private:
  int n_ = 0;
  std::uint32_t bits_ = 0;
};

// Per-class delay deadlines (seconds) and one energy budget (joules).
struct ConstraintSet {
  std::vector<double> tau_max;
  double e_max = 0.0;

  int n_classes() const { return static_cast<int>(tau_max.size()); }
  void validate() const;
};

// Probability vector over the vocabulary.
struct VocabDistribution {
  std::vector<double> probs;

  void validate() const;  // nonnegative, sums to 1 within 1e-9
};

// Decode state: fixed prompt prefix plus tokens generated so far.
// context_length_tokens is derived, so it cannot drift out of sync.
struct History {
  int prompt_id = 0;
  int prompt_length_tokens = 0;
  std::vector<int> generated;

  int context_length_tokens() const {
    return prompt_length_tokens + static_cast<int>(generated.size());
  }
};

}  // namespace moe2
