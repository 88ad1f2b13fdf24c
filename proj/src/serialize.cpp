#include "moe2/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace moe2 {

namespace {

using nlohmann::json;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_keys(const json& j, std::initializer_list<const char*> keys, const std::string& ctx) {
  require(j.is_object(), ctx + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) {
        known = true;
        break;
      }
    require(known, "unknown key '" + it.key() + "' in " + ctx);
  }
}

const json& field(const json& j, const char* key, const std::string& ctx) {
  require(j.contains(key), ctx + " missing key '" + key + "'");
  return j.at(key);
}

double get_num(const json& j, const char* key, const std::string& ctx) {
  const json& v = field(j, key, ctx);
  require(v.is_number(), ctx + "." + key + " must be a number");
  return v.get<double>();
}

int get_int(const json& j, const char* key, const std::string& ctx) {
  const json& v = field(j, key, ctx);
  require(v.is_number_integer(), ctx + "." + key + " must be an integer");
  return v.get<int>();
}

long get_long(const json& j, const char* key, const std::string& ctx) {
  const json& v = field(j, key, ctx);
  require(v.is_number_integer(), ctx + "." + key + " must be an integer");
  return v.get<long>();
}

std::uint64_t get_u64(const json& j, const char* key, const std::string& ctx) {
  const json& v = field(j, key, ctx);
  require(v.is_number_integer() && v.get<double>() >= 0,
          ctx + "." + key + " must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

bool get_bool(const json& j, const char* key, const std::string& ctx) {
  const json& v = field(j, key, ctx);
  require(v.is_boolean(), ctx + "." + key + " must be a boolean");
  return v.get<bool>();
}

std::string get_str(const json& j, const char* key, const std::string& ctx) {
  const json& v = field(j, key, ctx);
  require(v.is_string(), ctx + "." + key + " must be a string");
  return v.get<std::string>();
}

std::vector<double> get_num_array(const json& v, const std::string& ctx) {
  require(v.is_array(), ctx + " must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& e : v) {
    require(e.is_number(), ctx + " entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> get_int_array(const json& v, const std::string& ctx) {
  require(v.is_array(), ctx + " must be an array");
  std::vector<int> out;
  out.reserve(v.size());
  for (const json& e : v) {
    require(e.is_number_integer(), ctx + " entries must be integers");
    out.push_back(e.get<int>());
  }
  return out;
}

json doc_header(const char* kind) {
  return json{{"schema_version", kSchemaVersion}, {"kind", kind}};
}

json parse_doc(const std::string& text, const char* kind) {
  json j = json::parse(text);
  require(j.is_object(), "document must be a JSON object");
  require(get_int(j, "schema_version", "document") == kSchemaVersion,
          "unsupported schema_version");
  const std::string k = get_str(j, "kind", "document");
  require(k == kind, "expected a '" + std::string(kind) + "' document, found '" + k + "'");
  return j;
}

json prompt_to(const Prompt& p) {
  return json{{"id", p.id},
              {"embedding", p.embedding},
              {"app_class", p.app_class},
              {"cluster_label", p.cluster_label},
              {"prompt_length_tokens", p.prompt_length_tokens},
              {"data_size_bytes", p.data_size_bytes},
              {"answer", p.answer}};
}

Prompt prompt_from(const json& j) {
  const std::string ctx = "prompt";
  check_keys(j,
             {"id", "embedding", "app_class", "cluster_label", "prompt_length_tokens",
              "data_size_bytes", "answer"},
             ctx);
  Prompt p;
  p.id = get_int(j, "id", ctx);
  p.embedding = get_num_array(field(j, "embedding", ctx), ctx + ".embedding");
  p.app_class = get_int(j, "app_class", ctx);
  p.cluster_label = get_int(j, "cluster_label", ctx);
  p.prompt_length_tokens = get_int(j, "prompt_length_tokens", ctx);
  p.data_size_bytes = get_num(j, "data_size_bytes", ctx);
  p.answer = get_int_array(field(j, "answer", ctx), ctx + ".answer");
  return p;
}

json expert_to(const ExpertProfile& e) {
  return json{{"id", e.id},
              {"competence", e.competence},
              {"sharpness", e.sharpness},
              {"flops_per_token", e.flops_per_token},
              {"compute_capability", e.compute_capability},
              {"mem_access_size", e.mem_access_size},
              {"mem_bandwidth", e.mem_bandwidth},
              {"overhead_seconds", e.overhead_seconds},
              {"data_rate", e.data_rate},
              {"energy_base", e.energy_base},
              {"energy_per_context_token", e.energy_per_context_token}};
}

ExpertProfile expert_from(const json& j) {
  const std::string ctx = "expert";
  check_keys(j,
             {"id", "competence", "sharpness", "flops_per_token", "compute_capability",
              "mem_access_size", "mem_bandwidth", "overhead_seconds", "data_rate", "energy_base",
              "energy_per_context_token"},
             ctx);
  ExpertProfile e;
  e.id = get_int(j, "id", ctx);
  e.competence = get_num_array(field(j, "competence", ctx), ctx + ".competence");
  e.sharpness = get_num(j, "sharpness", ctx);
  e.flops_per_token = get_num(j, "flops_per_token", ctx);
  e.compute_capability = get_num(j, "compute_capability", ctx);
  e.mem_access_size = get_num(j, "mem_access_size", ctx);
  e.mem_bandwidth = get_num(j, "mem_bandwidth", ctx);
  e.overhead_seconds = get_num(j, "overhead_seconds", ctx);
  e.data_rate = get_num(j, "data_rate", ctx);
  e.energy_base = get_num(j, "energy_base", ctx);
  e.energy_per_context_token = get_num(j, "energy_per_context_token", ctx);
  return e;
}

json layer_to(const DenseLayer& l) {
  return json{{"in", l.in}, {"out", l.out}, {"w", l.w}, {"b", l.b}};
}

DenseLayer layer_from(const json& j) {
  const std::string ctx = "layer";
  check_keys(j, {"in", "out", "w", "b"}, ctx);
  DenseLayer l;
  l.in = get_int(j, "in", ctx);
  l.out = get_int(j, "out", ctx);
  l.w = get_num_array(field(j, "w", ctx), ctx + ".w");
  l.b = get_num_array(field(j, "b", ctx), ctx + ".b");
  return l;
}

json row_to(const ResultRow& r) {
  return json{{"method", r.method},
              {"tau_max", r.tau_max},
              {"e_max", r.e_max},
              {"k", r.k},
              {"seed", r.seed},
              {"feasible", r.feasible},
              {"has_mask", r.has_mask},
              {"mask_bits", r.mask_bits},
              {"n_experts", r.n_experts},
              {"rand_draws", r.rand_draws},
              {"accuracy", r.accuracy},
              {"class_mean_delay", r.class_mean_delay},
              {"mean_energy", r.mean_energy}};
}

ResultRow row_from(const json& j) {
  const std::string ctx = "result row";
  check_keys(j,
             {"method", "tau_max", "e_max", "k", "seed", "feasible", "has_mask", "mask_bits",
              "n_experts", "rand_draws", "accuracy", "class_mean_delay", "mean_energy"},
             ctx);
  ResultRow r;
  r.method = get_str(j, "method", ctx);
  r.tau_max = get_num_array(field(j, "tau_max", ctx), ctx + ".tau_max");
  r.e_max = get_num(j, "e_max", ctx);
  r.k = get_int(j, "k", ctx);
  r.seed = get_u64(j, "seed", ctx);
  r.feasible = get_bool(j, "feasible", ctx);
  r.has_mask = get_bool(j, "has_mask", ctx);
  r.mask_bits = static_cast<std::uint32_t>(get_u64(j, "mask_bits", ctx));
  r.n_experts = get_int(j, "n_experts", ctx);
  r.rand_draws = get_long(j, "rand_draws", ctx);
  r.accuracy = get_num(j, "accuracy", ctx);
  r.class_mean_delay = get_num_array(field(j, "class_mean_delay", ctx), ctx + ".class_mean_delay");
  r.mean_energy = get_num(j, "mean_energy", ctx);
  return r;
}

json range_to(const ParamRange& r) { return json::array({r.first, r.second}); }

ParamRange range_from(const json& v, const std::string& ctx) {
  require(v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number(),
          ctx + " must be a [lo, hi] number pair");
  return {v[0].get<double>(), v[1].get<double>()};
}

json tier_to(const HardwareTier& t) {
  return json{{"count", t.count},
              {"flops_per_token", range_to(t.flops_per_token)},
              {"compute_capability", range_to(t.compute_capability)},
              {"mem_access_size", range_to(t.mem_access_size)},
              {"mem_bandwidth", range_to(t.mem_bandwidth)},
              {"overhead_seconds", range_to(t.overhead_seconds)},
              {"data_rate", range_to(t.data_rate)},
              {"energy_base", range_to(t.energy_base)},
              {"energy_per_context_token", range_to(t.energy_per_context_token)},
              {"sharpness", range_to(t.sharpness)}};
}

HardwareTier tier_from(const json& j) {
  const std::string ctx = "hardware tier";
  check_keys(j,
             {"count", "flops_per_token", "compute_capability", "mem_access_size",
              "mem_bandwidth", "overhead_seconds", "data_rate", "energy_base",
              "energy_per_context_token", "sharpness"},
             ctx);
  HardwareTier t;
  t.count = get_int(j, "count", ctx);
  t.flops_per_token = range_from(field(j, "flops_per_token", ctx), ctx + ".flops_per_token");
  t.compute_capability =
      range_from(field(j, "compute_capability", ctx), ctx + ".compute_capability");
  t.mem_access_size = range_from(field(j, "mem_access_size", ctx), ctx + ".mem_access_size");
  t.mem_bandwidth = range_from(field(j, "mem_bandwidth", ctx), ctx + ".mem_bandwidth");
  t.overhead_seconds = range_from(field(j, "overhead_seconds", ctx), ctx + ".overhead_seconds");
  t.data_rate = range_from(field(j, "data_rate", ctx), ctx + ".data_rate");
  t.energy_base = range_from(field(j, "energy_base", ctx), ctx + ".energy_base");
  t.energy_per_context_token =
      range_from(field(j, "energy_per_context_token", ctx), ctx + ".energy_per_context_token");
  t.sharpness = range_from(field(j, "sharpness", ctx), ctx + ".sharpness");
  return t;
}

json workload_spec_to(const WorkloadSpec& s) {
  return json{{"n_prompts", s.n_prompts},
              {"embedding_dim", s.embedding_dim},
              {"k_clusters", s.k_clusters},
              {"vocab_size", s.vocab_size},
              {"n_app_classes", s.n_app_classes},
              {"cluster_center_scale", s.cluster_center_scale},
              {"cluster_spread", s.cluster_spread},
              {"answer_len_min", s.answer_len_min},
              {"answer_len_max", s.answer_len_max},
              {"prompt_len_min", s.prompt_len_min},
              {"prompt_len_max", s.prompt_len_max},
              {"data_bytes_per_token", s.data_bytes_per_token},
              {"cluster_centers", s.cluster_centers},
              {"app_class_map", s.app_class_map}};
}

WorkloadSpec workload_spec_from(const json& j) {
  const std::string ctx = "workload spec";
  check_keys(j,
             {"n_prompts", "embedding_dim", "k_clusters", "vocab_size", "n_app_classes",
              "cluster_center_scale", "cluster_spread", "answer_len_min", "answer_len_max",
              "prompt_len_min", "prompt_len_max", "data_bytes_per_token", "cluster_centers",
              "app_class_map"},
             ctx);
  WorkloadSpec s;
  s.n_prompts = get_int(j, "n_prompts", ctx);
  s.embedding_dim = get_int(j, "embedding_dim", ctx);
  s.k_clusters = get_int(j, "k_clusters", ctx);
  s.vocab_size = get_int(j, "vocab_size", ctx);
  s.n_app_classes = get_int(j, "n_app_classes", ctx);
  s.cluster_center_scale = get_num(j, "cluster_center_scale", ctx);
  s.cluster_spread = get_num(j, "cluster_spread", ctx);
  s.answer_len_min = get_int(j, "answer_len_min", ctx);
  s.answer_len_max = get_int(j, "answer_len_max", ctx);
  s.prompt_len_min = get_int(j, "prompt_len_min", ctx);
  s.prompt_len_max = get_int(j, "prompt_len_max", ctx);
  s.data_bytes_per_token = get_num(j, "data_bytes_per_token", ctx);
  const json& centers = field(j, "cluster_centers", ctx);
  require(centers.is_array(), ctx + ".cluster_centers must be an array");
  for (const json& row : centers)
    s.cluster_centers.push_back(get_num_array(row, ctx + ".cluster_centers row"));
  s.app_class_map = get_int_array(field(j, "app_class_map", ctx), ctx + ".app_class_map");
  return s;
}

json fleet_spec_to(const FleetSpec& s) {
  json tiers = json::array();
  for (const HardwareTier& t : s.hardware_tiers) tiers.push_back(tier_to(t));
  return json{{"n_experts", s.n_experts},
              {"k_clusters", s.k_clusters},
              {"competence",
               json{{"home", s.competence.home},
                    {"off_base", s.competence.off_base},
                    {"off_jitter", s.competence.off_jitter}}},
              {"hardware_tiers", tiers}};
}

FleetSpec fleet_spec_from(const json& j) {
  const std::string ctx = "fleet spec";
  check_keys(j, {"n_experts", "k_clusters", "competence", "hardware_tiers"}, ctx);
  FleetSpec s;
  s.n_experts = get_int(j, "n_experts", ctx);
  s.k_clusters = get_int(j, "k_clusters", ctx);
  const json& c = field(j, "competence", ctx);
  check_keys(c, {"home", "off_base", "off_jitter"}, ctx + ".competence");
  s.competence.home = get_num(c, "home", ctx + ".competence");
  s.competence.off_base = get_num(c, "off_base", ctx + ".competence");
  s.competence.off_jitter = get_num(c, "off_jitter", ctx + ".competence");
  const json& tiers = field(j, "hardware_tiers", ctx);
  require(tiers.is_array(), ctx + ".hardware_tiers must be an array");
  s.hardware_tiers.clear();
  for (const json& t : tiers) s.hardware_tiers.push_back(tier_from(t));
  return s;
}

json train_to(const TrainConfig& t) {
  return json{{"hidden_dims", t.hidden_dims},
              {"negative_slope", t.negative_slope},
              {"residual", t.residual},
              {"learning_rate", t.learning_rate},
              {"batch_size", t.batch_size},
              {"epochs", t.epochs},
              {"clip_norm", t.clip_norm},
              {"plateau_factor", t.plateau_factor},
              {"plateau_patience", t.plateau_patience},
              {"dropout", t.dropout},
              {"seed", t.seed}};
}

TrainConfig train_from(const json& j) {
  const std::string ctx = "train config";
  check_keys(j,
             {"hidden_dims", "negative_slope", "residual", "learning_rate", "batch_size",
              "epochs", "clip_norm", "plateau_factor", "plateau_patience", "dropout", "seed"},
             ctx);
  TrainConfig t;
  t.hidden_dims = get_int_array(field(j, "hidden_dims", ctx), ctx + ".hidden_dims");
  t.negative_slope = get_num(j, "negative_slope", ctx);
  t.residual = get_bool(j, "residual", ctx);
  t.learning_rate = get_num(j, "learning_rate", ctx);
  t.batch_size = get_int(j, "batch_size", ctx);
  t.epochs = get_int(j, "epochs", ctx);
  t.clip_norm = get_num(j, "clip_norm", ctx);
  t.plateau_factor = get_num(j, "plateau_factor", ctx);
  t.plateau_patience = get_int(j, "plateau_patience", ctx);
  t.dropout = get_num(j, "dropout", ctx);
  t.seed = get_u64(j, "seed", ctx);
  return t;
}

json cost_model_to(const CostModelParams& c) {
  return json{{"token_uplink_bytes", c.token_uplink_bytes},
              {"token_downlink_bytes", c.token_downlink_bytes},
              {"gate_delay_seconds", c.gate_delay_seconds}};
}

CostModelParams cost_model_from(const json& j) {
  const std::string ctx = "cost model";
  check_keys(j, {"token_uplink_bytes", "token_downlink_bytes", "gate_delay_seconds"}, ctx);
  CostModelParams c;
  c.token_uplink_bytes = get_num(j, "token_uplink_bytes", ctx);
  c.token_downlink_bytes = get_num(j, "token_downlink_bytes", ctx);
  c.gate_delay_seconds = get_num(j, "gate_delay_seconds", ctx);
  return c;
}

std::string expansion_name(SmoExpansion e) {
  return e == SmoExpansion::kAllMembers ? "all_members" : "changed_only";
}

SmoExpansion expansion_from_name(const std::string& s) {
  if (s == "all_members") return SmoExpansion::kAllMembers;
  if (s == "changed_only") return SmoExpansion::kChangedOnly;
  throw std::invalid_argument("unknown expansion rule: " + s);
}

std::string objective_mode_name(SmoObjectiveMode m) {
  return m == SmoObjectiveMode::kRestrictedGate ? "restricted_gate" : "tabular";
}

SmoObjectiveMode objective_mode_from_name(const std::string& s) {
  if (s == "restricted_gate") return SmoObjectiveMode::kRestrictedGate;
  if (s == "tabular") return SmoObjectiveMode::kTabular;
  throw std::invalid_argument("unknown objective mode: " + s);
}

json smo_to(const SmoConfig& s, SmoObjectiveMode mode) {
  return json{{"epsilon", s.epsilon},
              {"max_iterations", s.max_iterations},
              {"expansion", expansion_name(s.expansion)},
              {"objective", objective_mode_name(mode)}};
}

std::pair<SmoConfig, SmoObjectiveMode> smo_from(const json& j) {
  const std::string ctx = "smo config";
  check_keys(j, {"epsilon", "max_iterations", "expansion", "objective"}, ctx);
  SmoConfig s;
  s.epsilon = get_num(j, "epsilon", ctx);
  s.max_iterations = get_long(j, "max_iterations", ctx);
  s.expansion = expansion_from_name(get_str(j, "expansion", ctx));
  return {s, objective_mode_from_name(get_str(j, "objective", ctx))};
}

json inference_to(const InferenceConfig& c) {
  json j{{"k", c.k},
         {"mode", c.mode == DecodeMode::kGreedy ? "greedy" : "sampled"},
         {"sample_seed", c.sample_seed},
         {"max_tokens", c.max_tokens},
         {"stop_token", nullptr}};
  if (c.stop_token) j["stop_token"] = *c.stop_token;
  return j;
}

InferenceConfig inference_from(const json& j) {
  const std::string ctx = "inference config";
  check_keys(j, {"k", "mode", "sample_seed", "max_tokens", "stop_token"}, ctx);
  InferenceConfig c;
  c.k = get_int(j, "k", ctx);
  const std::string mode = get_str(j, "mode", ctx);
  if (mode == "greedy")
    c.mode = DecodeMode::kGreedy;
  else if (mode == "sampled")
    c.mode = DecodeMode::kSampled;
  else
    throw std::invalid_argument("unknown decode mode: " + mode);
  c.sample_seed = get_u64(j, "sample_seed", ctx);
  c.max_tokens = get_int(j, "max_tokens", ctx);
  const json& stop = field(j, "stop_token", ctx);
  if (!stop.is_null()) {
    require(stop.is_number_integer(), ctx + ".stop_token must be an integer or null");
    c.stop_token = stop.get<int>();
  }
  return c;
}

json sweep_to(const SweepConfig& s) {
  json methods = json::array();
  for (Method m : s.methods) methods.push_back(method_name(m));
  return json{{"tau_rows", s.tau_rows},
              {"e_cols", s.e_cols},
              {"methods", methods},
              {"replicates", s.replicates},
              {"base_seed", s.base_seed},
              {"train_fraction", s.train_fraction}};
}

SweepConfig sweep_from(const json& j) {
  const std::string ctx = "sweep config";
  check_keys(j, {"tau_rows", "e_cols", "methods", "replicates", "base_seed", "train_fraction"},
             ctx);
  SweepConfig s;
  const json& rows = field(j, "tau_rows", ctx);
  require(rows.is_array(), ctx + ".tau_rows must be an array");
  for (const json& row : rows) s.tau_rows.push_back(get_num_array(row, ctx + ".tau_rows row"));
  s.e_cols = get_num_array(field(j, "e_cols", ctx), ctx + ".e_cols");
  const json& methods = field(j, "methods", ctx);
  require(methods.is_array(), ctx + ".methods must be an array");
  s.methods.clear();
  for (const json& m : methods) {
    require(m.is_string(), ctx + ".methods entries must be strings");
    s.methods.push_back(method_from_name(m.get<std::string>()));
  }
  s.replicates = get_int(j, "replicates", ctx);
  s.base_seed = get_u64(j, "base_seed", ctx);
  s.train_fraction = get_num(j, "train_fraction", ctx);
  return s;
}

std::string format_num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

std::string workload_to_json(const Workload& w) {
  w.validate();
  json j = doc_header("workload");
  j["vocab_size"] = w.vocab_size;
  j["embedding_dim"] = w.embedding_dim;
  j["n_app_classes"] = w.n_app_classes;
  j["n_clusters"] = w.n_clusters;
  json prompts = json::array();
  for (const Prompt& p : w.prompts) prompts.push_back(prompt_to(p));
  j["prompts"] = std::move(prompts);
  return j.dump(2) + "\n";
}

Workload workload_from_json(const std::string& text) {
  const json j = parse_doc(text, "workload");
  check_keys(j,
             {"schema_version", "kind", "vocab_size", "embedding_dim", "n_app_classes",
              "n_clusters", "prompts"},
             "workload");
  Workload w;
  w.vocab_size = get_int(j, "vocab_size", "workload");
  w.embedding_dim = get_int(j, "embedding_dim", "workload");
  w.n_app_classes = get_int(j, "n_app_classes", "workload");
  w.n_clusters = get_int(j, "n_clusters", "workload");
  const json& prompts = field(j, "prompts", "workload");
  require(prompts.is_array(), "workload.prompts must be an array");
  for (const json& p : prompts) w.prompts.push_back(prompt_from(p));
  w.validate();
  return w;
}

std::string fleet_to_json(const Fleet& f) {
  f.validate();
  json j = doc_header("fleet");
  j["n_clusters"] = f.n_clusters;
  json experts = json::array();
  for (const ExpertProfile& e : f.experts) experts.push_back(expert_to(e));
  j["experts"] = std::move(experts);
  return j.dump(2) + "\n";
}

Fleet fleet_from_json(const std::string& text) {
  const json j = parse_doc(text, "fleet");
  check_keys(j, {"schema_version", "kind", "n_clusters", "experts"}, "fleet");
  Fleet f;
  f.n_clusters = get_int(j, "n_clusters", "fleet");
  const json& experts = field(j, "experts", "fleet");
  require(experts.is_array(), "fleet.experts must be an array");
  for (const json& e : experts) f.experts.push_back(expert_from(e));
  f.validate();
  return f;
}

std::string gating_to_json(const GatingParams& p) {
  p.validate();
  json j = doc_header("gating");
  j["input_dim"] = p.input_dim;
  j["hidden_dims"] = p.hidden_dims;
  j["output_dim"] = p.output_dim;
  j["negative_slope"] = p.negative_slope;
  j["residual"] = p.residual;
  json hidden = json::array();
  for (const DenseLayer& l : p.hidden) hidden.push_back(layer_to(l));
  j["hidden"] = std::move(hidden);
  j["output"] = layer_to(p.output);
  return j.dump(2) + "\n";
}

GatingParams gating_from_json(const std::string& text) {
  const json j = parse_doc(text, "gating");
  check_keys(j,
             {"schema_version", "kind", "input_dim", "hidden_dims", "output_dim",
              "negative_slope", "residual", "hidden", "output"},
             "gating");
  GatingParams p;
  p.input_dim = get_int(j, "input_dim", "gating");
  p.hidden_dims = get_int_array(field(j, "hidden_dims", "gating"), "gating.hidden_dims");
  p.output_dim = get_int(j, "output_dim", "gating");
  p.negative_slope = get_num(j, "negative_slope", "gating");
  p.residual = get_bool(j, "residual", "gating");
  const json& hidden = field(j, "hidden", "gating");
  require(hidden.is_array(), "gating.hidden must be an array");
  for (const json& l : hidden) p.hidden.push_back(layer_from(l));
  p.output = layer_from(field(j, "output", "gating"));
  p.validate();
  return p;
}

std::string result_table_to_json(const ResultTable& t) {
  json j = doc_header("results");
  json rows = json::array();
  for (const ResultRow& r : t.rows) rows.push_back(row_to(r));
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

ResultTable result_table_from_json(const std::string& text) {
  const json j = parse_doc(text, "results");
  check_keys(j, {"schema_version", "kind", "rows"}, "results");
  ResultTable t;
  const json& rows = field(j, "rows", "results");
  require(rows.is_array(), "results.rows must be an array");
  for (const json& r : rows) t.rows.push_back(row_from(r));
  return t;
}

std::string result_table_to_csv(const ResultTable& t) {
  std::ostringstream os;
  os << "method,tau_max,e_max,k,seed,feasible,mask,n_experts,rand_draws,accuracy,"
        "class_mean_delay,mean_energy\n";
  for (const ResultRow& r : t.rows) {
    os << r.method << ",";
    for (std::size_t i = 0; i < r.tau_max.size(); ++i)
      os << (i ? ";" : "") << format_num(r.tau_max[i]);
    os << "," << format_num(r.e_max) << "," << r.k << "," << r.seed << ","
       << (r.feasible ? 1 : 0) << ","
       << (r.has_mask ? SubsetMask(r.n_experts, r.mask_bits).to_string() : "-") << ","
       << r.n_experts << "," << r.rand_draws << "," << format_num(r.accuracy) << ",";
    for (std::size_t i = 0; i < r.class_mean_delay.size(); ++i)
      os << (i ? ";" : "") << format_num(r.class_mean_delay[i]);
    os << "," << format_num(r.mean_energy) << "\n";
  }
  return os.str();
}

std::string sweep_table_csv(const ResultTable& t, const std::vector<double>& tau_row) {
  std::vector<std::string> methods;
  std::vector<double> e_cols;
  for (const ResultRow& r : t.rows) {
    if (r.tau_max != tau_row) continue;
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
    if (std::find(e_cols.begin(), e_cols.end(), r.e_max) == e_cols.end())
      e_cols.push_back(r.e_max);
  }

  std::ostringstream os;
  os << "method";
  for (double e : e_cols) os << ",E=" << format_num(e);
  os << "\n";
  for (const std::string& m : methods) {
    os << m;
    for (double e : e_cols) {
      double sum = 0.0;
      int n = 0;
      for (const ResultRow& r : t.rows) {
        if (r.method != m || r.tau_max != tau_row || r.e_max != e || !r.feasible) continue;
        sum += r.accuracy;
        ++n;
      }
      if (n == 0)
        os << ",-";
      else
        os << "," << format_num(sum / n);
    }
    os << "\n";
  }
  return os.str();
}

std::string smo_result_to_json(const SmoResult& r) {
  json j = doc_header("smo_result");
  j["best_mask_bits"] = r.best.bits();
  j["best_members"] = r.best.members();
  j["n_experts"] = r.best.n_experts();
  j["objective"] = r.objective;
  j["status"] =
      r.status == SmoStatus::kFixedPointOptimal ? "fixed_point_optimal" : "vertex_set_exhausted";
  json iters = json::array();
  for (const SmoIteration& it : r.trace.iterations) {
    json rec{{"vertex_count", it.vertex_count},
             {"chosen_bits", it.chosen.bits()},
             {"projected_bits", nullptr},
             {"cbv", it.cbv}};
    if (it.projected) rec["projected_bits"] = it.projected->bits();
    iters.push_back(std::move(rec));
  }
  j["iterations"] = std::move(iters);
  return j.dump(2) + "\n";
}

RunConfig default_run_config() {
  RunConfig c;

  HardwareTier fast;
  fast.count = 3;
  fast.flops_per_token = {1.6e9, 2.4e9};
  fast.compute_capability = {0.9e12, 1.1e12};
  fast.mem_access_size = {6.4e9, 9.6e9};
  fast.mem_bandwidth = {0.9e11, 1.1e11};
  fast.overhead_seconds = {0.008, 0.012};
  fast.data_rate = {0.9e5, 1.1e5};
  fast.energy_base = {1.7, 2.1};
  fast.energy_per_context_token = {6e-4, 1.2e-3};

  HardwareTier slow;
  slow.count = 5;
  slow.flops_per_token = {1.2e9, 1.8e9};
  slow.compute_capability = {1.1e11, 1.8e11};
  slow.mem_access_size = {3.2e9, 4.8e9};
  slow.mem_bandwidth = {3.6e10, 4.4e10};
  slow.overhead_seconds = {0.016, 0.024};
  slow.data_rate = {4.5e4, 5.5e4};
  slow.energy_base = {0.5, 0.6};
  slow.energy_per_context_token = {2e-4, 4e-4};

  c.experiment.fleet.hardware_tiers = {fast, slow};

  c.experiment.sweep.tau_rows = {{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}};
  c.experiment.sweep.e_cols = {5, 10, 15, 20, 25, 35, 50};
  c.experiment.sweep.methods = {Method::kMoe2,        Method::kSmoMv,
                                Method::kRandMv,      Method::kSingleAgent,
                                Method::kMajorityVoteFull, Method::kAverageExpertAccuracy};
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json j = doc_header("config");
  j["seed"] = c.seed;
  j["workload"] = workload_spec_to(c.experiment.workload);
  j["fleet"] = fleet_spec_to(c.experiment.fleet);
  j["train"] = train_to(c.experiment.train);
  j["cost_model"] = cost_model_to(c.experiment.cost_model);
  j["smo"] = smo_to(c.experiment.smo, c.experiment.smo_objective);
  j["inference"] = inference_to(c.experiment.inference);
  j["sweep"] = sweep_to(c.experiment.sweep);
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  json j = json::parse(text);
  require(j.is_object(), "config must be a JSON object");
  // a manifest may stand in for the config it embeds
  if (j.contains("kind") && j.at("kind").is_string() &&
      j.at("kind").get<std::string>() == "manifest")
    j = field(j, "config", "manifest");
  require(get_int(j, "schema_version", "config") == kSchemaVersion, "unsupported schema_version");
  require(get_str(j, "kind", "config") == "config", "expected a 'config' document");
  check_keys(j,
             {"schema_version", "kind", "seed", "workload", "fleet", "train", "cost_model", "smo",
              "inference", "sweep"},
             "config");
  RunConfig c;
  c.seed = get_u64(j, "seed", "config");
  c.experiment.workload = workload_spec_from(field(j, "workload", "config"));
  c.experiment.fleet = fleet_spec_from(field(j, "fleet", "config"));
  c.experiment.train = train_from(field(j, "train", "config"));
  c.experiment.cost_model = cost_model_from(field(j, "cost_model", "config"));
  auto [smo, mode] = smo_from(field(j, "smo", "config"));
  c.experiment.smo = smo;
  c.experiment.smo_objective = mode;
  c.experiment.inference = inference_from(field(j, "inference", "config"));
  c.experiment.sweep = sweep_from(field(j, "sweep", "config"));
  return c;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace moe2
