#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "moe2/harness.hpp"
#include "moe2/inference.hpp"
#include "moe2/log.hpp"
#include "moe2/manifest.hpp"
#include "moe2/serialize.hpp"
#include "moe2/smo.hpp"

namespace {

using namespace moe2;
namespace fs = std::filesystem;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string log_level_name = "info";
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path,
                  "config JSON (a manifest file also works); defaults apply when omitted");
  sub->add_option("--out-dir", args.out_dir, "directory for outputs")->capture_default_str();
  auto* seed = sub->add_option("--seed", args.seed, "master seed override");
  sub->add_option("--log-level", args.log_level_name, "debug|info|warn|error|off")
      ->capture_default_str();
  sub->parse_complete_callback([&args, seed, sub]() {
    args.seed_given = seed->count() > 0;
    log_level() = log_level_from_name(args.log_level_name);
    log_line(LogLevel::kDebug, "parsed", {{"command", sub->get_name()}});
  });
}

void apply_seed(RunConfig& cfg, std::uint64_t s) {
  cfg.seed = s;
  cfg.experiment.train.seed = s;
  cfg.experiment.sweep.base_seed = s;
  cfg.experiment.inference.sample_seed = s;
}

struct LoadedConfig {
  RunConfig cfg;
  std::vector<FileDigest> inputs;  // config file digest when one was read
};

LoadedConfig load_config(const CommonArgs& args) {
  LoadedConfig out;
  if (args.config_path.empty()) {
    out.cfg = default_run_config();
  } else {
    const std::string text = read_text_file(args.config_path);
    out.cfg = run_config_from_json(text);
    out.inputs.push_back(FileDigest{args.config_path, digest_hex(text)});
  }
  if (args.seed_given) apply_seed(out.cfg, args.seed);
  if (const char* env = std::getenv("MOE2_SEED")) {
    std::size_t used = 0;
    const std::uint64_t s = std::stoull(env, &used);
    if (used != std::string(env).size())
      throw std::invalid_argument("MOE2_SEED must be an unsigned integer");
    apply_seed(out.cfg, s);
  }
  return out;
}

FileDigest input_digest(const std::string& path, const std::string& text) {
  return FileDigest{path, digest_hex(text)};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> parse_tau(const std::vector<std::string>& specs, int n_classes) {
  if (specs.empty()) throw std::invalid_argument("at least one --tau-max m=seconds is required");
  std::vector<double> tau(n_classes, -1.0);
  for (const std::string& s : specs) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--tau-max expects m=seconds, got '" + s + "'");
    const int m = std::stoi(s.substr(0, eq));
    const double v = std::stod(s.substr(eq + 1));
    if (m < 0 || m >= n_classes)
      throw std::invalid_argument("--tau-max class " + std::to_string(m) +
                                  " outside [0, " + std::to_string(n_classes) + ")");
    if (tau[m] >= 0.0)
      throw std::invalid_argument("--tau-max class " + std::to_string(m) + " given twice");
    if (!(v > 0.0))
      throw std::invalid_argument("--tau-max seconds must be positive");
    tau[m] = v;
  }
  for (int m = 0; m < n_classes; ++m)
    if (tau[m] < 0.0)
      throw std::invalid_argument("--tau-max missing app class " + std::to_string(m));
  return tau;
}

std::vector<int> parse_members(const std::string& csv) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    out.push_back(std::stoi(csv.substr(pos, next - pos)));
    pos = next + 1;
  }
  if (out.empty()) throw std::invalid_argument("--mask expects a comma-separated id list");
  return out;
}

int cmd_gen_workload(const CommonArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  LoadedConfig loaded = load_config(args);
  const RunConfig& cfg = loaded.cfg;

  const Workload workload = generate_workload(cfg.experiment.workload, Rng(cfg.seed).substream(1));
  const Fleet fleet = generate_fleet(cfg.experiment.fleet, Rng(cfg.seed).substream(2));

  fs::create_directories(args.out_dir);
  const std::string wpath = (fs::path(args.out_dir) / "workload.json").string();
  const std::string fpath = (fs::path(args.out_dir) / "fleet.json").string();
  write_text_file(wpath, workload_to_json(workload));
  write_text_file(fpath, fleet_to_json(fleet));

  RunManifest m;
  m.command = "gen-workload";
  m.seed = cfg.seed;
  m.config_json = run_config_to_json(cfg);
  m.inputs = loaded.inputs;
  m.outputs = {wpath, fpath};
  m.wall_seconds = seconds_since(t0);
  write_manifest(m, (fs::path(args.out_dir) / "gen-workload.manifest.json").string());

  log_line(LogLevel::kInfo, "gen-workload done",
           {{"prompts", std::to_string(workload.prompts.size())},
            {"experts", std::to_string(fleet.size())},
            {"workload", wpath},
            {"fleet", fpath}});
  return 0;
}

int cmd_train_gate(const CommonArgs& args, const std::string& workload_path,
                   const std::string& fleet_path, std::string out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  LoadedConfig loaded = load_config(args);
  const RunConfig& cfg = loaded.cfg;

  const std::string wtext = read_text_file(workload_path);
  const std::string ftext = read_text_file(fleet_path);
  const Workload workload = workload_from_json(wtext);
  const Fleet fleet = fleet_from_json(ftext);

  const LossDataset data = build_loss_dataset(workload, fleet);
  const TrainResult result = train_gating(data, fleet.size(), cfg.experiment.train);

  if (out_path.empty()) out_path = (fs::path(args.out_dir) / "gating.json").string();
  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? "."
                             : fs::path(out_path).parent_path().string());
  write_text_file(out_path, gating_to_json(result.params));

  RunManifest m;
  m.command = "train-gate";
  m.seed = cfg.experiment.train.seed;
  m.config_json = run_config_to_json(cfg);
  m.inputs = loaded.inputs;
  m.inputs.push_back(input_digest(workload_path, wtext));
  m.inputs.push_back(input_digest(fleet_path, ftext));
  m.outputs = {out_path};
  m.wall_seconds = seconds_since(t0);
  write_manifest(m, out_path + ".manifest.json");

  log_line(LogLevel::kInfo, "train-gate done",
           {{"initial_loss", std::to_string(result.initial_loss)},
            {"final_loss", std::to_string(result.final_loss)},
            {"steps", std::to_string(result.loss_steps.size())},
            {"out", out_path}});
  return 0;
}

int cmd_cost_report(const CommonArgs& args, const std::string& workload_path,
                    const std::string& fleet_path, const std::vector<std::string>& tau_specs,
                    double e_max, std::string out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  LoadedConfig loaded = load_config(args);
  const RunConfig& cfg = loaded.cfg;

  const std::string wtext = read_text_file(workload_path);
  const std::string ftext = read_text_file(fleet_path);
  const Workload workload = workload_from_json(wtext);
  const Fleet fleet = fleet_from_json(ftext);
  if (fleet.size() > 16)
    throw std::invalid_argument("cost-report enumerates every subset; fleet too large (> 16)");
  const ConstraintSet constraints{parse_tau(tau_specs, workload.n_app_classes), e_max};
  constraints.validate();

  std::string csv = "mask,bits,class_mean_delay,mean_energy,feasible,delay_slack,energy_slack\n";
  for (std::uint32_t bits = 1; bits < (1u << fleet.size()); ++bits) {
    const SubsetMask mask(fleet.size(), bits);
    const FeasibilityReport rep =
        check_feasibility(workload, fleet, mask, constraints, cfg.experiment.cost_model);
    csv += "\"" + mask.to_string() + "\"," + std::to_string(bits) + ",";
    for (std::size_t i = 0; i < rep.costs.class_mean_delay.size(); ++i)
      csv += (i ? ";" : "") + std::to_string(rep.costs.class_mean_delay[i]);
    csv += "," + std::to_string(rep.costs.mean_energy) + "," + (rep.feasible ? "1" : "0") + ",";
    for (std::size_t i = 0; i < rep.delay_slack.size(); ++i)
      csv += (i ? ";" : "") + std::to_string(rep.delay_slack[i]);
    csv += "," + std::to_string(rep.energy_slack) + "\n";
  }

  if (out_path.empty()) out_path = (fs::path(args.out_dir) / "cost_report.csv").string();
  write_text_file(out_path, csv);

  RunManifest m;
  m.command = "cost-report";
  m.seed = cfg.seed;
  m.config_json = run_config_to_json(cfg);
  m.inputs = loaded.inputs;
  m.inputs.push_back(input_digest(workload_path, wtext));
  m.inputs.push_back(input_digest(fleet_path, ftext));
  m.outputs = {out_path};
  m.wall_seconds = seconds_since(t0);
  write_manifest(m, out_path + ".manifest.json");

  log_line(LogLevel::kInfo, "cost-report done", {{"out", out_path}});
  return 0;
}

// names the budget that no singleton can meet, for the exit-3 diagnostic
std::string binding_constraint_note(const Workload& workload, const Fleet& fleet,
                                    const ConstraintSet& constraints,
                                    const CostModelParams& model) {
  std::vector<double> min_delay(workload.n_app_classes,
                                std::numeric_limits<double>::infinity());
  double min_energy = std::numeric_limits<double>::infinity();
  for (int id = 0; id < fleet.size(); ++id) {
    const ExpectedCosts c =
        expected_costs(workload, fleet, SubsetMask::single(fleet.size(), id), model);
    for (int m = 0; m < workload.n_app_classes; ++m)
      min_delay[m] = std::min(min_delay[m], c.class_mean_delay[m]);
    min_energy = std::min(min_energy, c.mean_energy);
  }
  std::string note;
  for (int m = 0; m < workload.n_app_classes; ++m)
    if (min_delay[m] > constraints.tau_max[m])
      note += " delay budget tau_max[" + std::to_string(m) + "]=" +
              std::to_string(constraints.tau_max[m]) + "s is below every singleton (min " +
              std::to_string(min_delay[m]) + "s);";
  if (min_energy > constraints.e_max)
    note += " energy budget e_max=" + std::to_string(constraints.e_max) +
            "J is below every singleton (min " + std::to_string(min_energy) + "J);";
  if (note.empty())
    note = " no single binding budget: only joint combinations fail;";
  return "binding constraint:" + note;
}

int cmd_select_subset(const CommonArgs& args, const std::string& workload_path,
                      const std::string& fleet_path, const std::string& gate_path,
                      const std::vector<std::string>& tau_specs, double e_max,
                      std::optional<double> epsilon, std::string out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  LoadedConfig loaded = load_config(args);
  const RunConfig& cfg = loaded.cfg;

  const std::string wtext = read_text_file(workload_path);
  const std::string ftext = read_text_file(fleet_path);
  const std::string gtext = read_text_file(gate_path);
  const Workload workload = workload_from_json(wtext);
  const Fleet fleet = fleet_from_json(ftext);
  const GatingParams gate = gating_from_json(gtext);
  const ConstraintSet constraints{parse_tau(tau_specs, workload.n_app_classes), e_max};
  constraints.validate();

  SmoConfig smo = cfg.experiment.smo;
  if (epsilon) smo.epsilon = *epsilon;

  SmoResult result;
  try {
    result = smo_select(workload, fleet, gate, constraints, smo, cfg.experiment.cost_model,
                        cfg.experiment.smo_objective);
  } catch (const infeasible_error& e) {
    const std::string note =
        binding_constraint_note(workload, fleet, constraints, cfg.experiment.cost_model);
    log_line(LogLevel::kError, "select-subset infeasible", {{"what", e.what()}, {"note", note}});
    std::cerr << "infeasible: " << e.what() << "; " << note << "\n";
    return 3;
  }

  const FeasibilityReport rep =
      check_feasibility(workload, fleet, result.best, constraints, cfg.experiment.cost_model);

  nlohmann::json j = nlohmann::json::parse(smo_result_to_json(result));
  j["kind"] = "subset_selection";
  j["constraints"] = {{"tau_max", constraints.tau_max}, {"e_max", constraints.e_max}};
  j["report"] = {{"feasible", rep.feasible},
                 {"class_mean_delay", rep.costs.class_mean_delay},
                 {"mean_energy", rep.costs.mean_energy},
                 {"delay_slack", rep.delay_slack},
                 {"energy_slack", rep.energy_slack}};
  if (out_path.empty()) out_path = (fs::path(args.out_dir) / "selection.json").string();
  write_text_file(out_path, j.dump(2) + "\n");

  RunManifest m;
  m.command = "select-subset";
  m.seed = cfg.seed;
  m.config_json = run_config_to_json(cfg);
  m.inputs = loaded.inputs;
  m.inputs.push_back(input_digest(workload_path, wtext));
  m.inputs.push_back(input_digest(fleet_path, ftext));
  m.inputs.push_back(input_digest(gate_path, gtext));
  m.outputs = {out_path};
  m.wall_seconds = seconds_since(t0);
  write_manifest(m, out_path + ".manifest.json");

  log_line(LogLevel::kInfo, "select-subset done",
           {{"mask", result.best.to_string()},
            {"objective", std::to_string(result.objective)},
            {"out", out_path}});
  std::cout << result.best.to_string() << "\n";
  return 0;
}

int cmd_infer(const CommonArgs& args, const std::string& workload_path,
              const std::string& fleet_path, const std::string& gate_path,
              const std::string& mask_csv, std::optional<int> k_flag,
              const std::string& mode_flag, std::string out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  LoadedConfig loaded = load_config(args);
  const RunConfig& cfg = loaded.cfg;

  const std::string wtext = read_text_file(workload_path);
  const std::string ftext = read_text_file(fleet_path);
  const std::string gtext = read_text_file(gate_path);
  const Workload workload = workload_from_json(wtext);
  const Fleet fleet = fleet_from_json(ftext);
  const GatingParams gate = gating_from_json(gtext);
  const SubsetMask mask = SubsetMask::from_members(fleet.size(), parse_members(mask_csv));

  InferenceConfig ic = cfg.experiment.inference;
  if (k_flag) ic.k = *k_flag;
  if (!mode_flag.empty()) {
    if (mode_flag == "greedy")
      ic.mode = DecodeMode::kGreedy;
    else if (mode_flag == "sample" || mode_flag == "sampled")
      ic.mode = DecodeMode::kSampled;
    else
      throw std::invalid_argument("--mode must be greedy or sample");
  }
  if (ic.k > mask.popcount())
    throw std::invalid_argument("k=" + std::to_string(ic.k) + " exceeds the subset size " +
                                std::to_string(mask.popcount()));

  std::string lines;
  int correct = 0;
  for (const Prompt& p : workload.prompts) {
    const GenerationResult r =
        generate_answer(gate, mask, p, fleet, workload.vocab_size, ic, cfg.experiment.cost_model);
    const bool hit = r.tokens == p.answer;
    correct += hit ? 1 : 0;
    nlohmann::json line{{"prompt_id", p.id},
                        {"tokens", r.tokens},
                        {"selected", r.selected},
                        {"mean_prompt_delay", r.costs.mean_prompt_delay},
                        {"mean_token_energy", r.costs.mean_token_energy},
                        {"correct", hit}};
    lines += line.dump() + "\n";
  }

  if (out_path.empty()) out_path = (fs::path(args.out_dir) / "infer.jsonl").string();
  write_text_file(out_path, lines);

  RunManifest m;
  m.command = "infer";
  m.seed = ic.sample_seed;
  m.config_json = run_config_to_json(cfg);
  m.inputs = loaded.inputs;
  m.inputs.push_back(input_digest(workload_path, wtext));
  m.inputs.push_back(input_digest(fleet_path, ftext));
  m.inputs.push_back(input_digest(gate_path, gtext));
  m.outputs = {out_path};
  m.wall_seconds = seconds_since(t0);
  write_manifest(m, out_path + ".manifest.json");

  const double acc =
      workload.prompts.empty() ? 0.0
                               : static_cast<double>(correct) / workload.prompts.size();
  log_line(LogLevel::kInfo, "infer done",
           {{"accuracy", std::to_string(acc)}, {"out", out_path}});
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  LoadedConfig loaded = load_config(args);
  const RunConfig& cfg = loaded.cfg;

  const ResultTable table = run_experiment(cfg.experiment);

  fs::create_directories(args.out_dir);
  const std::string jpath = (fs::path(args.out_dir) / "results.json").string();
  const std::string cpath = (fs::path(args.out_dir) / "results.csv").string();
  write_text_file(jpath, result_table_to_json(table));
  write_text_file(cpath, result_table_to_csv(table));
  std::vector<std::string> outputs{jpath, cpath};
  for (std::size_t i = 0; i < cfg.experiment.sweep.tau_rows.size(); ++i) {
    const std::string path =
        (fs::path(args.out_dir) / ("sweep_row_" + std::to_string(i) + ".csv")).string();
    write_text_file(path, sweep_table_csv(table, cfg.experiment.sweep.tau_rows[i]));
    outputs.push_back(path);
  }

  RunManifest m;
  m.command = "sweep";
  m.seed = cfg.experiment.sweep.base_seed;
  m.config_json = run_config_to_json(cfg);
  m.inputs = loaded.inputs;
  m.outputs = outputs;
  m.wall_seconds = seconds_since(t0);
  write_manifest(m, (fs::path(args.out_dir) / "sweep.manifest.json").string());

  log_line(LogLevel::kInfo, "sweep done",
           {{"rows", std::to_string(table.rows.size())}, {"out", jpath}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale collaborative LLM inference simulator"};
  app.require_subcommand(1);

  CommonArgs common;

  CLI::App* gen = app.add_subcommand("gen-workload", "generate a synthetic workload and fleet");
  add_common(gen, common);

  CLI::App* train = app.add_subcommand("train-gate", "train the gating network");
  add_common(train, common);
  std::string train_workload, train_fleet, train_out;
  train->add_option("--workload", train_workload, "workload JSON")->required();
  train->add_option("--fleet", train_fleet, "fleet JSON")->required();
  train->add_option("--out", train_out, "output gate JSON path");

  CLI::App* cost = app.add_subcommand("cost-report", "per-subset delay/energy table");
  add_common(cost, common);
  std::string cost_workload, cost_fleet, cost_out;
  std::vector<std::string> cost_tau;
  double cost_emax = 0.0;
  cost->add_option("--workload", cost_workload, "workload JSON")->required();
  cost->add_option("--fleet", cost_fleet, "fleet JSON")->required();
  cost->add_option("--tau-max", cost_tau, "per-class delay budget, m=seconds (repeat per class)")
      ->required();
  cost->add_option("--e-max", cost_emax, "energy budget in joules")->required();
  cost->add_option("--out", cost_out, "output CSV path");

  CLI::App* select = app.add_subcommand("select-subset", "search for the best feasible subset");
  add_common(select, common);
  std::string sel_workload, sel_fleet, sel_gate, sel_out;
  std::vector<std::string> sel_tau;
  double sel_emax = 0.0;
  double sel_eps = 0.0;
  select->add_option("--workload", sel_workload, "workload JSON")->required();
  select->add_option("--fleet", sel_fleet, "fleet JSON")->required();
  select->add_option("--gate", sel_gate, "gate JSON")->required();
  select->add_option("--tau-max", sel_tau, "per-class delay budget, m=seconds (repeat per class)")
      ->required();
  select->add_option("--e-max", sel_emax, "energy budget in joules")->required();
  auto* eps_opt = select->add_option("--epsilon", sel_eps, "score slack for pruning");
  select->add_option("--out", sel_out, "output JSON path");

  CLI::App* infer = app.add_subcommand("infer", "decode every prompt with top-k routing");
  add_common(infer, common);
  std::string inf_workload, inf_fleet, inf_gate, inf_mask, inf_mode, inf_out;
  int inf_k = 0;
  infer->add_option("--workload", inf_workload, "workload JSON")->required();
  infer->add_option("--fleet", inf_fleet, "fleet JSON")->required();
  infer->add_option("--gate", inf_gate, "gate JSON")->required();
  infer->add_option("--mask", inf_mask, "subset as comma-separated expert ids")->required();
  auto* k_opt = infer->add_option("--k", inf_k, "experts queried per prompt");
  infer->add_option("--mode", inf_mode, "greedy|sample");
  infer->add_option("--out", inf_out, "output JSONL path");

  CLI::App* sweep = app.add_subcommand("sweep", "run the full budget-grid experiment");
  add_common(sweep, common);
  sweep->get_option("--config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_workload(common);
    if (train->parsed()) return cmd_train_gate(common, train_workload, train_fleet, train_out);
    if (cost->parsed())
      return cmd_cost_report(common, cost_workload, cost_fleet, cost_tau, cost_emax, cost_out);
    if (select->parsed())
      return cmd_select_subset(common, sel_workload, sel_fleet, sel_gate, sel_tau, sel_emax,
                               eps_opt->count() ? std::optional<double>(sel_eps) : std::nullopt,
                               sel_out);
    if (infer->parsed())
      return cmd_infer(common, inf_workload, inf_fleet, inf_gate, inf_mask,
                       k_opt->count() ? std::optional<int>(inf_k) : std::nullopt, inf_mode,
                       inf_out);
    if (sweep->parsed()) return cmd_sweep(common);
    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const infeasible_error& e) {
    log_line(LogLevel::kError, "infeasible", {{"what", e.what()}});
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    log_line(LogLevel::kError, "invalid input", {{"what", e.what()}});
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::logic_error& e) {
    log_line(LogLevel::kError, "invalid input", {{"what", e.what()}});
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    log_line(LogLevel::kError, "failed", {{"what", e.what()}});
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
