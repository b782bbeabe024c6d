// tacitsim — command-line front end for the simulator, agent, and harness.
//
// Subcommands:
//   generate     synthesize a table description (ground truth) to JSON
//   disseminate  build an org and spread facts through it
//   run          execute a single end-to-end run in a fresh output directory
//   sweep        execute the full parameter grid (resumable)
//   evaluate     recompute metrics for an existing run directory
//   report       regenerate the CSV reports from stored run records

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tacitsim/harness.hpp"

namespace fs = std::filesystem;
using namespace tacitsim;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string backend = "scripted";
  std::string config_path;
  std::string out_dir = "out";
  std::string prompt_dir;
};

BackendConfig backend_config(const GlobalOpts& g) {
  BackendConfig cfg;
  if (g.backend == "scripted") {
    cfg.kind = BackendKind::kScripted;
  } else if (g.backend == "live") {
    cfg.kind = BackendKind::kLive;
  } else {
    throw CLI::ValidationError("--backend must be 'scripted' or 'live'");
  }
  cfg.rng_seed = g.seed;
  return cfg;
}

PromptPack load_prompts_for(const GlobalOpts& g) {
  return g.prompt_dir.empty() ? PromptPack::load(default_prompt_dir())
                              : PromptPack::load(g.prompt_dir);
}

void apply_config_file(const GlobalOpts& g, GridSpec& grid, SweepSettings& settings) {
  if (g.config_path.empty()) return;
  const auto j = nlohmann::json::parse(read_file(g.config_path));
  apply_config_json(j, grid, settings);
}

int cmd_generate(const GlobalOpts& g, const std::string& subject, int n_columns,
                 const std::string& out_file) {
  auto backend = make_backend(backend_config(g));
  const PromptPack prompts = load_prompts_for(g);
  const TableKnowledge k =
      generate_knowledge(subject, n_columns, *backend, prompts, mix_seed(g.seed, 1));
  save_knowledge(k, out_file);
  std::cout << "wrote " << out_file << " (" << k.columns.size() << " columns on '"
            << k.table_name << "')\n";
  return 0;
}

int cmd_disseminate(const GlobalOpts& g, int size, int depth, double nic, double alpha,
                    double decay, const std::string& knowledge_file) {
  const TableKnowledge k = load_knowledge(knowledge_file);

  OrgParams op;
  op.n_employees = size;
  op.max_depth = depth;
  op.informal_multiplier = nic;
  op.rng_seed = mix_seed(g.seed, 2);
  OrgStructure org = build_hierarchy(op);
  org = add_informal_edges(std::move(org), nic, mix_seed(g.seed, 3));

  SpreadParams sp;
  sp.alpha = alpha;
  sp.decay = decay;
  sp.rng_seed = mix_seed(g.seed, 4);
  const EmployeeId p0 = sample_patient_zero(org, mix_seed(g.seed, 8));
  const DisseminationResult spread = disseminate_from_patient_zero(org, k, p0, sp);

  fs::create_directories(g.out_dir);
  save_org(org, fs::path(g.out_dir) / "org.json");
  save_spread(spread, fs::path(g.out_dir) / "spread.json");
  std::cout << "org: " << org.size() << " employees, spread converged=" << std::boolalpha
            << spread.converged << " in " << spread.steps << " steps, coverage="
            << fmt_double(spread.coverage(static_cast<int>(k.columns.size()))) << "\n";
  std::cout << "wrote " << (fs::path(g.out_dir) / "org.json").string() << " and "
            << (fs::path(g.out_dir) / "spread.json").string() << "\n";
  return 0;
}

int cmd_run(const GlobalOpts& g, int size, int depth, double nic, double alpha, double decay,
            int n_columns, const std::string& subject) {
  GridSpec grid;
  SweepSettings settings;
  apply_config_file(g, grid, settings);
  settings.backend = backend_config(g);

  RunConfig rc;
  rc.run_id = "single";
  rc.depth = depth;
  rc.size = size;
  rc.alpha = alpha;
  rc.decay = decay;
  rc.nic = nic;
  rc.n_cols = n_columns;
  rc.seed = g.seed;
  if (!subject.empty()) {
    rc.subject = subject;
  } else {
    Rng subject_rng(mix_seed(g.seed, seed_tag::kSubject));
    rc.subject = subject_catalog()[subject_rng.uniform_index(subject_catalog().size())];
  }

  const PromptPack prompts = load_prompts_for(g);
  const RunRecord record = execute_run(rc, settings, prompts, g.out_dir);
  save_record(record, g.out_dir);
  std::cout << "status: " << record.status << "\n";
  if (record.completed()) {
    std::cout << "k_t:\n" << record.k_t << "\n";
    std::cout << "recall=" << fmt_double(record.metrics.recall_fraction)
              << " c_meteor=" << fmt_double(record.metrics.c_meteor)
              << " scs=" << fmt_double(record.metrics.scs)
              << " path_len=" << record.metrics.len_path << "\n";
  }
  return record.completed() ? 0 : 1;
}

int cmd_sweep(const GlobalOpts& g, int parallelism, bool accept_costs) {
  GridSpec grid;
  grid.base_seed = g.seed;
  SweepSettings settings;
  apply_config_file(g, grid, settings);
  settings.backend = backend_config(g);

  if (settings.backend.kind == BackendKind::kLive && !accept_costs) {
    std::cerr << "refusing to start a live-backend sweep without --i-accept-costs\n"
              << "(a full grid is " << grid.n_runs()
              << " runs, each with many model calls)\n";
    return 2;
  }

  const PromptPack prompts = load_prompts_for(g);
  std::cout << "sweep: " << grid.n_configurations() << " configurations x "
            << grid.repetitions << " repetitions = " << grid.n_runs() << " runs ("
            << parallelism << " worker" << (parallelism == 1 ? "" : "s") << ")\n";
  const SweepSummary summary = sweep(grid, settings, prompts, g.out_dir, parallelism);
  std::cout << "completed=" << summary.completed << " resumed=" << summary.skipped
            << " failed=" << summary.failed << "\n";
  std::cout << "reports: " << (fs::path(g.out_dir) / "metrics.csv").string() << ", "
            << (fs::path(g.out_dir) / "correlations.csv").string() << ", "
            << (fs::path(g.out_dir) / "grouped_means.csv").string() << "\n";
  return summary.all_ok() ? 0 : 1;
}

std::vector<RunRecord> collect_records(const std::string& out_dir) {
  std::vector<RunRecord> records;
  const fs::path runs = fs::path(out_dir) / "runs";
  if (!fs::exists(runs)) return records;
  std::vector<fs::path> record_files;
  for (const auto& entry : fs::directory_iterator(runs)) {
    const fs::path candidate = entry.path() / "record.json";
    if (fs::exists(candidate)) record_files.push_back(candidate);
  }
  std::sort(record_files.begin(), record_files.end());
  for (const auto& file : record_files) {
    records.push_back(nlohmann::json::parse(read_file(file)).get<RunRecord>());
  }
  // reports are ordered by grid position, not by directory name
  std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return a.config.run_index < b.config.run_index;
  });
  return records;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& run_dir) {
  const fs::path dir(run_dir);
  const RunRecord stored =
      nlohmann::json::parse(read_file(dir / "record.json")).get<RunRecord>();
  if (!stored.completed()) {
    std::cerr << "run did not complete (" << stored.status << "); nothing to evaluate\n";
    return 1;
  }
  const TableKnowledge k_star = load_knowledge(stored.k_star_path);
  const OrgStructure org = load_org(stored.org_path);
  const DisseminationResult spread = load_spread(stored.spread_path);

  auto backend = make_backend(backend_config(g));
  const PromptPack prompts = load_prompts_for(g);
  // Path/score traces live only in the record; reuse the stored figures and
  // recompute the text metrics against the stored k_t.
  RunMetrics m = stored.metrics;
  const auto [full, fraction] = full_knowledge_recall(k_star, stored.k_t);
  m.full_recall = full;
  m.recall_fraction = fraction;
  m.c_meteor = c_meteor(k_star, stored.k_t);
  m.c_geval_coh = c_geval(k_star, stored.k_t, GEvalDefinition::kCoherence, *backend, prompts);
  m.c_geval_faith =
      c_geval(k_star, stored.k_t, GEvalDefinition::kFaithfulness, *backend, prompts);
  m.scs_context = scs_with_context(stored.k_t, k_star, *backend, prompts);
  std::cout << nlohmann::json(m).dump(2) << "\n";
  return 0;
}

int cmd_report(const GlobalOpts& g) {
  const std::vector<RunRecord> records = collect_records(g.out_dir);
  if (records.empty()) {
    std::cerr << "no run records under " << (fs::path(g.out_dir) / "runs").string() << "\n";
    return 1;
  }
  write_file_atomic(fs::path(g.out_dir) / "metrics.csv", render_metrics_csv(records));
  write_file_atomic(fs::path(g.out_dir) / "correlations.csv",
                    render_correlations_csv(records));
  write_file_atomic(fs::path(g.out_dir) / "grouped_means.csv",
                    render_grouped_means_csv(records));
  std::cout << "rebuilt reports from " << records.size() << " records under " << g.out_dir
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tacit-knowledge reconstruction simulator"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "base RNG seed")->capture_default_str();
  app.add_option("--backend", g.backend, "chat backend: scripted | live")
      ->capture_default_str();
  app.add_option("--config", g.config_path, "JSON config file overriding grid/agent settings");
  app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--prompts", g.prompt_dir, "prompt template directory");

  auto* generate = app.add_subcommand("generate", "synthesize a ground-truth table description");
  std::string subject;
  int n_columns = 5;
  std::string out_file = "knowledge.json";
  generate->add_option("--subject", subject, "subject (default: seeded pick from the catalog)");
  generate->add_option("--columns", n_columns, "number of columns")->capture_default_str();
  generate->add_option("--out-file", out_file, "output JSON path")->capture_default_str();

  auto* disseminate = app.add_subcommand("disseminate", "build an org and spread facts");
  int size = 20, depth = 2;
  double nic = 0.0, alpha = 0.5, decay = 0.8;
  std::string knowledge_file = "knowledge.json";
  disseminate->add_option("--size", size, "number of employees")->capture_default_str();
  disseminate->add_option("--depth", depth, "hierarchy depth")->capture_default_str();
  disseminate->add_option("--nic", nic, "informal-edge multiplier")->capture_default_str();
  disseminate->add_option("--alpha", alpha, "base transmission rate")->capture_default_str();
  disseminate->add_option("--decay", decay, "per-step infectivity decay")->capture_default_str();
  disseminate->add_option("--knowledge", knowledge_file, "ground-truth JSON from 'generate'")
      ->capture_default_str();

  auto* run = app.add_subcommand("run", "single end-to-end run");
  run->add_option("--size", size, "number of employees")->capture_default_str();
  run->add_option("--depth", depth, "hierarchy depth")->capture_default_str();
  run->add_option("--nic", nic, "informal-edge multiplier")->capture_default_str();
  run->add_option("--alpha", alpha, "base transmission rate")->capture_default_str();
  run->add_option("--decay", decay, "per-step infectivity decay")->capture_default_str();
  run->add_option("--columns", n_columns, "number of columns")->capture_default_str();
  run->add_option("--subject", subject, "subject (default: seeded pick from the catalog)");

  auto* sweep_cmd = app.add_subcommand("sweep", "full parameter-grid sweep (resumable)");
  int parallelism = 1;
  bool accept_costs = false;
  sweep_cmd->add_option("--parallelism", parallelism, "worker threads")->capture_default_str();
  sweep_cmd->add_flag("--i-accept-costs", accept_costs,
                      "required before sweeping against a live backend");

  auto* evaluate = app.add_subcommand("evaluate", "recompute metrics for a stored run");
  std::string run_dir;
  evaluate->add_option("run_dir", run_dir, "run directory containing record.json")->required();

  app.add_subcommand("report", "regenerate CSVs from stored run records");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("generate")) {
      if (subject.empty()) {
        Rng subject_rng(mix_seed(g.seed, seed_tag::kSubject));
        subject = subject_catalog()[subject_rng.uniform_index(subject_catalog().size())];
      }
      return cmd_generate(g, subject, n_columns, out_file);
    }
    if (app.got_subcommand("disseminate")) {
      return cmd_disseminate(g, size, depth, nic, alpha, decay, knowledge_file);
    }
    if (app.got_subcommand("run")) {
      return cmd_run(g, size, depth, nic, alpha, decay, n_columns, subject);
    }
    if (app.got_subcommand("sweep")) return cmd_sweep(g, parallelism, accept_costs);
    if (app.got_subcommand("evaluate")) return cmd_evaluate(g, run_dir);
    if (app.got_subcommand("report")) return cmd_report(g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
