#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tacitsim/agent.hpp"
#include "tacitsim/backend.hpp"
#include "tacitsim/dissemination.hpp"
#include "tacitsim/eval.hpp"
#include "tacitsim/knowledge.hpp"
#include "tacitsim/orggen.hpp"
#include "tacitsim/personas.hpp"
#include "tacitsim/prompts.hpp"
#include "tacitsim/scripted.hpp"
#include "tacitsim/spearman.hpp"
#include "tacitsim/util.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// Experiment harness: parameter grid enumeration, the per-run pipeline
// (knowledge -> org -> dissemination -> personas -> agent -> eval), bounded-
// parallelism sweeps with crash resumability, and CSV reporting.
// ---------------------------------------------------------------------------

struct GridSpec {
  std::vector<int> depths{2, 5, 10, 20};
  std::vector<int> sizes{20, 75, 200};
  std::vector<double> alphas{0.1, 0.5};
  std::vector<double> decays{0.5, 0.8};
  std::vector<double> nics{0.0, 2.5, 5.0};
  std::vector<int> n_columns{5, 20};
  int repetitions = 3;
  std::uint64_t base_seed = 0;

  std::size_t n_configurations() const {
    return depths.size() * sizes.size() * alphas.size() * decays.size() * nics.size() *
           n_columns.size();
  }
  std::size_t n_runs() const { return n_configurations() * static_cast<std::size_t>(repetitions); }
};

/// Everything varying between runs; the defaults shared by all runs live in
/// SweepSettings.
struct RunConfig {
  int config_index = 0;
  int repetition = 0;
  int run_index = 0;
  std::string run_id;
  int depth = 0;
  int size = 0;
  double alpha = 0.0;
  double decay = 0.0;
  double nic = 0.0;
  int n_cols = 0;
  std::string subject;
  std::uint64_t seed = 0;
};

/// Fixed seed-stream tags so every pipeline stage draws from its own purpose-
/// scoped generator.
namespace seed_tag {
inline constexpr std::uint64_t kKnowledge = 1;
inline constexpr std::uint64_t kHierarchy = 2;
inline constexpr std::uint64_t kInformal = 3;
inline constexpr std::uint64_t kSpread = 4;
inline constexpr std::uint64_t kPersonas = 5;
inline constexpr std::uint64_t kAgent = 6;
inline constexpr std::uint64_t kSubject = 7;
inline constexpr std::uint64_t kPatientZero = 8;
}  // namespace seed_tag

inline std::vector<RunConfig> enumerate_grid(const GridSpec& spec) {
  if (spec.repetitions < 0) throw std::invalid_argument("repetitions must be >= 0");
  std::vector<RunConfig> runs;
  runs.reserve(spec.n_runs());
  int config_index = 0;
  int run_index = 0;
  for (int depth : spec.depths) {
    for (int size : spec.sizes) {
      for (double alpha : spec.alphas) {
        for (double decay : spec.decays) {
          for (double nic : spec.nics) {
            for (int n_cols : spec.n_columns) {
              for (int rep = 0; rep < spec.repetitions; ++rep) {
                RunConfig rc;
                rc.config_index = config_index;
                rc.repetition = rep;
                rc.run_index = run_index++;
                rc.depth = depth;
                rc.size = size;
                rc.alpha = alpha;
                rc.decay = decay;
                rc.nic = nic;
                rc.n_cols = n_cols;
                rc.seed = mix_seed(spec.base_seed, static_cast<std::uint64_t>(config_index),
                                   static_cast<std::uint64_t>(rep));
                Rng subject_rng(mix_seed(rc.seed, seed_tag::kSubject));
                rc.subject = subject_catalog()[subject_rng.uniform_index(
                    subject_catalog().size())];
                rc.run_id = "d" + std::to_string(depth) + "_s" + std::to_string(size) + "_a" +
                            fmt_double(alpha) + "_g" + fmt_double(decay) + "_n" +
                            fmt_double(nic) + "_c" + std::to_string(n_cols) + "_r" +
                            std::to_string(rep);
                runs.push_back(std::move(rc));
              }
              ++config_index;
            }
          }
        }
      }
    }
  }
  return runs;
}

/// Shared per-sweep knobs, overridable from the CLI config file.
struct SweepSettings {
  BackendConfig backend;
  double awareness_prob = 0.5;
  double convergence_epsilon = 1e-4;
  int max_steps = 10000;
  double epsilon = 8.0;        // agent termination score
  int max_interactions = 0;    // 0 = 2 * n_employees
  int max_turns_per_employee = 6;
};

struct RunRecord {
  RunConfig config;
  std::string k_star_path, org_path, spread_path, personas_path, transcript_path;
  std::string k_t;
  RunMetrics metrics;
  std::string status = "completed";  // or "failed: <stage>: <reason>"

  bool completed() const { return status == "completed"; }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"config_index", c.config_index},
                     {"repetition", c.repetition},
                     {"run_index", c.run_index},
                     {"run_id", c.run_id},
                     {"depth", c.depth},
                     {"size", c.size},
                     {"alpha", c.alpha},
                     {"decay", c.decay},
                     {"nic", c.nic},
                     {"n_columns", c.n_cols},
                     {"subject", c.subject},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  c.config_index = j.at("config_index").get<int>();
  c.repetition = j.at("repetition").get<int>();
  c.run_index = j.at("run_index").get<int>();
  c.run_id = j.at("run_id").get<std::string>();
  c.depth = j.at("depth").get<int>();
  c.size = j.at("size").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.decay = j.at("decay").get<double>();
  c.nic = j.at("nic").get<double>();
  c.n_cols = j.at("n_columns").get<int>();
  c.subject = j.at("subject").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

inline void to_json(nlohmann::json& j, const RunMetrics& m) {
  j = nlohmann::json{{"full_recall", m.full_recall},
                     {"recall_fraction", m.recall_fraction},
                     {"c_meteor", m.c_meteor},
                     {"c_geval_coh", m.c_geval_coh},
                     {"c_geval_faith", m.c_geval_faith},
                     {"scs", m.scs},
                     {"scs_context", m.scs_context},
                     {"len_path", m.len_path},
                     {"n_hubs", m.n_hubs},
                     {"min_dist_p0", m.min_dist_p0},
                     {"reached_p0", m.reached_p0},
                     {"avg_score", m.avg_score}};
}

inline void from_json(const nlohmann::json& j, RunMetrics& m) {
  m.full_recall = j.at("full_recall").get<bool>();
  m.recall_fraction = j.at("recall_fraction").get<double>();
  m.c_meteor = j.at("c_meteor").get<double>();
  m.c_geval_coh = j.at("c_geval_coh").get<double>();
  m.c_geval_faith = j.at("c_geval_faith").get<double>();
  m.scs = j.at("scs").get<double>();
  m.scs_context = j.at("scs_context").get<double>();
  m.len_path = j.at("len_path").get<int>();
  m.n_hubs = j.at("n_hubs").get<int>();
  m.min_dist_p0 = j.at("min_dist_p0").get<int>();
  m.reached_p0 = j.at("reached_p0").get<bool>();
  m.avg_score = j.at("avg_score").get<double>();
}

inline void to_json(nlohmann::json& j, const RunRecord& r) {
  j = nlohmann::json{{"config", r.config},
                     {"k_star_path", r.k_star_path},
                     {"org_path", r.org_path},
                     {"spread_path", r.spread_path},
                     {"personas_path", r.personas_path},
                     {"transcript_path", r.transcript_path},
                     {"k_t", r.k_t},
                     {"metrics", r.metrics},
                     {"status", r.status}};
}

inline void from_json(const nlohmann::json& j, RunRecord& r) {
  r.config = j.at("config").get<RunConfig>();
  r.k_star_path = j.at("k_star_path").get<std::string>();
  r.org_path = j.at("org_path").get<std::string>();
  r.spread_path = j.at("spread_path").get<std::string>();
  r.personas_path = j.at("personas_path").get<std::string>();
  r.transcript_path = j.at("transcript_path").get<std::string>();
  r.k_t = j.at("k_t").get<std::string>();
  r.metrics = j.at("metrics").get<RunMetrics>();
  r.status = j.at("status").get<std::string>();
}

/// Runs the whole pipeline for one grid cell. Failures in any stage are
/// captured in the record's status; the function itself does not throw on
/// stage errors.
inline RunRecord execute_run(const RunConfig& config, const SweepSettings& settings,
                             const PromptPack& prompts, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  RunRecord record;
  record.config = config;
  const fs::path run_dir = out_dir / "runs" / config.run_id;
  fs::create_directories(run_dir);
  record.k_star_path = (run_dir / "knowledge.json").string();
  record.org_path = (run_dir / "org.json").string();
  record.spread_path = (run_dir / "spread.json").string();
  record.personas_path = (run_dir / "personas.json").string();
  record.transcript_path = (run_dir / "transcript.jsonl").string();

  std::shared_ptr<ChatBackend> raw_backend = make_backend(settings.backend);
  // start the transcript fresh so re-executed runs do not append twice
  std::error_code ec;
  fs::remove(record.transcript_path, ec);
  TranscriptLogger backend(raw_backend, record.transcript_path, config.run_id);

  std::string stage = "knowledge";
  try {
    const TableKnowledge k_star =
        generate_knowledge(config.subject, config.n_cols, backend, prompts,
                           mix_seed(config.seed, seed_tag::kKnowledge));
    save_knowledge(k_star, record.k_star_path);

    stage = "orggen";
    OrgParams org_params;
    org_params.n_employees = config.size;
    org_params.max_depth = config.depth;
    org_params.rng_seed = mix_seed(config.seed, seed_tag::kHierarchy);
    OrgStructure org = build_hierarchy(org_params);
    org = add_informal_edges(std::move(org), config.nic,
                             mix_seed(config.seed, seed_tag::kInformal));
    save_org(org, record.org_path);

    stage = "dissemination";
    SpreadParams spread_params;
    spread_params.alpha = config.alpha;
    spread_params.decay = config.decay;
    spread_params.convergence_epsilon = settings.convergence_epsilon;
    spread_params.max_steps = settings.max_steps;
    spread_params.rng_seed = mix_seed(config.seed, seed_tag::kSpread);
    const EmployeeId p0 =
        sample_patient_zero(org, mix_seed(config.seed, seed_tag::kPatientZero));
    const DisseminationResult spread =
        disseminate_from_patient_zero(org, k_star, p0, spread_params);
    save_spread(spread, record.spread_path);

    stage = "personas";
    const std::vector<PersonaProfile> personas = build_personas(
        org, spread, settings.awareness_prob, mix_seed(config.seed, seed_tag::kPersonas));
    save_personas(personas, record.personas_path);

    stage = "agent";
    AgentConfig agent_config;
    agent_config.epsilon = settings.epsilon;
    agent_config.max_interactions = settings.max_interactions;
    agent_config.max_turns_per_employee = settings.max_turns_per_employee;
    agent_config.rng_seed = mix_seed(config.seed, seed_tag::kAgent);
    const AgentRunResult outcome =
        run_agent(org, personas, k_star, agent_config, prompts, backend);
    record.k_t = outcome.k_t;
    if (outcome.failed) throw BackendError(outcome.failure);

    stage = "eval";
    record.metrics = compute_metrics(k_star, outcome.k_t, outcome.state.path,
                                     outcome.state.score_trace, outcome.state.score, org, p0,
                                     backend, prompts);
  } catch (const std::exception& e) {
    record.status = "failed: " + stage + ": " + e.what();
  }
  return record;
}

inline std::filesystem::path record_path(const std::filesystem::path& out_dir,
                                         const RunConfig& config) {
  return out_dir / "runs" / config.run_id / "record.json";
}

inline void save_record(const RunRecord& record, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "runs" / record.config.run_id);
  write_file_atomic(record_path(out_dir, record.config),
                    nlohmann::json(record).dump(2) + "\n");
}

/// A previously completed record for this exact config (same run_id and
/// seed), if one is on disk — the crash-resumability hook.
inline std::optional<RunRecord> load_completed_record(const RunConfig& config,
                                                      const std::filesystem::path& out_dir) {
  const auto path = record_path(out_dir, config);
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    RunRecord record = nlohmann::json::parse(read_file(path)).get<RunRecord>();
    if (record.completed() && record.config.seed == config.seed) return record;
  } catch (const std::exception&) {
    // unreadable record: redo the run
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// CSV reports.
// ---------------------------------------------------------------------------

inline std::string metrics_csv_header() {
  return "run_id,depth,size,alpha,decay,nic,n_columns,repetition,subject,seed,status,"
         "full_recall,recall_fraction,c_meteor,c_geval_coh,c_geval_faith,scs,scs_context,"
         "len_path,n_hubs,min_dist_p0,reached_p0,avg_score";
}

inline std::string metrics_csv_row(const RunRecord& r) {
  const RunConfig& c = r.config;
  const RunMetrics& m = r.metrics;
  std::string status = r.completed() ? "completed" : "failed";
  std::string row = c.run_id + "," + std::to_string(c.depth) + "," + std::to_string(c.size) +
                    "," + fmt_double(c.alpha) + "," + fmt_double(c.decay) + "," +
                    fmt_double(c.nic) + "," + std::to_string(c.n_cols) + "," +
                    std::to_string(c.repetition) + "," + c.subject + "," +
                    std::to_string(c.seed) + "," + status;
  row += std::string(",") + (m.full_recall ? "true" : "false") + "," +
         fmt_double(m.recall_fraction) + "," + fmt_double(m.c_meteor) + "," +
         fmt_double(m.c_geval_coh) + "," + fmt_double(m.c_geval_faith) + "," +
         fmt_double(m.scs) + "," + fmt_double(m.scs_context) + "," +
         std::to_string(m.len_path) + "," + std::to_string(m.n_hubs) + "," +
         std::to_string(m.min_dist_p0) + "," + (m.reached_p0 ? "true" : "false") + "," +
         fmt_double(m.avg_score);
  return row;
}

inline std::string render_metrics_csv(const std::vector<RunRecord>& records) {
  std::string csv = metrics_csv_header() + "\n";
  for (const auto& r : records) csv += metrics_csv_row(r) + "\n";
  return csv;
}

/// Pairwise Spearman matrix over the five quality metrics. Undefined
/// entries (constant series or fewer than 3 completed runs) render empty.
inline std::string render_correlations_csv(const std::vector<RunRecord>& records) {
  const std::vector<std::string> names = {"c_meteor", "c_geval_coh", "c_geval_faith", "scs",
                                          "scs_context"};
  std::vector<std::vector<double>> series(names.size());
  for (const auto& r : records) {
    if (!r.completed()) continue;
    series[0].push_back(r.metrics.c_meteor);
    series[1].push_back(r.metrics.c_geval_coh);
    series[2].push_back(r.metrics.c_geval_faith);
    series[3].push_back(r.metrics.scs);
    series[4].push_back(r.metrics.scs_context);
  }
  std::string csv = "metric";
  for (const auto& n : names) csv += "," + n;
  csv += "\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    csv += names[i];
    for (std::size_t j = 0; j < names.size(); ++j) {
      std::string cell;
      try {
        const auto rho = spearman(series[i], series[j]);
        if (rho) cell = fmt_double(*rho);
      } catch (const std::invalid_argument&) {
      }
      csv += "," + cell;
    }
    csv += "\n";
  }
  return csv;
}

/// Per-parameter-value means of the path statistics and scores over
/// completed runs.
inline std::string render_grouped_means_csv(const std::vector<RunRecord>& records) {
  struct Acc {
    int n = 0;
    double len_path = 0, n_hubs = 0, min_dist = 0, reached = 0, avg_score = 0, final_score = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> groups;
  for (const auto& r : records) {
    if (!r.completed()) continue;
    const std::vector<std::pair<std::string, std::string>> keys = {
        {"depth", std::to_string(r.config.depth)},
        {"size", std::to_string(r.config.size)},
        {"alpha", fmt_double(r.config.alpha)},
        {"decay", fmt_double(r.config.decay)},
        {"nic", fmt_double(r.config.nic)},
        {"n_columns", std::to_string(r.config.n_cols)},
    };
    for (const auto& key : keys) {
      Acc& a = groups[key];
      a.n += 1;
      a.len_path += r.metrics.len_path;
      a.n_hubs += r.metrics.n_hubs;
      a.min_dist += r.metrics.min_dist_p0;
      a.reached += r.metrics.reached_p0 ? 1.0 : 0.0;
      a.avg_score += r.metrics.avg_score;
      a.final_score += r.metrics.scs;
    }
  }
  std::string csv = "parameter,value,n_runs,len_path,n_hubs,min_dist_p0,pct_p0,avg_score,"
                    "final_score\n";
  for (const auto& [key, a] : groups) {
    const double n = static_cast<double>(a.n);
    csv += key.first + "," + key.second + "," + std::to_string(a.n) + "," +
           fmt_double(a.len_path / n) + "," + fmt_double(a.n_hubs / n) + "," +
           fmt_double(a.min_dist / n) + "," + fmt_double(100.0 * a.reached / n) + "," +
           fmt_double(a.avg_score / n) + "," + fmt_double(a.final_score / n) + "\n";
  }
  return csv;
}

// ---------------------------------------------------------------------------
// Sweep driver.
// ---------------------------------------------------------------------------

struct SweepSummary {
  int completed = 0;
  int skipped = 0;  // resumed from existing records
  int failed = 0;

  bool all_ok() const { return failed == 0; }
};

inline SweepSummary sweep(const GridSpec& spec, const SweepSettings& settings,
                          const PromptPack& prompts, const std::filesystem::path& out_dir,
                          int parallelism = 1) {
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "runs");

  const std::vector<RunConfig> configs = enumerate_grid(spec);
  std::vector<RunRecord> records(configs.size());
  std::vector<char> was_skipped(configs.size(), 0);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) break;
      if (auto existing = load_completed_record(configs[i], out_dir)) {
        records[i] = std::move(*existing);
        was_skipped[i] = 1;
        continue;
      }
      records[i] = execute_run(configs[i], settings, prompts, out_dir);
      save_record(records[i], out_dir);
    }
  };

  const int n_workers = std::max(1, std::min<int>(parallelism, static_cast<int>(configs.size())));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  write_file_atomic(out_dir / "metrics.csv", render_metrics_csv(records));
  write_file_atomic(out_dir / "correlations.csv", render_correlations_csv(records));
  write_file_atomic(out_dir / "grouped_means.csv", render_grouped_means_csv(records));

  SweepSummary summary;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].completed()) {
      ++summary.failed;
    } else if (was_skipped[i]) {
      ++summary.skipped;
    } else {
      ++summary.completed;
    }
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Declarative sweep configuration (CLI --config file): GridSpec fields plus
// agent/spread/backend overrides, all optional.
// ---------------------------------------------------------------------------

inline void apply_config_json(const nlohmann::json& j, GridSpec& grid, SweepSettings& settings) {
  if (j.contains("depths")) grid.depths = j.at("depths").get<std::vector<int>>();
  if (j.contains("sizes")) grid.sizes = j.at("sizes").get<std::vector<int>>();
  if (j.contains("alphas")) grid.alphas = j.at("alphas").get<std::vector<double>>();
  if (j.contains("decays")) grid.decays = j.at("decays").get<std::vector<double>>();
  if (j.contains("nics")) grid.nics = j.at("nics").get<std::vector<double>>();
  if (j.contains("n_columns")) grid.n_columns = j.at("n_columns").get<std::vector<int>>();
  if (j.contains("repetitions")) grid.repetitions = j.at("repetitions").get<int>();
  if (j.contains("base_seed")) grid.base_seed = j.at("base_seed").get<std::uint64_t>();

  if (j.contains("awareness_prob")) settings.awareness_prob = j.at("awareness_prob").get<double>();
  if (j.contains("convergence_epsilon")) {
    settings.convergence_epsilon = j.at("convergence_epsilon").get<double>();
  }
  if (j.contains("max_steps")) settings.max_steps = j.at("max_steps").get<int>();
  if (j.contains("epsilon")) settings.epsilon = j.at("epsilon").get<double>();
  if (j.contains("max_interactions")) {
    settings.max_interactions = j.at("max_interactions").get<int>();
  }
  if (j.contains("max_turns_per_employee")) {
    settings.max_turns_per_employee = j.at("max_turns_per_employee").get<int>();
  }
  if (j.contains("model_name")) settings.backend.model_name = j.at("model_name").get<std::string>();
  if (j.contains("endpoint_url")) {
    settings.backend.endpoint_url = j.at("endpoint_url").get<std::string>();
  }
  if (j.contains("temperature")) settings.backend.temperature = j.at("temperature").get<double>();
  if (j.contains("timeout_seconds")) {
    settings.backend.timeout_seconds = j.at("timeout_seconds").get<double>();
  }
  if (j.contains("max_retries")) settings.backend.max_retries = j.at("max_retries").get<int>();
}

}  // namespace tacitsim
