#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "panel/backend.hpp"
#include "panel/datasets.hpp"
#include "panel/metrics.hpp"
#include "panel/pipeline.hpp"

namespace panel::runner {

struct BackendConfig {
  std::string mock_script;  // rule file; takes precedence over `endpoint`
  std::string endpoint;
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_s = 120;
  int max_attempts = 5;
  int backoff_ms = 1000;
  std::string cache_dir;  // empty: <output_dir>/cache
  bool no_cache = false;
};

struct RunConfig {
  std::string task = "stance3";
  std::string prompts_dir;  // empty: shipped prompts
  std::string corpus;
  std::string schema = "jsonl";
  BackendConfig backend;
  AblationVariant variant = AblationVariant::kFull;
  pipeline::Strategy strategy = pipeline::Strategy::kCola;
  int repeats = 5;
  std::optional<std::size_t> sample_size;
  std::uint64_t seed = 0;
  std::string output_dir = "runs";
  int concurrency = 4;
  bool explain = false;        // ask the judger for a structured explanation
  std::string prior;           // feedback: run directory or verdicts file
  std::string metric = "auto"; // auto | f_avg | macro_f1
  // Stop after this many newly executed instances; the run stays resumable.
  std::optional<std::size_t> max_instances;
  std::string run_id;          // empty: <timestamp>-<digest>
  bool fresh = false;          // never resume an earlier run

  // Throws Error(kInvalidConfig).
  void validate() const;
  nlohmann::json to_json() const;
};

struct Failure {
  std::string instance_id;
  int run_index = 1;
  std::string stage;
  std::string agent;
  std::string code;
  std::string message;
};

struct RunResult {
  std::string run_id;
  std::filesystem::path run_dir;
  std::string config_digest;
  std::optional<metrics::ScoreReport> report;  // absent when nothing was scored
  std::vector<Failure> failures;
  std::size_t instances = 0;  // corpus size after sampling
  std::size_t executed = 0;   // instances run in this invocation
  std::size_t resumed = 0;    // instances taken from earlier records
  bool finished = false;      // false when stopped by max_instances
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;

  // 0 all instances succeeded, 2 some failed or the run is unfinished,
  // 1 none succeeded.
  int exit_code() const noexcept;
};

struct PriorVerdict {
  std::string instance_id;
  int run_index = 1;
  std::optional<std::string> label;
  std::optional<std::string> explanation;
};

/// Reads `verdicts.jsonl` from a run directory (or the file itself).
std::vector<PriorVerdict> load_prior_verdicts(const std::filesystem::path& path);

/// Runs the configured strategy over the corpus. Artifacts land in
/// <output_dir>/<run-id>/. An unfinished run with the same configuration is
/// resumed unless `fresh` is set.
RunResult run(const RunConfig& config);

/// Explanation-feedback experiment. Every instance needs an explanation in
/// `prior`; otherwise Error(kMissingExplanation) names the first one lacking.
RunResult run_feedback(const RunConfig& config, const std::vector<PriorVerdict>& prior);

struct AblationRow {
  AblationVariant variant;
  RunResult result;
};

/// All six variants over the same corpus and sample, full pipeline first.
std::vector<AblationRow> run_ablation_sweep(const RunConfig& base);

// Human-readable tables; numbers are percentages with one decimal.
std::string render_report(const metrics::ScoreReport& report, const RunConfig& config,
                          const std::vector<Failure>& failures);
std::string render_ablation(const std::vector<AblationRow>& rows);
nlohmann::json ablation_json(const std::vector<AblationRow>& rows);

nlohmann::json report_json(const metrics::ScoreReport& report);

/// Per-run headline scores, in run order.
std::vector<double> run_headlines(const metrics::ScoreReport& report);
/// Per-run headline scores read from a finished run's report.json.
std::vector<double> run_headlines(const std::filesystem::path& run_dir);

/// Paired t-test of two methods over runs: the i-th run of each side forms
/// a pair. kDegenerateInput when fewer than two runs are paired.
metrics::TTestResult compare_runs(std::span<const double> a, std::span<const double> b);

/// Writes report.json and report.txt into `dir`. Throws Error(kIo).
void emit_report(const metrics::ScoreReport& report, const RunConfig& config,
                 const std::vector<Failure>& failures, const nlohmann::json& metadata,
                 const std::filesystem::path& dir);

nlohmann::json record_to_json(const pipeline::RunRecord& record);
pipeline::RunRecord record_from_json(const nlohmann::json& j, const TaskSpec& task);

}  // namespace panel::runner
