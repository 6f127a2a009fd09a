// Command-line front end: run, ablate, feedback, stats, sample.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "panel/datasets.hpp"
#include "panel/error.hpp"
#include "panel/runner.hpp"

namespace {

using panel::runner::RunConfig;

struct RawOptions {
  std::string variant = "full";
  std::string strategy = "cola";
  std::size_t sample_size = 0;
  std::size_t max_instances = 0;
};

void add_corpus_options(CLI::App* app, RunConfig& cfg) {
  app->add_option("--task", cfg.task, "Task name or task directory")->capture_default_str();
  app->add_option("--prompts-dir", cfg.prompts_dir, "Root holding task directories");
  app->add_option("--corpus", cfg.corpus, "Corpus file")->required();
  app->add_option("--schema", cfg.schema, "Schema preset or schema file")->capture_default_str();
}

void add_run_options(CLI::App* app, RunConfig& cfg, RawOptions& raw, bool with_strategy) {
  app->set_config("--config", "", "TOML config file; flags override it");
  add_corpus_options(app, cfg);
  app->add_option("--mock", cfg.backend.mock_script, "Mock rule file (no network)");
  app->add_option("--endpoint", cfg.backend.endpoint, "Chat-completion URL");
  app->add_option("--model", cfg.backend.model, "Model id sent to the endpoint");
  app->add_option("--api-key-env", cfg.backend.api_key_env, "Variable holding the bearer token")
      ->capture_default_str();
  app->add_option("--timeout", cfg.backend.timeout_s, "Request timeout in seconds")->capture_default_str();
  app->add_option("--max-attempts", cfg.backend.max_attempts, "Attempts per call")->capture_default_str();
  app->add_option("--backoff-ms", cfg.backend.backoff_ms, "First retry delay")->capture_default_str();
  app->add_option("--cache-dir", cfg.backend.cache_dir, "Response cache (default <output>/cache)");
  app->add_flag("--no-cache", cfg.backend.no_cache, "Disable the response cache");
  if (with_strategy) {
    app->add_option("--strategy", raw.strategy, "cola | direct | cot")
        ->check(CLI::IsMember({"cola", "direct", "cot"}))
        ->capture_default_str();
    app->add_option("--variant", raw.variant, "Ablation variant")
        ->check(CLI::IsMember({"full", "drop_linguist", "drop_domain", "drop_social",
                               "drop_analysis_stage", "drop_debate_stage"}))
        ->capture_default_str();
  }
  app->add_option("--repeats", cfg.repeats, "Runs per instance")->capture_default_str();
  app->add_option("--sample", raw.sample_size, "Stratified sample size (0 = whole corpus)");
  app->add_option("--seed", cfg.seed, "Sampling seed")->capture_default_str();
  app->add_option("--output", cfg.output_dir, "Output directory")->capture_default_str();
  app->add_option("--concurrency", cfg.concurrency, "Instances in flight")->capture_default_str();
  app->add_flag("--explain", cfg.explain, "Ask the judger for a structured explanation");
  app->add_option("--metric", cfg.metric, "auto | f_avg | macro_f1")
      ->check(CLI::IsMember({"auto", "f_avg", "macro_f1"}))
      ->capture_default_str();
  app->add_option("--max-instances", raw.max_instances, "Stop after N new instances (resumable)");
  app->add_option("--run-id", cfg.run_id, "Explicit run directory name");
  app->add_flag("--fresh", cfg.fresh, "Start a new run even if an unfinished one matches");
}

void finish_config(RunConfig& cfg, const RawOptions& raw) {
  cfg.variant = panel::parse_variant(raw.variant);
  cfg.strategy = panel::pipeline::parse_strategy(raw.strategy);
  if (raw.sample_size > 0) cfg.sample_size = raw.sample_size;
  if (raw.max_instances > 0) cfg.max_instances = raw.max_instances;
}

void print_summary(const panel::runner::RunResult& r) {
  std::cerr << "run " << r.run_id << ": " << r.executed << " executed, " << r.resumed
            << " resumed, " << r.backend_calls << " calls (" << r.cache_hits << " from cache), "
            << r.failures.size() << " failures\n";
  if (!r.finished) std::cerr << "run unfinished; re-run the same command to resume\n";
}

int print_run(const panel::runner::RunResult& r) {
  print_summary(r);
  if (r.finished) {
    std::ifstream in(r.run_dir / "report.txt");
    std::cout << in.rdbuf();
    std::cout << "artifacts: " << r.run_dir.string() << "\n";
  }
  return r.exit_code();
}

int worst(int a, int b) {
  if (a == 1 || b == 1) return 1;
  return std::max(a, b);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Role-based multi-agent text classification"};
  app.require_subcommand(1);

  RunConfig run_cfg;
  RawOptions run_raw;
  auto* run_cmd = app.add_subcommand("run", "Classify a corpus and score it");
  add_run_options(run_cmd, run_cfg, run_raw, true);

  RunConfig ablate_cfg;
  RawOptions ablate_raw;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run all six pipeline variants");
  add_run_options(ablate_cmd, ablate_cfg, ablate_raw, false);

  RunConfig feedback_cfg;
  RawOptions feedback_raw;
  auto* feedback_cmd =
      app.add_subcommand("feedback", "Single-call classification guided by earlier explanations");
  add_run_options(feedback_cmd, feedback_cfg, feedback_raw, false);
  feedback_cmd->add_option("--prior", feedback_cfg.prior, "Earlier run directory or verdicts file")
      ->required();

  RunConfig stats_cfg;
  auto* stats_cmd = app.add_subcommand("stats", "Label distribution per target");
  add_corpus_options(stats_cmd, stats_cfg);

  RunConfig sample_cfg;
  std::size_t sample_n = 0;
  std::string sample_out;
  auto* sample_cmd = app.add_subcommand("sample", "Write a stratified sample as JSON lines");
  add_corpus_options(sample_cmd, sample_cfg);
  sample_cmd->add_option("-n,--size", sample_n, "Sample size")->required();
  sample_cmd->add_option("--seed", sample_cfg.seed, "Sampling seed")->capture_default_str();
  sample_cmd->add_option("--out", sample_out, "Output file")->required();

  std::string compare_a, compare_b;
  auto* compare_cmd =
      app.add_subcommand("compare", "Paired t-test between two finished runs, paired by run index");
  compare_cmd->add_option("run_a", compare_a, "Run directory")->required();
  compare_cmd->add_option("run_b", compare_b, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      finish_config(run_cfg, run_raw);
      return print_run(panel::runner::run(run_cfg));
    }
    if (*feedback_cmd) {
      finish_config(feedback_cfg, feedback_raw);
      feedback_cfg.strategy = panel::pipeline::Strategy::kFeedback;
      return print_run(panel::runner::run(feedback_cfg));
    }
    if (*ablate_cmd) {
      finish_config(ablate_cfg, ablate_raw);
      const auto rows = panel::runner::run_ablation_sweep(ablate_cfg);
      int code = 0;
      for (const auto& row : rows) {
        print_summary(row.result);
        code = worst(code, row.result.exit_code());
      }
      const auto table = panel::runner::render_ablation(rows);
      std::filesystem::create_directories(ablate_cfg.output_dir);
      const auto stem = std::filesystem::path(ablate_cfg.output_dir) /
                        ("ablation-" + rows.front().result.config_digest.substr(0, 12));
      std::ofstream(stem.string() + ".txt") << table;
      std::ofstream(stem.string() + ".json") << panel::runner::ablation_json(rows).dump(2) << "\n";
      std::cout << table;
      return code;
    }
    if (*compare_cmd) {
      const auto a = panel::runner::run_headlines(compare_a);
      const auto b = panel::runner::run_headlines(compare_b);
      const auto t = panel::runner::compare_runs(a, b);
      std::cout << "runs " << a.size() << ", mean difference "
                << panel::metrics::format_percent(t.mean_difference) << " points, t = " << t.t
                << ", df = " << t.df << ", p = " << t.p
                << (t.significant_at_05() ? " (significant at 0.05)" : "") << "\n";
      return 0;
    }
    if (*stats_cmd || *sample_cmd) {
      auto& cfg = *stats_cmd ? stats_cfg : sample_cfg;
      const auto task = cfg.prompts_dir.empty() ? panel::load_builtin_task(cfg.task)
                                                : panel::load_builtin_task(cfg.task, cfg.prompts_dir);
      const auto schema = panel::datasets::resolve_schema(cfg.schema);
      const auto corpus = panel::datasets::load_delimited(cfg.corpus, schema, task.label_set);
      if (*stats_cmd) {
        std::cout << panel::datasets::render_stats(panel::datasets::stats(corpus, task.label_set));
      } else {
        const auto s = panel::datasets::sample(corpus, sample_n, sample_cfg.seed, task.label_set);
        panel::datasets::write_jsonl(s, sample_out);
        std::cerr << "wrote " << s.instances.size() << " instances (seed " << sample_cfg.seed
                  << ") to " << sample_out << "\n";
      }
      return 0;
    }
  } catch (const panel::Error& e) {
    std::cerr << "error [" << panel::to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
