#include "panel/runner.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "panel/digest.hpp"
#include "panel/error.hpp"
#include "panel/text.hpp"

namespace panel::runner {

namespace fs = std::filesystem;
using nlohmann::json;
using pipeline::RunRecord;
using pipeline::Strategy;

// ---------------------------------------------------------------------------
// Config

void RunConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); };
  if (task.empty()) bad("task is required");
  if (corpus.empty()) bad("corpus is required");
  if (repeats < 1) bad("repeats must be at least 1");
  if (concurrency < 1) bad("concurrency must be at least 1");
  if (sample_size && *sample_size == 0) bad("sample size must be positive");
  if (backend.mock_script.empty() && backend.endpoint.empty()) {
    bad("either a mock script or an endpoint is required");
  }
  if (backend.mock_script.empty() && backend.model.empty()) bad("model is required with an endpoint");
  if (backend.max_attempts < 1) bad("max attempts must be at least 1");
  if (strategy == Strategy::kFeedback && prior.empty()) {
    bad("the feedback strategy needs a prior run (verdicts file)");
  }
  if (strategy != Strategy::kCola && variant != AblationVariant::kFull) {
    bad("ablation variants apply to the cola strategy only");
  }
  if (metric != "auto") metrics::parse_headline(metric);
  if (max_instances && *max_instances == 0) bad("max instances must be positive");
}

json RunConfig::to_json() const {
  json j{{"task", task},
         {"prompts_dir", prompts_dir},
         {"corpus", corpus},
         {"schema", schema},
         {"variant", std::string(panel::to_string(variant))},
         {"strategy", std::string(pipeline::to_string(strategy))},
         {"repeats", repeats},
         {"seed", seed},
         {"output_dir", output_dir},
         {"concurrency", concurrency},
         {"explain", explain},
         {"prior", prior},
         {"metric", metric}};
  j["sample_size"] = sample_size ? json(*sample_size) : json(nullptr);
  j["backend"] = {{"mock_script", backend.mock_script},
                  {"endpoint", backend.endpoint},
                  {"model", backend.model},
                  {"api_key_env", backend.api_key_env},
                  {"timeout_s", backend.timeout_s},
                  {"max_attempts", backend.max_attempts},
                  {"backoff_ms", backend.backoff_ms},
                  {"cache_dir", backend.cache_dir},
                  {"no_cache", backend.no_cache}};
  return j;
}

int RunResult::exit_code() const noexcept {
  if (!finished) return 2;
  if (failures.empty()) return 0;
  std::set<std::string> failed;
  for (const auto& f : failures) failed.insert(f.instance_id);
  return failed.size() >= instances ? 1 : 2;
}

// ---------------------------------------------------------------------------
// Record serialization

namespace {

ParsePath parse_path_from(std::string_view s) {
  for (auto p : {ParsePath::kExactLetter, ParsePath::kLetterPrefix, ParsePath::kLabelWord,
                 ParsePath::kStructuredObject, ParsePath::kFallback}) {
    if (panel::to_string(p) == s) return p;
  }
  throw Error(ErrorCode::kMalformedResponse, "unknown parse path '" + std::string(s) + "'");
}

}  // namespace

json record_to_json(const RunRecord& r) {
  json j{{"instance_id", r.instance_id},
         {"run_index", r.run_index},
         {"task", r.task_name},
         {"strategy", std::string(pipeline::to_string(r.strategy))},
         {"variant", std::string(panel::to_string(r.variant))},
         {"backend", r.backend},
         {"elapsed_ms", r.elapsed.count()}};
  if (r.verdict) {
    json v{{"label", r.verdict->label.name},
           {"letter", std::string(1, r.verdict->label.letter)},
           {"parse_path", std::string(panel::to_string(r.verdict->parse_path))},
           {"raw", r.verdict->raw}};
    v["explanation"] = r.verdict->explanation ? json(*r.verdict->explanation) : json(nullptr);
    j["verdict"] = std::move(v);
  } else {
    j["verdict"] = nullptr;
  }
  j["invalid_output"] = r.invalid_output ? json(*r.invalid_output) : json(nullptr);
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  json transcripts = json::array();
  for (const auto& t : r.transcripts) {
    transcripts.push_back({{"stage", t.stage},
                           {"agent", t.agent},
                           {"system", t.system},
                           {"user", t.user},
                           {"response", t.response},
                           {"from_cache", t.from_cache},
                           {"retries", t.retries},
                           {"latency_ms", t.latency.count()}});
  }
  j["transcripts"] = std::move(transcripts);
  return j;
}

RunRecord record_from_json(const json& j, const TaskSpec& task) {
  try {
    RunRecord r;
    r.instance_id = j.at("instance_id").get<std::string>();
    r.run_index = j.at("run_index").get<int>();
    r.task_name = j.at("task").get<std::string>();
    r.strategy = pipeline::parse_strategy(j.at("strategy").get<std::string>());
    r.variant = parse_variant(j.at("variant").get<std::string>());
    r.backend = j.at("backend").get<std::string>();
    r.elapsed = std::chrono::milliseconds(j.value("elapsed_ms", 0LL));
    if (const auto& v = j.at("verdict"); !v.is_null()) {
      Verdict verdict{task.label_set.by_name(v.at("label").get<std::string>()), std::nullopt,
                      parse_path_from(v.at("parse_path").get<std::string>()),
                      v.at("raw").get<std::string>()};
      if (v.contains("explanation") && v["explanation"].is_string()) {
        verdict.explanation = v["explanation"].get<std::string>();
      }
      r.verdict = std::move(verdict);
    }
    if (j.contains("invalid_output") && j["invalid_output"].is_string()) {
      r.invalid_output = j["invalid_output"].get<std::string>();
    }
    if (j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();
    for (const auto& t : j.at("transcripts")) {
      r.transcripts.push_back(pipeline::Transcript{
          t.at("stage").get<std::string>(), t.at("agent").get<std::string>(),
          t.at("system").get<std::string>(), t.at("user").get<std::string>(),
          t.at("response").get<std::string>(), t.value("from_cache", false),
          t.value("retries", 0), std::chrono::milliseconds(t.value("latency_ms", 0LL))});
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, std::string("bad run record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Prior verdicts

std::vector<PriorVerdict> load_prior_verdicts(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "verdicts.jsonl" : path;
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIo, "cannot read prior verdicts " + file.string());
  std::vector<PriorVerdict> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("instance_id")) {
      throw Error(ErrorCode::kMalformedResponse,
                  file.string() + ":" + std::to_string(line_no) + ": not a verdict record");
    }
    PriorVerdict v;
    v.instance_id = j["instance_id"].get<std::string>();
    v.run_index = j.value("run_index", 1);
    if (j.contains("label") && j["label"].is_string()) v.label = j["label"].get<std::string>();
    if (j.contains("explanation") && j["explanation"].is_string()) {
      v.explanation = j["explanation"].get<std::string>();
    }
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Execution

namespace {

struct Setup {
  TaskSpec task;
  datasets::Corpus corpus;
  metrics::Headline headline = metrics::Headline::kFAvg;
  std::shared_ptr<backend::ChatBackend> backend;
  std::string digest;
};

std::string short_digest(const std::string& hex) { return hex.substr(0, 12); }

metrics::Headline choose_headline(const RunConfig& config, const datasets::Schema& schema,
                                  const LabelSet& labels) {
  const bool has_pair = labels.contains("favor") && labels.contains("against");
  std::string choice = config.metric;
  if (choice == "auto") {
    choice = schema.metric;
    if (choice == "f_avg" && !has_pair) choice.clear();
    if (choice.empty()) choice = has_pair ? "f_avg" : "macro_f1";
  }
  const auto h = metrics::parse_headline(choice);
  if (h == metrics::Headline::kFAvg && !has_pair) {
    throw Error(ErrorCode::kMissingClass, "F_avg needs favor and against labels");
  }
  return h;
}

std::shared_ptr<backend::ChatBackend> make_backend(const RunConfig& config) {
  std::shared_ptr<backend::ChatBackend> inner;
  const auto& b = config.backend;
  if (!b.mock_script.empty()) {
    inner = std::make_shared<backend::MockBackend>(backend::load_mock_script(b.mock_script));
  } else {
    backend::HttpConfig http;
    http.endpoint = b.endpoint;
    http.model_id = b.model;
    http.api_key_env = b.api_key_env;
    http.timeout = std::chrono::seconds(b.timeout_s);
    http.retry.max_attempts = b.max_attempts;
    http.retry.initial_delay = std::chrono::milliseconds(b.backoff_ms);
    http.max_in_flight = config.concurrency;
    inner = std::make_shared<backend::HttpBackend>(std::move(http));
  }
  if (b.no_cache) return inner;
  const fs::path cache_dir = b.cache_dir.empty() ? fs::path(config.output_dir) / "cache"
                                                 : fs::path(b.cache_dir);
  return std::make_shared<backend::CachingBackend>(
      inner, std::make_shared<backend::ResponseCache>(cache_dir));
}

Setup prepare(const RunConfig& config) {
  config.validate();
  Setup s;
  s.task = config.prompts_dir.empty() ? load_builtin_task(config.task)
                                      : load_builtin_task(config.task, config.prompts_dir);
  s.task.explanation_mode = config.explain;
  const auto schema = datasets::resolve_schema(config.schema);
  s.corpus = datasets::load_delimited(config.corpus, schema, s.task.label_set, s.task.task_name);
  if (s.corpus.instances.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "corpus " + config.corpus + " has no instances");
  }
  if (config.sample_size) {
    s.corpus = datasets::sample(s.corpus, *config.sample_size, config.seed, s.task.label_set);
  }
  s.headline = choose_headline(config, schema, s.task.label_set);
  // Fail early on a variant the task cannot honor.
  if (config.strategy == Strategy::kCola) s.task.active_roles(config.variant);
  s.backend = make_backend(config);

  // Everything that can change a prediction goes into the digest; output
  // location, parallelism and resume controls do not.
  auto relevant = config.to_json();
  for (const char* key : {"output_dir", "concurrency"}) relevant.erase(key);
  relevant["backend"].erase("cache_dir");
  relevant["backend"].erase("no_cache");
  relevant["backend"].erase("timeout_s");
  relevant["backend"].erase("max_attempts");
  relevant["backend"].erase("backoff_ms");
  FieldHasher h;
  h.add(relevant.dump());
  h.add(s.backend->identity());
  for (const auto& inst : s.corpus.instances) h.add(inst.id);
  s.digest = h.hex();
  return s;
}

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  return ss.str();
}

// An earlier run with the same digest that never wrote its report.
std::optional<fs::path> find_unfinished(const fs::path& root, const std::string& digest) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) return std::nullopt;
  const std::string suffix = "-" + short_digest(digest);
  std::vector<fs::path> candidates;
  for (const auto& entry : fs::directory_iterator(root, ec)) {
    if (!entry.is_directory()) continue;
    const auto name = entry.path().filename().string();
    if (name.size() < suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    if (fs::exists(entry.path() / "report.json")) continue;
    candidates.push_back(entry.path());
  }
  if (candidates.empty()) return std::nullopt;
  std::sort(candidates.begin(), candidates.end());
  return candidates.back();
}

fs::path choose_run_dir(const RunConfig& config, const std::string& digest) {
  const fs::path root(config.output_dir);
  if (!config.run_id.empty()) return root / config.run_id;
  if (!config.fresh) {
    if (auto dir = find_unfinished(root, digest)) return *dir;
  }
  const std::string base = utc_stamp() + "-" + short_digest(digest);
  fs::path dir = root / base;
  for (int n = 2; fs::exists(dir); ++n) dir = root / (base + "-" + std::to_string(n));
  return dir;
}

void write_atomic(const fs::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot move " + tmp.string() + " into place");
  }
}

std::string record_file_name(const std::string& id) {
  std::string safe;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
                    c == '.' || c == '~';
    safe.push_back(ok ? c : '_');
  }
  if (safe != id || safe.empty() || safe.front() == '.') {
    safe += "-" + sha256_hex(id).substr(0, 8);
  }
  return safe + ".jsonl";
}

// Complete records for every repeat, or nullopt when the instance must run.
std::optional<std::vector<RunRecord>> load_finished(const fs::path& file, const TaskSpec& task,
                                                    int repeats) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  std::vector<RunRecord> records;
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      const json j = json::parse(line);
      records.push_back(record_from_json(j, task));
    }
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (records.size() != static_cast<std::size_t>(repeats)) return std::nullopt;
  for (int r = 0; r < repeats; ++r) {
    if (records[r].run_index != r + 1 || !records[r].complete()) return std::nullopt;
  }
  return records;
}

struct InstanceOutcome {
  std::vector<RunRecord> records;
  std::vector<Failure> failures;
  bool done = false;
  bool resumed = false;
};

InstanceOutcome execute_instance(const Instance& inst, const Setup& s, const RunConfig& config,
                                 const std::optional<std::string>& explanation) {
  InstanceOutcome out;
  for (int r = 1; r <= config.repeats; ++r) {
    RunRecord record;
    try {
      if (config.strategy == Strategy::kCola) {
        record = pipeline::classify(inst, s.task, *s.backend, config.variant, r);
      } else {
        std::optional<std::string_view> expl;
        if (explanation) expl = *explanation;
        record = pipeline::classify_single(inst, s.task, *s.backend, config.strategy, r, expl);
      }
    } catch (const Error& e) {
      record = RunRecord{};
      record.instance_id = inst.id;
      record.run_index = r;
      record.task_name = s.task.task_name;
      record.strategy = config.strategy;
      record.variant = config.variant;
      record.backend = s.backend->identity();
      record.error = std::string(to_string(e.code())) + ": " + e.what();
      Failure f{inst.id, r, "", "", std::string(to_string(e.code())), e.what()};
      if (const auto* se = dynamic_cast<const StageError*>(&e)) {
        f.stage = se->stage();
        f.agent = se->agent();
      }
      out.failures.push_back(std::move(f));
    }
    out.records.push_back(std::move(record));
  }
  out.done = true;
  return out;
}

json prediction_line(const Instance& inst, const RunRecord& r) {
  json j{{"instance_id", inst.id}};
  j["gold"] = inst.gold ? json(*inst.gold) : json(nullptr);
  if (r.verdict) {
    j["predicted"] = r.verdict->label.name;
    j["parse_path"] = std::string(panel::to_string(r.verdict->parse_path));
  } else {
    j["predicted"] = nullptr;
    j["parse_path"] = r.invalid_output ? "invalid" : "failed";
  }
  j["run_index"] = r.run_index;
  return j;
}

json verdict_line(const RunRecord& r) {
  json j{{"instance_id", r.instance_id}, {"run_index", r.run_index}};
  j["label"] = r.verdict ? json(r.verdict->label.name) : json(nullptr);
  j["parse_path"] = r.verdict ? json(std::string(panel::to_string(r.verdict->parse_path)))
                              : json(nullptr);
  j["explanation"] = r.verdict && r.verdict->explanation ? json(*r.verdict->explanation)
                                                         : json(nullptr);
  j["raw"] = r.verdict ? json(r.verdict->raw)
                       : (r.invalid_output ? json(*r.invalid_output) : json(nullptr));
  return j;
}

json failures_json(const std::vector<Failure>& failures) {
  json arr = json::array();
  for (const auto& f : failures) {
    arr.push_back({{"instance_id", f.instance_id},
                   {"run_index", f.run_index},
                   {"stage", f.stage},
                   {"agent", f.agent},
                   {"code", f.code},
                   {"message", f.message}});
  }
  return arr;
}

RunResult execute(const RunConfig& config, Setup s,
                  const std::map<std::string, std::string>* explanations) {
  RunResult result;
  result.config_digest = s.digest;
  result.instances = s.corpus.instances.size();
  result.run_dir = choose_run_dir(config, s.digest);
  result.run_id = result.run_dir.filename().string();
  const fs::path records_dir = result.run_dir / "records";
  std::error_code ec;
  fs::create_directories(records_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + records_dir.string());

  auto snapshot = config.to_json();
  snapshot["run_id"] = result.run_id;
  snapshot["config_digest"] = s.digest;
  write_atomic(result.run_dir / "config.snapshot.json", snapshot.dump(2) + "\n");

  const auto& instances = s.corpus.instances;
  std::vector<InstanceOutcome> outcomes(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (auto done = load_finished(records_dir / record_file_name(instances[i].id), s.task,
                                  config.repeats)) {
      outcomes[i].records = std::move(*done);
      outcomes[i].done = true;
      outcomes[i].resumed = true;
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> started{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= instances.size()) return;
      if (outcomes[i].done) continue;
      if (config.max_instances && started.fetch_add(1) >= *config.max_instances) return;
      try {
        std::optional<std::string> explanation;
        if (explanations) explanation = explanations->at(instances[i].id);
        auto outcome = execute_instance(instances[i], s, config, explanation);
        std::string body;
        for (const auto& r : outcome.records) body += record_to_json(r).dump() + "\n";
        write_atomic(records_dir / record_file_name(instances[i].id), body);
        outcomes[i] = std::move(outcome);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(instances.size());
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto workers = std::min<std::size_t>(config.concurrency, instances.size());
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  result.finished = true;
  for (const auto& o : outcomes) {
    if (!o.done) {
      result.finished = false;
      continue;
    }
    if (o.resumed) {
      ++result.resumed;
      continue;
    }
    ++result.executed;
    for (const auto& r : o.records) {
      for (const auto& t : r.transcripts) {
        ++result.backend_calls;
        (t.from_cache ? result.cache_hits : result.cache_misses) += 1;
      }
    }
    result.failures.insert(result.failures.end(), o.failures.begin(), o.failures.end());
  }
  if (!result.finished) return result;

  // Single-threaded reduce in corpus order.
  std::string predictions;
  std::string verdicts;
  std::vector<std::vector<metrics::Prediction>> per_run(config.repeats);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    const auto& records = outcomes[i].records;
    const bool all_complete = std::all_of(records.begin(), records.end(),
                                          [](const RunRecord& r) { return r.complete(); });
    for (const auto& r : records) {
      predictions += prediction_line(inst, r).dump() + "\n";
      verdicts += verdict_line(r).dump() + "\n";
      if (!all_complete || !inst.gold) continue;
      metrics::Prediction p{inst.id, inst.target, *inst.gold, std::nullopt};
      if (r.verdict) p.predicted = r.verdict->label.name;
      per_run[r.run_index - 1].push_back(std::move(p));
    }
  }
  write_atomic(result.run_dir / "predictions.jsonl", predictions);
  write_atomic(result.run_dir / "verdicts.jsonl", verdicts);

  if (!per_run.front().empty()) {
    std::vector<metrics::ScoreReport> reports;
    for (int r = 0; r < config.repeats; ++r) {
      reports.push_back(metrics::score_run(per_run[r], s.task.label_set, s.headline, r + 1));
    }
    result.report = metrics::aggregate_runs(reports);
  }

  std::sort(result.failures.begin(), result.failures.end(), [&](const Failure& a, const Failure& b) {
    return std::tie(a.instance_id, a.run_index) < std::tie(b.instance_id, b.run_index);
  });
  json metadata{{"task", s.task.task_name},
                {"strategy", std::string(pipeline::to_string(config.strategy))},
                {"variant", std::string(panel::to_string(config.variant))},
                {"backend", s.backend->identity()},
                {"corpus", s.corpus.name},
                {"split", std::string(datasets::to_string(s.corpus.split))},
                {"instances", instances.size()},
                {"repeats", config.repeats},
                {"explain", config.explain},
                {"config_digest", s.digest}};
  metadata["sample"] = config.sample_size
                           ? json{{"size", *config.sample_size}, {"seed", config.seed}}
                           : json(nullptr);
  if (result.report) {
    emit_report(*result.report, config, result.failures, metadata, result.run_dir);
  } else {
    // Unlabeled corpus or nothing scored: still mark the run finished.
    json j = metadata;
    j["metric"] = std::string(metrics::to_string(s.headline));
    j["scores"] = nullptr;
    j["failures"] = failures_json(result.failures);
    write_atomic(result.run_dir / "report.json", j.dump(2) + "\n");
    std::string txt = "No scored instances.\n";
    if (!result.failures.empty()) txt += render_report(metrics::ScoreReport{}, config, result.failures);
    write_atomic(result.run_dir / "report.txt", txt);
  }
  return result;
}

}  // namespace

RunResult run(const RunConfig& config) {
  if (config.strategy == Strategy::kFeedback) {
    config.validate();
    return run_feedback(config, load_prior_verdicts(config.prior));
  }
  return execute(config, prepare(config), nullptr);
}

RunResult run_feedback(const RunConfig& config, const std::vector<PriorVerdict>& prior) {
  RunConfig cfg = config;
  cfg.strategy = Strategy::kFeedback;
  if (cfg.prior.empty()) cfg.prior = "<in-memory>";
  auto setup = prepare(cfg);

  // Prefer the explanation from run 1; fall back to the lowest run that has one.
  std::map<std::string, std::pair<int, std::string>> best;
  for (const auto& v : prior) {
    if (!v.explanation || text::trim(*v.explanation).empty()) continue;
    auto it = best.find(v.instance_id);
    if (it == best.end() || v.run_index < it->second.first) {
      best[v.instance_id] = {v.run_index, *v.explanation};
    }
  }
  std::map<std::string, std::string> explanations;
  for (const auto& inst : setup.corpus.instances) {
    auto it = best.find(inst.id);
    if (it == best.end()) {
      throw Error(ErrorCode::kMissingExplanation, "no prior explanation for instance " + inst.id);
    }
    explanations[inst.id] = it->second.second;
  }
  return execute(cfg, std::move(setup), &explanations);
}

std::vector<AblationRow> run_ablation_sweep(const RunConfig& base) {
  if (base.strategy != Strategy::kCola) {
    throw Error(ErrorCode::kInvalidConfig, "ablation sweeps need the cola strategy");
  }
  std::vector<AblationRow> rows;
  for (auto variant : all_variants()) {
    RunConfig cfg = base;
    cfg.variant = variant;
    rows.push_back({variant, run(cfg)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string metric_title(metrics::Headline h) {
  return h == metrics::Headline::kFAvg ? "F_avg" : "Macro-F1";
}

std::string opt_percent(const std::optional<double>& v) {
  return v ? metrics::format_percent(*v) : "-";
}

double target_headline(const metrics::TargetScore& t, metrics::Headline h) {
  if (h == metrics::Headline::kFAvg && t.f_avg) return *t.f_avg;
  return t.macro_f1;
}

// Left-aligned text table.
std::string table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += row[c];
      if (c + 1 < row.size()) line += std::string(width[c] - row[c].size() + 2, ' ');
    }
    out << line << '\n';
  }
  return out.str();
}

}  // namespace

json report_json(const metrics::ScoreReport& r) {
  json classes = json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"label", c.label},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1},
                       {"support", c.support}});
  }
  json targets = json::array();
  for (const auto& t : r.targets) {
    json tj{{"target", t.target}, {"macro_f1", t.macro_f1}, {"n", t.n}};
    tj["f_avg"] = t.f_avg ? json(*t.f_avg) : json(nullptr);
    targets.push_back(std::move(tj));
  }
  json runs = json::array();
  for (const auto& run : r.runs) {
    json rj{{"run_index", run.run_index},
            {"macro_f1", run.macro_f1},
            {"accuracy", run.accuracy},
            {"n", run.n},
            {"invalid", run.invalid}};
    rj["f_avg"] = run.f_avg ? json(*run.f_avg) : json(nullptr);
    runs.push_back(std::move(rj));
  }
  json j{{"labels", r.labels},
         {"metric", std::string(metrics::to_string(r.headline_metric))},
         {"headline", r.headline()},
         {"macro_f1", r.macro_f1},
         {"accuracy", r.accuracy},
         {"n", r.n},
         {"invalid", r.invalid},
         {"run_count", r.run_count},
         {"classes", std::move(classes)},
         {"targets", std::move(targets)},
         {"runs", std::move(runs)}};
  j["f_avg"] = r.f_avg ? json(*r.f_avg) : json(nullptr);
  return j;
}

std::vector<double> run_headlines(const metrics::ScoreReport& report) {
  std::vector<double> out;
  for (const auto& run : report.runs) {
    const bool f = report.headline_metric == metrics::Headline::kFAvg && run.f_avg;
    out.push_back(f ? *run.f_avg : run.macro_f1);
  }
  return out;
}

std::vector<double> run_headlines(const fs::path& run_dir) {
  const fs::path file = run_dir / "report.json";
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + file.string() + " (unfinished run?)");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, file.string() + ": " + e.what());
  }
  const auto& scores = j.at("scores");
  if (scores.is_null()) throw Error(ErrorCode::kDegenerateInput, file.string() + " has no scores");
  const bool f = scores.at("metric") == "f_avg";
  std::vector<double> out;
  for (const auto& run : scores.at("runs")) {
    out.push_back(f && run.at("f_avg").is_number() ? run.at("f_avg").get<double>()
                                                   : run.at("macro_f1").get<double>());
  }
  return out;
}

metrics::TTestResult compare_runs(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDegenerateInput, "runs differ in count: " + std::to_string(a.size()) +
                                                 " vs " + std::to_string(b.size()));
  }
  return metrics::paired_t_test(a, b);
}

std::string render_report(const metrics::ScoreReport& r, const RunConfig& config,
                          const std::vector<Failure>& failures) {
  std::ostringstream out;
  if (!r.labels.empty()) {
    out << "Task " << config.task << ", strategy " << pipeline::to_string(config.strategy)
        << ", variant " << panel::to_string(config.variant) << "\n"
        << metric_title(r.headline_metric) << " in percent, mean of " << r.run_count
        << " run(s), n = " << r.n << "\n\n";

    std::vector<std::vector<std::string>> main{{"Method"}};
    std::vector<std::string> row{std::string(pipeline::to_string(config.strategy)) + "/" +
                                 std::string(panel::to_string(config.variant))};
    for (const auto& t : r.targets) {
      main[0].push_back(t.target);
      row.push_back(metrics::format_percent(target_headline(t, r.headline_metric)));
    }
    if (r.targets.size() != 1) {
      main[0].push_back("All");
      row.push_back(metrics::format_percent(r.headline()));
    }
    main.push_back(std::move(row));
    out << table(main) << '\n';

    std::vector<std::vector<std::string>> classes{{"Class", "Precision", "Recall", "F1", "Support"}};
    for (const auto& c : r.classes) {
      classes.push_back({c.label, metrics::format_percent(c.precision),
                         metrics::format_percent(c.recall), metrics::format_percent(c.f1),
                         std::to_string(c.support)});
    }
    out << table(classes) << '\n';

    std::vector<std::vector<std::string>> runs{{"Run", "F_avg", "Macro-F1", "Accuracy", "Invalid"}};
    for (const auto& run : r.runs) {
      runs.push_back({std::to_string(run.run_index), opt_percent(run.f_avg),
                      metrics::format_percent(run.macro_f1), metrics::format_percent(run.accuracy),
                      std::to_string(run.invalid)});
    }
    out << table(runs);
  }
  if (!failures.empty()) {
    out << "\nFailures (" << failures.size() << ")\n";
    for (const auto& f : failures) {
      out << "  " << f.instance_id << " run " << f.run_index;
      if (!f.stage.empty()) out << " [" << f.stage << "/" << f.agent << "]";
      out << " " << f.code << ": " << f.message << '\n';
    }
  }
  return out.str();
}

void emit_report(const metrics::ScoreReport& report, const RunConfig& config,
                 const std::vector<Failure>& failures, const json& metadata, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  json j = metadata;
  j["scores"] = report_json(report);
  j["failures"] = failures_json(failures);
  write_atomic(dir / "report.json", j.dump(2) + "\n");
  write_atomic(dir / "report.txt", render_report(report, config, failures));
}

std::string render_ablation(const std::vector<AblationRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Variant"};
  const metrics::ScoreReport* first = nullptr;
  for (const auto& row : rows) {
    if (row.result.report) {
      first = &*row.result.report;
      break;
    }
  }
  if (first) {
    for (const auto& t : first->targets) header.push_back(t.target);
    if (first->targets.size() != 1) header.push_back("All");
  }
  header.push_back("Failures");
  cells.push_back(header);
  for (const auto& row : rows) {
    std::vector<std::string> line{std::string(panel::to_string(row.variant))};
    if (first) {
      if (const auto& r = row.result.report) {
        for (const auto& t : r->targets) line.push_back(metrics::format_percent(target_headline(t, r->headline_metric)));
        if (r->targets.size() != 1) line.push_back(metrics::format_percent(r->headline()));
      } else {
        for (std::size_t c = 1; c + 1 < header.size(); ++c) line.push_back("-");
      }
    }
    line.push_back(std::to_string(row.result.failures.size()));
    cells.push_back(std::move(line));
  }
  std::string title = "Ablation";
  if (first) title += " (" + metric_title(first->headline_metric) + " in percent)";
  return title + "\n" + table(cells);
}

json ablation_json(const std::vector<AblationRow>& rows) {
  json arr = json::array();
  for (const auto& row : rows) {
    json j{{"variant", std::string(panel::to_string(row.variant))},
           {"run_id", row.result.run_id},
           {"failures", row.result.failures.size()}};
    j["scores"] = row.result.report ? report_json(*row.result.report) : json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace panel::runner
