#include "panel/pipeline.hpp"

#include <cctype>

#include "json.hpp"
#include "panel/error.hpp"
#include "panel/prompts.hpp"
#include "panel/text.hpp"

namespace panel {

std::string_view to_string(ParsePath p) noexcept {
  switch (p) {
    case ParsePath::kExactLetter: return "exact_letter";
    case ParsePath::kLetterPrefix: return "letter_prefix";
    case ParsePath::kLabelWord: return "label_word";
    case ParsePath::kStructuredObject: return "structured_object";
    case ParsePath::kFallback: return "fallback";
  }
  return "unknown";
}

}  // namespace panel

namespace panel::pipeline {

using Clock = std::chrono::steady_clock;
using prompts::PromptPair;

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::kCola: return "cola";
    case Strategy::kDirect: return "direct";
    case Strategy::kCot: return "cot";
    case Strategy::kFeedback: return "feedback";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view s) {
  for (auto st : {Strategy::kCola, Strategy::kDirect, Strategy::kCot, Strategy::kFeedback}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown strategy '" + std::string(s) + "'");
}

namespace {

std::string call_agent(StageContext& ctx, const Instance& instance, std::string_view stage,
                       std::string_view agent, const PromptPair& prompt, int max_tokens) {
  backend::ChatRequest request;
  request.model_id = ctx.backend.model_id();
  request.system = prompt.system;
  request.user = prompt.user;
  request.temperature = ctx.temperature;
  request.max_output_tokens = max_tokens;
  request.replica = ctx.replica;

  backend::ChatResponse response;
  try {
    response = ctx.backend.complete(request);
  } catch (const Error& e) {
    throw StageError(e.code(), std::string(stage), std::string(agent), instance.id, e.what());
  }
  if (ctx.transcripts) {
    ctx.transcripts->push_back(Transcript{std::string(stage), std::string(agent), prompt.system,
                                          prompt.user, response.text, response.from_cache,
                                          response.retries, response.latency});
  }
  return response.text;
}

// Prompt rendering problems (missing analyses, arity) are reported with the
// same stage tagging as backend failures.
template <typename Fn>
PromptPair render_or_tag(const Instance& instance, std::string_view stage,
                         std::string_view agent, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(e.code(), std::string(stage), std::string(agent), instance.id, e.what());
  }
}

}  // namespace

AnalysisBundle analyze(const Instance& instance, const TaskSpec& task, StageContext& ctx) {
  AnalysisBundle bundle;
  if (ctx.variant == AblationVariant::kDropAnalysisStage) {
    bundle.raw_only = true;
    return bundle;
  }
  for (const RoleSpec* role : task.active_roles(ctx.variant)) {
    const auto prompt = render_or_tag(instance, "analysis", role->role_id,
                                      [&] { return prompts::render_analyst(*role, instance); });
    bundle.analyses.emplace_back(
        role->role_id,
        call_agent(ctx, instance, "analysis", role->role_id, prompt, task.budget.analyst));
  }
  return bundle;
}

AnalysisBundle analyze(const Instance& instance, const TaskSpec& task,
                       backend::ChatBackend& backend, AblationVariant variant) {
  StageContext ctx{backend, variant};
  return analyze(instance, task, ctx);
}

std::vector<DebateArgument> debate(const Instance& instance, const AnalysisBundle& bundle,
                                   const TaskSpec& task, StageContext& ctx) {
  std::vector<DebateArgument> arguments;
  if (ctx.variant == AblationVariant::kDropDebateStage) return arguments;
  for (const auto& stance : task.label_set.labels()) {
    const auto prompt = render_or_tag(instance, "debate", stance.name, [&] {
      return prompts::render_debater(instance, bundle, stance, task, ctx.variant);
    });
    arguments.push_back(
        {stance, call_agent(ctx, instance, "debate", stance.name, prompt, task.budget.debater)});
  }
  return arguments;
}

Verdict conclude(const Instance& instance, const AnalysisBundle& bundle,
                 std::span<const DebateArgument> debates, const TaskSpec& task,
                 StageContext& ctx) {
  const auto prompt = render_or_tag(instance, "judgment", "judger", [&] {
    if (debates.empty() && ctx.variant == AblationVariant::kDropDebateStage) {
      return prompts::render_judger_from_analyses(instance, bundle, task);
    }
    return prompts::render_judger(instance, debates, task);
  });
  const auto raw = call_agent(ctx, instance, "judgment", "judger", prompt, task.budget.judger);
  return parse_verdict(raw, task);
}

// ---------------------------------------------------------------------------
// Verdict parsing

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::optional<std::size_t> find_word(std::string_view haystack, std::string_view word) {
  if (word.empty()) return std::nullopt;
  const std::string lower_hay = text::to_lower(haystack);
  const std::string lower_word = text::to_lower(word);
  std::size_t pos = 0;
  while ((pos = lower_hay.find(lower_word, pos)) != std::string::npos) {
    const bool left_ok = pos == 0 || !is_alnum(lower_hay[pos - 1]);
    const std::size_t end = pos + lower_word.size();
    const bool right_ok = end >= lower_hay.size() || !is_alnum(lower_hay[end]);
    if (left_ok && right_ok) return pos;
    ++pos;
  }
  return std::nullopt;
}

std::optional<Verdict> try_structured(std::string_view raw, const TaskSpec& task) {
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    return std::nullopt;
  }
  auto doc = nlohmann::json::parse(raw.substr(open, close - open + 1), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  auto it = doc.find("stance");
  if (it == doc.end() || !it->is_string()) return std::nullopt;
  const auto value = std::string(text::trim(it->get<std::string>()));

  const StanceLabel* label = nullptr;
  if (value.size() == 1) {
    if (auto idx = task.label_set.index_of_letter(text::to_upper(value)[0])) {
      label = &task.label_set[*idx];
    }
  }
  if (!label) {
    try {
      label = &task.label_set.normalize(value);
    } catch (const Error&) {
      // "B: Favor" and similar
      for (const auto& l : task.label_set.labels()) {
        if (value.size() > 1 && value[0] == l.letter && !is_alnum(value[1])) label = &l;
      }
    }
  }
  if (!label) return std::nullopt;

  Verdict verdict{*label, std::nullopt, ParsePath::kStructuredObject, std::string(raw)};
  if (auto ex = doc.find("explanation"); ex != doc.end() && ex->is_string()) {
    verdict.explanation = ex->get<std::string>();
  }
  return verdict;
}

// "A careful reading..." opens with the article, not option A: a sentence
// initial "A"/"a" followed by a lowercase word is skipped.
bool is_article(std::string_view raw, std::size_t begin, std::size_t end) {
  if (raw[begin] != 'A' && raw[begin] != 'a') return false;
  if (end + 1 >= raw.size() || raw[end] != ' ' ||
      !std::islower(static_cast<unsigned char>(raw[end + 1]))) {
    return false;
  }
  std::size_t k = begin;
  while (k > 0 && std::isspace(static_cast<unsigned char>(raw[k - 1]))) --k;
  return k == 0 || raw[k - 1] == '.' || raw[k - 1] == '!' || raw[k - 1] == '?' ||
         raw[k - 1] == '"';
}

std::optional<std::size_t> first_letter_token(std::string_view raw, const LabelSet& labels) {
  std::size_t token_index = 0;
  std::size_t i = 0;
  while (i < raw.size()) {
    if (!is_alnum(raw[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < raw.size() && is_alnum(raw[j])) ++j;
    if (j - i == 1 && !is_article(raw, i, j)) {
      const char c = raw[i];
      if (c >= 'A' && c <= 'Z') {
        if (auto idx = labels.index_of_letter(c)) return idx;
      } else if (c >= 'a' && c <= 'z' && token_index == 0) {
        if (auto idx = labels.index_of_letter(static_cast<char>(c - 'a' + 'A'))) return idx;
      }
    }
    ++token_index;
    i = j;
  }
  return std::nullopt;
}

}  // namespace

std::string_view final_answer_segment(std::string_view raw) noexcept {
  static constexpr std::string_view kMarker = "final answer";
  const std::string lower = text::to_lower(raw);
  const auto pos = lower.rfind(kMarker);
  if (pos == std::string::npos) return raw;
  auto rest = raw.substr(pos + kMarker.size());
  while (!rest.empty() && (rest.front() == ':' || rest.front() == ' ' || rest.front() == '*')) {
    rest.remove_prefix(1);
  }
  return rest.empty() ? raw : rest;
}

Verdict parse_verdict(std::string_view raw, const TaskSpec& task) {
  return parse_verdict(raw, task, task.explanation_mode);
}

Verdict parse_verdict(std::string_view raw, const TaskSpec& task, bool structured) {
  const auto& labels = task.label_set;
  const auto body = text::trim(raw);

  if (body.size() == 1) {
    if (auto idx = labels.index_of_letter(body[0])) {
      return {labels[*idx], std::nullopt, ParsePath::kExactLetter, std::string(raw)};
    }
  }
  if (structured) {
    if (auto verdict = try_structured(raw, task)) return *verdict;
  }
  if (auto idx = first_letter_token(body, labels)) {
    return {labels[*idx], std::nullopt, ParsePath::kLetterPrefix, std::string(raw)};
  }

  std::optional<std::size_t> best_pos;
  const StanceLabel* best = nullptr;
  for (const auto& label : labels.labels()) {
    for (std::string_view word : {std::string_view(label.display), std::string_view(label.name)}) {
      auto pos = find_word(body, word);
      if (pos && (!best_pos || *pos < *best_pos)) {
        best_pos = pos;
        best = &label;
      }
    }
  }
  if (best) return {*best, std::nullopt, ParsePath::kLabelWord, std::string(raw)};

  if (task.fallback_label) {
    return {labels.by_name(*task.fallback_label), std::nullopt, ParsePath::kFallback,
            std::string(raw)};
  }
  throw Error(ErrorCode::kUnparseableVerdict,
              "judger output matches no option: '" + std::string(body.substr(0, 120)) + "'");
}

// ---------------------------------------------------------------------------
// Whole-instance runs

namespace {

RunRecord new_record(const Instance& instance, const TaskSpec& task,
                     const backend::ChatBackend& backend, Strategy strategy,
                     AblationVariant variant, int run_index) {
  RunRecord record;
  record.instance_id = instance.id;
  record.run_index = run_index;
  record.task_name = task.task_name;
  record.strategy = strategy;
  record.variant = variant;
  record.backend = backend.identity();
  return record;
}

}  // namespace

RunRecord classify(const Instance& instance, const TaskSpec& task,
                   backend::ChatBackend& backend, AblationVariant variant, int run_index) {
  const auto start = Clock::now();
  auto record = new_record(instance, task, backend, Strategy::kCola, variant, run_index);
  StageContext ctx{backend, variant, run_index, 0.0, &record.transcripts};

  const auto bundle = analyze(instance, task, ctx);
  const auto debates = debate(instance, bundle, task, ctx);
  try {
    record.verdict = conclude(instance, bundle, debates, task, ctx);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUnparseableVerdict) throw;
    record.invalid_output = record.transcripts.back().response;
  }
  record.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
  return record;
}

RunRecord classify_single(const Instance& instance, const TaskSpec& task,
                          backend::ChatBackend& backend, Strategy strategy, int run_index,
                          std::optional<std::string_view> explanation) {
  const auto start = Clock::now();
  auto record = new_record(instance, task, backend, strategy, AblationVariant::kFull, run_index);
  StageContext ctx{backend, AblationVariant::kFull, run_index, 0.0, &record.transcripts};

  const auto stage = to_string(strategy);
  PromptPair prompt;
  switch (strategy) {
    case Strategy::kDirect:
      prompt = render_or_tag(instance, stage, "direct",
                             [&] { return prompts::render_direct(instance, task); });
      break;
    case Strategy::kCot:
      prompt = render_or_tag(instance, stage, "cot",
                             [&] { return prompts::render_cot(instance, task); });
      break;
    case Strategy::kFeedback:
      if (!explanation) {
        throw Error(ErrorCode::kMissingExplanation,
                    "no explanation for instance " + instance.id);
      }
      prompt = render_or_tag(instance, stage, "feedback", [&] {
        return prompts::render_explanation_feedback(instance, *explanation, task);
      });
      break;
    case Strategy::kCola:
      return classify(instance, task, backend, AblationVariant::kFull, run_index);
  }

  const auto raw = call_agent(ctx, instance, stage, stage, prompt, task.budget.single_call);
  const auto answer = strategy == Strategy::kCot ? final_answer_segment(raw) : std::string_view(raw);
  try {
    auto verdict = parse_verdict(answer, task, /*structured=*/false);
    verdict.raw = raw;
    record.verdict = std::move(verdict);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUnparseableVerdict) throw;
    record.invalid_output = raw;
  }
  record.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
  return record;
}

}  // namespace panel::pipeline
