#include "panel/domain.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "panel/digest.hpp"
#include "panel/error.hpp"
#include "panel/text.hpp"

#ifndef PANEL_DEFAULT_PROMPTS_DIR
#define PANEL_DEFAULT_PROMPTS_DIR "prompts"
#endif

namespace panel {

using nlohmann::json;

// ---------------------------------------------------------------------------
// LabelSet

LabelSet::LabelSet(std::vector<StanceLabel> labels,
                   const std::map<std::string, std::string>& aliases)
    : labels_(std::move(labels)) {
  if (labels_.size() < 2 || labels_.size() > 3) {
    throw Error(ErrorCode::kInvalidTask,
                "a label set holds 2 or 3 labels, got " +
                    std::to_string(labels_.size()));
  }
  std::set<char> letters;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    auto& label = labels_[i];
    if (label.name.empty() || label.name != text::to_lower(label.name) ||
        text::trim(label.name) != label.name) {
      throw Error(ErrorCode::kInvalidTask,
                  "label name must be lowercase and non-empty: '" + label.name + "'");
    }
    if (label.letter < 'A' || label.letter > 'Z' || !letters.insert(label.letter).second) {
      throw Error(ErrorCode::kInvalidTask,
                  "option letter for '" + label.name + "' must be a unique uppercase letter");
    }
    if (label.display.empty()) {
      label.display = label.name;
      label.display[0] = text::to_upper(label.display.substr(0, 1))[0];
    }
    if (!aliases_.emplace(label.name, i).second) {
      throw Error(ErrorCode::kInvalidTask, "duplicate label '" + label.name + "'");
    }
  }
  for (const auto& [raw, name] : aliases) {
    auto idx = index_of(name);
    if (!idx) {
      throw Error(ErrorCode::kInvalidTask,
                  "alias '" + raw + "' points at unknown label '" + name + "'");
    }
    auto [it, inserted] = aliases_.emplace(text::fold(raw), *idx);
    if (!inserted && it->second != *idx) {
      throw Error(ErrorCode::kInvalidTask,
                  "alias '" + raw + "' resolves to two labels");
    }
  }
}

std::optional<std::size_t> LabelSet::index_of(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].name == name) return i;
  }
  return std::nullopt;
}

const StanceLabel& LabelSet::by_name(std::string_view name) const {
  auto idx = index_of(name);
  if (!idx) {
    throw Error(ErrorCode::kUnknownLabel, "label '" + std::string(name) + "' not in set");
  }
  return labels_[*idx];
}

const StanceLabel& LabelSet::normalize(std::string_view raw) const {
  if (labels_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty label set");
  }
  auto it = aliases_.find(text::fold(raw));
  if (it == aliases_.end()) {
    throw Error(ErrorCode::kUnknownLabel, "unknown label '" + std::string(raw) + "'");
  }
  return labels_[it->second];
}

std::optional<std::size_t> LabelSet::index_of_letter(char letter) const noexcept {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].letter == letter) return i;
  }
  return std::nullopt;
}

const StanceLabel& LabelSet::for_letter(char letter) const {
  auto idx = index_of_letter(letter);
  if (!idx) {
    throw Error(ErrorCode::kUnknownOption,
                std::string("option '") + letter + "' is not in the menu");
  }
  return labels_[*idx];
}

std::string LabelSet::menu() const {
  std::string out;
  for (const auto& label : labels_) {
    if (!out.empty()) out += ' ';
    out += label.letter;
    out += ": ";
    out += label.display;
  }
  return out;
}

const StanceLabel& normalize_label(std::string_view raw, const LabelSet& set) {
  return set.normalize(raw);
}

const StanceLabel& label_for_letter(char letter, const LabelSet& set) {
  return set.for_letter(letter);
}

// ---------------------------------------------------------------------------
// Instance

std::string derive_instance_id(std::string_view document, std::string_view target) {
  return FieldHasher().add(document).add(target).hex().substr(0, 16);
}

Instance make_instance(std::string_view document, std::string_view target,
                       std::optional<std::string_view> raw_gold,
                       const LabelSet& labels, std::string id) {
  Instance inst;
  inst.document = std::string(text::trim(document));
  inst.target = std::string(text::trim(target));
  if (inst.document.empty()) {
    throw Error(ErrorCode::kEmptyDocument, "instance document is empty");
  }
  if (inst.target.empty()) {
    throw Error(ErrorCode::kEmptyDocument, "instance target is empty");
  }
  if (raw_gold) inst.gold = labels.normalize(*raw_gold).name;
  inst.id = id.empty() ? derive_instance_id(inst.document, inst.target) : std::move(id);
  return inst;
}

// ---------------------------------------------------------------------------
// Bindings

const std::string& LookupTable::find(std::string_view key) const {
  auto it = entries.find(text::fold(key));
  return it == entries.end() ? fallback : it->second;
}

Binding Binding::parse(
    std::string_view spec,
    const std::map<std::string, std::shared_ptr<const LookupTable>>& tables) {
  Binding b;
  if (spec == "document") {
    b.source = Source::kDocument;
  } else if (spec == "target") {
    b.source = Source::kTarget;
  } else if (spec == "id") {
    b.source = Source::kId;
  } else if (spec.rfind("value:", 0) == 0) {
    b.source = Source::kValue;
    b.value = std::string(spec.substr(6));
  } else if (spec.rfind("lookup:", 0) == 0) {
    b.source = Source::kLookup;
    b.value = std::string(spec.substr(7));
    auto it = tables.find(b.value);
    if (it == tables.end()) {
      throw Error(ErrorCode::kInvalidTask, "unknown lookup table '" + b.value + "'");
    }
    b.table = it->second;
  } else {
    throw Error(ErrorCode::kInvalidTask, "bad binding '" + std::string(spec) + "'");
  }
  return b;
}

std::string Binding::resolve(const Instance& instance) const {
  switch (source) {
    case Source::kDocument:
      return instance.document;
    case Source::kTarget:
      return instance.target;
    case Source::kId:
      return instance.id;
    case Source::kValue:
      return std::string(text::trim(value));
    case Source::kLookup:
      return std::string(text::trim(table->find(instance.target)));
  }
  return {};
}

bool is_reserved_placeholder(std::string_view name) noexcept {
  return name == "stance" || name == "options" || name == "explanation" ||
         name.rfind("analysis.", 0) == 0 || name.rfind("argument.", 0) == 0;
}

TemplateContext resolve_bindings(const Bindings& bindings, const Instance& instance) {
  TemplateContext ctx;
  for (const auto& [name, binding] : bindings) {
    ctx.emplace(name, binding.resolve(instance));
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Variants

const std::vector<AblationVariant>& all_variants() {
  static const std::vector<AblationVariant> kAll{
      AblationVariant::kFull,           AblationVariant::kDropLinguist,
      AblationVariant::kDropDomain,     AblationVariant::kDropSocial,
      AblationVariant::kDropAnalysisStage, AblationVariant::kDropDebateStage};
  return kAll;
}

std::string_view to_string(AblationVariant v) noexcept {
  switch (v) {
    case AblationVariant::kFull: return "full";
    case AblationVariant::kDropLinguist: return "drop_linguist";
    case AblationVariant::kDropDomain: return "drop_domain";
    case AblationVariant::kDropSocial: return "drop_social";
    case AblationVariant::kDropAnalysisStage: return "drop_analysis_stage";
    case AblationVariant::kDropDebateStage: return "drop_debate_stage";
  }
  return "unknown";
}

AblationVariant parse_variant(std::string_view s) {
  for (auto v : all_variants()) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown variant '" + std::string(s) + "'");
}

std::optional<std::string_view> dropped_role(AblationVariant v) noexcept {
  switch (v) {
    case AblationVariant::kDropLinguist: return "linguist";
    case AblationVariant::kDropDomain: return "domain";
    case AblationVariant::kDropSocial: return "social";
    default: return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// TaskSpec

const RoleSpec* TaskSpec::find_role(std::string_view role_id) const noexcept {
  for (const auto& role : analyst_roles) {
    if (role.role_id == role_id) return &role;
  }
  return nullptr;
}

std::vector<const RoleSpec*> TaskSpec::active_roles(AblationVariant variant) const {
  std::vector<const RoleSpec*> roles;
  if (variant == AblationVariant::kDropAnalysisStage) return roles;
  auto dropped = dropped_role(variant);
  if (dropped && !find_role(*dropped)) {
    throw Error(ErrorCode::kInvalidTask,
                "variant " + std::string(to_string(variant)) + " does not apply to task " +
                    task_name + " (no '" + std::string(*dropped) + "' analyst)");
  }
  for (const auto& role : analyst_roles) {
    if (dropped && role.role_id == *dropped) continue;
    roles.push_back(&role);
  }
  if (roles.empty()) {
    throw Error(ErrorCode::kInvalidTask,
                "task " + task_name + " has no active analyst under " +
                    std::string(to_string(variant)));
  }
  return roles;
}

namespace {

void check_bound(const Template& tpl, const std::string& what, const Bindings& bindings,
                 const std::function<bool(const std::string&)>& stage_provided) {
  for (const auto& name : tpl.variables()) {
    if (bindings.count(name) || stage_provided(name)) continue;
    throw Error(ErrorCode::kUnboundPlaceholder,
                what + ": placeholder {" + name + "} has no binding");
  }
}

void require(bool cond, const std::string& message) {
  if (!cond) throw Error(ErrorCode::kInvalidTask, message);
}

}  // namespace

void TaskSpec::validate() const {
  require(!task_name.empty(), "task_name is empty");
  require(label_set.size() >= 2 && label_set.size() <= 3,
          task_name + ": label set must hold 2 or 3 labels");
  for (const auto& [name, _] : bindings) {
    require(!is_reserved_placeholder(name),
            task_name + ": binding name {" + name + "} is reserved");
  }

  std::set<std::string> role_ids;
  for (const auto& role : analyst_roles) {
    require(!role.role_id.empty(), task_name + ": analyst without role_id");
    require(role_ids.insert(role.role_id).second,
            task_name + ": duplicate analyst role '" + role.role_id + "'");
    require(!role.user_template.empty(),
            task_name + ": analyst '" + role.role_id + "' has an empty template");
    auto none = [](const std::string&) { return false; };
    check_bound(role.user_template, task_name + "/" + role.role_id,
                role.placeholder_bindings, none);
    check_bound(role.system_instruction, task_name + "/" + role.role_id + " system",
                role.placeholder_bindings, none);
  }

  auto is_analysis = [&](const std::string& n) {
    return n.rfind("analysis.", 0) == 0 && role_ids.count(n.substr(9));
  };
  auto is_argument = [&](const std::string& n) {
    return n.rfind("argument.", 0) == 0 && label_set.contains(n.substr(9));
  };

  require(!debater_template.empty(), task_name + ": debater template is empty");
  check_bound(debater_template, task_name + "/debater", bindings,
              [&](const std::string& n) { return n == "stance" || is_analysis(n); });
  check_bound(debater_system, task_name + "/debater system", bindings,
              [](const std::string& n) { return n == "stance"; });
  for (const auto& role : analyst_roles) {
    require(debater_template.references("analysis." + role.role_id),
            task_name + ": debater template does not reference {analysis." +
                role.role_id + "}");
  }

  require(!judger_template.empty(), task_name + ": judger template is empty");
  check_bound(judger_template, task_name + "/judger", bindings,
              [&](const std::string& n) { return n == "options" || is_argument(n); });
  check_bound(judger_system, task_name + "/judger system", bindings,
              [](const std::string&) { return false; });
  std::vector<std::string> arg_sections;
  for (const auto& s : judger_template.sections()) {
    if (s.rfind("argument.", 0) == 0) arg_sections.push_back(s.substr(9));
  }
  std::vector<std::string> label_order;
  for (const auto& l : label_set.labels()) label_order.push_back(l.name);
  require(arg_sections == label_order,
          task_name + ": judger argument sections must appear once per label in menu order");

  if (!judger_no_debate_template.empty()) {
    check_bound(judger_no_debate_template, task_name + "/judger_noDebate", bindings,
                [&](const std::string& n) { return n == "options" || is_analysis(n); });
  }
  auto options_only = [](const std::string& n) { return n == "options"; };
  if (!direct_template.empty()) {
    check_bound(direct_template, task_name + "/direct", bindings, options_only);
  }
  if (!cot_template.empty()) {
    check_bound(cot_template, task_name + "/cot", bindings, options_only);
  }
  if (!feedback_template.empty()) {
    check_bound(feedback_template, task_name + "/feedback", bindings,
                [](const std::string& n) { return n == "options" || n == "explanation"; });
  }
  if (fallback_label) {
    require(label_set.contains(*fallback_label),
            task_name + ": fallback label '" + *fallback_label + "' not in label set");
  }
}

// ---------------------------------------------------------------------------
// Loading

std::filesystem::path default_prompts_dir() {
  if (const char* env = std::getenv("PANEL_PROMPTS_DIR"); env && *env) {
    return env;
  }
  return PANEL_DEFAULT_PROMPTS_DIR;
}

namespace {

std::string read_asset(const std::filesystem::path& path, bool required = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!required) return {};
    throw Error(ErrorCode::kIo, "cannot read prompt asset " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  // Editors add a final newline; it is not part of the prompt.
  if (!s.empty() && s.back() == '\n') s.pop_back();
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

Template read_template(const std::filesystem::path& path, bool required = true) {
  return Template::parse(read_asset(path, required));
}

}  // namespace

TaskSpec load_task(const std::filesystem::path& dir) {
  const auto config_path = dir / "task.json";
  std::ifstream in(config_path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + config_path.string());
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidTask, config_path.string() + ": " + e.what());
  }

  try {
    TaskSpec task;
    task.task_name = cfg.at("task_name").get<std::string>();

    std::vector<StanceLabel> labels;
    std::map<std::string, std::string> aliases;
    for (const auto& l : cfg.at("labels")) {
      StanceLabel label;
      label.name = l.at("name").get<std::string>();
      const auto letter = l.at("letter").get<std::string>();
      if (letter.size() != 1) {
        throw Error(ErrorCode::kInvalidTask, "option letter must be one character");
      }
      label.letter = letter[0];
      label.display = l.value("display", std::string{});
      const json label_aliases = l.value("aliases", json::array());
      for (const auto& a : label_aliases) {
        aliases.emplace(a.get<std::string>(), label.name);
      }
      labels.push_back(std::move(label));
    }
    task.label_set = LabelSet(std::move(labels), aliases);

    if (cfg.contains("fallback") && !cfg["fallback"].is_null()) {
      task.fallback_label = cfg["fallback"].get<std::string>();
    }

    std::map<std::string, std::shared_ptr<const LookupTable>> tables;
    const json lookups = cfg.value("lookups", json::object());
    for (const auto& [name, t] : lookups.items()) {
      auto table = std::make_shared<LookupTable>();
      table->fallback = t.value("default", std::string{});
      const json entries = t.value("entries", json::object());
      for (const auto& [k, v] : entries.items()) {
        table->entries.emplace(text::fold(k), v.get<std::string>());
      }
      tables.emplace(name, std::move(table));
    }
    const json bindings = cfg.value("bindings", json::object());
    for (const auto& [name, spec] : bindings.items()) {
      task.bindings.emplace(name, Binding::parse(spec.get<std::string>(), tables));
    }

    const json analysts = cfg.value("analysts", json::array());
    for (const auto& r : analysts) {
      RoleSpec role;
      role.role_id = r.at("role_id").get<std::string>();
      role.system_instruction = Template::parse(r.value("system", std::string{}));
      const auto file = r.value("template", role.role_id + ".txt");
      role.user_template = read_template(dir / file);
      role.placeholder_bindings = task.bindings;
      const json role_bindings = r.value("bindings", json::object());
      for (const auto& [name, spec] : role_bindings.items()) {
        role.placeholder_bindings.insert_or_assign(
            name, Binding::parse(spec.get<std::string>(), tables));
      }
      task.analyst_roles.push_back(std::move(role));
    }

    task.debater_system = Template::parse(cfg.value("debater_system", std::string{}));
    task.judger_system = Template::parse(cfg.value("judger_system", std::string{}));
    task.debater_template = read_template(dir / "debater.txt");
    task.judger_template = read_template(dir / "judger.txt");
    task.judger_no_debate_template = read_template(dir / "judger_noDebate.txt", false);
    task.judger_constraint = read_asset(dir / "constraint.txt");
    task.judger_json_instruction = read_asset(dir / "judger_json.txt", false);
    task.direct_template = read_template(dir / "direct.txt", false);
    task.cot_template = read_template(dir / "cot.txt", false);
    task.feedback_template = read_template(dir / "feedback.txt", false);

    if (cfg.contains("max_tokens")) {
      const auto& mt = cfg["max_tokens"];
      task.budget.analyst = mt.value("analyst", task.budget.analyst);
      task.budget.debater = mt.value("debater", task.budget.debater);
      task.budget.judger = mt.value("judger", task.budget.judger);
      task.budget.single_call = mt.value("single_call", task.budget.single_call);
    }

    task.validate();
    return task;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidTask, config_path.string() + ": " + e.what());
  }
}

TaskSpec load_builtin_task(std::string_view name, const std::filesystem::path& prompts_root) {
  if (name.find('/') != std::string_view::npos) return load_task(std::filesystem::path(name));
  return load_task(prompts_root / std::string(name));
}

}  // namespace panel
