#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "panel/template.hpp"

namespace panel {

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

struct StanceLabel {
  std::string name;     // canonical, lowercase ("favor")
  char letter = 0;      // judger menu option ("B")
  std::string display;  // menu text ("Favor")

  friend bool operator==(const StanceLabel&, const StanceLabel&) = default;
};

/// Ordered set of 2 or 3 labels plus the alias table that maps raw dataset
/// strings onto them. Order is menu order and drives debater order, judger
/// argument blocks and confusion-matrix indices.
class LabelSet {
 public:
  LabelSet() = default;
  // aliases: raw string -> canonical name. Names are always their own alias.
  LabelSet(std::vector<StanceLabel> labels,
           const std::map<std::string, std::string>& aliases = {});

  const std::vector<StanceLabel>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  const StanceLabel& operator[](std::size_t i) const { return labels_.at(i); }

  std::optional<std::size_t> index_of(std::string_view name) const noexcept;
  bool contains(std::string_view name) const noexcept {
    return index_of(name).has_value();
  }
  const StanceLabel& by_name(std::string_view name) const;

  const StanceLabel& normalize(std::string_view raw) const;
  const StanceLabel& for_letter(char letter) const;
  std::optional<std::size_t> index_of_letter(char letter) const noexcept;

  // "A: Against B: Favor C: Neutral"
  std::string menu() const;

  const std::map<std::string, std::size_t>& alias_table() const noexcept {
    return aliases_;
  }

  friend bool operator==(const LabelSet& a, const LabelSet& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<StanceLabel> labels_;
  std::map<std::string, std::size_t> aliases_;  // folded alias -> index
};

/// Maps a raw label string to its canonical label (case-folded, trimmed).
/// Throws Error(kUnknownLabel) when no alias matches.
const StanceLabel& normalize_label(std::string_view raw, const LabelSet& set);

inline char letter_for_label(const StanceLabel& label) { return label.letter; }

/// Throws Error(kUnknownOption) for letters outside the menu.
const StanceLabel& label_for_letter(char letter, const LabelSet& set);

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

struct Instance {
  std::string id;
  std::string document;
  std::string target;
  std::optional<std::string> gold;  // canonical label name
};

// Stable id for datasets without one: hex prefix of sha256(document, target).
std::string derive_instance_id(std::string_view document, std::string_view target);

/// Builds a validated instance. Document and target are trimmed and must be
/// non-empty; a raw gold string is normalized through `labels`.
Instance make_instance(std::string_view document, std::string_view target,
                       std::optional<std::string_view> raw_gold,
                       const LabelSet& labels, std::string id = {});

// ---------------------------------------------------------------------------
// Placeholder bindings
// ---------------------------------------------------------------------------

struct LookupTable {
  std::string fallback;
  std::map<std::string, std::string> entries;  // folded key -> value

  const std::string& find(std::string_view key) const;
};

struct Binding {
  enum class Source { kDocument, kTarget, kId, kValue, kLookup };

  Source source = Source::kValue;
  std::string value;  // literal for kValue, table name for kLookup
  std::shared_ptr<const LookupTable> table;

  // "document" | "target" | "id" | "value:<text>" | "lookup:<table>"
  static Binding parse(
      std::string_view spec,
      const std::map<std::string, std::shared_ptr<const LookupTable>>& tables);

  std::string resolve(const Instance& instance) const;
};

using Bindings = std::map<std::string, Binding, std::less<>>;

// Placeholders filled in by the pipeline itself; bindings may not use them.
bool is_reserved_placeholder(std::string_view name) noexcept;

TemplateContext resolve_bindings(const Bindings& bindings, const Instance& instance);

// ---------------------------------------------------------------------------
// Task definition
// ---------------------------------------------------------------------------

struct RoleSpec {
  std::string role_id;
  Template system_instruction;
  Template user_template;
  Bindings placeholder_bindings;
};

enum class AblationVariant {
  kFull,
  kDropLinguist,
  kDropDomain,
  kDropSocial,
  kDropAnalysisStage,
  kDropDebateStage,
};

// All variants, full first, in ablation-table row order.
const std::vector<AblationVariant>& all_variants();
std::string_view to_string(AblationVariant v) noexcept;
AblationVariant parse_variant(std::string_view s);
// Role id removed by a drop_<role> variant, if any.
std::optional<std::string_view> dropped_role(AblationVariant v) noexcept;

struct TokenBudget {
  int analyst = 512;
  int debater = 512;
  int judger = 150;
  int single_call = 512;  // direct / cot / feedback
};

struct TaskSpec {
  std::string task_name;
  LabelSet label_set;
  std::vector<RoleSpec> analyst_roles;
  Bindings bindings;  // shared by debater, judger and single-call prompts

  Template debater_system;
  Template debater_template;
  Template judger_system;
  Template judger_template;
  Template judger_no_debate_template;
  std::string judger_constraint;
  std::string judger_json_instruction;
  Template direct_template;
  Template cot_template;
  Template feedback_template;

  bool explanation_mode = false;
  // Label used when no parse path matches; empty -> UnparseableVerdict.
  std::optional<std::string> fallback_label;
  TokenBudget budget;

  const RoleSpec* find_role(std::string_view role_id) const noexcept;

  // Roles active under `variant`, in declared order. Throws kInvalidTask if
  // the variant names a role this task does not have.
  std::vector<const RoleSpec*> active_roles(AblationVariant variant) const;

  // Checks every structural invariant; throws Error(kInvalidTask) or
  // Error(kUnboundPlaceholder).
  void validate() const;
};

std::filesystem::path default_prompts_dir();

/// Loads `<dir>/task.json` plus the per-prompt text assets next to it.
TaskSpec load_task(const std::filesystem::path& dir);

/// Loads a shipped task ("stance3", "stance2", "absa", "persuasion") or any
/// task directory under `prompts_root`. A name containing a path separator
/// is treated as a directory.
TaskSpec load_builtin_task(std::string_view name,
                           const std::filesystem::path& prompts_root = default_prompts_dir());

}  // namespace panel
