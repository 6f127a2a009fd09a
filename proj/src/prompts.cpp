#include "panel/prompts.hpp"

#include <vector>

#include "panel/error.hpp"
#include "panel/text.hpp"

namespace panel::prompts {
namespace {

TemplateContext base_context(const TaskSpec& task, const Instance& instance) {
  auto ctx = resolve_bindings(task.bindings, instance);
  ctx.insert_or_assign("options", task.label_set.menu());
  return ctx;
}

std::string with_constraint(std::string body, const TaskSpec& task) {
  const std::string& constraint =
      task.explanation_mode ? task.judger_json_instruction : task.judger_constraint;
  if (!constraint.empty()) {
    body += '\n';
    body += constraint;
  }
  return body;
}

const Template& require_template(const Template& tpl, const TaskSpec& task,
                                 std::string_view which) {
  if (tpl.empty()) {
    throw Error(ErrorCode::kInvalidTask,
                "task " + task.task_name + " has no " + std::string(which) + " template");
  }
  return tpl;
}

void add_analyses(TemplateContext& ctx, const AnalysisBundle& bundle, const TaskSpec& task,
                  AblationVariant variant) {
  if (bundle.raw_only) return;
  for (const RoleSpec* role : task.active_roles(variant)) {
    const std::string* analysis = bundle.find(role->role_id);
    if (!analysis) {
      throw Error(ErrorCode::kMissingAnalysis,
                  "analysis bundle has no output for analyst '" + role->role_id + "'");
    }
    ctx.insert_or_assign("analysis." + role->role_id, std::string(text::trim(*analysis)));
  }
}

}  // namespace

PromptPair render_analyst(const RoleSpec& role, const Instance& instance) {
  const auto ctx = resolve_bindings(role.placeholder_bindings, instance);
  return {role.system_instruction.render(ctx), role.user_template.render(ctx)};
}

PromptPair render_debater(const Instance& instance, const AnalysisBundle& bundle,
                          const StanceLabel& stance, const TaskSpec& task,
                          AblationVariant variant) {
  if (!task.label_set.contains(stance.name)) {
    throw Error(ErrorCode::kUnknownLabel,
                "stance '" + stance.name + "' is not a label of task " + task.task_name);
  }
  auto ctx = base_context(task, instance);
  ctx.insert_or_assign("stance", stance.name);
  add_analyses(ctx, bundle, task, variant);
  return {task.debater_system.render(ctx), task.debater_template.render(ctx)};
}

PromptPair render_judger(const Instance& instance, std::span<const DebateArgument> debates,
                         const TaskSpec& task) {
  const auto& labels = task.label_set;
  if (debates.size() != labels.size()) {
    throw Error(ErrorCode::kArityMismatch,
                "judger needs " + std::to_string(labels.size()) + " arguments, got " +
                    std::to_string(debates.size()));
  }
  auto ctx = base_context(task, instance);
  for (const auto& debate : debates) {
    if (!labels.contains(debate.stance.name)) {
      throw Error(ErrorCode::kArityMismatch,
                  "argument for unknown stance '" + debate.stance.name + "'");
    }
    auto [_, inserted] = ctx.insert_or_assign("argument." + debate.stance.name,
                                              std::string(text::trim(debate.argument)));
    if (!inserted) {
      throw Error(ErrorCode::kArityMismatch,
                  "two arguments for stance '" + debate.stance.name + "'");
    }
  }
  return {task.judger_system.render(ctx),
          with_constraint(task.judger_template.render(ctx), task)};
}

PromptPair render_judger_from_analyses(const Instance& instance,
                                       const AnalysisBundle& bundle, const TaskSpec& task) {
  const auto& tpl = require_template(task.judger_no_debate_template, task, "judger_noDebate");
  auto ctx = base_context(task, instance);
  // Every declared analyst that produced output is shown.
  if (!bundle.raw_only) {
    for (const auto& [role_id, analysis] : bundle.analyses) {
      if (!task.find_role(role_id)) {
        throw Error(ErrorCode::kMissingAnalysis, "unknown analyst '" + role_id + "'");
      }
      ctx.insert_or_assign("analysis." + role_id, std::string(text::trim(analysis)));
    }
  }
  return {task.judger_system.render(ctx), with_constraint(tpl.render(ctx), task)};
}

PromptPair render_direct(const Instance& instance, const TaskSpec& task) {
  const auto& tpl = require_template(task.direct_template, task, "direct");
  std::string user = tpl.render(base_context(task, instance));
  if (!task.judger_constraint.empty()) user += "\n" + task.judger_constraint;
  return {"", user};
}

PromptPair render_cot(const Instance& instance, const TaskSpec& task) {
  const auto& tpl = require_template(task.cot_template, task, "cot");
  // The template carries its own final-answer instruction.
  return {"", tpl.render(base_context(task, instance))};
}

PromptPair render_explanation_feedback(const Instance& instance,
                                       std::string_view explanation,
                                       const TaskSpec& task) {
  const auto trimmed = text::trim(explanation);
  if (trimmed.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "feedback explanation is empty");
  }
  const auto& tpl = require_template(task.feedback_template, task, "feedback");
  auto ctx = base_context(task, instance);
  ctx.insert_or_assign("explanation", std::string(trimmed));
  // Feedback answers are single letters regardless of explanation mode.
  std::string user = tpl.render(ctx);
  if (!task.judger_constraint.empty()) user += "\n" + task.judger_constraint;
  return {"", user};
}

}  // namespace panel::prompts
