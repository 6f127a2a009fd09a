#include <gtest/gtest.h>

#include <cstdlib>

#include "panel/error.hpp"
#include "panel/prompts.hpp"
#include "support.hpp"

using namespace panel;
using namespace panel::prompts;
using panel::testing::golden;
using panel::testing::slurp;
using panel::testing::spit;
using panel::testing::task;

namespace {

Instance fixture_instance(const TaskSpec& t) {
  return make_instance(
      "@GovtsTheProblem Make way for the queen, peasants! #NoHillary2016 #Benghazi",
      "Hillary Clinton", "against", t.label_set, "golden-1");
}

AnalysisBundle fixture_bundle() {
  return {{{"linguist", "LING"}, {"domain", "DOM"}, {"social", "SOC"}}, false};
}

std::vector<DebateArgument> fixture_debates(const TaskSpec& t) {
  std::vector<DebateArgument> out;
  for (const auto& l : t.label_set.labels()) out.push_back({l, "ARG-" + l.name});
  return out;
}

std::string serialize(const PromptPair& p) {
  return "[system]\n" + p.system + "\n[user]\n" + p.user + "\n";
}

// Set PANEL_UPDATE_GOLDEN=1 to rewrite the files, then review the diff.
void check_golden(const std::string& name, const PromptPair& p) {
  const auto path = golden(name + ".txt");
  const auto actual = serialize(p);
  if (std::getenv("PANEL_UPDATE_GOLDEN")) spit(path, actual);
  ASSERT_TRUE(std::filesystem::exists(path)) << path;
  EXPECT_EQ(actual, slurp(path)) << name;
}

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no panel::Error thrown";
  return ErrorCode::kIo;
}

}  // namespace

TEST(Golden, Stance3Analysts) {
  const auto t = task("stance3");
  const auto inst = fixture_instance(t);
  for (const auto& role : t.analyst_roles) {
    check_golden("stance3_analyst_" + role.role_id, render_analyst(role, inst));
  }
}

TEST(Golden, Stance3Debaters) {
  const auto t = task("stance3");
  const auto inst = fixture_instance(t);
  for (const auto& l : t.label_set.labels()) {
    check_golden("stance3_debater_" + l.name, render_debater(inst, fixture_bundle(), l, t));
  }
}

TEST(Golden, Stance3Judger) {
  auto t = task("stance3");
  const auto inst = fixture_instance(t);
  check_golden("stance3_judger", render_judger(inst, fixture_debates(t), t));
  t.explanation_mode = true;
  check_golden("stance3_judger_explain", render_judger(inst, fixture_debates(t), t));
}

TEST(Golden, Stance3Ablations) {
  const auto t = task("stance3");
  const auto inst = fixture_instance(t);
  AnalysisBundle raw{{}, true};
  check_golden("stance3_debater_raw_only",
               render_debater(inst, raw, t.label_set.by_name("favor"), t,
                              AblationVariant::kDropAnalysisStage));
  AnalysisBundle partial{{{"linguist", "LING"}, {"social", "SOC"}}, false};
  check_golden("stance3_debater_drop_domain",
               render_debater(inst, partial, t.label_set.by_name("favor"), t,
                              AblationVariant::kDropDomain));
  check_golden("stance3_judger_no_debate", render_judger_from_analyses(inst, fixture_bundle(), t));
}

TEST(Golden, Stance3Baselines) {
  const auto t = task("stance3");
  const auto inst = fixture_instance(t);
  check_golden("stance3_direct", render_direct(inst, t));
  check_golden("stance3_cot", render_cot(inst, t));
  check_golden("stance3_feedback",
               render_explanation_feedback(inst, "Derogatory hashtags oppose the target.", t));
}

TEST(Golden, Stance2Judger) {
  const auto t = task("stance2");
  const auto inst = make_instance("Four more years!", "Joe Biden", "favor", t.label_set, "g2");
  check_golden("stance2_judger", render_judger(inst, fixture_debates(t), t));
}

TEST(Golden, OtherTasksJudger) {
  for (const std::string name : {"absa", "persuasion"}) {
    const auto t = task(name);
    const auto inst = make_instance("The battery lasts all day but the screen scratches easily.",
                                    "battery", std::nullopt, t.label_set, "g3");
    check_golden(name + "_judger", render_judger(inst, fixture_debates(t), t));
    check_golden(name + "_debater", render_debater(inst, AnalysisBundle{[&] {
                                                     std::vector<std::pair<std::string, std::string>> a;
                                                     for (const auto& r : t.analyst_roles) a.push_back({r.role_id, "X"});
                                                     return a;
                                                   }(), false},
                                                   t.label_set[0], t));
  }
}

TEST(Prompts, TemplateSentencesAppearVerbatim) {
  const auto t = task("stance3");
  const auto inst = fixture_instance(t);
  const auto* linguist = t.find_role("linguist");
  ASSERT_NE(linguist, nullptr);
  const auto ling = render_analyst(*linguist, inst).user;
  EXPECT_EQ(ling.rfind(
                "You are a linguist. Accurately and concisely explain the linguistic elements in the "
                "sentence and how these elements affect meaning, including grammatical structure, "
                "tense and inflection, virtual speech, rhetorical devices, lexical choices and so "
                "on. Do nothing else. ",
                0),
            0u);
  const auto domain = render_analyst(*t.find_role("domain"), inst).user;
  EXPECT_NE(domain.find("You are a politician. Accurately and concisely explain the key elements "
                        "contained in the quote, such as characters, events, parties, religions, "
                        "etc. Also explain their relationship with Hillary Clinton (if exist). Do "
                        "nothing else."),
            std::string::npos);
  const auto debater = render_debater(inst, fixture_bundle(), t.label_set.by_name("favor"), t).user;
  EXPECT_NE(debater.find("Tweet:" + inst.document + ". Linguistic analysis:LING. The analysis of "
                         "politician:DOM. The analysis of a heavy social media user: SOC. You think "
                         "the attitude behind the tweet is favor of Hillary Clinton. Identify the "
                         "top three pieces of evidence from the analyses that best support your "
                         "opinion and argue for your opinion."),
            std::string::npos);
  const auto judger = render_judger(inst, fixture_debates(t), t).user;
  EXPECT_EQ(judger.rfind("Determine whether the sentence is in favor of or against Hillary "
                         "Clinton, or is neutral. Sentence: " + inst.document + ". Judge this",
                         0),
            0u);
  EXPECT_NE(judger.find("Arguments that the attitude is neutral: ARG-neutral Choose from: A: "
                        "Against B: Favor C: Neutral\nConstraint: Answer with only the option "
                        "above that is most accurate and nothing else."),
            std::string::npos);
}

TEST(Prompts, JudgerBlocksFollowMenuOrder) {
  const auto t = task("stance3");
  const auto inst = fixture_instance(t);
  auto debates = fixture_debates(t);
  std::reverse(debates.begin(), debates.end());
  const auto user = render_judger(inst, debates, t).user;
  const auto a = user.find("ARG-against");
  const auto f = user.find("ARG-favor");
  const auto n = user.find("ARG-neutral");
  EXPECT_LT(a, f);
  EXPECT_LT(f, n);
  EXPECT_EQ(user, render_judger(inst, fixture_debates(t), t).user);
}

TEST(Prompts, JudgerArityChecked) {
  const auto t = task("stance3");
  const auto inst = fixture_instance(t);
  auto debates = fixture_debates(t);
  debates.pop_back();
  EXPECT_EQ(code_of([&] { render_judger(inst, debates, t); }), ErrorCode::kArityMismatch);
  debates.push_back(debates.front());
  EXPECT_EQ(code_of([&] { render_judger(inst, debates, t); }), ErrorCode::kArityMismatch);
}

TEST(Prompts, DebaterNeedsActiveAnalyses) {
  const auto t = task("stance3");
  const auto inst = fixture_instance(t);
  AnalysisBundle partial{{{"linguist", "LING"}, {"social", "SOC"}}, false};
  EXPECT_EQ(code_of([&] { render_debater(inst, partial, t.label_set[0], t); }),
            ErrorCode::kMissingAnalysis);
  EXPECT_NO_THROW(render_debater(inst, partial, t.label_set[0], t, AblationVariant::kDropDomain));
}

TEST(Prompts, FeedbackNeedsExplanation) {
  const auto t = task("stance3");
  EXPECT_EQ(code_of([&] { render_explanation_feedback(fixture_instance(t), "  ", t); }),
            ErrorCode::kInvalidArgument);
}

TEST(Prompts, RenderingIsPure) {
  const auto t = task("stance3");
  const auto inst = fixture_instance(t);
  EXPECT_EQ(render_judger(inst, fixture_debates(t), t), render_judger(inst, fixture_debates(t), t));
  EXPECT_EQ(render_direct(inst, t), render_direct(inst, t));
}
