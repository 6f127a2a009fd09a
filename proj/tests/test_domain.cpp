#include <gtest/gtest.h>

#include <random>

#include "panel/domain.hpp"
#include "panel/error.hpp"
#include "support.hpp"

using namespace panel;
using panel::testing::task;

namespace {

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

TEST(Labels, MenuFollowsLetterOrder) {
  EXPECT_EQ(task("stance3").label_set.menu(), "A: Against B: Favor C: Neutral");
  EXPECT_EQ(task("stance2").label_set.menu(), "A: Against B: Favor");
}

TEST(Labels, NormalizeFoldsCaseAndWhitespace) {
  const auto labels = task("stance3").label_set;
  EXPECT_EQ(labels.normalize(" FAVOR ").name, "favor");
  EXPECT_EQ(labels.normalize("Against").name, "against");
  EXPECT_EQ(labels.normalize("NONE").name, "neutral");
  EXPECT_EQ(labels.normalize("pro").name, "favor");
  EXPECT_EQ(labels.normalize("2").name, "neutral");
  EXPECT_EQ(code_of([&] { labels.normalize("maybe"); }), ErrorCode::kUnknownLabel);
}

TEST(Labels, NormalizeIsIdempotent) {
  const auto labels = task("stance3").label_set;
  for (const std::string raw : {"FAVOR", "con", "None", " neutral", "0", "Pro"}) {
    const auto& once = labels.normalize(raw);
    EXPECT_EQ(labels.normalize(once.name), once);
  }
}

TEST(Labels, LetterRoundTrip) {
  for (const std::string name : {"stance2", "stance3", "absa", "persuasion"}) {
    const auto labels = task(name).label_set;
    for (const auto& l : labels.labels()) {
      EXPECT_EQ(label_for_letter(letter_for_label(l), labels), l) << name;
    }
  }
  EXPECT_EQ(code_of([] { label_for_letter('C', task("stance2").label_set); }),
            ErrorCode::kUnknownOption);
}

TEST(Labels, InvalidSetsAreRejected) {
  EXPECT_EQ(code_of([] { LabelSet({{"favor", 'A', ""}}); }), ErrorCode::kInvalidTask);
  EXPECT_EQ(code_of([] { LabelSet({{"favor", 'A', ""}, {"against", 'A', ""}}); }),
            ErrorCode::kInvalidTask);
  EXPECT_EQ(code_of([] { LabelSet({{"Favor", 'A', ""}, {"against", 'B', ""}}); }),
            ErrorCode::kInvalidTask);
  EXPECT_EQ(code_of([] {
              LabelSet({{"a", 'A', ""}, {"b", 'B', ""}, {"c", 'C', ""}, {"d", 'D', ""}});
            }),
            ErrorCode::kInvalidTask);
}

TEST(Instances, TrimmedAndValidated) {
  const auto labels = task("stance3").label_set;
  const auto inst = make_instance("  text here \n", " Atheism ", "FAVOR", labels);
  EXPECT_EQ(inst.document, "text here");
  EXPECT_EQ(inst.target, "Atheism");
  EXPECT_EQ(inst.gold, "favor");
  EXPECT_EQ(inst.id, derive_instance_id("text here", "Atheism"));
  EXPECT_EQ(inst.id.size(), 16u);
  EXPECT_EQ(code_of([&] { make_instance("   ", "Atheism", std::nullopt, labels); }),
            ErrorCode::kEmptyDocument);
  EXPECT_EQ(code_of([&] { make_instance("x", "", std::nullopt, labels); }),
            ErrorCode::kEmptyDocument);
  EXPECT_EQ(code_of([&] { make_instance("x", "y", "sideways", labels); }),
            ErrorCode::kUnknownLabel);
  EXPECT_EQ(make_instance("x", "y", std::nullopt, labels, "id-7").id, "id-7");
}

TEST(Instances, DerivedIdSeparatesFields) {
  EXPECT_NE(derive_instance_id("ab", "c"), derive_instance_id("a", "bc"));
}

TEST(Bindings, DomainRoleLookup) {
  const auto t = task("stance3");
  const auto* domain = t.find_role("domain");
  ASSERT_NE(domain, nullptr);
  const auto labels = t.label_set;
  auto role_for = [&](const std::string& target) {
    return resolve_bindings(domain->placeholder_bindings,
                            make_instance("doc", target, std::nullopt, labels))
        .at("role");
  };
  EXPECT_EQ(role_for("Hillary Clinton"), "politician");
  EXPECT_EQ(role_for("donald trump"), "politician");
  EXPECT_EQ(role_for("Feminist Movement"), "sociologist");
  EXPECT_EQ(role_for("Climate Change is a Real Concern"), "climate scientist");
  EXPECT_EQ(role_for("Bike Lanes"), "domain specialist");
}

TEST(Bindings, ParseSpecs) {
  const std::map<std::string, std::shared_ptr<const LookupTable>> none;
  const auto inst = make_instance("doc", "tgt", std::nullopt, task("stance3").label_set, "i1");
  EXPECT_EQ(Binding::parse("document", none).resolve(inst), "doc");
  EXPECT_EQ(Binding::parse("target", none).resolve(inst), "tgt");
  EXPECT_EQ(Binding::parse("id", none).resolve(inst), "i1");
  EXPECT_EQ(Binding::parse("value: product reviewer", none).resolve(inst), "product reviewer");
  EXPECT_EQ(code_of([&] { Binding::parse("lookup:missing", none); }), ErrorCode::kInvalidTask);
  EXPECT_TRUE(is_reserved_placeholder("stance"));
  EXPECT_TRUE(is_reserved_placeholder("analysis.linguist"));
  EXPECT_TRUE(is_reserved_placeholder("argument.favor"));
  EXPECT_FALSE(is_reserved_placeholder("tweet"));
}

TEST(Variants, OrderAndNames) {
  const auto& v = all_variants();
  ASSERT_EQ(v.size(), 6u);
  const std::vector<std::string> names{"full",        "drop_linguist",       "drop_domain",
                                       "drop_social", "drop_analysis_stage", "drop_debate_stage"};
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(to_string(v[i]), names[i]);
    EXPECT_EQ(parse_variant(names[i]), v[i]);
  }
  EXPECT_EQ(dropped_role(AblationVariant::kDropSocial), "social");
  EXPECT_FALSE(dropped_role(AblationVariant::kFull));
}

TEST(Tasks, ActiveRoles) {
  const auto t = task("stance3");
  auto ids = [&](AblationVariant v) {
    std::vector<std::string> out;
    for (const auto* r : t.active_roles(v)) out.push_back(r->role_id);
    return out;
  };
  EXPECT_EQ(ids(AblationVariant::kFull), (std::vector<std::string>{"linguist", "domain", "social"}));
  EXPECT_EQ(ids(AblationVariant::kDropDomain), (std::vector<std::string>{"linguist", "social"}));
  EXPECT_TRUE(ids(AblationVariant::kDropAnalysisStage).empty());
  EXPECT_EQ(ids(AblationVariant::kDropDebateStage).size(), 3u);
  // The persuasion task has no linguist.
  EXPECT_EQ(code_of([] { task("persuasion").active_roles(AblationVariant::kDropLinguist); }),
            ErrorCode::kInvalidTask);
}

TEST(Tasks, ShippedTasksLoad) {
  for (const std::string name : {"stance2", "stance3", "absa", "persuasion"}) {
    const auto t = task(name);
    EXPECT_EQ(t.task_name, name);
    EXPECT_NO_THROW(t.validate());
  }
  EXPECT_EQ(task("stance3").fallback_label, "neutral");
  EXPECT_FALSE(task("stance2").fallback_label);
  EXPECT_EQ(task("persuasion").label_set.menu(), "A: Persuaded B: Not persuaded");
}

TEST(Tasks, UnknownTaskFails) {
  EXPECT_THROW(task("no-such-task"), Error);
}

TEST(Tasks, ValidationCatchesBrokenTemplates) {
  auto t = task("stance3");
  t.debater_template = Template::parse("Tweet:{tweet}. {stance} {mystery}");
  EXPECT_THROW(t.validate(), Error);

  t = task("stance3");
  // Argument blocks out of menu order.
  t.judger_template = Template::parse(
      "{tweet} {#argument.favor}{argument.favor}{/argument.favor}"
      "{#argument.against}{argument.against}{/argument.against}"
      "{#argument.neutral}{argument.neutral}{/argument.neutral}{options}");
  EXPECT_EQ(code_of([&] { t.validate(); }), ErrorCode::kInvalidTask);
}
