#include <gtest/gtest.h>

#include <set>

#include "panel/datasets.hpp"
#include "panel/error.hpp"
#include "support.hpp"

using namespace panel;
using namespace panel::datasets;
using panel::testing::TempDir;
using panel::testing::fixture;
using panel::testing::spit;

namespace {

const LabelSet& stance3() {
  static const auto labels = panel::testing::task("stance3").label_set;
  return labels;
}

Schema schema(const std::string& name) { return resolve_schema(name, PANEL_TEST_SCHEMAS); }

template <typename Fn>
std::pair<ErrorCode, std::string> error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return {e.code(), e.what()};
  }
  ADD_FAILURE() << "no panel::Error thrown";
  return {ErrorCode::kIo, ""};
}

// Corpus with `counts[i]` instances of label i (stance order) for one target.
void add_target(Corpus& c, const std::string& target, const std::vector<std::size_t>& counts,
                const LabelSet& labels) {
  for (std::size_t l = 0; l < counts.size(); ++l) {
    for (std::size_t k = 0; k < counts[l]; ++k) {
      c.instances.push_back(Instance{target + "-" + std::to_string(l) + "-" + std::to_string(k),
                                     "doc", target, labels[l].name});
    }
  }
}

std::string pct(const TargetStats& t, std::size_t i) {
  return std::to_string(t.tenths[i] / 10) + "." + std::to_string(t.tenths[i] % 10);
}

}  // namespace

TEST(Delimited, LoadsSem16Fixture) {
  const auto c = load_delimited(fixture("sem16_20.tsv"), schema("sem16"), stance3());
  ASSERT_EQ(c.instances.size(), 20u);
  EXPECT_EQ(c.instances[0].id, "10001");
  EXPECT_EQ(c.instances[0].target, "Atheism");
  EXPECT_EQ(c.instances[0].gold, "against");
  EXPECT_EQ(c.instances[2].gold, "neutral");
  EXPECT_EQ(c.split, Split::kTest);
  EXPECT_EQ(c.task_name, "stance3");
}

TEST(Delimited, QuotedFieldsAndNewlines) {
  TempDir dir;
  spit(dir / "c.csv",
       "Tweet,Target,Label\r\n"
       "\"Hello, world\",Joe Biden,FAVOR\r\n"
       "\"She said \"\"no\"\"\nthen left\",Joe Biden,AGAINST\n"
       "\n"
       "plain,Joe Biden,against\n");
  const auto c = load_delimited(dir / "c.csv", schema("pstance"),
                                panel::testing::task("stance2").label_set);
  ASSERT_EQ(c.instances.size(), 3u);
  EXPECT_EQ(c.instances[0].document, "Hello, world");
  EXPECT_EQ(c.instances[1].document, "She said \"no\"\nthen left");
  EXPECT_EQ(c.instances[1].gold, "against");
  std::set<std::string> ids;
  for (const auto& i : c.instances) ids.insert(i.id);
  EXPECT_EQ(ids.size(), 3u);
}

TEST(Delimited, ErrorsNameTheLine) {
  TempDir dir;
  spit(dir / "bad_label.tsv", "ID\tTarget\tTweet\tStance\n1\tAtheism\tok\tFAVOR\n2\tAtheism\tx\tMAYBE\n");
  auto [code, msg] = error_of([&] { load_delimited(dir / "bad_label.tsv", schema("sem16"), stance3()); });
  EXPECT_EQ(code, ErrorCode::kUnknownLabel);
  EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;

  spit(dir / "empty.tsv", "ID\tTarget\tTweet\tStance\n1\tAtheism\t  \tFAVOR\n");
  EXPECT_EQ(error_of([&] { load_delimited(dir / "empty.tsv", schema("sem16"), stance3()); }).first,
            ErrorCode::kEmptyDocument);

  spit(dir / "no_col.tsv", "ID\tTweet\tStance\n1\tx\tFAVOR\n");
  EXPECT_EQ(error_of([&] { load_delimited(dir / "no_col.tsv", schema("sem16"), stance3()); }).first,
            ErrorCode::kSchemaMismatch);

  spit(dir / "short.tsv", "ID\tTarget\tTweet\tStance\n1\tAtheism\n");
  EXPECT_EQ(error_of([&] { load_delimited(dir / "short.tsv", schema("sem16"), stance3()); }).first,
            ErrorCode::kSchemaMismatch);
}

TEST(Delimited, VastFilterKeepsZeroShotRows) {
  TempDir dir;
  spit(dir / "vast.csv",
       "post,topic_str,label,seen?\n"
       "a post,guns,0,0\n"
       "seen post,guns,1,1\n"
       "another,taxes,2,0\n");
  const auto c = load_delimited(dir / "vast.csv", schema("vast"), stance3());
  ASSERT_EQ(c.instances.size(), 2u);
  EXPECT_EQ(c.instances[0].gold, "against");
  EXPECT_EQ(c.instances[1].gold, "neutral");
  EXPECT_EQ(c.split, Split::kZeroShot);
}

TEST(Delimited, DuplicateIdsAreDisambiguated) {
  TempDir dir;
  spit(dir / "dup.tsv", "ID\tTarget\tTweet\tStance\n7\tAtheism\ta\tFAVOR\n7\tAtheism\tb\tFAVOR\n");
  const auto c = load_delimited(dir / "dup.tsv", schema("sem16"), stance3());
  EXPECT_EQ(c.instances[0].id, "7");
  EXPECT_EQ(c.instances[1].id, "7~2");
}

TEST(Jsonl, RoundTripThroughWriter) {
  TempDir dir;
  const auto c = load_delimited(fixture("sem16_20.tsv"), schema("sem16"), stance3());
  write_jsonl(c, dir / "out.jsonl");
  const auto back = load_delimited(dir / "out.jsonl", schema("jsonl"), stance3());
  ASSERT_EQ(back.instances.size(), c.instances.size());
  for (std::size_t i = 0; i < c.instances.size(); ++i) {
    EXPECT_EQ(back.instances[i].id, c.instances[i].id);
    EXPECT_EQ(back.instances[i].document, c.instances[i].document);
    EXPECT_EQ(back.instances[i].gold, c.instances[i].gold);
  }
}

TEST(Jsonl, NumericLabelsAndMissingFields) {
  TempDir dir;
  spit(dir / "a.jsonl", R"({"document": "x", "target": "t", "label": 1})" "\n");
  EXPECT_EQ(load_delimited(dir / "a.jsonl", schema("jsonl"), stance3()).instances[0].gold, "favor");
  spit(dir / "b.jsonl", R"({"document": "x"})" "\n");
  EXPECT_EQ(error_of([&] { load_delimited(dir / "b.jsonl", schema("jsonl"), stance3()); }).first,
            ErrorCode::kSchemaMismatch);
}

TEST(Stats, PublishedCorpusPercentages) {
  // Counts per target as (favor, against, neutral); printed percentages follow.
  struct Row {
    std::string target;
    std::vector<std::size_t> fan;
    std::vector<std::string> printed;
  };
  const std::vector<Row> sem16{
      {"DT", {148, 299, 260}, {"20.9", "42.3", "36.8"}},
      {"HC", {163, 565, 256}, {"16.6", "57.4", "26.0"}},
      {"FM", {268, 511, 170}, {"28.2", "53.8", "17.9"}},
      {"LA", {167, 544, 222}, {"17.9", "58.3", "23.8"}},
      {"A", {124, 464, 145}, {"16.9", "63.3", "19.8"}},
      {"CC", {335, 26, 203}, {"59.4", "4.6", "36.0"}},
      {"VAST", {6952, 7297, 4296}, {"37.5", "39.3", "23.2"}},
  };
  const auto& labels = stance3();  // against, favor, neutral
  for (const auto& row : sem16) {
    Corpus c;
    add_target(c, row.target, {row.fan[1], row.fan[0], row.fan[2]}, labels);
    const auto s = stats(c, labels);
    ASSERT_EQ(s.targets.size(), 1u);
    const auto& t = s.targets[0];
    EXPECT_EQ(pct(t, 1), row.printed[0]) << row.target;
    EXPECT_EQ(pct(t, 0), row.printed[1]) << row.target;
    EXPECT_EQ(pct(t, 2), row.printed[2]) << row.target;
    EXPECT_EQ(t.total, row.fan[0] + row.fan[1] + row.fan[2]);
  }

  const std::vector<Row> pstance{
      {"Biden", {3217, 4079}, {"44.1", "55.9"}},
      {"Sanders", {3551, 2774}, {"56.1", "43.9"}},
      {"Trump", {3663, 4290}, {"46.1", "53.9"}},
  };
  const auto labels2 = panel::testing::task("stance2").label_set;
  Corpus all;
  for (const auto& row : pstance) add_target(all, row.target, {row.fan[1], row.fan[0]}, labels2);
  const auto s = stats(all, labels2);
  ASSERT_EQ(s.targets.size(), 3u);
  for (std::size_t i = 0; i < pstance.size(); ++i) {
    EXPECT_EQ(s.targets[i].target, pstance[i].target);
    EXPECT_EQ(pct(s.targets[i], 1), pstance[i].printed[0]);
    EXPECT_EQ(pct(s.targets[i], 0), pstance[i].printed[1]);
  }
  EXPECT_EQ(s.overall.total, all.instances.size());
}

TEST(Stats, CountsSumToCorpusSize) {
  const auto c = load_delimited(fixture("sem16_20.tsv"), schema("sem16"), stance3());
  const auto s = stats(c, stance3());
  std::size_t sum = 0;
  for (const auto& t : s.targets) {
    for (auto n : t.counts) sum += n;
  }
  EXPECT_EQ(sum, c.instances.size());
  EXPECT_EQ(s.targets.size(), 5u);
  EXPECT_NE(render_stats(s).find("Atheism"), std::string::npos);
}

TEST(Sample, StratifiedAndDeterministic) {
  Corpus c;
  add_target(c, "T", {50, 30, 20}, stance3());
  const auto a = sample(c, 10, 42, stance3());
  const auto b = sample(c, 10, 42, stance3());
  ASSERT_EQ(a.instances.size(), 10u);
  std::vector<std::string> ids_a, ids_b;
  for (const auto& i : a.instances) ids_a.push_back(i.id);
  for (const auto& i : b.instances) ids_b.push_back(i.id);
  EXPECT_EQ(ids_a, ids_b);

  const auto s = stats(a, stance3());
  EXPECT_EQ(s.overall.counts, (std::vector<std::size_t>{5, 3, 2}));

  // Corpus order is kept and every pick is from the corpus.
  std::vector<std::size_t> positions;
  for (const auto& i : a.instances) {
    auto it = std::find_if(c.instances.begin(), c.instances.end(),
                           [&](const Instance& x) { return x.id == i.id; });
    ASSERT_NE(it, c.instances.end());
    positions.push_back(static_cast<std::size_t>(it - c.instances.begin()));
  }
  EXPECT_TRUE(std::is_sorted(positions.begin(), positions.end()));

  bool differs = false;
  for (std::uint64_t seed = 1; seed < 10 && !differs; ++seed) {
    const auto other = sample(c, 10, seed, stance3());
    for (std::size_t k = 0; k < 10; ++k) differs |= other.instances[k].id != ids_a[k];
  }
  EXPECT_TRUE(differs);
}

TEST(Sample, LargestRemainderAllocation) {
  Corpus c;
  add_target(c, "T", {1, 1, 1}, stance3());
  // 2 of 3 equal groups: ties go to the earlier labels.
  const auto s = stats(sample(c, 2, 0, stance3()), stance3());
  EXPECT_EQ(s.overall.counts, (std::vector<std::size_t>{1, 1, 0}));
  // Sizes always add up.
  Corpus d;
  add_target(d, "T", {7, 11, 3}, stance3());
  for (std::size_t n = 1; n <= 21; ++n) EXPECT_EQ(sample(d, n, n, stance3()).instances.size(), n);
}

TEST(Sample, Bounds) {
  Corpus c;
  add_target(c, "T", {2, 2, 2}, stance3());
  EXPECT_EQ(error_of([&] { sample(c, 7, 0, stance3()); }).first, ErrorCode::kSampleTooLarge);
  EXPECT_EQ(error_of([&] { sample(c, 0, 0, stance3()); }).first, ErrorCode::kInvalidArgument);
  EXPECT_EQ(sample(c, 6, 0, stance3()).instances.size(), 6u);
}

TEST(Schemas, PresetsResolve) {
  for (const std::string name : {"sem16", "pstance", "vast", "jsonl"}) {
    EXPECT_EQ(schema(name).name, name);
  }
  EXPECT_EQ(schema("sem16").delimiter, '\t');
  EXPECT_EQ(schema("vast").metric, "macro_f1");
  EXPECT_THROW(schema("nope"), Error);
}
