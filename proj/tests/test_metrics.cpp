#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <random>

#include "panel/error.hpp"
#include "panel/metrics.hpp"
#include "support.hpp"

using namespace panel;
using namespace panel::metrics;

namespace {

const std::vector<std::string> kStance{"against", "favor", "neutral"};

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

// Straight from the definitions over an explicit list of (gold, predicted)
// pairs; predicted == -1 is an invalid answer.
struct Naive {
  std::vector<std::pair<int, int>> pairs;
  int k;

  double f1(int c) const {
    double tp = 0, fp = 0, fn = 0;
    for (auto [g, p] : pairs) {
      if (g == c && p == c) ++tp;
      if (g != c && p == c) ++fp;
      if (g == c && p != c) ++fn;
    }
    const double prec = tp + fp == 0 ? 0 : tp / (tp + fp);
    const double rec = tp + fn == 0 ? 0 : tp / (tp + fn);
    return prec + rec == 0 ? 0 : 2 * prec * rec / (prec + rec);
  }
  double macro() const {
    double s = 0;
    for (int c = 0; c < k; ++c) s += f1(c);
    return s / k;
  }
};

}  // namespace

TEST(Confusion, WorkedExample) {
  // favor: tp 8, fp 1, fn 2; against: tp 9, fp 2, fn 1.
  ConfusionMatrix cm(kStance);
  cm.set(1, 1, 8);
  cm.set(1, 0, 2);
  cm.set(0, 0, 9);
  cm.set(0, 2, 1);
  cm.set(2, 1, 1);
  cm.set(2, 2, 4);
  EXPECT_DOUBLE_EQ(f1(cm, "favor"), 0.8421052631578948);
  EXPECT_DOUBLE_EQ(f1(cm, "against"), 0.8571428571428572);
  EXPECT_NEAR(f_avg(cm), 0.849624060150376, 1e-15);
  EXPECT_EQ(format_percent(f_avg(cm)), "85.0");
}

TEST(Confusion, MatchesNaiveOracleOnRandomMatrices) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 3);
    std::vector<std::string> labels;
    for (int i = 0; i < k; ++i) labels.push_back("l" + std::to_string(i));
    ConfusionMatrix cm(labels);
    Naive naive{{}, k};
    const int n = 1 + static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) {
      const int g = static_cast<int>(rng() % k);
      const int p = static_cast<int>(rng() % (k + 1)) - 1;
      naive.pairs.push_back({g, p});
      cm.add(g, p < 0 ? std::nullopt : std::optional<std::size_t>(p));
    }
    EXPECT_EQ(cm.total(), static_cast<std::size_t>(n));
    for (int c = 0; c < k; ++c) EXPECT_NEAR(f1(cm, c), naive.f1(c), 1e-12);
    EXPECT_NEAR(macro_f1(cm), naive.macro(), 1e-12);
  }
}

TEST(Confusion, MacroOfConstantPredictor) {
  ConfusionMatrix cm(kStance);
  for (std::size_t g = 0; g < 3; ++g) cm.add(g, std::size_t{1}, 10);
  EXPECT_NEAR(macro_f1(cm), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(accuracy(cm), 1.0 / 3.0, 1e-15);
}

TEST(Confusion, InvalidAnswersOnlyCostRecall) {
  ConfusionMatrix cm(kStance);
  cm.add(1, std::size_t{1}, 5);
  cm.add(1, std::nullopt, 5);
  EXPECT_DOUBLE_EQ(precision(cm, 1), 1.0);
  EXPECT_DOUBLE_EQ(recall(cm, 1), 0.5);
  EXPECT_EQ(cm.invalid_total(), 5u);
  EXPECT_EQ(cm.predicted_total(1), 5u);
}

TEST(Confusion, FAvgIgnoresNeutral) {
  ConfusionMatrix a(kStance), b(kStance);
  for (auto* m : {&a, &b}) {
    m->add(0, std::size_t{0}, 4);
    m->add(1, std::size_t{1}, 3);
    m->add(1, std::size_t{0}, 1);
  }
  b.add(2, std::size_t{2}, 50);  // neutral row with neutral predictions only
  EXPECT_DOUBLE_EQ(f_avg(a), f_avg(b));
  EXPECT_NE(macro_f1(a), macro_f1(b));
}

TEST(Confusion, PermutationInvariantMacro) {
  std::mt19937 rng(5);
  ConfusionMatrix cm(kStance), permuted({"neutral", "against", "favor"});
  const std::vector<std::size_t> to_perm{1, 2, 0};
  for (int i = 0; i < 200; ++i) {
    const std::size_t g = rng() % 3, p = rng() % 3;
    cm.add(g, p);
    permuted.add(to_perm[g], to_perm[p]);
  }
  EXPECT_NEAR(macro_f1(cm), macro_f1(permuted), 1e-15);
  EXPECT_NEAR(f_avg(cm), f_avg(permuted), 1e-15);
}

TEST(Confusion, FixingAnErrorNeverLowersF1) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionMatrix cm(kStance);
    for (int i = 0; i < 30; ++i) cm.add(rng() % 3, std::size_t(rng() % 3));
    for (std::size_t g = 0; g < 3; ++g) {
      for (std::size_t p = 0; p < 3; ++p) {
        if (p == g || cm.at(g, p) == 0) continue;
        auto fixed = cm;
        fixed.set(g, p, cm.at(g, p) - 1);
        fixed.set(g, g, cm.at(g, g) + 1);
        EXPECT_GE(f1(fixed, g) + 1e-15, f1(cm, g));
      }
    }
  }
}

TEST(Confusion, MissingClassAndUnknownLabel) {
  ConfusionMatrix cm({"positive", "negative"});
  EXPECT_FALSE(has_f_avg(cm));
  EXPECT_EQ(code_of([&] { f_avg(cm); }), ErrorCode::kMissingClass);
  EXPECT_EQ(code_of([&] { f1(cm, "favor"); }), ErrorCode::kUnknownLabel);
  EXPECT_EQ(code_of([&] { cm.add("favor", std::nullopt); }), ErrorCode::kUnknownLabel);
}

TEST(Score, RunAndAggregate) {
  const auto labels = panel::testing::task("stance3").label_set;
  std::vector<Prediction> run1{{"1", "T", "favor", "favor"},
                               {"2", "T", "against", "favor"},
                               {"3", "U", "neutral", std::nullopt}};
  const auto r1 = score_run(run1, labels, Headline::kFAvg, 1);
  EXPECT_EQ(r1.n, 3u);
  EXPECT_EQ(r1.invalid, 1u);
  ASSERT_EQ(r1.targets.size(), 2u);
  EXPECT_EQ(r1.targets[0].target, "T");
  EXPECT_NEAR(*r1.f_avg, (2.0 / 3.0 + 0.0) / 2, 1e-15);

  auto run2 = run1;
  run2[1].predicted = "against";
  const auto r2 = score_run(run2, labels, Headline::kFAvg, 2);
  const std::vector<ScoreReport> both{r1, r2};
  const auto agg = aggregate_runs(both);
  EXPECT_EQ(agg.run_count, 2);
  ASSERT_EQ(agg.runs.size(), 2u);
  EXPECT_NEAR(*agg.f_avg, (*r1.f_avg + *r2.f_avg) / 2, 1e-15);
  EXPECT_NEAR(agg.headline(), agg.f_avg.value(), 0);

  auto other = r2;
  other.n = 4;
  const std::vector<ScoreReport> mixed{r1, other};
  EXPECT_EQ(code_of([&] { aggregate_runs(mixed); }), ErrorCode::kHeterogeneousRuns);
}

TEST(Score, MeanOfTwoRuns) {
  ScoreReport a, b;
  a.labels = b.labels = kStance;
  a.headline_metric = b.headline_metric = Headline::kMacroF1;
  a.macro_f1 = 0.6;
  b.macro_f1 = 0.7;
  a.n = b.n = 10;
  a.runs = {RunScore{1}};
  b.runs = {RunScore{2}};
  const std::vector<ScoreReport> both{a, b};
  EXPECT_NEAR(aggregate_runs(both).headline(), 0.65, 1e-15);
}

TEST(Score, FAvgHeadlineNeedsStanceLabels) {
  const auto labels = panel::testing::task("absa").label_set;
  const std::vector<Prediction> preds{{"1", "t", labels[0].name, labels[0].name}};
  EXPECT_EQ(code_of([&] { score_run(preds, labels, Headline::kFAvg); }), ErrorCode::kMissingClass);
  EXPECT_NO_THROW(score_run(preds, labels, Headline::kMacroF1));
}

TEST(TTest, MatchesReferenceValues) {
  const std::vector<double> a{3, 1, 5, 2, 4}, b{1, 2, 2, 2, 3};
  const auto r = paired_t_test(a, b);
  EXPECT_EQ(r.df, 4);
  EXPECT_NEAR(r.t, 1.414213562373095, 1e-12);
  EXPECT_NEAR(r.p, 0.23019964108049873, 1e-10);
  EXPECT_NEAR(r.sd_difference, 1.5811388300841898, 1e-12);
  EXPECT_NEAR(r.mean_difference, 1.0, 1e-15);
  EXPECT_FALSE(r.significant_at_05());

  const auto flipped = paired_t_test(b, a);
  EXPECT_NEAR(flipped.t, -r.t, 1e-12);
  EXPECT_NEAR(flipped.p, r.p, 1e-12);
}

TEST(TTest, AgreesWithBoostStudentT) {
  std::mt19937 rng(21);
  std::normal_distribution<double> noise(0.3, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 30;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      b[i] = noise(rng);
      a[i] = b[i] + noise(rng);
    }
    const auto r = paired_t_test(a, b);
    boost::math::students_t dist(static_cast<double>(r.df));
    const double expected = 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
    EXPECT_NEAR(r.p, expected, 1e-10) << "n=" << n << " t=" << r.t;
  }
}

TEST(TTest, IncompleteBetaAgainstBoost) {
  for (double a : {0.5, 1.0, 2.5, 10.0}) {
    for (double b : {0.5, 3.0, 7.0}) {
      for (double x : {0.0, 0.01, 0.3, 0.5, 0.77, 0.99, 1.0}) {
        EXPECT_NEAR(incomplete_beta(a, b, x), boost::math::ibeta(a, b, x), 1e-12)
            << a << " " << b << " " << x;
      }
    }
  }
  EXPECT_NEAR(student_t_cdf(0, 5), 0.5, 1e-15);
}

TEST(TTest, DegenerateInputs) {
  const std::vector<double> one{1}, two{1, 2}, three{1, 2, 3}, shifted{2, 3, 4};
  EXPECT_EQ(code_of([&] { paired_t_test(one, one); }), ErrorCode::kDegenerateInput);
  EXPECT_EQ(code_of([&] { paired_t_test(two, three); }), ErrorCode::kDegenerateInput);
  EXPECT_EQ(code_of([&] { paired_t_test(three, shifted); }), ErrorCode::kDegenerateInput);
}

TEST(Format, HalfUpOneDecimal) {
  EXPECT_EQ(format_percent(0.8496), "85.0");
  EXPECT_EQ(format_percent(0.12345), "12.3");
  EXPECT_EQ(format_percent(0.0005), "0.1");
  EXPECT_EQ(format_percent(0.9995), "100.0");
  EXPECT_EQ(format_percent(0.0), "0.0");
  EXPECT_EQ(format_percent(0.165), "16.5");
}

TEST(Headline, Names) {
  EXPECT_EQ(parse_headline("f_avg"), Headline::kFAvg);
  EXPECT_EQ(parse_headline("macro_f1"), Headline::kMacroF1);
  EXPECT_THROW(parse_headline("auc"), Error);
}
