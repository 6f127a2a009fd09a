#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panel/domain.hpp"

namespace panel::metrics {

/// Counts indexed by (gold, predicted) in label-set order. One extra
/// prediction column holds unparseable answers; it only ever adds false
/// negatives.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<std::string> labels);
  static ConfusionMatrix for_labels(const LabelSet& labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::optional<std::size_t> index_of(std::string_view label) const noexcept;
  std::size_t invalid_column() const noexcept { return labels_.size(); }

  // `predicted` == nullopt records an invalid answer.
  void add(std::size_t gold, std::optional<std::size_t> predicted, std::size_t count = 1);
  void add(std::string_view gold, std::optional<std::string_view> predicted);
  void set(std::size_t gold, std::size_t column, std::size_t count);

  std::size_t at(std::size_t gold, std::size_t column) const;
  std::size_t invalid(std::size_t gold) const { return at(gold, invalid_column()); }
  std::size_t row_total(std::size_t gold) const;
  std::size_t predicted_total(std::size_t cls) const;
  std::size_t total() const noexcept;
  std::size_t invalid_total() const noexcept;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::vector<std::string> labels_;
  std::vector<std::size_t> counts_;  // row-major, size() x (size() + 1)
};

// 0/0 is taken as 0 throughout.
double precision(const ConfusionMatrix& cm, std::size_t cls);
double recall(const ConfusionMatrix& cm, std::size_t cls);
double f1(const ConfusionMatrix& cm, std::size_t cls);
double f1(const ConfusionMatrix& cm, std::string_view label);  // kUnknownLabel
// Mean of the favor and against F1; kMissingClass when either is absent.
double f_avg(const ConfusionMatrix& cm);
bool has_f_avg(const ConfusionMatrix& cm) noexcept;
double macro_f1(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);

struct ClassScore {
  std::string label;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;
};

struct TargetScore {
  std::string target;
  std::optional<double> f_avg;
  double macro_f1 = 0;
  std::size_t n = 0;
};

struct RunScore {
  int run_index = 1;
  std::optional<double> f_avg;
  double macro_f1 = 0;
  double accuracy = 0;
  std::size_t n = 0;
  std::size_t invalid = 0;
};

enum class Headline { kFAvg, kMacroF1 };
std::string_view to_string(Headline h) noexcept;
Headline parse_headline(std::string_view s);

/// Scores for one run, or the mean over several. Scores are fractions.
struct ScoreReport {
  std::vector<std::string> labels;
  Headline headline_metric = Headline::kFAvg;
  std::vector<ClassScore> classes;
  std::optional<double> f_avg;
  double macro_f1 = 0;
  double accuracy = 0;
  std::size_t n = 0;
  std::size_t invalid = 0;
  std::vector<TargetScore> targets;  // first-appearance order
  int run_count = 1;
  std::vector<RunScore> runs;

  double headline() const;
};

struct Prediction {
  std::string instance_id;
  std::string target;
  std::string gold;
  std::optional<std::string> predicted;  // nullopt = invalid answer
};

ScoreReport score_run(std::span<const Prediction> predictions, const LabelSet& labels,
                      Headline headline, int run_index = 1);

/// Arithmetic mean of every score across runs; per-run rows are kept.
/// kHeterogeneousRuns when label sets, sizes or targets differ.
ScoreReport aggregate_runs(std::span<const ScoreReport> reports);

struct TTestResult {
  double t = 0;
  double p = 1;
  int df = 0;
  double mean_difference = 0;
  double sd_difference = 0;
  bool significant_at_05() const noexcept { return p < 0.05; }
};

/// Two-sided paired t-test on a - b. kDegenerateInput when the lengths
/// differ, fewer than two pairs are given or the differences are constant.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// P(T <= t) for Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);

// Fraction as a percentage with one decimal, halves rounded up: 0.8496 -> "85.0".
std::string format_percent(double fraction);

}  // namespace panel::metrics
