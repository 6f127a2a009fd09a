#include "panel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "panel/error.hpp"

namespace panel::metrics {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw Error(ErrorCode::kInvalidArgument, "confusion matrix needs labels");
  counts_.assign(labels_.size() * (labels_.size() + 1), 0);
}

ConfusionMatrix ConfusionMatrix::for_labels(const LabelSet& labels) {
  std::vector<std::string> names;
  for (const auto& l : labels.labels()) names.push_back(l.name);
  return ConfusionMatrix(std::move(names));
}

std::optional<std::size_t> ConfusionMatrix::index_of(std::string_view label) const noexcept {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

void ConfusionMatrix::add(std::size_t gold, std::optional<std::size_t> predicted,
                          std::size_t count) {
  const auto column = predicted.value_or(invalid_column());
  set(gold, column, at(gold, column) + count);
}

void ConfusionMatrix::add(std::string_view gold, std::optional<std::string_view> predicted) {
  const auto g = index_of(gold);
  if (!g) throw Error(ErrorCode::kUnknownLabel, "gold label '" + std::string(gold) + "'");
  std::optional<std::size_t> p;
  if (predicted) {
    p = index_of(*predicted);
    if (!p) throw Error(ErrorCode::kUnknownLabel, "predicted label '" + std::string(*predicted) + "'");
  }
  add(*g, p);
}

void ConfusionMatrix::set(std::size_t gold, std::size_t column, std::size_t count) {
  if (gold >= size() || column > size()) {
    throw Error(ErrorCode::kInvalidArgument, "confusion matrix index out of range");
  }
  counts_[gold * (size() + 1) + column] = count;
}

std::size_t ConfusionMatrix::at(std::size_t gold, std::size_t column) const {
  if (gold >= size() || column > size()) {
    throw Error(ErrorCode::kInvalidArgument, "confusion matrix index out of range");
  }
  return counts_[gold * (size() + 1) + column];
}

std::size_t ConfusionMatrix::row_total(std::size_t gold) const {
  std::size_t sum = 0;
  for (std::size_t c = 0; c <= size(); ++c) sum += at(gold, c);
  return sum;
}

std::size_t ConfusionMatrix::predicted_total(std::size_t cls) const {
  std::size_t sum = 0;
  for (std::size_t g = 0; g < size(); ++g) sum += at(g, cls);
  return sum;
}

std::size_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::invalid_total() const noexcept {
  std::size_t sum = 0;
  for (std::size_t g = 0; g < size(); ++g) sum += counts_[g * (size() + 1) + size()];
  return sum;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_class(const ConfusionMatrix& cm, std::size_t cls) {
  if (cls >= cm.size()) throw Error(ErrorCode::kInvalidArgument, "class index out of range");
}

}  // namespace

double precision(const ConfusionMatrix& cm, std::size_t cls) {
  check_class(cm, cls);
  return ratio(cm.at(cls, cls), cm.predicted_total(cls));
}

double recall(const ConfusionMatrix& cm, std::size_t cls) {
  check_class(cm, cls);
  return ratio(cm.at(cls, cls), cm.row_total(cls));
}

double f1(const ConfusionMatrix& cm, std::size_t cls) {
  const double p = precision(cm, cls);
  const double r = recall(cm, cls);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double f1(const ConfusionMatrix& cm, std::string_view label) {
  const auto idx = cm.index_of(label);
  if (!idx) throw Error(ErrorCode::kUnknownLabel, "no class '" + std::string(label) + "'");
  return f1(cm, *idx);
}

bool has_f_avg(const ConfusionMatrix& cm) noexcept {
  return cm.index_of("favor") && cm.index_of("against");
}

double f_avg(const ConfusionMatrix& cm) {
  const auto favor = cm.index_of("favor");
  const auto against = cm.index_of("against");
  if (!favor || !against) {
    throw Error(ErrorCode::kMissingClass, "F_avg needs both favor and against classes");
  }
  return (f1(cm, *favor) + f1(cm, *against)) / 2.0;
}

double macro_f1(const ConfusionMatrix& cm) {
  double sum = 0;
  for (std::size_t c = 0; c < cm.size(); ++c) sum += f1(cm, c);
  return sum / static_cast<double>(cm.size());
}

double accuracy(const ConfusionMatrix& cm) {
  std::size_t hits = 0;
  for (std::size_t c = 0; c < cm.size(); ++c) hits += cm.at(c, c);
  return ratio(hits, cm.total());
}

std::string_view to_string(Headline h) noexcept {
  return h == Headline::kFAvg ? "f_avg" : "macro_f1";
}

Headline parse_headline(std::string_view s) {
  if (s == "f_avg") return Headline::kFAvg;
  if (s == "macro_f1") return Headline::kMacroF1;
  throw Error(ErrorCode::kInvalidConfig, "unknown metric '" + std::string(s) + "'");
}

double ScoreReport::headline() const {
  if (headline_metric == Headline::kFAvg) {
    if (!f_avg) throw Error(ErrorCode::kMissingClass, "report has no F_avg");
    return *f_avg;
  }
  return macro_f1;
}

ScoreReport score_run(std::span<const Prediction> predictions, const LabelSet& labels,
                      Headline headline, int run_index) {
  ScoreReport report;
  report.headline_metric = headline;
  auto overall = ConfusionMatrix::for_labels(labels);
  report.labels = overall.labels();
  if (headline == Headline::kFAvg && !has_f_avg(overall)) {
    throw Error(ErrorCode::kMissingClass, "F_avg headline needs favor and against labels");
  }

  std::vector<std::string> target_order;
  std::map<std::string, ConfusionMatrix> by_target;
  for (const auto& p : predictions) {
    std::optional<std::string_view> predicted;
    if (p.predicted) predicted = *p.predicted;
    overall.add(p.gold, predicted);
    auto it = by_target.find(p.target);
    if (it == by_target.end()) {
      target_order.push_back(p.target);
      it = by_target.emplace(p.target, ConfusionMatrix::for_labels(labels)).first;
    }
    it->second.add(p.gold, predicted);
  }

  for (std::size_t c = 0; c < overall.size(); ++c) {
    report.classes.push_back(ClassScore{overall.labels()[c], precision(overall, c),
                                        recall(overall, c), f1(overall, c), overall.row_total(c)});
  }
  if (has_f_avg(overall)) report.f_avg = f_avg(overall);
  report.macro_f1 = macro_f1(overall);
  report.accuracy = accuracy(overall);
  report.n = overall.total();
  report.invalid = overall.invalid_total();

  for (const auto& t : target_order) {
    const auto& cm = by_target.at(t);
    TargetScore ts;
    ts.target = t;
    if (has_f_avg(cm)) ts.f_avg = f_avg(cm);
    ts.macro_f1 = macro_f1(cm);
    ts.n = cm.total();
    report.targets.push_back(std::move(ts));
  }

  report.run_count = 1;
  report.runs.push_back(RunScore{run_index, report.f_avg, report.macro_f1, report.accuracy,
                                 report.n, report.invalid});
  return report;
}

ScoreReport aggregate_runs(std::span<const ScoreReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::kInvalidArgument, "no runs to aggregate");
  const auto& first = reports.front();
  for (const auto& r : reports) {
    bool same = r.labels == first.labels && r.n == first.n &&
                r.headline_metric == first.headline_metric &&
                r.targets.size() == first.targets.size();
    for (std::size_t i = 0; same && i < r.targets.size(); ++i) {
      same = r.targets[i].target == first.targets[i].target && r.targets[i].n == first.targets[i].n;
    }
    if (!same) {
      throw Error(ErrorCode::kHeterogeneousRuns, "runs differ in label set, size or targets");
    }
  }

  const double k = static_cast<double>(reports.size());
  auto mean = [&](auto get) {
    double sum = 0;
    for (const auto& r : reports) sum += get(r);
    return sum / k;
  };
  auto mean_opt = [&](auto get) -> std::optional<double> {
    double sum = 0;
    for (const auto& r : reports) {
      const std::optional<double> v = get(r);
      if (!v) return std::nullopt;
      sum += *v;
    }
    return sum / k;
  };

  ScoreReport out;
  out.labels = first.labels;
  out.headline_metric = first.headline_metric;
  out.n = first.n;
  for (std::size_t c = 0; c < first.classes.size(); ++c) {
    ClassScore cs;
    cs.label = first.classes[c].label;
    cs.support = first.classes[c].support;
    cs.precision = mean([&](const ScoreReport& r) { return r.classes[c].precision; });
    cs.recall = mean([&](const ScoreReport& r) { return r.classes[c].recall; });
    cs.f1 = mean([&](const ScoreReport& r) { return r.classes[c].f1; });
    out.classes.push_back(std::move(cs));
  }
  out.f_avg = mean_opt([](const ScoreReport& r) { return r.f_avg; });
  out.macro_f1 = mean([](const ScoreReport& r) { return r.macro_f1; });
  out.accuracy = mean([](const ScoreReport& r) { return r.accuracy; });
  for (const auto& r : reports) out.invalid += r.invalid;
  for (std::size_t t = 0; t < first.targets.size(); ++t) {
    TargetScore ts;
    ts.target = first.targets[t].target;
    ts.n = first.targets[t].n;
    ts.f_avg = mean_opt([&](const ScoreReport& r) { return r.targets[t].f_avg; });
    ts.macro_f1 = mean([&](const ScoreReport& r) { return r.targets[t].macro_f1; });
    out.targets.push_back(std::move(ts));
  }
  out.run_count = 0;
  for (const auto& r : reports) {
    out.run_count += r.run_count;
    out.runs.insert(out.runs.end(), r.runs.begin(), r.runs.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

namespace {

// Continued fraction for the incomplete beta, modified Lentz evaluation.
double beta_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw Error(ErrorCode::kInvalidArgument, "beta parameters must be positive");
  if (x < 0.0 || x > 1.0) throw Error(ErrorCode::kInvalidArgument, "x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0)) throw Error(ErrorCode::kInvalidArgument, "degrees of freedom must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDegenerateInput, "paired samples differ in length");
  }
  if (a.size() < 2) throw Error(ErrorCode::kDegenerateInput, "need at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  if (std::all_of(d.begin(), d.end(), [&](double x) { return x == d.front(); })) {
    throw Error(ErrorCode::kDegenerateInput, "differences have zero variance");
  }
  const double n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));

  TTestResult r;
  r.df = static_cast<int>(d.size()) - 1;
  r.mean_difference = mean;
  r.sd_difference = sd;
  r.t = mean / (sd / std::sqrt(n));
  r.p = incomplete_beta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t));
  return r;
}

std::string format_percent(double fraction) {
  // The small nudge keeps values like 0.8435 (stored as 0.84349999...) from
  // rounding down.
  const double tenths = std::floor(fraction * 1000.0 + 0.5 + 1e-9);
  const auto v = static_cast<long long>(tenths);
  const auto whole = v / 10;
  const auto frac = v % 10;
  std::string out = (v < 0 && whole == 0) ? "-0" : std::to_string(whole);
  return out + "." + std::to_string(frac < 0 ? -frac : frac);
}

}  // namespace panel::metrics
