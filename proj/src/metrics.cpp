#include "mmfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mmfuse/errors.hpp"

namespace mmfuse {

namespace {

void check_inputs(std::span<const double> scores, std::span<const ClassLabel> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::kShapeError, "scores and labels differ in length");
  }
}

struct ClassTotals {
  long pos = 0;
  long neg = 0;
};

ClassTotals totals(std::span<const ClassLabel> labels) {
  ClassTotals t;
  for (auto l : labels) (is_positive(l) ? t.pos : t.neg) += 1;
  return t;
}

void require_both_classes(const ClassTotals& t, const char* what) {
  if (t.pos == 0 || t.neg == 0) {
    throw Error(ErrorKind::kSingleClass, std::string(what) + " needs both classes present");
  }
}

std::vector<std::size_t> ascending_order(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return idx;
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const ClassLabel> labels) {
  check_inputs(scores, labels);
  const ClassTotals t = totals(labels);
  require_both_classes(t, "auc_roc");
  const auto idx = ascending_order(scores);
  // Twice the Mann-Whitney U, kept integral so ties are exact.
  long long twice_u = 0;
  long neg_below = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    long p = 0;
    long q = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (is_positive(labels[idx[j]]) ? p : q) += 1;
      ++j;
    }
    twice_u += static_cast<long long>(p) * (2LL * neg_below + q);
    neg_below += q;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(t.pos) * static_cast<double>(t.neg));
}

ConfusionCounts confusion_counts(std::span<const double> scores, std::span<const ClassLabel> labels,
                                 double threshold) {
  check_inputs(scores, labels);
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (is_positive(labels[i])) {
      (pred ? c.tp : c.fn) += 1;
    } else {
      (pred ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

ConfusionMetrics metrics_from_counts(const ConfusionCounts& c) {
  ConfusionMetrics m;
  auto ratio = [&m](long num, long den, const char* name) {
    if (den == 0) {
      m.undefined.emplace_back(name);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  const long n = c.tp + c.fp + c.fn + c.tn;
  m.accuracy = ratio(c.tp + c.tn, n, "accuracy");
  m.sensitivity = ratio(c.tp, c.tp + c.fn, "sensitivity");
  m.specificity = ratio(c.tn, c.tn + c.fp, "specificity");
  m.ppv = ratio(c.tp, c.tp + c.fp, "ppv");
  m.npv = ratio(c.tn, c.tn + c.fn, "npv");
  // F1 is the harmonic mean of ppv and sensitivity; undefined with either.
  if (c.tp + c.fp == 0 || c.tp + c.fn == 0) {
    m.undefined.emplace_back("f1");
    m.f1 = 0.0;
  } else {
    m.f1 = static_cast<double>(2 * c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
  }
  return m;
}

ConfusionMetrics confusion_metrics(std::span<const double> scores,
                                   std::span<const ClassLabel> labels, double threshold) {
  return metrics_from_counts(confusion_counts(scores, labels, threshold));
}

MeanCi mean_ci(std::span<const double> fold_values) {
  const std::size_t k = fold_values.size();
  if (k < 2) throw Error(ErrorKind::kInsufficientFolds, "mean_ci needs at least 2 values");
  const double mean = std::accumulate(fold_values.begin(), fold_values.end(), 0.0) / k;
  double ss = 0.0;
  for (double v : fold_values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(k - 1));
  MeanCi out;
  out.mean = mean;
  out.half_width = 1.96 * sd / std::sqrt(static_cast<double>(k));
  out.low = std::clamp(mean - out.half_width, 0.0, 1.0);
  out.high = std::clamp(mean + out.half_width, 0.0, 1.0);
  return out;
}

EerPoint eer_point(std::span<const double> scores, std::span<const ClassLabel> labels) {
  check_inputs(scores, labels);
  const ClassTotals t = totals(labels);
  require_both_classes(t, "eer_point");
  const auto idx = ascending_order(scores);
  const double n_pos = static_cast<double>(t.pos);
  const double n_neg = static_cast<double>(t.neg);

  EerPoint best;
  double best_gap = std::numeric_limits<double>::infinity();
  long pos_below = 0;
  long neg_below = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double thr = scores[idx[i]];
    // Everything strictly below `thr` is predicted negative.
    const double fpr = static_cast<double>(t.neg - neg_below) / n_neg;
    const double fnr = static_cast<double>(pos_below) / n_pos;
    const double gap = std::abs(fpr - fnr);
    if (gap < best_gap) {
      best_gap = gap;
      best.threshold = thr;
      best.fpr = fpr;
      best.fnr = fnr;
      best.tpr = 1.0 - fnr;
      best.accuracy = static_cast<double>((t.pos - pos_below) + neg_below) /
                      static_cast<double>(t.pos + t.neg);
    }
    while (i < idx.size() && scores[idx[i]] == thr) {
      (is_positive(labels[idx[i]]) ? pos_below : neg_below) += 1;
      ++i;
    }
  }
  return best;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const ClassLabel> labels) {
  check_inputs(scores, labels);
  const ClassTotals t = totals(labels);
  require_both_classes(t, "roc_curve");
  auto idx = ascending_order(scores);
  std::reverse(idx.begin(), idx.end());
  std::vector<RocPoint> out;
  out.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  long tp = 0;
  long fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double thr = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == thr) {
      (is_positive(labels[idx[i]]) ? tp : fp) += 1;
      ++i;
    }
    out.push_back({static_cast<double>(fp) / t.neg, static_cast<double>(tp) / t.pos, thr});
  }
  return out;
}

double quantile_linear(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::kEmptyInput, "quantile of empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

}  // namespace mmfuse
