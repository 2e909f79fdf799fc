#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "mmfuse/metrics.hpp"

using namespace mmfuse;

namespace {

constexpr auto N = ClassLabel::kBenign;
constexpr auto P = ClassLabel::kBorderlineMalignant;

// All-pairs Mann-Whitney oracle.
double brute_auc(const std::vector<double>& s, const std::vector<ClassLabel>& y) {
  double wins = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_positive(y[i])) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (is_positive(y[j])) continue;
      ++pairs;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// Minimum |FPR - FNR| over every distinct score used as a threshold.
double brute_min_gap(const std::vector<double>& s, const std::vector<ClassLabel>& y) {
  double best = std::numeric_limits<double>::infinity();
  for (double t : s) {
    double fp = 0, tn = 0, fn = 0, tp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool pred = s[i] >= t;
      if (is_positive(y[i])) (pred ? tp : fn) += 1;
      else (pred ? fp : tn) += 1;
    }
    best = std::min(best, std::abs(fp / (fp + tn) - fn / (fn + tp)));
  }
  return best;
}

struct Instance {
  std::vector<double> scores;
  std::vector<ClassLabel> labels;
};

// Random instance with both classes; every third one draws from a few levels
// so ties are common.
Instance random_instance(Rng& rng, int t) {
  Instance in;
  const int n = 2 + static_cast<int>(rng.below(199));
  const bool ties = t % 3 == 0;
  for (int i = 0; i < n; ++i) {
    in.scores.push_back(ties ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform());
    in.labels.push_back(rng.bernoulli(0.3) ? P : N);
  }
  in.labels[0] = P;
  in.labels[1] = N;
  return in;
}

}  // namespace

TEST_CASE("auc_roc examples") {
  CHECK(auc_roc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<ClassLabel>{N, N, P, P}) == 0.75);
  CHECK(auc_roc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<ClassLabel>{N, N, P, P}) == 1.0);
  CHECK(auc_roc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<ClassLabel>{N, P, N}) == 0.5);
  CHECK(testutil::error_kind_of([] {
          auc_roc(std::vector<double>{0.1, 0.2}, std::vector<ClassLabel>{N, N});
        }) == ErrorKind::kSingleClass);
}

TEST_CASE("property: auc_roc equals the all-pairs oracle and ignores monotone transforms") {
  Rng rng(31);
  for (int t = 0; t < 300; ++t) {
    const auto in = random_instance(rng, t);
    const double a = auc_roc(in.scores, in.labels);
    CHECK(a == brute_auc(in.scores, in.labels));
    std::vector<double> warped;
    for (double s : in.scores) warped.push_back(std::exp(3.0 * s) - 7.0);
    CHECK(auc_roc(warped, in.labels) == a);
  }
}

TEST_CASE("confusion metrics") {
  std::vector<double> s;
  std::vector<ClassLabel> y;
  auto add = [&](int count, double score, ClassLabel label) {
    for (int i = 0; i < count; ++i) {
      s.push_back(score);
      y.push_back(label);
    }
  };
  add(5, 0.9, P);
  add(1, 0.7, N);
  add(2, 0.2, P);
  add(12, 0.1, N);
  const auto c = confusion_counts(s, y, 0.5);
  CHECK(c.tp == 5);
  CHECK(c.fp == 1);
  CHECK(c.fn == 2);
  CHECK(c.tn == 12);
  const auto m = confusion_metrics(s, y, 0.5);
  CHECK(m.sensitivity == doctest::Approx(5.0 / 7).epsilon(1e-15));
  CHECK(m.specificity == doctest::Approx(12.0 / 13).epsilon(1e-15));
  CHECK(m.ppv == doctest::Approx(5.0 / 6).epsilon(1e-15));
  CHECK(m.npv == doctest::Approx(12.0 / 14).epsilon(1e-15));
  CHECK(m.accuracy == doctest::Approx(17.0 / 20).epsilon(1e-15));
  CHECK(m.f1 == doctest::Approx(10.0 / 13).epsilon(1e-15));
  CHECK(m.undefined.empty());

  const auto perfect = metrics_from_counts({2, 0, 0, 2});
  for (double v : {perfect.accuracy, perfect.f1, perfect.sensitivity, perfect.specificity, perfect.ppv, perfect.npv}) {
    CHECK(v == 1.0);
  }

  const auto none = confusion_metrics(std::vector<double>{0.1, 0.2}, std::vector<ClassLabel>{P, N}, 0.5);
  CHECK(none.ppv == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK(std::find(none.undefined.begin(), none.undefined.end(), "ppv") != none.undefined.end());
  CHECK(std::find(none.undefined.begin(), none.undefined.end(), "f1") != none.undefined.end());

  CHECK(confusion_counts(std::vector<double>{0.5}, std::vector<ClassLabel>{P}, 0.5).tp == 1);
}

TEST_CASE("mean_ci") {
  const auto r = mean_ci(std::vector<double>{0.9, 1.0, 1.0, 0.9, 0.9});
  CHECK(r.mean == doctest::Approx(0.94).epsilon(1e-12));
  CHECK(std::abs(r.low - 0.8920) < 1e-4);
  CHECK(std::abs(r.high - 0.9880) < 1e-4);

  const auto flat = mean_ci(std::vector<double>{0.7, 0.7, 0.7});
  CHECK(flat.low == doctest::Approx(0.7));
  CHECK(flat.high == doctest::Approx(0.7));

  const auto clipped = mean_ci(std::vector<double>{1.0, 1.0, 0.8, 1.0, 1.0});
  CHECK(clipped.high == 1.0);
  CHECK(clipped.mean + clipped.half_width > 1.0);
  CHECK(clipped.mean - clipped.low == doctest::Approx(clipped.half_width).epsilon(1e-12));

  CHECK(testutil::error_kind_of([] { mean_ci(std::vector<double>{0.5}); }) == ErrorKind::kInsufficientFolds);
}

TEST_CASE("property: mean_ci is centred on the mean with the sample sd") {
  Rng rng(41);
  for (int t = 0; t < 100; ++t) {
    const int k = 2 + static_cast<int>(rng.below(9));
    std::vector<double> v(k);
    for (double& x : v) x = rng.uniform(0.3, 0.7);
    double mean = 0;
    for (double x : v) mean += x;
    mean /= k;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double half = 1.96 * std::sqrt(ss / (k - 1)) / std::sqrt(static_cast<double>(k));
    const auto r = mean_ci(v);
    CHECK(r.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(r.half_width == doctest::Approx(half).epsilon(1e-12));
    CHECK(r.low == doctest::Approx(std::max(0.0, mean - half)).epsilon(1e-12));
    CHECK(r.high == doctest::Approx(std::min(1.0, mean + half)).epsilon(1e-12));
  }
}

TEST_CASE("eer_point examples") {
  const auto e = eer_point(std::vector<double>{0.2, 0.4, 0.6, 0.8}, std::vector<ClassLabel>{N, P, N, P});
  CHECK(e.threshold == 0.6);
  CHECK(e.fpr == 0.5);
  CHECK(e.fnr == 0.5);
  CHECK(e.tpr == 0.5);
  CHECK(e.accuracy == 0.5);

  const auto sep = eer_point(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<ClassLabel>{N, N, P, P});
  CHECK(sep.fpr == 0.0);
  CHECK(sep.fnr == 0.0);

  const auto same = eer_point(std::vector<double>{0.4, 0.4, 0.4}, std::vector<ClassLabel>{N, P, N});
  CHECK(same.threshold == 0.4);
  CHECK(same.fpr == 1.0);
  CHECK(same.fnr == 0.0);
}

TEST_CASE("property: eer_point attains the exhaustive minimum gap") {
  Rng rng(51);
  for (int t = 0; t < 300; ++t) {
    const auto in = random_instance(rng, t);
    const auto e = eer_point(in.scores, in.labels);
    CHECK(std::abs(e.fpr - e.fnr) == brute_min_gap(in.scores, in.labels));
    CHECK(e.tpr == doctest::Approx(1.0 - e.fnr).epsilon(1e-15));
  }
}

TEST_CASE("roc_curve endpoints and monotonicity") {
  Rng rng(61);
  for (int t = 0; t < 50; ++t) {
    const auto in = random_instance(rng, t);
    const auto roc = roc_curve(in.scores, in.labels);
    REQUIRE(roc.size() >= 2);
    CHECK(roc.front().fpr == 0.0);
    CHECK(roc.front().tpr == 0.0);
    CHECK(std::isinf(roc.front().threshold));
    CHECK(roc.back().fpr == 1.0);
    CHECK(roc.back().tpr == 1.0);
    double area = 0;
    for (std::size_t i = 1; i < roc.size(); ++i) {
      CHECK(roc[i].fpr >= roc[i - 1].fpr);
      CHECK(roc[i].tpr >= roc[i - 1].tpr);
      CHECK(roc[i].threshold < roc[i - 1].threshold);
      area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2;
    }
    CHECK(area == doctest::Approx(auc_roc(in.scores, in.labels)).epsilon(1e-12));
  }
}

TEST_CASE("quantile_linear") {
  const std::vector<double> v{4, 1, 3, 2};
  CHECK(quantile_linear(v, 0.0) == 1.0);
  CHECK(quantile_linear(v, 1.0) == 4.0);
  CHECK(quantile_linear(v, 0.5) == 2.5);
  CHECK(quantile_linear(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile_linear(std::vector<double>{7}, 0.3) == 7.0);
}
