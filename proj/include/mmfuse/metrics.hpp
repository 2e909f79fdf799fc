#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmfuse/core_data.hpp"

namespace mmfuse {

// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
// ties counting one half. Throws SingleClass when a class is absent.
double auc_roc(std::span<const double> scores, std::span<const ClassLabel> labels);

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;
};

// Predicted positive iff score >= threshold.
ConfusionCounts confusion_counts(std::span<const double> scores, std::span<const ClassLabel> labels,
                                 double threshold);

struct ConfusionMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double ppv = 0.0;
  double npv = 0.0;
  // Metrics whose denominator was zero; they are reported as 0.
  std::vector<std::string> undefined;
};

ConfusionMetrics metrics_from_counts(const ConfusionCounts& c);
ConfusionMetrics confusion_metrics(std::span<const double> scores,
                                   std::span<const ClassLabel> labels, double threshold = 0.5);

struct MeanCi {
  double mean = 0.0;
  double low = 0.0;   // clipped to [0, 1]
  double high = 0.0;  // clipped to [0, 1]
  double half_width = 0.0;  // 1.96 * sd / sqrt(k), before clipping
};

// mean +- 1.96 * sample_sd / sqrt(k), bounds clipped to [0, 1].
// Throws InsufficientFolds for k < 2.
MeanCi mean_ci(std::span<const double> fold_values);

struct EerPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
  double fnr = 0.0;
  double accuracy = 0.0;
};

// Sweeps every distinct score as a threshold and returns the one minimizing
// |FPR - FNR|, preferring the lower threshold on ties.
EerPoint eer_point(std::span<const double> scores, std::span<const ClassLabel> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

// ROC vertices from (0,0) to (1,1), thresholds descending; the first point
// has threshold +inf.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const ClassLabel> labels);

// Linear-interpolation quantile (the "type 7" rule): position q * (n - 1)
// in the sorted sample.
double quantile_linear(std::span<const double> values, double q);

}  // namespace mmfuse
