#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmfuse/core_data.hpp"
#include "mmfuse/fusion_model.hpp"
#include "mmfuse/ingest.hpp"
#include "mmfuse/metrics.hpp"
#include "mmfuse/sampling.hpp"
#include "mmfuse/train.hpp"

namespace mmfuse {

struct Dataset {
  ClinicalSchema schema = ClinicalSchema::default_schema();
  std::vector<SubjectRecord> subjects;
  std::vector<ImageRecord> images;

  const SubjectRecord& subject(const std::string& id) const;
  std::unordered_map<std::string, int> image_counts() const;
};

struct PredictionRecord {
  std::string image_id;
  std::string subject_id;
  int fold = 0;
  ClassLabel label = ClassLabel::kBenign;
  double probability = 0.0;  // positive class
};

struct FoldMetrics {
  int fold = 0;
  long n_images = 0;
  long n_positive = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::optional<double> auc_roc;  // absent when the fold lacks a class
  double sensitivity = 0.0;
  double specificity = 0.0;
  double ppv = 0.0;
  double npv = 0.0;
  std::vector<std::string> flags;
};

struct MetricsReport {
  Modality modality = Modality::kMultimodal;
  double threshold = 0.5;
  std::string evaluation_unit = "image";
  std::vector<FoldMetrics> folds;
  // Means over folds (auc over folds where it is defined).
  double accuracy = 0.0;
  double f1 = 0.0;
  double auc_roc = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double ppv = 0.0;
  double npv = 0.0;
  std::optional<MeanCi> auc_ci;
  // Pooled over all held-out predictions.
  std::optional<EerPoint> eer;
  long subject_overlap = 0;
  std::vector<std::string> warnings;
};

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

// Everything needed to rebuild one fold's trained model.
struct FoldModel {
  int fold = 0;
  FusionModelConfig config;
  ClinicalSchema schema;
  NormalizerStats stats;
  std::vector<NamedTensor> parameters;
  std::vector<double> loss_history;
};

template <typename T>
std::vector<NamedTensor> snapshot_parameters(const FusionModel<T>& model);
// Throws ConfigError on missing names or shape mismatch.
template <typename T>
void load_parameters(FusionModel<T>& model, std::span<const NamedTensor> tensors);
template <typename T>
FusionModel<T> instantiate(const FoldModel& fold_model);

enum class SplitUnit { kSubject, kImage };

struct ExperimentOptions {
  double threshold = 0.5;
  bool keep_models = true;
  bool parallel_folds = false;
  // kImage reads the plan's keys as image ids (leaky control experiment).
  SplitUnit split_unit = SplitUnit::kSubject;
  // Subject overlap between train and validation raises ConfigError unless set.
  bool allow_subject_leakage = false;
};

struct ExperimentResult {
  MetricsReport report;
  std::vector<PredictionRecord> predictions;
  std::vector<FoldModel> models;
};

// Per fold: fit the normalizer on training subjects, train, predict the
// held-out images, score; then aggregate. Fold failures are rethrown with
// the fold index in the message.
ExperimentResult run_experiment(const Dataset& dataset, const FoldPlan& folds,
                                const TrainConfig& config, const FusionModelConfig& model_config,
                                Modality mode, const ExperimentOptions& options = {});

// Image-level k-fold (ignores subjects); only for leakage controls.
FoldPlan make_image_level_folds(std::span<const ImageRecord> images, int k, std::uint64_t seed);

// Scores a pooled prediction list into a report (per-fold plus aggregate).
MetricsReport build_report(std::span<const PredictionRecord> predictions, int k, Modality mode,
                           double threshold);

// Mean probability per subject; fold and label taken from the subject.
std::vector<PredictionRecord> aggregate_by_subject(std::span<const PredictionRecord> predictions);

void write_predictions_csv(const std::filesystem::path& path,
                           std::span<const PredictionRecord> predictions);
std::vector<PredictionRecord> read_predictions_csv(const std::filesystem::path& path);
void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> roc);

}  // namespace mmfuse
