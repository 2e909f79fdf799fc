#include "mmfuse/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <future>
#include <map>
#include <set>
#include <unordered_set>

#include "mmfuse/csv.hpp"
#include "mmfuse/errors.hpp"
#include "mmfuse/preprocess.hpp"

namespace mmfuse {

const SubjectRecord& Dataset::subject(const std::string& id) const {
  for (const auto& s : subjects) {
    if (s.subject_id == id) return s;
  }
  throw Error(ErrorKind::kOrphanImage, "unknown subject " + id);
}

std::unordered_map<std::string, int> Dataset::image_counts() const {
  std::unordered_map<std::string, int> counts;
  for (const auto& img : images) counts[img.subject_id] += 1;
  return counts;
}

template <typename T>
std::vector<NamedTensor> snapshot_parameters(const FusionModel<T>& model) {
  std::vector<NamedTensor> out;
  for (const auto* p : model.parameters()) {
    out.push_back({p->name, p->shape, std::vector<double>(p->value.begin(), p->value.end())});
  }
  return out;
}

template <typename T>
void load_parameters(FusionModel<T>& model, std::span<const NamedTensor> tensors) {
  for (auto* p : model.parameters()) {
    auto it = std::find_if(tensors.begin(), tensors.end(),
                           [p](const NamedTensor& t) { return t.name == p->name; });
    if (it == tensors.end()) throw Error(ErrorKind::kConfigError, "missing parameter " + p->name);
    if (it->shape != p->shape || it->values.size() != p->value.size()) {
      throw Error(ErrorKind::kConfigError, "shape mismatch for parameter " + p->name);
    }
    std::transform(it->values.begin(), it->values.end(), p->value.begin(),
                   [](double v) { return static_cast<T>(v); });
  }
}

template <typename T>
FusionModel<T> instantiate(const FoldModel& fold_model) {
  FusionModel<T> model(fold_model.config, 0);
  load_parameters(model, fold_model.parameters);
  return model;
}

template std::vector<NamedTensor> snapshot_parameters<float>(const FusionModel<float>&);
template std::vector<NamedTensor> snapshot_parameters<double>(const FusionModel<double>&);
template void load_parameters<float>(FusionModel<float>&, std::span<const NamedTensor>);
template void load_parameters<double>(FusionModel<double>&, std::span<const NamedTensor>);
template FusionModel<float> instantiate<float>(const FoldModel&);
template FusionModel<double> instantiate<double>(const FoldModel&);

namespace {

struct FoldOutput {
  std::vector<PredictionRecord> predictions;
  FoldModel model;
  long overlap = 0;
};

template <typename T>
FoldOutput run_fold(const Dataset& dataset, const std::vector<int>& image_fold, int fold,
                    const TrainConfig& config, FusionModelConfig model_config, Modality mode,
                    const ExperimentOptions& options) {
  std::set<std::string> train_subjects;
  std::set<std::string> val_subjects;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    (image_fold[i] == fold ? val_subjects : train_subjects).insert(dataset.images[i].subject_id);
  }
  FoldOutput out;
  for (const auto& s : val_subjects) out.overlap += static_cast<long>(train_subjects.count(s));
  if (out.overlap > 0 && !options.allow_subject_leakage) {
    throw Error(ErrorKind::kConfigError,
                std::to_string(out.overlap) + " subjects appear in both train and validation");
  }

  std::vector<SubjectRecord> train_records;
  for (const auto& s : dataset.subjects) {
    if (train_subjects.count(s.subject_id)) train_records.push_back(s);
  }
  const NormalizerStats stats = fit_normalizer(train_records);
  std::map<std::string, ClinicalVector> encoded;
  for (const auto& s : dataset.subjects) encoded[s.subject_id] = encode_clinical(s, dataset.schema, stats);

  model_config.clinical_dims[0] = dataset.schema.total_dim();
  model_config.modality = mode;
  const int h = model_config.encoder.input_height;
  const int w = model_config.encoder.input_width;

  std::vector<Sample> train;
  std::vector<Sample> val;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const auto& img = dataset.images[i];
    Sample s{img.image_id, img.subject_id, preprocess_for_model(img.pixels, h, w),
             encoded.at(img.subject_id), dataset.subject(img.subject_id).label};
    (image_fold[i] == fold ? val : train).push_back(std::move(s));
  }

  auto trained = train_fold<T>(config, model_config, train, mode, derive_seed(config.seed, {static_cast<std::uint64_t>(fold)}));
  for (const auto& s : val) {
    const auto x = trained.model.prepare_image(s.image);
    const std::vector<T> c(s.clinical.begin(), s.clinical.end());
    out.predictions.push_back({s.image_id, s.subject_id, fold, s.label,
                               static_cast<double>(trained.model.forward(x, c))});
  }
  if (options.keep_models) {
    out.model.fold = fold;
    out.model.config = trained.model.config();
    out.model.schema = dataset.schema;
    out.model.stats = stats;
    out.model.parameters = snapshot_parameters(trained.model);
  }
  out.model.loss_history = std::move(trained.loss_history);
  return out;
}

template <typename T>
ExperimentResult run_typed(const Dataset& dataset, const FoldPlan& folds, const TrainConfig& config,
                           const FusionModelConfig& model_config, Modality mode,
                           const ExperimentOptions& options) {
  std::vector<int> image_fold(dataset.images.size());
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const auto& img = dataset.images[i];
    const std::string& key =
        options.split_unit == SplitUnit::kSubject ? img.subject_id : img.image_id;
    auto it = folds.assignments.find(key);
    if (it == folds.assignments.end()) {
      throw Error(ErrorKind::kConfigError, "fold plan does not cover '" + key + "'");
    }
    image_fold[i] = it->second;
  }

  auto run_one = [&](int f) {
    try {
      return run_fold<T>(dataset, image_fold, f, config, model_config, mode, options);
    } catch (const Error& e) {
      throw Error(e.kind(), "fold " + std::to_string(f) + ": " + e.message(), e.details());
    }
  };

  std::vector<FoldOutput> outputs(folds.k);
  if (options.parallel_folds) {
    std::vector<std::future<FoldOutput>> futures;
    for (int f = 0; f < folds.k; ++f) futures.push_back(std::async(std::launch::async, run_one, f));
    for (int f = 0; f < folds.k; ++f) outputs[f] = futures[f].get();
  } else {
    for (int f = 0; f < folds.k; ++f) outputs[f] = run_one(f);
  }

  ExperimentResult result;
  long overlap = 0;
  for (auto& o : outputs) {
    result.predictions.insert(result.predictions.end(), o.predictions.begin(), o.predictions.end());
    overlap += o.overlap;
    if (options.keep_models) result.models.push_back(std::move(o.model));
  }
  result.report = build_report(result.predictions, folds.k, mode, options.threshold);
  result.report.subject_overlap = overlap;
  for (int f : folds.folds_without_positives) {
    result.report.warnings.push_back("InsufficientClass: fold " + std::to_string(f) +
                                     " has no positive subjects");
  }
  return result;
}

}  // namespace

ExperimentResult run_experiment(const Dataset& dataset, const FoldPlan& folds,
                                const TrainConfig& config, const FusionModelConfig& model_config,
                                Modality mode, const ExperimentOptions& options) {
  if (dataset.images.empty()) throw Error(ErrorKind::kEmptyInput, "run_experiment: no images");
  if (folds.k < 2) throw Error(ErrorKind::kConfigError, "run_experiment: fold plan has k < 2");
  check_referential_integrity(dataset.images, dataset.subjects);
  if (config.precision == Precision::kFloat32) {
    return run_typed<float>(dataset, folds, config, model_config, mode, options);
  }
  return run_typed<double>(dataset, folds, config, model_config, mode, options);
}

FoldPlan make_image_level_folds(std::span<const ImageRecord> images, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::kConfigError, "k must be >= 2");
  std::vector<std::size_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, {0x696d67ULL}));
  rng.shuffle(std::span<std::size_t>(order));
  FoldPlan plan;
  plan.k = k;
  for (std::size_t i = 0; i < order.size(); ++i) {
    plan.assignments[images[order[i]].image_id] = static_cast<int>(i % k);
  }
  return plan;
}

MetricsReport build_report(std::span<const PredictionRecord> predictions, int k, Modality mode,
                           double threshold) {
  MetricsReport report;
  report.modality = mode;
  report.threshold = threshold;
  std::vector<double> aucs;
  for (int f = 0; f < k; ++f) {
    std::vector<double> scores;
    std::vector<ClassLabel> labels;
    for (const auto& p : predictions) {
      if (p.fold == f) {
        scores.push_back(p.probability);
        labels.push_back(p.label);
      }
    }
    if (scores.empty()) {
      report.warnings.push_back("fold " + std::to_string(f) + " has no validation images");
      continue;
    }
    FoldMetrics fm;
    fm.fold = f;
    fm.n_images = static_cast<long>(scores.size());
    fm.n_positive = std::count_if(labels.begin(), labels.end(), is_positive);
    const auto cm = confusion_metrics(scores, labels, threshold);
    fm.accuracy = cm.accuracy;
    fm.f1 = cm.f1;
    fm.sensitivity = cm.sensitivity;
    fm.specificity = cm.specificity;
    fm.ppv = cm.ppv;
    fm.npv = cm.npv;
    for (const auto& u : cm.undefined) fm.flags.push_back("undefined:" + u);
    if (fm.n_positive > 0 && fm.n_positive < fm.n_images) {
      fm.auc_roc = auc_roc(scores, labels);
      aucs.push_back(*fm.auc_roc);
    } else {
      fm.flags.push_back("undefined:auc_roc");
    }
    report.folds.push_back(std::move(fm));
  }
  if (!report.folds.empty()) {
    const double n = static_cast<double>(report.folds.size());
    for (const auto& fm : report.folds) {
      report.accuracy += fm.accuracy / n;
      report.f1 += fm.f1 / n;
      report.sensitivity += fm.sensitivity / n;
      report.specificity += fm.specificity / n;
      report.ppv += fm.ppv / n;
      report.npv += fm.npv / n;
    }
  }
  if (aucs.size() >= 2) {
    report.auc_ci = mean_ci(aucs);
    report.auc_roc = report.auc_ci->mean;
  } else if (aucs.size() == 1) {
    report.auc_roc = aucs[0];
    report.warnings.push_back("AUC defined on a single fold; no confidence interval");
  }
  std::vector<double> scores;
  std::vector<ClassLabel> labels;
  for (const auto& p : predictions) {
    scores.push_back(p.probability);
    labels.push_back(p.label);
  }
  const bool has_pos = std::any_of(labels.begin(), labels.end(), is_positive);
  const bool has_neg = std::any_of(labels.begin(), labels.end(), [](auto l) { return !is_positive(l); });
  if (has_pos && has_neg) report.eer = eer_point(scores, labels);
  return report;
}

std::vector<PredictionRecord> aggregate_by_subject(std::span<const PredictionRecord> predictions) {
  std::map<std::string, std::pair<PredictionRecord, int>> acc;
  for (const auto& p : predictions) {
    auto [it, inserted] = acc.try_emplace(p.subject_id, p, 0);
    if (inserted) {
      it->second.first.image_id = p.subject_id;
      it->second.first.probability = 0.0;
    }
    it->second.first.probability += p.probability;
    it->second.second += 1;
  }
  std::vector<PredictionRecord> out;
  for (auto& [id, entry] : acc) {
    entry.first.probability /= entry.second;
    out.push_back(entry.first);
  }
  return out;
}

void write_predictions_csv(const std::filesystem::path& path,
                           std::span<const PredictionRecord> predictions) {
  CsvTable t;
  t.header = {"image_id", "subject_id", "fold", "label", "prob"};
  for (const auto& p : predictions) {
    t.rows.push_back({p.image_id, p.subject_id, std::to_string(p.fold),
                      std::to_string(label_index(p.label)), format_double(p.probability)});
  }
  write_csv(path, t);
}

std::vector<PredictionRecord> read_predictions_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto c_img = t.column("image_id");
  const auto c_sub = t.column("subject_id");
  const auto c_fold = t.column("fold");
  const auto c_label = t.column("label");
  const auto c_prob = t.column("prob");
  if (!c_img || !c_sub || !c_fold || !c_label || !c_prob) {
    throw Error(ErrorKind::kMissingField, path.string() + ": not a predictions file");
  }
  std::vector<PredictionRecord> out;
  for (const auto& row : t.rows) {
    PredictionRecord p;
    p.image_id = row.at(*c_img);
    p.subject_id = row.at(*c_sub);
    p.fold = std::stoi(row.at(*c_fold));
    p.label = row.at(*c_label) == "1" ? ClassLabel::kBorderlineMalignant : ClassLabel::kBenign;
    const auto& cell = row.at(*c_prob);
    std::from_chars(cell.data(), cell.data() + cell.size(), p.probability);
    out.push_back(std::move(p));
  }
  return out;
}

void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> roc) {
  CsvTable t;
  t.header = {"fpr", "tpr", "threshold"};
  for (const auto& p : roc) {
    t.rows.push_back({format_double(p.fpr), format_double(p.tpr),
                      std::isinf(p.threshold) ? "inf" : format_double(p.threshold)});
  }
  write_csv(path, t);
}

}  // namespace mmfuse
