#include "mmfuse/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "mmfuse/csv.hpp"
#include "mmfuse/errors.hpp"
#include "mmfuse/preprocess.hpp"
#include "mmfuse/render.hpp"

namespace mmfuse {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::kConfigError, "field " + field + ": " + what);
}

void require_keys(const Json& j, const std::string& section,
                  std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) config_error(section, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      config_error(section.empty() ? key : section + "." + key, "unknown key");
    }
  }
}

template <typename V>
V value_or(const Json& j, const std::string& section, const char* key, V fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    config_error(section.empty() ? std::string(key) : section + "." + key, "wrong type");
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return fs::absolute(base / p).lexically_normal();
}

std::pair<int, int> int_pair(const Json& j, const std::string& field) {
  std::vector<int> v;
  try {
    v = j.get<std::vector<int>>();
  } catch (const nlohmann::json::exception&) {
    config_error(field, "expected a two-element integer list");
  }
  if (v.size() != 2) config_error(field, "expected a two-element integer list");
  return {v[0], v[1]};
}

CropSpec crop_from_json(const Json& j) {
  require_keys(j, "data.crop", {"unit", "top", "bottom", "left", "right"});
  CropSpec c;
  const auto unit = value_or(j, "data.crop", "unit", std::string("pixels"));
  if (unit == "fraction") {
    c.unit = CropSpec::Unit::kFraction;
  } else if (unit != "pixels") {
    config_error("data.crop.unit", "expected 'pixels' or 'fraction'");
  }
  c.top = value_or(j, "data.crop", "top", 0.0);
  c.bottom = value_or(j, "data.crop", "bottom", 0.0);
  c.left = value_or(j, "data.crop", "left", 0.0);
  c.right = value_or(j, "data.crop", "right", 0.0);
  return c;
}

SynthConfig synth_from_json(const Json& j, std::uint64_t default_seed) {
  const std::string s = "synth";
  require_keys(j, s, {"n_subjects", "images_per_subject", "positive_fraction", "image_size",
                      "image_signal", "clinical_signal", "noise_sd", "seed", "duplicate_images"});
  SynthConfig c;
  c.seed = default_seed;
  c.n_subjects = value_or(j, s, "n_subjects", c.n_subjects);
  if (j.contains("images_per_subject")) {
    std::tie(c.images_min, c.images_max) = int_pair(j.at("images_per_subject"), "synth.images_per_subject");
  }
  c.positive_fraction = value_or(j, s, "positive_fraction", c.positive_fraction);
  if (j.contains("image_size")) {
    std::tie(c.image_height, c.image_width) = int_pair(j.at("image_size"), "synth.image_size");
  }
  c.image_signal = value_or(j, s, "image_signal", c.image_signal);
  c.clinical_signal = value_or(j, s, "clinical_signal", c.clinical_signal);
  c.noise_sd = value_or(j, s, "noise_sd", c.noise_sd);
  c.seed = value_or(j, s, "seed", c.seed);
  c.duplicate_images = value_or(j, s, "duplicate_images", c.duplicate_images);
  c.validate();
  return c;
}

Json synth_to_json(const SynthConfig& c) {
  return {{"n_subjects", c.n_subjects},
          {"images_per_subject", {c.images_min, c.images_max}},
          {"positive_fraction", c.positive_fraction},
          {"image_size", {c.image_height, c.image_width}},
          {"image_signal", c.image_signal},
          {"clinical_signal", c.clinical_signal},
          {"noise_sd", c.noise_sd},
          {"seed", c.seed},
          {"duplicate_images", c.duplicate_images}};
}

bool is_empty_dir(const fs::path& p) { return !fs::exists(p) || fs::is_empty(p); }

// Refuses to reuse a non-empty directory unless forced; even when forced, only
// a directory carrying `marker` (i.e. produced by this tool) is cleared.
void prepare_output_dir(const fs::path& dir, bool force, const char* marker) {
  if (fs::exists(dir) && !fs::is_directory(dir)) {
    throw Error(ErrorKind::kIoError, dir.string() + " exists and is not a directory");
  }
  if (!is_empty_dir(dir)) {
    if (!force) {
      throw Error(ErrorKind::kConfigError,
                  "output directory " + dir.string() + " is not empty (pass --force to overwrite)");
    }
    if (!fs::exists(dir / marker)) {
      throw Error(ErrorKind::kConfigError, "refusing to clear " + dir.string() + ": no " +
                                               std::string(marker) + " found, not an output of this tool");
    }
    for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path());
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIoError, "cannot create " + dir.string() + ": " + ec.message());
}

Dataset dataset_from_disk(const DataPaths& paths, const ClinicalSchema& schema) {
  Dataset d;
  d.schema = schema;
  d.subjects = load_clinical_csv(paths.clinical_csv, schema);
  ManifestOptions opts;
  opts.crop = paths.crop;
  opts.remove_duplicates = paths.remove_duplicates;
  d.images = load_manifest(paths.manifest, d.subjects, opts);
  return d;
}

fs::path checkpoint_path(const fs::path& run_dir, Modality mode, int fold) {
  return run_dir / "checkpoints" /
         (std::string(modality_name(mode)) + "_fold" + std::to_string(fold) + ".ckpt");
}

fs::path predictions_path(const fs::path& run_dir, Modality mode) {
  return run_dir / ("predictions_" + std::string(modality_name(mode)) + ".csv");
}

void require_run_dir(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) {
    throw Error(ErrorKind::kUnreadableFile, "run directory " + run_dir.string() + " does not exist");
  }
  if (!fs::exists(run_dir / "config.json")) {
    throw Error(ErrorKind::kUnreadableFile, run_dir.string() + " has no config.json");
  }
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

RunConfig run_config_from_json(const Json& j, const fs::path& base_dir) {
  require_keys(j, "", {"seed", "k", "output_dir", "data", "synth", "schema", "model", "train",
                       "modes", "parallel_folds", "threshold", "metadata"});
  RunConfig c;
  c.seed = value_or(j, "", "seed", c.seed);
  c.k = value_or(j, "", "k", c.k);
  if (c.k < 2) config_error("k", "must be >= 2");
  c.output_dir = resolve(base_dir, value_or(j, "", "output_dir", c.output_dir.string()));
  c.parallel_folds = value_or(j, "", "parallel_folds", c.parallel_folds);
  c.threshold = value_or(j, "", "threshold", c.threshold);
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) config_error("threshold", "must be in [0, 1]");

  const bool has_data = j.contains("data") && !j.at("data").is_null();
  const bool has_synth = j.contains("synth") && !j.at("synth").is_null();
  if (has_data == has_synth) {
    config_error("data", "exactly one of 'data' and 'synth' must be given");
  }
  if (has_data) {
    const Json& d = j.at("data");
    require_keys(d, "data", {"clinical_csv", "manifest", "crop", "remove_duplicates"});
    DataPaths p;
    if (!d.contains("clinical_csv")) config_error("data.clinical_csv", "missing");
    if (!d.contains("manifest")) config_error("data.manifest", "missing");
    p.clinical_csv = resolve(base_dir, value_or(d, "data", "clinical_csv", std::string{}));
    p.manifest = resolve(base_dir, value_or(d, "data", "manifest", std::string{}));
    if (d.contains("crop")) p.crop = crop_from_json(d.at("crop"));
    p.remove_duplicates = value_or(d, "data", "remove_duplicates", p.remove_duplicates);
    c.data = std::move(p);
  } else {
    c.synth = synth_from_json(j.at("synth"), c.seed);
  }

  if (j.contains("schema")) c.schema = schema_from_json(j.at("schema"));
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  c.model.clinical_dims[0] = c.schema.total_dim();
  Json train = j.contains("train") ? j.at("train") : Json::object();
  if (!train.contains("seed")) train["seed"] = c.seed;
  c.train = train_config_from_json(train);

  if (j.contains("modes")) {
    c.modes.clear();
    std::vector<std::string> names;
    try {
      names = j.at("modes").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception&) {
      config_error("modes", "expected a list of mode names");
    }
    for (const auto& n : names) {
      try {
        c.modes.push_back(parse_modality(n));
      } catch (const Error& e) {
        config_error("modes", e.message());
      }
    }
    if (c.modes.empty()) config_error("modes", "at least one mode is required");
  }
  return c;
}

Json to_json(const RunConfig& c) {
  Json j = {{"seed", c.seed},
            {"k", c.k},
            {"output_dir", c.output_dir.string()},
            {"schema", to_json(c.schema)},
            {"model", to_json(c.model)},
            {"train", to_json(c.train)},
            {"parallel_folds", c.parallel_folds},
            {"threshold", c.threshold}};
  Json modes = Json::array();
  for (auto m : c.modes) modes.push_back(std::string(modality_name(m)));
  j["modes"] = modes;
  j["model"].erase("modality");
  if (c.data) {
    const auto& crop = c.data->crop;
    j["data"] = {{"clinical_csv", c.data->clinical_csv.string()},
                 {"manifest", c.data->manifest.string()},
                 {"remove_duplicates", c.data->remove_duplicates},
                 {"crop",
                  {{"unit", crop.unit == CropSpec::Unit::kFraction ? "fraction" : "pixels"},
                   {"top", crop.top},
                   {"bottom", crop.bottom},
                   {"left", crop.left},
                   {"right", crop.right}}}};
  }
  if (c.synth) j["synth"] = synth_to_json(*c.synth);
  return j;
}

void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorKind::kConfigError, "override '" + assignment + "' is not key.path=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json* node = &j;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (node->contains(parts[i]) && !(*node)[parts[i]].is_object()) {
      throw Error(ErrorKind::kConfigError, "override '" + key + "': '" + parts[i] + "' is not a section");
    }
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = std::move(value);
}

RunConfig load_run_config(const fs::path& path, const std::vector<std::string>& overrides) {
  const std::string text = read_text_file(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::kConfigError, path.string() + ": not valid JSON");
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(j, path.parent_path().empty() ? fs::current_path() : path.parent_path());
}

Dataset load_dataset(const RunConfig& config) {
  if (config.data) return dataset_from_disk(*config.data, config.schema);
  SynthDataset s = generate(*config.synth);
  Dataset d;
  d.schema = config.schema;
  d.subjects = std::move(s.subjects);
  d.images = std::move(s.images);
  return d;
}

fs::path cmd_synth(const RunConfig& config, bool force) {
  if (!config.synth) throw Error(ErrorKind::kConfigError, "field synth: missing (synth needs a synth section)");
  const SynthDataset s = generate(*config.synth);
  prepare_output_dir(config.output_dir, force, "manifest.csv");
  write_dataset(config.output_dir, s);
  return config.output_dir;
}

FoldPlan cmd_split(const RunConfig& config, bool force) {
  const Dataset d = load_dataset(config);
  const fs::path out = config.output_dir / "folds.csv";
  if (fs::exists(out) && !force) {
    throw Error(ErrorKind::kConfigError, out.string() + " exists (pass --force to overwrite)");
  }
  FoldPlan plan = make_folds(d.subjects, config.k, config.seed, d.image_counts());
  write_folds_csv(out, plan);
  return plan;
}

TrainSummary cmd_train(const RunConfig& config, bool force) {
  const fs::path run_dir = config.output_dir;
  prepare_output_dir(run_dir, force, "config.json");

  Json snapshot = to_json(config);
  snapshot["output_dir"] = fs::absolute(run_dir).lexically_normal().string();
  snapshot["metadata"] = {
      {"feature_order", config.schema.feature_names()},
      {"tumor_size_units", "cm"},
      {"numeric_normalization", "z-score, population sd fitted on training subjects per fold"},
      {"grayscale_replication", config.model.encoder.input_channels == 3},
      {"resize", "bilinear, half-pixel centers, edge clamp"},
      {"evaluation_unit", "image"}};
  write_text_file(run_dir / "config.json", snapshot.dump(2) + "\n");

  Dataset dataset;
  if (config.synth) {
    write_dataset(run_dir / "data", generate(*config.synth));
    dataset = load_run_dataset(run_dir, config);
  } else {
    dataset = load_dataset(config);
  }

  const FoldPlan plan = make_folds(dataset.subjects, config.k, config.seed, dataset.image_counts());
  write_folds_csv(run_dir / "folds.csv", plan);

  ExperimentOptions opts;
  opts.threshold = config.threshold;
  opts.parallel_folds = config.parallel_folds;

  TrainSummary summary;
  summary.run_dir = run_dir;
  Json metrics = Json::object();
  for (Modality mode : config.modes) {
    ExperimentResult r = run_experiment(dataset, plan, config.train, config.model, mode, opts);
    const std::string name(modality_name(mode));
    metrics[name] = to_json(r.report);
    Json losses = Json::array();
    for (const auto& m : r.models) {
      save_checkpoint(checkpoint_path(run_dir, mode, m.fold), m);
      losses.push_back(m.loss_history);
    }
    metrics[name]["loss_history"] = losses;
    write_predictions_csv(predictions_path(run_dir, mode), r.predictions);
    std::vector<double> scores;
    std::vector<ClassLabel> labels;
    for (const auto& p : r.predictions) {
      scores.push_back(p.probability);
      labels.push_back(p.label);
    }
    write_roc_csv(run_dir / ("roc_" + name + ".csv"), roc_curve(scores, labels));
    summary.results.push_back(std::move(r));
  }
  write_text_file(run_dir / "metrics.json", metrics.dump(2) + "\n");
  cmd_report(run_dir);
  return summary;
}

RunConfig read_run_snapshot(const fs::path& run_dir) {
  require_run_dir(run_dir);
  const Json j = Json::parse(read_text_file(run_dir / "config.json"), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::kConfigError, (run_dir / "config.json").string() + ": not valid JSON");
  return run_config_from_json(j, run_dir);
}

Dataset load_run_dataset(const fs::path& run_dir, const RunConfig& config) {
  if (!config.synth) return load_dataset(config);
  DataPaths p;
  p.clinical_csv = run_dir / "data" / "clinical.csv";
  p.manifest = run_dir / "data" / "manifest.csv";
  return dataset_from_disk(p, config.schema);
}

std::vector<fs::path> cmd_explain(const fs::path& run_dir, const std::vector<std::string>& image_ids,
                                  const ExplainOptions& options) {
  const RunConfig config = read_run_snapshot(run_dir);
  if (image_ids.empty()) throw Error(ErrorKind::kConfigError, "explain needs at least one image id");
  if (options.mode == Modality::kClinicalOnly) {
    throw Error(ErrorKind::kConfigError, "CLINICAL_ONLY models have no image branch to explain");
  }
  const Dataset dataset = load_run_dataset(run_dir, config);
  const FoldPlan plan = read_folds_csv(run_dir / "folds.csv");

  std::vector<const ImageRecord*> targets;
  std::vector<std::string> unknown;
  for (const auto& id : image_ids) {
    auto it = std::find_if(dataset.images.begin(), dataset.images.end(),
                           [&](const ImageRecord& r) { return r.image_id == id; });
    if (it == dataset.images.end()) {
      unknown.push_back(id);
    } else {
      targets.push_back(&*it);
    }
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw Error(ErrorKind::kConfigError, "unknown image id(s): " + list);
  }

  std::vector<fs::path> written;
  for (const ImageRecord* img : targets) {
    const int fold = plan.assignments.at(img->subject_id);
    const fs::path ckpt = checkpoint_path(run_dir, options.mode, fold);
    if (!fs::exists(ckpt)) {
      throw Error(ErrorKind::kUnreadableFile, "missing checkpoint " + ckpt.string());
    }
    const FoldModel fm = load_checkpoint(ckpt);
    const FusionModel<double> model = instantiate<double>(fm);
    const auto clinical = encode_clinical(dataset.subject(img->subject_id), fm.schema, fm.stats);
    const auto& spec = fm.config.encoder;
    const GrayImage input = preprocess_for_model(img->pixels, spec.input_height, spec.input_width);
    ScoreCamResult cam = score_cam(model, model.prepare_image(input), std::span<const double>(clinical),
                                   options.target, options.layer);
    cam.map.image_id = img->image_id;

    const fs::path base = run_dir / "explain" / (img->image_id + "_cam");
    fs::create_directories(base.parent_path());
    write_png_rgb(fs::path(base.string() + ".png"), render_cam_overlay(input, cam.map.values));
    write_attribution_csv(fs::path(base.string() + ".csv"), cam.map.values);
    const Json info = {{"image_id", img->image_id},
                       {"subject_id", img->subject_id},
                       {"fold", fold},
                       {"mode", std::string(modality_name(options.mode))},
                       {"layer", cam.map.layer_name},
                       {"target_class", std::string(label_name(cam.map.target_class))},
                       {"channel_weights", cam.channel_weights},
                       {"channel_logits", cam.channel_logits},
                       {"constant_map", cam.constant_map}};
    write_text_file(fs::path(base.string() + ".json"), info.dump(2) + "\n");
    written.push_back(fs::path(base.string() + ".png"));
  }
  return written;
}

CohortAblation cmd_ablate(const fs::path& run_dir) {
  const RunConfig config = read_run_snapshot(run_dir);
  if (std::find(config.modes.begin(), config.modes.end(), Modality::kMultimodal) == config.modes.end()) {
    throw Error(ErrorKind::kConfigError, "ablation needs a run that trained MULTIMODAL models");
  }
  const Dataset dataset = load_run_dataset(run_dir, config);
  const FoldPlan plan = read_folds_csv(run_dir / "folds.csv");

  std::vector<AblationRecord> records;
  for (int f = 0; f < plan.k; ++f) {
    const fs::path ckpt = checkpoint_path(run_dir, Modality::kMultimodal, f);
    if (!fs::exists(ckpt)) throw Error(ErrorKind::kUnreadableFile, "missing checkpoint " + ckpt.string());
    const FoldModel fm = load_checkpoint(ckpt);
    const FusionModel<double> model = instantiate<double>(fm);
    const auto& spec = fm.config.encoder;
    for (const auto& img : dataset.images) {
      auto it = plan.assignments.find(img.subject_id);
      if (it == plan.assignments.end() || it->second != f) continue;
      const auto clinical = encode_clinical(dataset.subject(img.subject_id), fm.schema, fm.stats);
      const auto x = model.prepare_image(preprocess_for_model(img.pixels, spec.input_height, spec.input_width));
      records.push_back({img.image_id, img.subject_id, f,
                         modality_ablation(model, x, std::span<const double>(clinical))});
    }
  }
  CohortAblation cohort = cohort_ablation(std::move(records));
  write_ablation_csv(run_dir / "ablation.csv", cohort.records);
  write_text_file(run_dir / "ablation_summary.json", to_json(cohort).dump(2) + "\n");
  return cohort;
}

std::string cmd_report(const fs::path& run_dir) {
  const RunConfig config = read_run_snapshot(run_dir);
  const fs::path metrics_path = run_dir / "metrics.json";
  const Json metrics = Json::parse(read_text_file(metrics_path), nullptr, false);
  if (metrics.is_discarded()) throw Error(ErrorKind::kUnreadableFile, metrics_path.string() + ": not valid JSON");

  std::vector<RocSeries> series;
  CsvTable table;
  table.header = {"mode", "accuracy", "f1", "auc_roc", "auc_ci_low", "auc_ci_high", "sensitivity",
                  "specificity", "ppv", "npv", "eer_threshold"};
  std::string md = "| Mode | Accuracy | F1 | AUC-ROC | AUC 95% CI | Sensitivity | Specificity | PPV | NPV |\n"
                   "|---|---|---|---|---|---|---|---|---|\n";
  for (Modality mode : config.modes) {
    const std::string name(modality_name(mode));
    if (!metrics.contains(name)) continue;
    const Json& m = metrics.at(name);
    const Json& mean = m.at("mean");
    const auto get = [&](const char* k) { return mean.at(k).get<double>(); };
    const bool has_ci = !m.at("auc_ci").is_null();
    const double lo = has_ci ? m.at("auc_ci").at("low").get<double>() : std::nan("");
    const double hi = has_ci ? m.at("auc_ci").at("high").get<double>() : std::nan("");
    const std::string eer = m.at("eer").is_null() ? "" : format_double(m.at("eer").at("threshold").get<double>());
    table.rows.push_back({name, format_double(get("accuracy")), format_double(get("f1")),
                          format_double(get("auc_roc")), has_ci ? format_double(lo) : "",
                          has_ci ? format_double(hi) : "", format_double(get("sensitivity")),
                          format_double(get("specificity")), format_double(get("ppv")),
                          format_double(get("npv")), eer});
    md += "| " + name + " | " + fixed(get("accuracy")) + " | " + fixed(get("f1")) + " | " +
          fixed(get("auc_roc")) + " | " + (has_ci ? "[" + fixed(lo) + ", " + fixed(hi) + "]" : "n/a") +
          " | " + fixed(get("sensitivity")) + " | " + fixed(get("specificity")) + " | " +
          fixed(get("ppv")) + " | " + fixed(get("npv")) + " |\n";

    const auto preds = read_predictions_csv(predictions_path(run_dir, mode));
    std::vector<double> scores;
    std::vector<ClassLabel> labels;
    for (const auto& p : preds) {
      scores.push_back(p.probability);
      labels.push_back(p.label);
    }
    const bool both = std::any_of(labels.begin(), labels.end(), is_positive) &&
                      !std::all_of(labels.begin(), labels.end(), is_positive);
    if (both) {
      series.push_back({name + " AUC=" + fixed(get("auc_roc"), 3), roc_curve(scores, labels)});
    }
  }
  write_png_rgb(run_dir / "roc.png", render_roc_plot(series));
  write_csv(run_dir / "summary.csv", table);
  write_text_file(run_dir / "summary.md", md);
  return md;
}

}  // namespace mmfuse
