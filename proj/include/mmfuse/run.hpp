#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmfuse/experiment.hpp"
#include "mmfuse/explain.hpp"
#include "mmfuse/ingest.hpp"
#include "mmfuse/serialization.hpp"
#include "mmfuse/synth.hpp"

namespace mmfuse {

struct DataPaths {
  std::filesystem::path clinical_csv;
  std::filesystem::path manifest;
  CropSpec crop;
  bool remove_duplicates = true;
};

// One experiment, fully described. Exactly one of `data` / `synth` is set.
struct RunConfig {
  std::uint64_t seed = 0;
  int k = 5;
  std::filesystem::path output_dir = "runs/default";
  std::optional<DataPaths> data;
  std::optional<SynthConfig> synth;
  ClinicalSchema schema = ClinicalSchema::default_schema();
  FusionModelConfig model;
  TrainConfig train;
  std::vector<Modality> modes{Modality::kMultimodal, Modality::kImageOnly, Modality::kClinicalOnly};
  bool parallel_folds = false;
  double threshold = 0.5;
};

// Relative paths are resolved against `base_dir`. Throws ConfigError naming
// the offending field.
RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json to_json(const RunConfig& config);

// Applies one "dotted.key=value" override; the value is read as JSON when it
// parses, otherwise as a string.
void apply_override(Json& j, const std::string& assignment);
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

// Loads the configured dataset (synthetic data is generated in memory).
Dataset load_dataset(const RunConfig& config);

// Writes clinical.csv, manifest.csv and images/ to the output directory.
std::filesystem::path cmd_synth(const RunConfig& config, bool force = false);
// Writes <output_dir>/folds.csv.
FoldPlan cmd_split(const RunConfig& config, bool force = false);

struct TrainSummary {
  std::filesystem::path run_dir;
  std::vector<ExperimentResult> results;  // one per mode, config order
};
// Creates the run directory (refusing a non-empty one unless `force`) and
// runs every configured mode on the same fold plan.
TrainSummary cmd_train(const RunConfig& config, bool force = false);

struct ExplainOptions {
  Modality mode = Modality::kMultimodal;
  std::string layer;  // empty: encoder default
  std::optional<ClassLabel> target;
};
// Per image id: explain/<id>_cam.png and explain/<id>_cam.csv, computed with
// the checkpoint of the fold that held the image out.
std::vector<std::filesystem::path> cmd_explain(const std::filesystem::path& run_dir,
                                               const std::vector<std::string>& image_ids,
                                               const ExplainOptions& options = {});

// ablation.csv and ablation_summary.json over every held-out image.
CohortAblation cmd_ablate(const std::filesystem::path& run_dir);

// roc.png plus summary.csv / summary.md; returns the markdown table.
std::string cmd_report(const std::filesystem::path& run_dir);

// Helpers shared with tests.
RunConfig read_run_snapshot(const std::filesystem::path& run_dir);
Dataset load_run_dataset(const std::filesystem::path& run_dir, const RunConfig& config);

}  // namespace mmfuse
