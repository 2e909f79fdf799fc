// mmfuse: command-line front end for the fusion pipeline.
//
//   mmfuse synth   --config run.json [--set key=value ...] [--force]
//   mmfuse split   --config run.json [--set key=value ...] [--force]
//   mmfuse train   --config run.json [--set key=value ...] [--force]
//   mmfuse explain --run DIR --image ID [--image ID ...] [--mode M] [--layer L] [--target T]
//   mmfuse ablate  --run DIR
//   mmfuse report  --run DIR
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
// Errors are printed to stderr as "mmfuse: error: <Kind>: <message>".

#include <iostream>

#include <CLI11.hpp>

#include "mmfuse/csv.hpp"
#include "mmfuse/errors.hpp"
#include "mmfuse/run.hpp"

namespace {

void print_error(const std::string& kind_and_message) {
  std::cerr << "mmfuse: error: " << kind_and_message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image + clinical fusion classifier: data, training, attribution, ablation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool force = false;
  std::string run_dir;
  std::vector<std::string> image_ids;
  std::string mode = "MULTIMODAL";
  std::string layer;
  std::string target;

  auto add_config_opts = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "Override a config key, e.g. train.epochs=5");
    sub->add_flag("--force", force, "Overwrite an existing output directory");
  };
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  auto* split = app.add_subcommand("split", "Write a subject-stratified fold plan");
  auto* train = app.add_subcommand("train", "Cross-validate every configured mode");
  for (auto* s : {synth, split, train}) add_config_opts(s);

  auto* explain = app.add_subcommand("explain", "Score-CAM overlays for images of a run");
  explain->add_option("-r,--run", run_dir, "Run directory")->required();
  explain->add_option("-i,--image", image_ids, "Image id (repeatable)")->required();
  explain->add_option("--mode", mode, "MULTIMODAL or IMAGE_ONLY");
  explain->add_option("--layer", layer, "Encoder layer (default: last convolution)");
  explain->add_option("--target", target, "BENIGN or BORDERLINE_MALIGNANT (default: predicted)");

  auto* ablate = app.add_subcommand("ablate", "Modality ablation over all held-out images");
  ablate->add_option("-r,--run", run_dir, "Run directory")->required();
  auto* report = app.add_subcommand("report", "ROC plot and summary tables for a run");
  report->add_option("-r,--run", run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      const auto dir = mmfuse::cmd_synth(mmfuse::load_run_config(config_path, overrides), force);
      std::cout << "wrote dataset to " << dir.string() << "\n";
    } else if (split->parsed()) {
      const auto cfg = mmfuse::load_run_config(config_path, overrides);
      const auto plan = mmfuse::cmd_split(cfg, force);
      std::cout << "wrote " << (cfg.output_dir / "folds.csv").string() << " (" << plan.k << " folds)\n";
      for (int f : plan.folds_without_positives) {
        std::cerr << "mmfuse: warning: InsufficientClass: fold " << f << " has no positive subjects\n";
      }
    } else if (train->parsed()) {
      const auto summary = mmfuse::cmd_train(mmfuse::load_run_config(config_path, overrides), force);
      std::cout << mmfuse::read_text_file(summary.run_dir / "summary.md");
      std::cout << "run directory: " << summary.run_dir.string() << "\n";
    } else if (explain->parsed()) {
      mmfuse::ExplainOptions opts;
      opts.mode = mmfuse::parse_modality(mode);
      opts.layer = layer;
      if (!target.empty()) opts.target = mmfuse::parse_label(target);
      for (const auto& p : mmfuse::cmd_explain(run_dir, image_ids, opts)) {
        std::cout << "wrote " << p.string() << "\n";
      }
    } else if (ablate->parsed()) {
      const auto cohort = mmfuse::cmd_ablate(run_dir);
      std::cout << "image_share mean " << cohort.image.mean << " sd " << cohort.image.sd
                << ", clinical_share mean " << cohort.clinical.mean << " sd " << cohort.clinical.sd
                << " (n=" << cohort.n << ")\n";
    } else if (report->parsed()) {
      std::cout << mmfuse::cmd_report(run_dir);
    }
  } catch (const mmfuse::Error& e) {
    print_error(std::string(mmfuse::error_kind_name(e.kind())) + ": " + e.message());
    for (const auto& d : e.details()) std::cerr << "mmfuse: detail: " << d << "\n";
    return e.kind() == mmfuse::ErrorKind::kConfigError ? 1 : 2;
  } catch (const std::exception& e) {
    print_error(std::string("RuntimeError: ") + e.what());
    return 2;
  }
  return 0;
}
