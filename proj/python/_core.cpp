#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mmfuse/errors.hpp"
#include "mmfuse/metrics.hpp"
#include "mmfuse/run.hpp"
#include "mmfuse/sampling.hpp"
#include "mmfuse/synth.hpp"

namespace py = pybind11;
using namespace mmfuse;

namespace {

std::vector<ClassLabel> to_labels(const std::vector<int>& y) {
  std::vector<ClassLabel> out;
  out.reserve(y.size());
  for (int v : y) {
    if (v != 0 && v != 1) throw Error(ErrorKind::kConfigError, "labels must be 0 or 1");
    out.push_back(v ? ClassLabel::kBorderlineMalignant : ClassLabel::kBenign);
  }
  return out;
}

void check_sizes(const std::vector<double>& s, const std::vector<int>& y) {
  if (s.size() != y.size()) throw Error(ErrorKind::kBatchMismatch, "scores and labels differ in length");
}

py::object json_to_py(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

SynthConfig synth_from_kwargs(const py::kwargs& kw) {
  Json j = Json::object();
  for (auto item : kw) {
    j[py::str(item.first).cast<std::string>()] =
        Json::parse(py::module_::import("json").attr("dumps")(item.second).cast<std::string>());
  }
  Json run{{"synth", j}};
  return *run_config_from_json(run).synth;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Image + clinical fusion classifier (C++ core)";

  // Instances carry the error kind name in `.kind`.
  static PyObject* error_type = PyErr_NewException("mmfuse._core.Error", PyExc_RuntimeError, nullptr);
  m.attr("Error") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::reinterpret_borrow<py::object>(error_type)(std::string(e.what()));
      err.attr("kind") = std::string(error_kind_name(e.kind()));
      PyErr_SetObject(error_type, err.ptr());
    }
  });

  m.def("auc_roc", [](const std::vector<double>& scores, const std::vector<int>& labels) {
    check_sizes(scores, labels);
    return auc_roc(scores, to_labels(labels));
  }, py::arg("scores"), py::arg("labels"));

  m.def("eer_point", [](const std::vector<double>& scores, const std::vector<int>& labels) {
    check_sizes(scores, labels);
    const auto e = eer_point(scores, to_labels(labels));
    py::dict d;
    d["threshold"] = e.threshold;
    d["fpr"] = e.fpr;
    d["tpr"] = e.tpr;
    d["fnr"] = e.fnr;
    d["accuracy"] = e.accuracy;
    return d;
  }, py::arg("scores"), py::arg("labels"));

  m.def("confusion_metrics", [](const std::vector<double>& scores, const std::vector<int>& labels,
                                double threshold) {
    check_sizes(scores, labels);
    const auto c = confusion_metrics(scores, to_labels(labels), threshold);
    py::dict d;
    d["accuracy"] = c.accuracy;
    d["f1"] = c.f1;
    d["sensitivity"] = c.sensitivity;
    d["specificity"] = c.specificity;
    d["ppv"] = c.ppv;
    d["npv"] = c.npv;
    d["undefined"] = c.undefined;
    return d;
  }, py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);

  m.def("mean_ci", [](const std::vector<double>& values) {
    const auto r = mean_ci(values);
    return py::make_tuple(r.mean, r.low, r.high);
  }, py::arg("values"));

  m.def("make_folds", [](const std::vector<std::string>& subject_ids, const std::vector<int>& labels,
                         int k, std::uint64_t seed) {
    if (subject_ids.size() != labels.size()) {
      throw Error(ErrorKind::kBatchMismatch, "subject_ids and labels differ in length");
    }
    std::vector<SubjectRecord> subjects;
    const auto y = to_labels(labels);
    for (std::size_t i = 0; i < y.size(); ++i) {
      SubjectRecord r;
      r.subject_id = subject_ids[i];
      r.label = y[i];
      subjects.push_back(r);
    }
    const auto plan = make_folds(subjects, k, seed);
    return std::map<std::string, int>(plan.assignments.begin(), plan.assignments.end());
  }, py::arg("subject_ids"), py::arg("labels"), py::arg("k"), py::arg("seed"));

  m.def("generate", [](const py::kwargs& kw) {
    const auto ds = generate(synth_from_kwargs(kw));
    py::list subjects;
    for (const auto& s : ds.subjects) {
      py::dict d;
      d["subject_id"] = s.subject_id;
      d["label"] = is_positive(s.label) ? 1 : 0;
      d["age_years"] = s.age_years;
      d["bmi"] = s.bmi;
      d["tumor_size"] = s.tumor_size;
      d["race"] = s.race;
      d["menopausal_status"] = s.menopausal_status;
      d["echogenicity"] = s.echogenicity;
      subjects.append(d);
    }
    py::list images;
    for (const auto& img : ds.images) {
      py::array_t<double> px({img.pixels.height, img.pixels.width});
      std::copy(img.pixels.pixels.begin(), img.pixels.pixels.end(), px.mutable_data());
      py::dict d;
      d["image_id"] = img.image_id;
      d["subject_id"] = img.subject_id;
      d["pixels"] = px;
      images.append(d);
    }
    py::dict out;
    out["subjects"] = subjects;
    out["images"] = images;
    return out;
  }, "Synthetic cohort; keyword arguments follow the config file's synth section.");

  m.def("load_config", [](const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    return json_to_py(to_json(load_run_config(path, overrides)));
  }, py::arg("path"), py::arg("overrides") = std::vector<std::string>{});

  m.def("synth", [](const std::filesystem::path& path, const std::vector<std::string>& overrides, bool force) {
    return cmd_synth(load_run_config(path, overrides), force);
  }, py::arg("config"), py::arg("overrides") = std::vector<std::string>{}, py::arg("force") = false);

  m.def("split", [](const std::filesystem::path& path, const std::vector<std::string>& overrides, bool force) {
    const auto plan = cmd_split(load_run_config(path, overrides), force);
    return std::map<std::string, int>(plan.assignments.begin(), plan.assignments.end());
  }, py::arg("config"), py::arg("overrides") = std::vector<std::string>{}, py::arg("force") = false);

  m.def("train", [](const std::filesystem::path& path, const std::vector<std::string>& overrides, bool force) {
    py::gil_scoped_release release;
    return cmd_train(load_run_config(path, overrides), force).run_dir;
  }, py::arg("config"), py::arg("overrides") = std::vector<std::string>{}, py::arg("force") = false);

  m.def("explain", [](const std::filesystem::path& run_dir, const std::vector<std::string>& ids,
                      const std::string& mode, const std::string& layer) {
    ExplainOptions opts;
    opts.mode = parse_modality(mode);
    opts.layer = layer;
    return cmd_explain(run_dir, ids, opts);
  }, py::arg("run_dir"), py::arg("image_ids"), py::arg("mode") = "MULTIMODAL", py::arg("layer") = "");

  m.def("ablate", [](const std::filesystem::path& run_dir) {
    return json_to_py(to_json(cmd_ablate(run_dir)));
  }, py::arg("run_dir"));

  m.def("report", [](const std::filesystem::path& run_dir) { return cmd_report(run_dir); },
        py::arg("run_dir"));
}
