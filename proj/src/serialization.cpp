#include "mmfuse/serialization.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <initializer_list>

#include "mmfuse/errors.hpp"

namespace mmfuse {

namespace fs = std::filesystem;

namespace {

void check_keys(const Json& j, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) {
    throw Error(ErrorKind::kConfigError, "field " + std::string(section) + ": expected an object");
  }
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) {
      throw Error(ErrorKind::kConfigError,
                  "field " + std::string(section) + "." + key + ": unknown key");
    }
  }
}

template <typename V>
V get_or(const Json& j, std::string_view section, const char* key, V fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::kConfigError,
                "field " + std::string(section) + "." + key + ": wrong type");
  }
}

}  // namespace

Json to_json(const EncoderSpec& spec) {
  return {{"name", spec.name},
          {"embedding_dim", spec.embedding_dim},
          {"pretrained", spec.pretrained},
          {"input_size", {spec.input_height, spec.input_width}},
          {"input_channels", spec.input_channels}};
}

EncoderSpec encoder_spec_from_json(const Json& j) {
  constexpr std::string_view s = "model.encoder";
  check_keys(j, s, {"name", "embedding_dim", "pretrained", "input_size", "input_channels"});
  EncoderSpec spec;
  spec.name = get_or(j, s, "name", spec.name);
  spec.embedding_dim = get_or(j, s, "embedding_dim", spec.embedding_dim);
  spec.pretrained = get_or(j, s, "pretrained", spec.pretrained);
  spec.input_channels = get_or(j, s, "input_channels", spec.input_channels);
  if (j.contains("input_size")) {
    const auto size = get_or(j, s, "input_size", std::vector<int>{});
    if (size.size() != 2 || size[0] < 1 || size[1] < 1) {
      throw Error(ErrorKind::kConfigError, "field model.encoder.input_size: expected [H, W]");
    }
    spec.input_height = size[0];
    spec.input_width = size[1];
  }
  if (spec.embedding_dim < 1) {
    throw Error(ErrorKind::kConfigError, "field model.encoder.embedding_dim: must be >= 1");
  }
  return spec;
}

Json to_json(const FusionModelConfig& config) {
  return {{"encoder", to_json(config.encoder)},
          {"clinical_dims", config.clinical_dims},
          {"num_classes", config.num_classes},
          {"modality", std::string(modality_name(config.modality))},
          {"fused_dim", config.fused_dim()}};
}

FusionModelConfig model_config_from_json(const Json& j) {
  constexpr std::string_view s = "model";
  check_keys(j, s, {"encoder", "clinical_dims", "num_classes", "modality", "fused_dim"});
  FusionModelConfig c;
  if (j.contains("encoder")) c.encoder = encoder_spec_from_json(j.at("encoder"));
  if (j.contains("clinical_dims")) {
    const auto dims = get_or(j, s, "clinical_dims", std::vector<int>{});
    if (dims.size() != 3) throw Error(ErrorKind::kConfigError, "field model.clinical_dims: expected 3 entries");
    c.clinical_dims = {dims[0], dims[1], dims[2]};
  }
  c.num_classes = get_or(j, s, "num_classes", c.num_classes);
  if (j.contains("modality")) c.modality = parse_modality(get_or(j, s, "modality", std::string{}));
  c.validate();
  return c;
}

Json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},
          {"batch_size", c.batch_size},
          {"augment", c.augment},
          {"flip_probability", c.augmentation.flip_probability},
          {"max_rotation_deg", c.augmentation.max_rotation_deg},
          {"class_aware_sampling", c.class_aware_sampling},
          {"precision", std::string(precision_name(c.precision))},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const Json& j) {
  constexpr std::string_view s = "train";
  check_keys(j, s, {"epochs", "learning_rate", "momentum", "batch_size", "augment",
                    "flip_probability", "max_rotation_deg", "class_aware_sampling", "precision",
                    "seed"});
  TrainConfig c;
  c.epochs = get_or(j, s, "epochs", c.epochs);
  c.learning_rate = get_or(j, s, "learning_rate", c.learning_rate);
  c.momentum = get_or(j, s, "momentum", c.momentum);
  c.batch_size = get_or(j, s, "batch_size", c.batch_size);
  c.augment = get_or(j, s, "augment", c.augment);
  c.augmentation.flip_probability = get_or(j, s, "flip_probability", c.augmentation.flip_probability);
  c.augmentation.max_rotation_deg = get_or(j, s, "max_rotation_deg", c.augmentation.max_rotation_deg);
  c.class_aware_sampling = get_or(j, s, "class_aware_sampling", c.class_aware_sampling);
  if (j.contains("precision")) c.precision = parse_precision(get_or(j, s, "precision", std::string{}));
  c.seed = get_or(j, s, "seed", c.seed);
  c.validate();
  return c;
}

Json to_json(const ClinicalSchema& schema) {
  Json cats = Json::array();
  for (const auto& c : schema.categorical_specs) {
    cats.push_back({{"name", c.name}, {"categories", c.categories}});
  }
  return {{"numeric", schema.numeric_names},
          {"categorical", cats},
          {"total_dim", schema.total_dim()},
          {"feature_order", schema.feature_names()}};
}

ClinicalSchema schema_from_json(const Json& j) {
  constexpr std::string_view s = "schema";
  check_keys(j, s, {"numeric", "categorical", "total_dim", "feature_order"});
  ClinicalSchema schema = ClinicalSchema::default_schema();
  if (j.contains("categorical")) {
    schema.categorical_specs.clear();
    for (const auto& c : j.at("categorical")) {
      check_keys(c, "schema.categorical", {"name", "categories"});
      CategoricalSpec spec;
      spec.name = get_or(c, s, "name", std::string{});
      spec.categories = get_or(c, s, "categories", std::vector<std::string>{});
      if (spec.categories.empty()) {
        throw Error(ErrorKind::kConfigError, "field schema.categorical: '" + spec.name + "' has no categories");
      }
      schema.categorical_specs.push_back(std::move(spec));
    }
    if (schema.categorical_specs.size() != 3) {
      throw Error(ErrorKind::kConfigError, "field schema.categorical: expected 3 features");
    }
  }
  return schema;
}

Json to_json(const NormalizerStats& stats) { return {{"mean", stats.mean}, {"sd", stats.sd}}; }

NormalizerStats stats_from_json(const Json& j) {
  NormalizerStats st;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto sd = j.at("sd").get<std::vector<double>>();
  if (mean.size() != 3 || sd.size() != 3) throw Error(ErrorKind::kConfigError, "bad normalizer stats");
  for (int i = 0; i < 3; ++i) {
    st.mean[i] = mean[i];
    st.sd[i] = sd[i];
  }
  return st;
}

Json to_json(const MetricsReport& r) {
  Json folds = Json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"n_images", f.n_images},
                     {"n_positive", f.n_positive},
                     {"accuracy", f.accuracy},
                     {"f1", f.f1},
                     {"auc_roc", f.auc_roc ? Json(*f.auc_roc) : Json(nullptr)},
                     {"sensitivity", f.sensitivity},
                     {"specificity", f.specificity},
                     {"ppv", f.ppv},
                     {"npv", f.npv},
                     {"flags", f.flags}});
  }
  Json j = {{"modality", std::string(modality_name(r.modality))},
            {"threshold", r.threshold},
            {"evaluation_unit", r.evaluation_unit},
            {"folds", folds},
            {"mean",
             {{"accuracy", r.accuracy},
              {"f1", r.f1},
              {"auc_roc", r.auc_roc},
              {"sensitivity", r.sensitivity},
              {"specificity", r.specificity},
              {"ppv", r.ppv},
              {"npv", r.npv}}},
            {"subject_overlap", r.subject_overlap},
            {"warnings", r.warnings}};
  j["auc_ci"] = r.auc_ci ? Json{{"low", r.auc_ci->low}, {"high", r.auc_ci->high}} : Json(nullptr);
  j["eer"] = r.eer ? Json{{"threshold", r.eer->threshold},
                          {"fpr_at_eer", r.eer->fpr},
                          {"tpr_at_eer", r.eer->tpr},
                          {"accuracy_at_eer", r.eer->accuracy}}
                   : Json(nullptr);
  return j;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw Error(ErrorKind::kUnreadableFile, path_ + ": truncated checkpoint");
  }
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

constexpr std::string_view kMagic = "MMFCKPT1";

}  // namespace

void save_checkpoint(const fs::path& path, const FoldModel& model) {
  const Json config = {{"fold", model.fold},
                       {"model", to_json(model.config)},
                       {"schema", to_json(model.schema)},
                       {"normalizer", to_json(model.stats)},
                       {"loss_history", model.loss_history}};
  const std::string text = config.dump();
  std::string out(kMagic);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put_u32(out, static_cast<std::uint32_t>(model.parameters.size()));
  for (const auto& t : model.parameters) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values) put_f32(out, static_cast<float>(v));
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

FoldModel load_checkpoint(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kUnreadableFile, "cannot open checkpoint " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path.string());
  if (r.bytes(kMagic.size()) != kMagic) {
    throw Error(ErrorKind::kUnreadableFile, path.string() + ": not a checkpoint");
  }
  const Json config = Json::parse(r.bytes(r.u32()));
  FoldModel m;
  m.fold = config.at("fold").get<int>();
  m.config = model_config_from_json(config.at("model"));
  m.schema = schema_from_json(config.at("schema"));
  m.stats = stats_from_json(config.at("normalizer"));
  m.loss_history = config.at("loss_history").get<std::vector<double>>();
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    NamedTensor t;
    t.name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.shape.push_back(static_cast<int>(r.u32()));
      count *= static_cast<std::size_t>(t.shape.back());
    }
    t.values.resize(count);
    for (auto& v : t.values) v = static_cast<double>(r.f32());
    m.parameters.push_back(std::move(t));
  }
  return m;
}

}  // namespace mmfuse
