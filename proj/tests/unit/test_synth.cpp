#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "mmfuse/metrics.hpp"
#include "mmfuse/synth.hpp"

using namespace mmfuse;

namespace {

using Features = std::vector<std::vector<double>>;

// Logistic regression by full-batch gradient descent on standardized columns.
struct Logistic {
  std::vector<double> mean, sd, w;
  double b = 0.0;

  void fit(const Features& x, const std::vector<ClassLabel>& y) {
    const std::size_t d = x[0].size();
    mean.assign(d, 0.0);
    sd.assign(d, 0.0);
    for (const auto& r : x) {
      for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / x.size();
    }
    for (const auto& r : x) {
      for (std::size_t j = 0; j < d; ++j) sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]) / x.size();
    }
    for (double& s : sd) s = s > 0 ? std::sqrt(s) : 1.0;
    w.assign(d, 0.0);
    for (int it = 0; it < 300; ++it) {
      std::vector<double> gw(d, 0.0);
      double gb = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double err = score(x[i]) - (is_positive(y[i]) ? 1.0 : 0.0);
        for (std::size_t j = 0; j < d; ++j) gw[j] += err * (x[i][j] - mean[j]) / sd[j] / x.size();
        gb += err / x.size();
      }
      for (std::size_t j = 0; j < d; ++j) w[j] -= 0.5 * gw[j];
      b -= 0.5 * gb;
    }
  }
  double score(const std::vector<double>& r) const {
    double z = b;
    for (std::size_t j = 0; j < r.size(); ++j) z += w[j] * (r[j] - mean[j]) / sd[j];
    return 1.0 / (1.0 + std::exp(-z));
  }
};

std::vector<double> image_features(const LesionLatents& l) {
  return {l.irregularity, l.texture_sd, l.semi_major, l.semi_minor, l.lesion_level, l.background_level};
}

std::vector<double> all_features(const SynthDataset& ds, std::size_t i) {
  auto f = image_features(ds.latents[i]);
  const auto& s = ds.subjects[i];
  f.insert(f.end(), {s.age_years, s.bmi, s.tumor_size, s.menopausal_status == "post" ? 1.0 : 0.0,
                     s.echogenicity == "heterogeneous" ? 1.0 : 0.0});
  return f;
}

SynthConfig oracle_config(std::uint64_t seed, double image_signal, double clinical_signal) {
  SynthConfig c;
  c.n_subjects = 2000;
  c.images_min = c.images_max = 1;
  c.image_height = c.image_width = 8;
  c.image_signal = image_signal;
  c.clinical_signal = clinical_signal;
  c.seed = seed;
  return c;
}

// Fits on one draw and scores a second, independent draw.
template <typename F>
double oracle_auc(double image_signal, double clinical_signal, std::uint64_t seed, F features) {
  const auto train = generate(oracle_config(seed, image_signal, clinical_signal));
  const auto test = generate(oracle_config(seed + 1000, image_signal, clinical_signal));
  Features x;
  std::vector<ClassLabel> y;
  for (std::size_t i = 0; i < train.subjects.size(); ++i) {
    x.push_back(features(train, i));
    y.push_back(train.subjects[i].label);
  }
  Logistic model;
  model.fit(x, y);
  std::vector<double> scores;
  std::vector<ClassLabel> labels;
  for (std::size_t i = 0; i < test.subjects.size(); ++i) {
    scores.push_back(model.score(features(test, i)));
    labels.push_back(test.subjects[i].label);
  }
  return auc_roc(scores, labels);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("generate counts") {
  SynthConfig c;
  c.n_subjects = 80;
  c.positive_fraction = 0.2;
  c.images_min = 3;
  c.images_max = 8;
  c.image_height = c.image_width = 16;
  const auto ds = generate(c);
  CHECK(ds.subjects.size() == 80);
  CHECK(ds.latents.size() == 80);
  int pos = 0;
  for (const auto& s : ds.subjects) pos += is_positive(s.label);
  CHECK(pos == 16);
  CHECK(ds.images.size() >= 240);
  CHECK(ds.images.size() <= 640);
  std::map<std::string, int> per_subject;
  for (const auto& img : ds.images) {
    per_subject[img.subject_id]++;
    CHECK(img.pixels.height == 16);
    for (double v : img.pixels.pixels) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  for (const auto& [id, n] : per_subject) {
    CHECK(n >= 3);
    CHECK(n <= 8);
  }
}

TEST_CASE("generate is deterministic and seed-sensitive") {
  SynthConfig c;
  c.n_subjects = 12;
  c.image_height = c.image_width = 16;
  c.seed = 5;
  const auto a = generate(c);
  const auto b = generate(c);
  REQUIRE(a.images.size() == b.images.size());
  for (std::size_t i = 0; i < a.images.size(); ++i) CHECK(a.images[i].pixels == b.images[i].pixels);
  for (std::size_t i = 0; i < a.subjects.size(); ++i) CHECK(a.subjects[i].age_years == b.subjects[i].age_years);

  const auto d1 = testutil::temp_dir("synth_a");
  const auto d2 = testutil::temp_dir("synth_b");
  write_dataset(d1, a);
  write_dataset(d2, b);
  CHECK(slurp(d1 / "clinical.csv") == slurp(d2 / "clinical.csv"));
  CHECK(slurp(d1 / "manifest.csv") == slurp(d2 / "manifest.csv"));
  CHECK(slurp(d1 / "images" / (a.images[0].image_id + ".png")) ==
        slurp(d2 / "images" / (a.images[0].image_id + ".png")));

  c.seed = 6;
  CHECK(generate(c).images[0].pixels != a.images[0].pixels);
}

TEST_CASE("config validation names the field") {
  SynthConfig c;
  c.positive_fraction = 1.5;
  try {
    generate(c);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfigError);
    CHECK(std::string(e.what()).find("positive_fraction") != std::string::npos);
  }
  c = SynthConfig{};
  c.n_subjects = 5;
  c.positive_fraction = 0.1;
  CHECK(testutil::error_kind_of([&] { c.validate(); }) == ErrorKind::kConfigError);
  c = SynthConfig{};
  c.noise_sd = -1;
  CHECK(testutil::error_kind_of([&] { c.validate(); }) == ErrorKind::kConfigError);
}

TEST_CASE("zero signal leaves nothing for an oracle to find") {
  const double auc = oracle_auc(0.0, 0.0, 1, all_features);
  CHECK(auc >= 0.45);
  CHECK(auc <= 0.55);
  CHECK(oracle_auc(1.0, 1.0, 1, all_features) > 0.8);
}

TEST_CASE("image signal monotonically raises the image-feature oracle") {
  const auto img_only = [](const SynthDataset& ds, std::size_t i) { return image_features(ds.latents[i]); };
  double previous = 0.0;
  for (double s : {0.0, 0.25, 0.5, 1.0}) {
    double mean = 0.0;
    for (std::uint64_t seed : {11, 12, 13}) mean += oracle_auc(s, 0.0, seed, img_only) / 3.0;
    CHECK(mean >= previous - 0.02);
    previous = mean;
  }
}

TEST_CASE("subjects encode and the written dataset reloads unchanged") {
  SynthConfig c;
  c.n_subjects = 10;
  c.image_height = c.image_width = 12;
  c.seed = 3;
  const auto ds = generate(c);
  const auto schema = ClinicalSchema::default_schema();
  validate_subjects(ds.subjects, schema);
  const auto stats = fit_normalizer(ds.subjects);
  for (const auto& s : ds.subjects) CHECK(encode_clinical(s, schema, stats).size() == 10);

  const auto dir = testutil::temp_dir("synth_reload");
  write_dataset(dir, ds);
  const auto subjects = load_clinical_csv(dir / "clinical.csv", schema);
  REQUIRE(subjects.size() == ds.subjects.size());
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    CHECK(subjects[i].subject_id == ds.subjects[i].subject_id);
    CHECK(subjects[i].label == ds.subjects[i].label);
    CHECK(subjects[i].age_years == ds.subjects[i].age_years);
    CHECK(subjects[i].tumor_size == ds.subjects[i].tumor_size);
    CHECK(subjects[i].race == ds.subjects[i].race);
  }
  ManifestOptions opts;
  opts.remove_duplicates = false;
  const auto images = load_manifest(dir / "manifest.csv", subjects, opts);
  REQUIRE(images.size() == ds.images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    CHECK(images[i].image_id == ds.images[i].image_id);
    CHECK(images[i].pixels == ds.images[i].pixels);
  }
}

TEST_CASE("duplicate-image mode shares the lesion rendering") {
  SynthConfig c;
  c.n_subjects = 8;
  c.images_min = c.images_max = 3;
  c.image_height = c.image_width = 16;
  c.noise_sd = 0.0;
  c.duplicate_images = true;
  const auto ds = generate(c);
  CHECK(ds.images[0].pixels == ds.images[1].pixels);
  CHECK(ds.images[0].pixels != ds.images[3].pixels);
}
