#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mmfuse/train.hpp"

using namespace mmfuse;

namespace {

FusionModelConfig small_model(Modality m) {
  FusionModelConfig c;
  c.encoder.name = "tiny_cnn";
  c.encoder.embedding_dim = 4;
  c.encoder.input_height = 16;
  c.encoder.input_width = 16;
  c.modality = m;
  return c;
}

// Clinical feature 0 carries the label with a margin; everything else is noise.
std::vector<Sample> separable(int n, Rng& rng) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.image_id = "i" + std::to_string(i);
    s.subject_id = "s" + std::to_string(i);
    s.label = i % 3 == 0 ? ClassLabel::kBorderlineMalignant : ClassLabel::kBenign;
    s.image = GrayImage(16, 16);
    for (double& p : s.image.pixels) p = rng.uniform();
    s.clinical.assign(10, 0.0);
    for (double& v : s.clinical) v = rng.normal(0.0, 0.3);
    s.clinical[0] = is_positive(s.label) ? 2.0 : -2.0;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::vector<double>> snapshot(FusionModel<double>& m) {
  std::vector<std::vector<double>> out;
  for (auto* p : m.parameters()) out.push_back(p->value);
  return out;
}

}  // namespace

TEST_CASE("zero learning rate leaves parameters unchanged") {
  Rng rng(1);
  const auto data = separable(4, rng);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 4;
  FusionModel<double> m(small_model(Modality::kMultimodal), 2);
  const auto before = snapshot(m);
  const auto history = train_model<double>(m, cfg, data, 3);
  CHECK(history.size() == 1);
  CHECK(snapshot(m) == before);
}

TEST_CASE("training descends on separable data") {
  Rng rng(4);
  const auto data = separable(24, rng);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 0.01;
  cfg.augment = false;
  const auto result = train_fold<double>(cfg, small_model(Modality::kClinicalOnly), data,
                                         Modality::kClinicalOnly, 5);
  REQUIRE(result.loss_history.size() == 30);
  CHECK(result.loss_history.back() < result.loss_history.front());
  for (double l : result.loss_history) CHECK(std::isfinite(l));
}

TEST_CASE("momentum update matches hand arithmetic on a quadratic") {
  // L(w) = w^2 / 2, so the gradient equals w.
  Param<double> w("w", {1});
  w.value = {1.0};
  SgdMomentum<double> opt(0.001, 0.9);
  std::vector<Param<double>*> params{&w};
  w.grad = {w.value[0]};
  opt.step(params);
  CHECK(opt.velocities()[0][0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w.value[0] == doctest::Approx(0.999).epsilon(1e-15));
  w.grad = {w.value[0]};
  opt.step(params);
  CHECK(opt.velocities()[0][0] == doctest::Approx(1.899).epsilon(1e-15));
  CHECK(w.value[0] == doctest::Approx(0.997101).epsilon(1e-15));
}

TEST_CASE("a non-finite loss raises DivergenceError") {
  Rng rng(6);
  auto data = separable(8, rng);
  data[0].clinical[1] = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.augment = false;
  FusionModel<double> m(small_model(Modality::kClinicalOnly), 7);
  CHECK(testutil::error_kind_of([&] { train_model<double>(m, cfg, data, 8); }) == ErrorKind::kDivergence);
}

TEST_CASE("training is deterministic in the seed") {
  Rng rng(9);
  const auto data = separable(12, rng);
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto a = train_fold<double>(cfg, small_model(Modality::kMultimodal), data, Modality::kMultimodal, 10);
  const auto b = train_fold<double>(cfg, small_model(Modality::kMultimodal), data, Modality::kMultimodal, 10);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.model.classifier().weight.value == b.model.classifier().weight.value);
}

TEST_CASE("train config validation names the field") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfigError);
    CHECK(std::string(e.what()).find("batch_size") != std::string::npos);
  }
  cfg = TrainConfig{};
  cfg.learning_rate = -1.0;
  CHECK(testutil::error_kind_of([&] { cfg.validate(); }) == ErrorKind::kConfigError);
}
