#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mmfuse/explain.hpp"

using namespace mmfuse;
using testutil::plane;

namespace {

// Min-max normalization written out independently of the library.
std::vector<double> normalized(std::vector<double> v) {
  const double lo = *std::min_element(v.begin(), v.end());
  const double hi = *std::max_element(v.begin(), v.end());
  for (double& x : v) x = hi > lo ? (x - lo) / (hi - lo) : 0.0;
  return v;
}

FusionModelConfig tiny(Modality m) {
  FusionModelConfig c;
  c.encoder.name = "tiny_cnn";
  c.encoder.embedding_dim = 4;
  c.encoder.input_height = 16;
  c.encoder.input_width = 16;
  c.modality = m;
  return c;
}

}  // namespace

TEST_CASE("score_cam with one channel returns that channel normalized") {
  auto m = testutil::toy_image_model(2, 2, {1, 1, 1, 1}, {plane(2, 2, {2, 4, 6, 10})});
  const auto x = plane(2, 2, {0.5, 0.5, 0.5, 0.5});
  const auto r = score_cam<double>(m, x, std::vector<double>{});
  REQUIRE(r.channel_weights.size() == 1);
  CHECK(r.channel_weights[0] == 1.0);
  const auto expect = normalized({2, 4, 6, 10});
  for (int i = 0; i < 4; ++i) CHECK(r.map.values.pixels[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  CHECK(r.map.layer_name == "toy");
}

TEST_CASE("equal masked logits give equal channel weights") {
  auto m = testutil::toy_image_model(2, 2, {1, 1, 1, 1},
                                     {plane(2, 2, {1, 0, 0, 0}), plane(2, 2, {0, 0, 0, 1})});
  const auto r = score_cam<double>(m, plane(2, 2, {1, 1, 1, 1}), std::vector<double>{});
  CHECK(r.channel_weights[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.channel_weights[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.map.values.pixels == std::vector<double>{1, 0, 0, 1});
}

TEST_CASE("score_cam matches a hand execution at 2x2 scale") {
  const std::vector<double> head{1, 2, 3, 4};
  const std::vector<double> a0{3, 1, 1, 1};
  const std::vector<double> a1{0, 2, 4, 6};
  const std::vector<double> x{0.2, 0.4, 0.6, 0.8};
  auto m = testutil::toy_image_model(2, 2, head, {plane(2, 2, a0), plane(2, 2, a1)});

  // Steps 2-3: same-size upsampling, then per-channel min-max.
  const auto m0 = normalized(a0);  // {1, 0, 0, 0}
  const auto m1 = normalized(a1);  // {0, 1/3, 2/3, 1}
  // Step 4: positive-class logit of each masked input is head . (x * mask).
  double z0 = 0, z1 = 0;
  for (int i = 0; i < 4; ++i) {
    z0 += head[i] * x[i] * m0[i];
    z1 += head[i] * x[i] * m1[i];
  }
  CHECK(z0 == doctest::Approx(0.2));
  CHECK(z1 == doctest::Approx(0.8 / 3 + 1.2 + 3.2));
  // Step 5: softmax over the two logits.
  const double w0 = 1.0 / (1.0 + std::exp(z1 - z0));
  const double w1 = 1.0 - w0;
  // Step 6: ReLU of the weighted sum, then min-max.
  std::vector<double> cam(4);
  for (int i = 0; i < 4; ++i) cam[i] = std::max(0.0, w0 * m0[i] + w1 * m1[i]);
  cam = normalized(cam);

  const auto r = score_cam<double>(m, plane(2, 2, x), std::vector<double>{}, ClassLabel::kBorderlineMalignant);
  CHECK(std::abs(r.channel_logits[0] - z0) < 1e-9);
  CHECK(std::abs(r.channel_logits[1] - z1) < 1e-9);
  CHECK(std::abs(r.channel_weights[0] - w0) < 1e-9);
  CHECK(std::abs(r.channel_weights[1] - w1) < 1e-9);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(r.map.values.pixels[i] - cam[i]) < 1e-9);
  CHECK(r.map.target_class == ClassLabel::kBorderlineMalignant);

  SUBCASE("the predicted class is the default target") {
    const auto d = score_cam<double>(m, plane(2, 2, x), std::vector<double>{});
    CHECK(d.map.target_class == ClassLabel::kBorderlineMalignant);
    CHECK(d.map.values.pixels == r.map.values.pixels);
  }
  SUBCASE("the benign logit is constant here, so its weights are uniform") {
    const auto b = score_cam<double>(m, plane(2, 2, x), std::vector<double>{}, ClassLabel::kBenign);
    CHECK(b.channel_weights[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
}

TEST_CASE("score_cam on a CNN: range, weights and layer errors") {
  FusionModel<double> m(tiny(Modality::kMultimodal), 3);
  Rng rng(4);
  const auto img = testutil::noise_image(rng, 1, 16, 16);
  std::vector<double> clin(10, 0.1);
  for (const std::string layer : {"", "conv1", "conv2", "conv3"}) {
    const auto r = score_cam<double>(m, img, clin, std::nullopt, layer);
    CHECK(r.map.values.height == 16);
    CHECK(r.map.values.width == 16);
    double sum = 0;
    for (double w : r.channel_weights) sum += w;
    CHECK(std::abs(sum - 1.0) < 1e-6);
    for (double v : r.map.values.pixels) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(testutil::error_kind_of([&] { score_cam<double>(m, img, clin, std::nullopt, "conv9"); }) ==
        ErrorKind::kUnknownLayer);
  CHECK(testutil::error_kind_of([&] { score_cam<double>(m, img, clin, std::nullopt, "gap"); }) ==
        ErrorKind::kNonSpatialLayer);
  FusionModel<double> clinical_only(tiny(Modality::kClinicalOnly), 3);
  CHECK(testutil::error_kind_of([&] { score_cam<double>(clinical_only, img, clin); }) ==
        ErrorKind::kConfigError);
}

TEST_CASE("masks") {
  GrayImage attr(2, 5);
  attr.pixels = {0.1, 0.9, 0.3, 0.9, 0.0, 0.5, 0.2, 0.8, 0.4, 0.6};
  const auto top = top_fraction_mask(attr, 0.2);
  CHECK(top.pixels == std::vector<double>{0, 1, 0, 1, 0, 0, 0, 0, 0, 0});
  const auto top3 = top_fraction_mask(attr, 0.3);
  CHECK(top3.pixels == std::vector<double>{0, 1, 0, 1, 0, 0, 0, 1, 0, 0});

  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto r = random_region_mask(64, 64, 0.2, rng);
    double ones = 0;
    for (double v : r.pixels) ones += v;
    CHECK(std::abs(ones - 819.0) / 819.0 < 0.02);
  }
  const auto x = plane(2, 5, std::vector<double>(10, 0.5));
  const auto masked = apply_mask<double>(x, top);
  CHECK(masked.data[1] == 0.5);
  CHECK(masked.data[0] == 0.0);
}

TEST_CASE("modality_ablation") {
  Rng rng(6);
  const auto img = testutil::noise_image(rng, 1, 16, 16);
  std::vector<double> clin(10);
  for (double& v : clin) v = rng.normal();

  SUBCASE("shares sum to one") {
    FusionModel<double> m(tiny(Modality::kMultimodal), 7);
    const auto s = modality_ablation<double>(m, img, clin);
    CHECK(std::abs(s.image_share + s.clinical_share - 1.0) < 1e-9);
    CHECK(s.delta_image >= 0.0);
    CHECK(s.delta_clinical >= 0.0);
  }
  SUBCASE("a classifier that ignores clinical columns gives clinical_share 0") {
    FusionModel<double> m(tiny(Modality::kMultimodal), 8);
    auto& w = m.classifier().weight.value;
    for (int row = 0; row < 2; ++row) {
      for (int col = 4; col < 12; ++col) w[row * 12 + col] = 0.0;
    }
    const auto s = modality_ablation<double>(m, img, clin);
    CHECK(s.delta_clinical == 0.0);
    CHECK(s.clinical_share == 0.0);
    CHECK(s.image_share == 1.0);
  }
  SUBCASE("a constant classifier is degenerate") {
    FusionModel<double> m(tiny(Modality::kMultimodal), 9);
    std::fill(m.classifier().weight.value.begin(), m.classifier().weight.value.end(), 0.0);
    const auto s = modality_ablation<double>(m, img, clin);
    CHECK(s.degenerate);
    CHECK(s.image_share == 0.5);
    CHECK(s.clinical_share == 0.5);
  }
  SUBCASE("unimodal models are rejected") {
    FusionModel<double> m(tiny(Modality::kImageOnly), 9);
    CHECK(testutil::error_kind_of([&] { modality_ablation<double>(m, img, clin); }) == ErrorKind::kConfigError);
  }
}

TEST_CASE("modality_ablation on a hand-set linear fusion model") {
  FusionModelConfig cfg;
  cfg.encoder.name = "toy_linear";
  cfg.encoder.embedding_dim = 1;
  cfg.encoder.input_height = 2;
  cfg.encoder.input_width = 2;
  cfg.clinical_dims = {2, 2, 2};
  FusionModel<double> m(cfg,
                        std::make_unique<testutil::ToyLinearEncoder>(
                            2, 2, std::vector<double>{1, 1, 1, 1}, std::vector<ImageTensor<double>>{plane(2, 2, {1, 1, 1, 1})}),
                        0);
  m.clinical_layer(0).weight.value = {1, 0, 0, 1};
  m.clinical_layer(0).bias.value = {0, 0};
  m.clinical_layer(1).weight.value = {1, 0, 0, 1};
  m.clinical_layer(1).bias.value = {0, 0};
  m.classifier().weight.value = {0, 0, 0, 2.0, 1.0, -0.5};
  m.classifier().bias.value = {0, 0};

  const auto x = plane(2, 2, {0.1, 0.2, 0.3, 0.4});  // embedding 1.0
  const std::vector<double> c{1.0, 0.5};
  const auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const double full = sig(2.0 * 1.0 + 1.0 - 0.25);
  const double no_image = sig(1.0 - 0.25);
  const double no_clinical = sig(2.0);
  const double di = std::abs(full - no_image);
  const double dc = std::abs(full - no_clinical);

  const auto s = modality_ablation<double>(m, x, c);
  CHECK(s.delta_image == doctest::Approx(di).epsilon(1e-12));
  CHECK(s.delta_clinical == doctest::Approx(dc).epsilon(1e-12));
  CHECK(s.image_share == doctest::Approx(di / (di + dc)).epsilon(1e-12));
  CHECK(s.clinical_share == doctest::Approx(dc / (di + dc)).epsilon(1e-12));
}

TEST_CASE("cohort summaries") {
  std::vector<AblationRecord> recs;
  for (double share : {0.6, 0.7}) {
    AblationRecord r;
    r.image_id = "i" + std::to_string(recs.size());
    r.score.image_share = share;
    r.score.clinical_share = 1.0 - share;
    recs.push_back(r);
  }
  const auto c = cohort_ablation(recs);
  CHECK(c.n == 2);
  CHECK(c.image.mean == doctest::Approx(0.65).epsilon(1e-12));
  CHECK(c.clinical.mean == doctest::Approx(0.35).epsilon(1e-12));
  CHECK(c.image.sd == doctest::Approx(0.05).epsilon(1e-12));

  const auto flat = summarize_shares(std::vector<double>{0.4, 0.4, 0.4});
  CHECK(flat.sd == 0.0);

  const auto q = summarize_shares(std::vector<double>{8, 1, 7, 2, 6, 3, 5, 4});
  CHECK(q.min == 1.0);
  CHECK(q.q1 == doctest::Approx(2.75));
  CHECK(q.median == doctest::Approx(4.5));
  CHECK(q.q3 == doctest::Approx(6.25));
  CHECK(q.max == 8.0);

  CHECK(testutil::error_kind_of([] { cohort_ablation({}); }) == ErrorKind::kEmptyInput);
}
