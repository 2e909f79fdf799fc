#include <doctest.h>

#include "helpers.hpp"
#include "mmfuse/preprocess.hpp"

using namespace mmfuse;

namespace {

GrayImage random_gray(Rng& rng, int h, int w) {
  GrayImage g(h, w);
  for (double& v : g.pixels) v = rng.uniform();
  return g;
}

}  // namespace

TEST_CASE("resize_bilinear") {
  Rng rng(1);
  const auto img = random_gray(rng, 7, 9);
  CHECK(resize_bilinear(img, 7, 9) == img);

  const auto flat = resize_bilinear(GrayImage(5, 6, 0.3), 11, 4);
  CHECK(flat.height == 11);
  CHECK(flat.width == 4);
  for (double v : flat.pixels) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));

  GrayImage checker(2, 2);
  checker.pixels = {0, 1, 1, 0};
  const auto up = resize_bilinear(checker, 4, 4);
  const std::vector<std::vector<double>> expect{{0, 0.25, 0.75, 1},
                                                {0.25, 0.375, 0.625, 0.75},
                                                {0.75, 0.625, 0.375, 0.25},
                                                {1, 0.75, 0.25, 0}};
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) CHECK(up.at(y, x) == doctest::Approx(expect[y][x]).epsilon(1e-15));
  }
}

TEST_CASE("preprocess_for_model clamps") {
  GrayImage g(2, 2);
  g.pixels = {-0.5, 0.5, 1.5, 1.0};
  const auto p = preprocess_for_model(g, 2, 2);
  CHECK(p.pixels == std::vector<double>{0.0, 0.5, 1.0, 1.0});
}

TEST_CASE("flip and rotate") {
  Rng rng(2);
  const auto img = random_gray(rng, 6, 5);
  CHECK(flip_horizontal(flip_horizontal(img)) == img);
  CHECK(flip_horizontal(img).at(2, 0) == img.at(2, 4));
  const auto r0 = rotate(img, 0.0);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(r0.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-12));

  // A quarter turn of a square maps the grid onto itself.
  const auto sq = random_gray(rng, 4, 4);
  const auto r90 = rotate(sq, 90.0);
  for (double v : r90.pixels) {
    const bool found = std::any_of(sq.pixels.begin(), sq.pixels.end(),
                                   [&](double s) { return std::abs(s - v) < 1e-9; });
    CHECK(found);
  }
  const auto corner = rotate(GrayImage(9, 9, 1.0), 45.0);
  CHECK(corner.at(0, 0) == 0.0);
  CHECK(corner.at(4, 4) == doctest::Approx(1.0));
}

TEST_CASE("augment") {
  Rng rng(3);
  const auto img = random_gray(rng, 8, 8);
  Rng a(7), b(7);
  CHECK(augment(img, a) == augment(img, b));
  Rng c(8);
  CHECK(augment(img, c, AugmentParams{0.0, 0.0}) == img);
  Rng d(9);
  CHECK(augment(img, d, AugmentParams{1.0, 0.0}) == flip_horizontal(img));
}
