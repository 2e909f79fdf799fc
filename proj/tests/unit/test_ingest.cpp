#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mmfuse/csv.hpp"
#include "mmfuse/image.hpp"
#include "mmfuse/ingest.hpp"

using namespace mmfuse;

namespace {

RgbImage solid(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage img{h, w, 3, {}};
  for (int i = 0; i < h * w; ++i) {
    img.data.push_back(r);
    img.data.push_back(g);
    img.data.push_back(b);
  }
  return img;
}

ImageRecord record(const std::string& id, GrayImage px) {
  ImageRecord r;
  r.image_id = id;
  r.subject_id = "s";
  r.pixels = std::move(px);
  return r;
}

GrayImage ramp(int h, int w) {
  GrayImage g(h, w);
  for (int i = 0; i < h * w; ++i) g.pixels[i] = static_cast<double>(i % 256) / 255.0;
  return g;
}

}  // namespace

TEST_CASE("to_grayscale examples") {
  CHECK(to_grayscale(solid(2, 2, 128, 128, 128)).pixels[0] == 128.0 / 255.0);
  CHECK(to_grayscale(solid(1, 1, 255, 0, 0)).pixels[0] == 76.0 / 255.0);
  const auto black = to_grayscale(solid(3, 4, 0, 0, 0));
  for (double v : black.pixels) CHECK(v == 0.0);
  RgbImage gray{2, 2, 1, std::vector<std::uint8_t>(4, 7)};
  CHECK(testutil::error_kind_of([&] { to_grayscale(gray); }) == ErrorKind::kShapeError);
}

TEST_CASE("property: grayscale matches the rounded luma oracle") {
  Rng rng(3);
  for (int t = 0; t < 5000; ++t) {
    const auto r = static_cast<int>(rng.below(256));
    const auto g = static_cast<int>(rng.below(256));
    const auto b = static_cast<int>(rng.below(256));
    const long luma = std::lround((299.0 * r + 587.0 * g + 114.0 * b) / 1000.0);
    const double v = to_grayscale(solid(1, 1, r, g, b)).pixels[0];
    CHECK(v == static_cast<double>(luma) / 255.0);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("crop_borders examples") {
  const auto img = record("a", ramp(100, 100));
  CropSpec px{CropSpec::Unit::kPixels, 10, 10, 10, 10};
  const auto c = crop_borders(img, px);
  CHECK(c.pixels.height == 80);
  CHECK(c.pixels.width == 80);
  CHECK(c.pixels.at(0, 0) == img.pixels.at(10, 10));

  CHECK(crop_borders(img, CropSpec{}).pixels == img.pixels);

  const auto big = record("b", ramp(224, 224));
  CropSpec frac{CropSpec::Unit::kFraction, 0.1, 0.1, 0.1, 0.1};
  const auto f = crop_borders(big, frac);
  CHECK(f.pixels.height == 180);
  CHECK(f.pixels.width == 180);
  CHECK(f.pixels.at(0, 0) == big.pixels.at(22, 22));

  CropSpec too_much{CropSpec::Unit::kPixels, 50, 45, 0, 0};
  CHECK(testutil::error_kind_of([&] { crop_borders(img, too_much); }) == ErrorKind::kDegenerateCrop);
  CropSpec frac_too_big{CropSpec::Unit::kFraction, 0.5, 0, 0, 0};
  CHECK(testutil::error_kind_of([&] { crop_borders(img, frac_too_big); }) == ErrorKind::kDegenerateCrop);
}

TEST_CASE("dedupe keeps first occurrences of exact duplicates") {
  const auto a = record("A", ramp(8, 8));
  auto b = record("B", ramp(8, 8));
  b.pixels.pixels[5] = 0.9;
  auto a2 = record("A2", ramp(8, 8));

  auto out = dedupe({a, a2, b});
  REQUIRE(out.size() == 2);
  CHECK(out[0].image_id == "A");
  CHECK(out[1].image_id == "B");

  CHECK(dedupe({a, b}).size() == 2);

  auto a_prime = record("A'", ramp(8, 8));
  a_prime.pixels.pixels[0] = 1.0;
  CHECK(dedupe({a, b, a_prime}).size() == 3);
}

TEST_CASE("load_manifest") {
  const auto dir = testutil::temp_dir("manifest");
  std::vector<SubjectRecord> subjects{testutil::subject("s1", ClassLabel::kBenign),
                                      testutil::subject("s2", ClassLabel::kBorderlineMalignant)};
  std::filesystem::create_directories(dir / "img");
  write_png_rgb(dir / "img" / "x.png", solid(10, 12, 255, 0, 0));
  write_png_gray(dir / "img" / "y.png", ramp(9, 9));
  write_png_gray(dir / "img" / "z.png", GrayImage(16, 16, 0.5));

  write_text_file(dir / "ok.csv", "image_path,subject_id\nimg/x.png,s1\nimg/y.png,s1\nimg/z.png,s2\n");
  const auto imgs = load_manifest(dir / "ok.csv", subjects);
  REQUIRE(imgs.size() == 3);
  CHECK(imgs[0].image_id == "x");
  CHECK(imgs[0].pixels.height == 10);
  CHECK(imgs[0].pixels.width == 12);
  CHECK(imgs[0].pixels.pixels[0] == 76.0 / 255.0);
  CHECK(imgs[1].pixels == ramp(9, 9));
  CHECK(imgs[2].subject_id == "s2");

  SUBCASE("missing file") {
    write_text_file(dir / "missing.csv", "image_path,subject_id\nimg/x.png,s1\nimg/nope.png,s1\n");
    try {
      load_manifest(dir / "missing.csv", subjects);
      FAIL("expected UnreadableFile");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kUnreadableFile);
      CHECK(std::string(e.what()).find("nope.png") != std::string::npos);
    }
  }
  SUBCASE("orphan subject") {
    write_text_file(dir / "orphan.csv", "image_path,subject_id\nimg/x.png,ghost\n");
    try {
      load_manifest(dir / "orphan.csv", subjects);
      FAIL("expected OrphanImage");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kOrphanImage);
      CHECK(std::string(e.what()).find("ghost") != std::string::npos);
    }
  }
  SUBCASE("crop and dedupe applied") {
    std::filesystem::copy_file(dir / "img" / "z.png", dir / "img" / "z2.png");
    write_text_file(dir / "dup.csv", "image_path,subject_id\nimg/z.png,s2\nimg/z2.png,s2\n");
    ManifestOptions opts;
    opts.crop = CropSpec{CropSpec::Unit::kPixels, 2, 2, 2, 2};
    const auto d = load_manifest(dir / "dup.csv", subjects, opts);
    REQUIRE(d.size() == 1);
    CHECK(d[0].pixels.height == 12);
    opts.remove_duplicates = false;
    CHECK(load_manifest(dir / "dup.csv", subjects, opts).size() == 2);
  }
}

TEST_CASE("8-bit PNG round trip is exact after quantization") {
  const auto dir = testutil::temp_dir("png");
  Rng rng(5);
  GrayImage g(13, 17);
  for (double& v : g.pixels) v = rng.uniform();
  const auto q = quantize_8bit(g);
  write_png_gray(dir / "q.png", q);
  const auto back = read_png(dir / "q.png");
  REQUIRE(back.channels == 1);
  for (std::size_t i = 0; i < q.pixels.size(); ++i) {
    CHECK(static_cast<double>(back.data[i]) / 255.0 == q.pixels[i]);
  }
}
