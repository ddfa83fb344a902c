#include <doctest.h>

#include <fstream>

#include "strokewave/error.hpp"
#include "strokewave/image.hpp"
#include "support.hpp"

using namespace strokewave;
using strokewave::testing::fixture;
using strokewave::testing::TempDir;

namespace {

Image noise_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  RngStream rng(seed);
  Image img(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) img.set(x, y, rng.uniform());
  return img;
}

}  // namespace

TEST_SUITE("imageio") {
  TEST_CASE("pgm full scale and zero") {
    CHECK(load_image(fixture("white_1x1.pgm")) == Image(1, 1, std::vector<double>{1.0}));
    CHECK(load_image(fixture("black_1x1.pgm")) == Image(1, 1, std::vector<double>{0.0}));
  }

  TEST_CASE("png luma") {
    const Image red = load_image(fixture("red_1x1.png"));
    REQUIRE(red.width() == 1);
    CHECK(red.at(0, 0) == doctest::Approx(0.299).epsilon(1e-12));
    CHECK(load_image(fixture("white_1x1.png")).at(0, 0) == 1.0);
  }

  TEST_CASE("jpeg decodes to the expected gray level") {
    const Image img = load_image(fixture("gray128_8x8.jpg"));
    REQUIRE(img.width() == 8);
    REQUIRE(img.height() == 8);
    for (double v : img.pixels()) CHECK(std::abs(v - 128.0 / 255.0) <= 1.5 / 255.0);
  }

  TEST_CASE("rejects 16-bit png, unknown bytes and missing files") {
    CHECK_THROWS_AS(load_image(fixture("deep_2x2.png")), FormatError);
    TempDir dir("img");
    {
      std::ofstream(dir / "junk.png") << "definitely not an image";
    }
    CHECK_THROWS_AS(load_image(dir / "junk.png"), FormatError);
    CHECK_THROWS_AS(load_image(dir / "absent.png"), IoError);
  }

  TEST_CASE("pgm write then read round-trips 8-bit levels") {
    TempDir dir("pgm");
    Image img(3, 2);
    for (std::size_t i = 0; i < 6; ++i) img.set(i % 3, i / 3, static_cast<double>(i * 40) / 255.0);
    save_pgm(img, dir / "a.pgm");
    CHECK(load_image(dir / "a.pgm") == img);
  }

  TEST_CASE("image construction validates") {
    CHECK_THROWS_AS(Image(2, 2, std::vector<double>{0.0, 0.1}), InvalidArgument);
    CHECK_THROWS_AS(Image(1, 1, std::vector<double>{1.5}), InvalidArgument);
  }
}

TEST_SUITE("preprocess") {
  TEST_CASE("resize identity, averaging and constant extension") {
    const Image src = noise_image(256, 256, 1);
    CHECK(resize_bilinear(src, 256, 256) == src);

    const Image checker(2, 2, std::vector<double>{0, 1, 1, 0});
    CHECK(resize_bilinear(checker, 1, 1).at(0, 0) == doctest::Approx(0.5));

    const Image seven = resize_bilinear(Image(1, 1, 0.7), 4, 4);
    for (double v : seven.pixels()) CHECK(v == doctest::Approx(0.7));
  }

  TEST_CASE("annotation mask") {
    MaskConfig cfg;
    Image corner(256, 256);
    corner.set(2, 2, 1.0);
    CHECK(mask_annotations(corner, cfg).at(2, 2) == 0.0);

    Image centre(256, 256);
    centre.set(128, 128, 1.0);
    CHECK(mask_annotations(centre, cfg) == centre);

    const Image dark(256, 256);
    CHECK(mask_annotations(dark, cfg) == dark);

    Image dim(256, 256);
    dim.set(1, 1, 0.5);
    CHECK(mask_annotations(dim, cfg).at(1, 1) == 0.5);
  }

  TEST_CASE("degenerate augmentation is the identity") {
    const Image src = noise_image(256, 256, 2);
    AugmentConfig cfg{0.0, 0.0, 1.0, 1.0};
    RngStream rng(9);
    CHECK(augment(src, cfg, rng) == src);
  }

  TEST_CASE("flip is an involution and brightness clamps") {
    const Image src = noise_image(16, 8, 3);
    CHECK(flip_horizontal(flip_horizontal(src)) == src);
    CHECK(flip_horizontal(src).at(0, 0) == src.at(15, 0));

    const Image bright = scale_brightness(Image(4, 4, 0.95), 1.1);
    for (double v : bright.pixels()) CHECK(v == 1.0);
  }

  TEST_CASE("rotation by quarter turns moves pixels counter-clockwise") {
    Image src(5, 5);
    src.set(4, 2, 1.0);  // right of centre
    const Image r = rotate(src, 90.0);
    CHECK(r.at(2, 0) == doctest::Approx(1.0));  // now above centre
    CHECK(r.at(4, 2) == doctest::Approx(0.0));
    CHECK(rotate(src, 0.0) == src);
  }

  TEST_CASE("augmentation is deterministic per seed") {
    const Image src = noise_image(256, 256, 4);
    AugmentConfig cfg;
    RngStream a(17), b(17);
    CHECK(augment(src, cfg, a) == augment(src, cfg, b));
  }
}
