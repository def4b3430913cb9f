#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lightsout/image.hpp"
#include "lightsout/png_io.hpp"
#include "lightsout/rng.hpp"

using namespace lightsout;

namespace {

Image random_image(Rng& rng, int h, int w) {
  Image img(h, w);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
  return img;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("image dimensions must be positive") {
  CHECK_THROWS(Image(0, 4));
  CHECK_THROWS(Image(4, 0));
  CHECK_THROWS(BinaryMask(0, 1));
  CHECK_THROWS(SoftMask(1, 0));
}

TEST_CASE("luminance of primaries") {
  Image img(1, 3);
  // white, black, red
  img.at(0, 0, 0) = img.at(1, 0, 0) = img.at(2, 0, 0) = 1.0;
  img.at(0, 0, 2) = 1.0;
  const auto luma = rgb_to_luminance(img);
  CHECK(luma.at(0, 0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(luma.at(0, 1) == 0.0);
  CHECK(luma.at(0, 2) == Catch::Approx(0.299).margin(1e-15));
}

TEST_CASE("luminance is linear in the image") {
  Rng rng(11);
  const Image a = random_image(rng, 9, 7);
  const Image b = random_image(rng, 9, 7);
  const double alpha = 0.37;
  Image mix(9, 7);
  for (std::size_t i = 0; i < mix.size(); ++i)
    mix.data()[i] = alpha * a.data()[i] + (1.0 - alpha) * b.data()[i];
  const auto la = rgb_to_luminance(a), lb = rgb_to_luminance(b), lm = rgb_to_luminance(mix);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 7; ++x)
      CHECK(lm.at(y, x) == Catch::Approx(alpha * la.at(y, x) + (1.0 - alpha) * lb.at(y, x))
                               .margin(1e-12));
}

TEST_CASE("alpha composite selects bit-exactly with hard masks") {
  Rng rng(12);
  const Image gen = random_image(rng, 8, 8);
  const Image known = random_image(rng, 8, 8);

  SECTION("all zeros keeps known") {
    const auto out = alpha_composite(gen, known, BinaryMask(8, 8, 0));
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == known.data()[i]);
  }
  SECTION("all ones takes generated") {
    const auto out = alpha_composite(gen, known, BinaryMask(8, 8, 1));
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == gen.data()[i]);
  }
  SECTION("composing twice leaves known pixels identical") {
    BinaryMask m(8, 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) m.at(y, x) = (x + y) % 2;
    const auto once = alpha_composite(gen, known, m);
    const auto twice = alpha_composite(once, known, m);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          if (!m.at(y, x)) CHECK(twice.at(c, y, x) == known.at(c, y, x));
  }
}

TEST_CASE("alpha composite blends soft masks") {
  const Image gen(4, 4, 1.0);
  const Image known(4, 4, 0.0);
  const SoftMask half(4, 4, 0.5);
  const auto out = alpha_composite(gen, known, half);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.5);
}

TEST_CASE("alpha composite rejects shape mismatch") {
  CHECK_THROWS(alpha_composite(Image(4, 4), Image(4, 5), BinaryMask(4, 4)));
  CHECK_THROWS(alpha_composite(Image(4, 4), Image(4, 4), BinaryMask(5, 4)));
}

TEST_CASE("png round trip quantizes to 8 bits and is byte-stable") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "lightsout_png_test";
  fs::create_directories(dir);
  const auto path = (dir / "img.png").string();

  Rng rng(13);
  const Image img = random_image(rng, 17, 23);
  write_image_png(path, img);
  const Image back = read_image_png(path);
  REQUIRE(back.height() == 17);
  REQUIRE(back.width() == 23);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double expect = std::round(img.data()[i] * 255.0) / 255.0;
    CHECK(back.data()[i] == Catch::Approx(expect).margin(1e-12));
  }

  // a second write of the same pixels must produce identical bytes
  const auto path2 = (dir / "img2.png").string();
  write_image_png(path2, img);
  CHECK(slurp(path) == slurp(path2));

  // quantized values survive another round trip exactly
  write_image_png(path2, back);
  CHECK(read_image_png(path2).data()[0] == back.data()[0]);
  CHECK(slurp(path2) == slurp(path));

  fs::remove_all(dir);
}

TEST_CASE("mask png round trip") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "lightsout_mask_test";
  fs::create_directories(dir);
  const auto path = (dir / "mask.png").string();

  Rng rng(14);
  BinaryMask mask(31, 19);
  for (int y = 0; y < 31; ++y)
    for (int x = 0; x < 19; ++x) mask.at(y, x) = rng.uniform() < 0.5 ? 0 : 1;
  write_mask_png(path, mask);
  const auto back = read_mask_png(path);
  REQUIRE(back.same_shape(mask));
  for (std::size_t i = 0; i < mask.size(); ++i) CHECK(back.data()[i] == mask.data()[i]);
  fs::remove_all(dir);
}

TEST_CASE("rng streams are deterministic and seed-sensitive") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
  }
  bool differs = false;
  Rng a2(42);
  for (int i = 0; i < 100; ++i) differs |= a2.next_u64() != c.next_u64();
  CHECK(differs);

  // normal draws: rough moment check, fixed seed so never flaky
  Rng g(7);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = g.normal();
    sum += v;
    sq += v * v;
  }
  CHECK(std::fabs(sum / n) < 0.02);
  CHECK(std::fabs(sq / n - 1.0) < 0.03);
}

TEST_CASE("derived seeds do not collide for nearby ids") {
  std::uint64_t prev = derive_seed(5, 0);
  for (std::uint64_t id = 1; id < 1000; ++id) {
    const auto s = derive_seed(5, id);
    CHECK(s != prev);
    prev = s;
  }
}
