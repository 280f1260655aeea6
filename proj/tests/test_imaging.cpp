#include <filesystem>

#include <gtest/gtest.h>

#include "s2f/imaging.hpp"

using namespace s2f;

namespace {

ImageGray random_image(Rng& rng, std::size_t w, std::size_t h) {
  ImageGray img(w, h);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

std::string pgm_bytes(std::size_t w, std::size_t h, std::initializer_list<unsigned char> px) {
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (unsigned char c : px) s.push_back(static_cast<char>(c));
  return s;
}

}  // namespace

TEST(Pgm, DecodesBytesToUnitRange) {
  const ImageGray img = decode_pgm(pgm_bytes(2, 2, {0, 255, 128, 64}));
  ASSERT_EQ(img.width, 2u);
  ASSERT_EQ(img.height, 2u);
  EXPECT_EQ(img.data[0], 0.0);
  EXPECT_EQ(img.data[1], 1.0);
  EXPECT_EQ(img.data[2], 128.0 / 255.0);
  EXPECT_EQ(img.data[3], 64.0 / 255.0);
}

TEST(Pgm, AllZero) {
  const ImageGray img = decode_pgm(pgm_bytes(3, 1, {0, 0, 0}));
  for (double v : img.data) EXPECT_EQ(v, 0.0);
}

TEST(Pgm, HeaderComments) {
  const std::string s = std::string("P5\n# made by hand\n2 1\n# max\n255\n") + '\x0a' + '\xff';
  const ImageGray img = decode_pgm(s);
  EXPECT_EQ(img.data[0], 10.0 / 255.0);
  EXPECT_EQ(img.data[1], 1.0);
}

TEST(Pgm, Errors) {
  auto code_of = [](const std::string& s) {
    try {
      decode_pgm(s);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code_of(pgm_bytes(2, 2, {0, 1, 2})), ErrorCode::CorruptImage);  // truncated
  EXPECT_EQ(code_of("P5\n2"), ErrorCode::CorruptImage);
  EXPECT_EQ(code_of(pgm_bytes(0, 2, {})), ErrorCode::CorruptImage);
  EXPECT_EQ(code_of("P2\n1 1\n255\n0\n"), ErrorCode::UnsupportedFormat);
  EXPECT_EQ(code_of("P5\n1 1\n0\n\x01"), ErrorCode::CorruptImage);
}

TEST(Pgm, RoundTripWithinQuantization) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const ImageGray img = random_image(rng, 1 + rng.below(20), 1 + rng.below(20));
    const ImageGray back = decode_pgm(encode_pgm(img));
    ASSERT_EQ(back.width, img.width);
    for (std::size_t i = 0; i < img.data.size(); ++i) ASSERT_LE(std::abs(back.data[i] - img.data[i]), 1.0 / 255.0);
  }
}

TEST(Pgm, LoadImageFromDisk) {
  const auto path = std::filesystem::temp_directory_path() / "s2f_img_test.pgm";
  ImageGray img(4, 3, 0.5);
  img.at(1, 2) = 1.0;
  write_pgm(img, path);
  const ImageGray back = load_image(path);
  EXPECT_EQ(back.at(1, 2), 1.0);
  EXPECT_EQ(back.at(0, 0), 128.0 / 255.0);
  std::filesystem::remove(path);
  EXPECT_THROW(load_image(path), Error);
}

TEST(Luma, Weights) {
  const std::vector<std::uint8_t> rgb = {255, 0, 0, 0, 255, 0, 0, 0, 255};
  const ImageGray g = from_rgb8(3, 1, rgb);
  EXPECT_NEAR(g.data[0], 0.299, 1e-15);
  EXPECT_NEAR(g.data[1], 0.587, 1e-15);
  EXPECT_NEAR(g.data[2], 0.114, 1e-15);
}

TEST(Resize, SameDimsIsIdentity) {
  Rng rng(1);
  const ImageGray img = random_image(rng, 7, 5);
  EXPECT_EQ(resize_bilinear(img, 7, 5), img);
}

TEST(Resize, ConstantStaysConstant) {
  const ImageGray img(6, 4, 0.3);
  for (auto [w, h] : {std::pair{1, 1}, {3, 9}, {12, 2}, {64, 64}}) {
    const ImageGray out = resize_bilinear(img, w, h);
    for (double v : out.data) EXPECT_NEAR(v, 0.3, 1e-15);
  }
}

TEST(Resize, CornerAlignedInterpolation) {
  ImageGray img(2, 1);
  img.data = {0.0, 1.0};
  const ImageGray out = resize_bilinear(img, 3, 1);
  ASSERT_EQ(out.data.size(), 3u);
  EXPECT_EQ(out.data[0], 0.0);
  EXPECT_EQ(out.data[1], 0.5);
  EXPECT_EQ(out.data[2], 1.0);
  EXPECT_THROW(resize_bilinear(img, 0, 1), Error);
}

TEST(Augment, ZeroRangesAreIdentity) {
  Rng gen(9);
  for (int trial = 0; trial < 100; ++trial) {
    const ImageGray img = random_image(gen, 1 + gen.below(16), 1 + gen.below(16));
    Rng rng(gen.next_u64());
    EXPECT_EQ(augment(img, AugmentConfig::none(), rng), img);
  }
}

TEST(Augment, FlipIsInvolution) {
  Rng gen(2);
  const ImageGray img = random_image(gen, 9, 4);
  EXPECT_EQ(hflip(hflip(img)), img);
  EXPECT_NE(hflip(img), img);
  AugmentConfig cfg = AugmentConfig::none();
  cfg.hflip_prob = 1.0;
  Rng a(1), b(2);
  EXPECT_EQ(augment(augment(img, cfg, a), cfg, b), img);
}

TEST(Augment, DeterministicForSeed) {
  Rng gen(4);
  const ImageGray img = random_image(gen, 32, 32);
  Rng a(77), b(77);
  const ImageGray x = augment(img, AugmentConfig{}, a);
  const ImageGray y = augment(img, AugmentConfig{}, b);
  EXPECT_EQ(x, y);
  EXPECT_NE(x, img);
}

TEST(Augment, OutputStaysInUnitRange) {
  Rng gen(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const ImageGray img = random_image(gen, 2 + gen.below(12), 2 + gen.below(12));
    AugmentConfig cfg;
    cfg.rotation_max_deg = gen.uniform(0, 180);
    cfg.hflip_prob = gen.uniform();
    cfg.brightness_jitter = gen.uniform(0, 1);
    cfg.contrast_jitter = gen.uniform(0, 3);
    cfg.affine_translate_frac = gen.uniform(0, 0.5);
    cfg.affine_scale_min = gen.uniform(0.2, 1.0);
    cfg.affine_scale_max = cfg.affine_scale_min + gen.uniform(0, 2);
    cfg.affine_shear_max_deg = gen.uniform(0, 60);
    Rng rng(gen.next_u64());
    const ImageGray out = augment(img, cfg, rng);
    ASSERT_EQ(out.data.size(), img.data.size());
    for (double v : out.data) ASSERT_TRUE(v >= 0.0 && v <= 1.0) << v;
  }
}

TEST(Augment, RotationFillsOutsideWithZero) {
  const ImageGray img(11, 11, 1.0);
  const ImageGray out = rotate(img, 45.0);
  EXPECT_EQ(out.at(0, 0), 0.0);
  EXPECT_NEAR(out.at(5, 5), 1.0, 1e-12);
  const ImageGray quarter = rotate(img, 90.0);
  EXPECT_NEAR(quarter.at(5, 5), 1.0, 1e-12);
}

TEST(Augment, InvalidConfigRejected) {
  AugmentConfig cfg;
  cfg.hflip_prob = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = AugmentConfig{};
  cfg.affine_scale_min = 2.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = AugmentConfig{};
  cfg.rotation_max_deg = -1;
  EXPECT_THROW(cfg.validate(), Error);
}
