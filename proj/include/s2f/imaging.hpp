#pragma once

// Grayscale image container, binary PGM I/O, bilinear resampling and the
// training-time augmentation chain.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "s2f/error.hpp"
#include "s2f/random.hpp"
#include "s2f/text.hpp"

namespace s2f {

/// Row-major intensities in [0,1].
struct ImageGray {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> data;

  ImageGray() = default;
  ImageGray(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), data(w * h, fill) {}

  double& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return data[y * width + x]; }

  bool operator==(const ImageGray&) const = default;
};

namespace detail {

class PnmCursor {
 public:
  explicit PnmCursor(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* what) {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > (1u << 30)) fail(ErrorCode::CorruptImage, std::string("PGM ") + what + " too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) fail(ErrorCode::CorruptImage, std::string("PGM header: missing ") + what);
    return value;
  }

  /// Exactly one whitespace byte separates the header from the raster.
  void expect_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      fail(ErrorCode::CorruptImage, "PGM header: no whitespace before raster");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Decodes binary PGM (P5), maxval up to 65535.
inline ImageGray decode_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    fail(ErrorCode::UnsupportedFormat, "not a binary PGM (P5) stream");
  detail::PnmCursor cur(bytes.substr(2));
  const std::size_t w = cur.read_uint("width");
  const std::size_t h = cur.read_uint("height");
  const std::size_t maxval = cur.read_uint("maxval");
  cur.expect_single_space();
  if (w == 0 || h == 0) fail(ErrorCode::CorruptImage, "PGM has a zero dimension");
  if (maxval == 0 || maxval > 65535) fail(ErrorCode::CorruptImage, "PGM maxval out of range");

  const std::size_t bpp = maxval > 255 ? 2 : 1;
  const std::size_t offset = 2 + cur.pos();
  if (bytes.size() - offset < w * h * bpp)
    fail(ErrorCode::CorruptImage, "PGM raster truncated: expected " + std::to_string(w * h * bpp) +
                                      " bytes, found " + std::to_string(bytes.size() - offset));
  ImageGray img(w, h);
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
  const double scale = static_cast<double>(maxval);
  for (std::size_t i = 0; i < w * h; ++i) {
    const std::size_t v = bpp == 1 ? raster[i] : (std::size_t{raster[2 * i]} << 8) | raster[2 * i + 1];
    img.data[i] = std::min(static_cast<double>(v), scale) / scale;
  }
  return img;
}

/// Encodes as P5 with maxval 255, rounding to the nearest level.
inline std::string encode_pgm(const ImageGray& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.data.size());
  for (double v : img.data)
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  return out;
}

inline void write_pgm(const ImageGray& img, const std::filesystem::path& path) {
  text::write_file(path, encode_pgm(img));
}

/// Loads an image file. Binary PGM is the supported on-disk format; PNG and
/// JPEG inputs are detected and rejected so callers get a clear message.
inline ImageGray load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::MissingFile, path.string());
  const std::string bytes = text::read_file(path);
  if (bytes.size() >= 8 && bytes.compare(0, 8, "\x89PNG\r\n\x1a\n") == 0)
    fail(ErrorCode::UnsupportedFormat, path.string() + ": PNG input is not supported; convert to PGM");
  if (bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
      static_cast<unsigned char>(bytes[1]) == 0xD8)
    fail(ErrorCode::UnsupportedFormat, path.string() + ": JPEG input is not supported; convert to PGM");
  try {
    return decode_pgm(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

/// Luma conversion for interleaved 8-bit RGB.
inline ImageGray from_rgb8(std::size_t w, std::size_t h, std::span<const std::uint8_t> rgb) {
  if (rgb.size() != 3 * w * h) fail(ErrorCode::DimMismatch, "RGB buffer size does not match dims");
  ImageGray img(w, h);
  for (std::size_t i = 0; i < w * h; ++i)
    img.data[i] = (0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2]) / 255.0;
  return img;
}

/// Bilinear sample at (x, y) in pixel coordinates; outside the image reads 0.
inline double sample_bilinear(const ImageGray& img, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  const auto ix = static_cast<long long>(fx);
  const auto iy = static_cast<long long>(fy);
  auto px = [&](long long cx, long long cy) -> double {
    if (cx < 0 || cy < 0 || cx >= static_cast<long long>(img.width) || cy >= static_cast<long long>(img.height))
      return 0.0;
    return img.at(static_cast<std::size_t>(cx), static_cast<std::size_t>(cy));
  };
  double v = px(ix, iy);
  if (ax == 0.0 && ay == 0.0) return v;
  v = (1 - ax) * (1 - ay) * v + ax * (1 - ay) * px(ix + 1, iy) + (1 - ax) * ay * px(ix, iy + 1) +
      ax * ay * px(ix + 1, iy + 1);
  return v;
}

/// Corner-aligned bilinear resize: output corners map onto input corners.
inline ImageGray resize_bilinear(const ImageGray& img, std::size_t w, std::size_t h) {
  if (w == 0 || h == 0) fail(ErrorCode::InvalidArgument, "resize target must be at least 1x1");
  if (img.width == 0 || img.height == 0) fail(ErrorCode::InvalidArgument, "cannot resize an empty image");
  if (w == img.width && h == img.height) return img;
  ImageGray out(w, h);
  const double sx = w > 1 ? static_cast<double>(img.width - 1) / static_cast<double>(w - 1) : 0.0;
  const double sy = h > 1 ? static_cast<double>(img.height - 1) / static_cast<double>(h - 1) : 0.0;
  for (std::size_t y = 0; y < h; ++y) {
    const double src_y = static_cast<double>(y) * sy;
    const auto y0 = static_cast<std::size_t>(src_y);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double ay = src_y - static_cast<double>(y0);
    for (std::size_t x = 0; x < w; ++x) {
      const double src_x = static_cast<double>(x) * sx;
      const auto x0 = static_cast<std::size_t>(src_x);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double ax = src_x - static_cast<double>(x0);
      const double top = img.at(x0, y0) + ax * (img.at(x1, y0) - img.at(x0, y0));
      const double bottom = img.at(x0, y1) + ax * (img.at(x1, y1) - img.at(x0, y1));
      out.at(x, y) = std::clamp(top + ay * (bottom - top), 0.0, 1.0);
    }
  }
  return out;
}

inline ImageGray hflip(const ImageGray& img) {
  ImageGray out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) out.at(x, y) = img.at(img.width - 1 - x, y);
  return out;
}

/// 2x2 linear part plus translation, applied about the image center.
struct AffineTransform {
  double a = 1, b = 0, c = 0, d = 1;  // [[a b] [c d]]
  double tx = 0, ty = 0;

  bool is_identity() const { return a == 1 && b == 0 && c == 0 && d == 1 && tx == 0 && ty == 0; }
};

/// Inverse-maps every output pixel through `t` and samples bilinearly; pixels
/// that land outside the source are filled with 0.
inline ImageGray warp_affine(const ImageGray& img, const AffineTransform& t) {
  if (t.is_identity()) return img;
  const double det = t.a * t.d - t.b * t.c;
  if (det == 0.0 || !std::isfinite(det)) fail(ErrorCode::InvalidArgument, "singular affine transform");
  const double ia = t.d / det, ib = -t.b / det, ic = -t.c / det, id = t.a / det;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  ImageGray out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double ox = static_cast<double>(x) - cx - t.tx;
      const double oy = static_cast<double>(y) - cy - t.ty;
      const double sx = ia * ox + ib * oy + cx;
      const double sy = ic * ox + id * oy + cy;
      out.at(x, y) = std::clamp(sample_bilinear(img, sx, sy), 0.0, 1.0);
    }
  }
  return out;
}

inline ImageGray rotate(const ImageGray& img, double degrees) {
  if (degrees == 0.0) return img;
  const double r = degrees * std::numbers::pi / 180.0;
  return warp_affine(img, {std::cos(r), -std::sin(r), std::sin(r), std::cos(r), 0, 0});
}

struct AugmentConfig {
  double rotation_max_deg = 10.0;
  double hflip_prob = 0.5;
  double brightness_jitter = 0.2;
  double contrast_jitter = 0.2;
  double affine_translate_frac = 0.05;
  double affine_scale_min = 0.9;
  double affine_scale_max = 1.1;
  double affine_shear_max_deg = 5.0;

  /// All ranges zero: augment() returns its input unchanged.
  static AugmentConfig none() { return {0, 0, 0, 0, 0, 1, 1, 0}; }

  void validate() const {
    auto nonneg = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v))
        fail(ErrorCode::InvalidArgument, std::string("augment: ") + name + " must be >= 0");
    };
    nonneg(rotation_max_deg, "rotation_max_deg");
    nonneg(brightness_jitter, "brightness_jitter");
    nonneg(contrast_jitter, "contrast_jitter");
    nonneg(affine_translate_frac, "affine_translate_frac");
    nonneg(affine_shear_max_deg, "affine_shear_max_deg");
    if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0))
      fail(ErrorCode::InvalidArgument, "augment: hflip_prob must lie in [0,1]");
    if (!(affine_scale_min > 0.0 && affine_scale_min <= affine_scale_max) || !std::isfinite(affine_scale_max))
      fail(ErrorCode::InvalidArgument, "augment: scale range must satisfy 0 < min <= max");
    if (affine_shear_max_deg >= 90.0)
      fail(ErrorCode::InvalidArgument, "augment: shear must be below 90 degrees");
  }
};

/// Rotation, horizontal flip, brightness shift, contrast scale about the
/// mean, then random affine (translate, scale, shear), in that order.
/// Every stage consumes its random draws even when its range is zero, so the
/// stream position never depends on the configuration.
inline ImageGray augment(const ImageGray& img, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  const double angle = rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg);
  const bool flip = rng.uniform() < cfg.hflip_prob;
  const double brightness = rng.uniform(-cfg.brightness_jitter, cfg.brightness_jitter);
  const double contrast = 1.0 + rng.uniform(-cfg.contrast_jitter, cfg.contrast_jitter);
  const double tx = rng.uniform(-cfg.affine_translate_frac, cfg.affine_translate_frac) * static_cast<double>(img.width);
  const double ty = rng.uniform(-cfg.affine_translate_frac, cfg.affine_translate_frac) * static_cast<double>(img.height);
  const double scale = rng.uniform(cfg.affine_scale_min, cfg.affine_scale_max);
  const double shear = rng.uniform(-cfg.affine_shear_max_deg, cfg.affine_shear_max_deg) * std::numbers::pi / 180.0;

  ImageGray out = rotate(img, angle);
  if (flip) out = hflip(out);
  if (brightness != 0.0)
    for (double& v : out.data) v = std::clamp(v + brightness, 0.0, 1.0);
  if (contrast != 1.0 && !out.data.empty()) {
    double mean = 0.0;
    for (double v : out.data) mean += v;
    mean /= static_cast<double>(out.data.size());
    for (double& v : out.data) v = std::clamp(mean + (v - mean) * contrast, 0.0, 1.0);
  }
  // x-shear followed by isotropic scale.
  out = warp_affine(out, {scale, scale * std::tan(shear), 0.0, scale, tx, ty});
  return out;
}

}  // namespace s2f
