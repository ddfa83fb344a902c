#include "strokewave/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "strokewave/error.hpp"

namespace strokewave {

Image::Image(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), data_(width * height, std::clamp(fill, 0.0, 1.0)) {}

Image::Image(std::size_t width, std::size_t height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (data_.size() != width_ * height_) {
    throw InvalidArgument("image data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(width_) + "x" +
                          std::to_string(height_));
  }
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("image intensity outside [0, 1]");
  }
}

void Image::set(std::size_t x, std::size_t y, double v) noexcept {
  data_[y * width_ + x] = std::clamp(v, 0.0, 1.0);
}

Matrix to_matrix(const Image& img) {
  return Matrix(img.height(), img.width(), img.pixels());
}

void MaskConfig::validate(std::size_t width, std::size_t height) const {
  if (2 * margin >= std::min(width, height)) {
    throw InvalidArgument("mask margin " + std::to_string(margin) + " too wide for " +
                          std::to_string(width) + "x" + std::to_string(height) + " image");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw InvalidArgument("mask threshold must lie in [0, 1]");
  }
}

void AugmentConfig::validate() const {
  if (!(max_rotation_deg >= 0.0)) throw InvalidArgument("max_rotation_deg must be >= 0");
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) {
    throw InvalidArgument("hflip_prob must lie in [0, 1]");
  }
  if (!(brightness_lo > 0.0 && brightness_lo <= brightness_hi)) {
    throw InvalidArgument("brightness range must satisfy 0 < lo <= hi");
  }
}

Image resize_bilinear(const Image& img, std::size_t out_w, std::size_t out_h) {
  if (out_w == 0 || out_h == 0) throw InvalidArgument("resize target must be at least 1x1");
  if (img.empty()) throw InvalidArgument("cannot resize an empty image");

  const std::size_t w = img.width();
  const std::size_t h = img.height();
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);

  std::vector<double> out(out_w * out_h);
  for (std::size_t i = 0; i < out_h; ++i) {
    const double fy = std::clamp((static_cast<double>(i) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t j = 0; j < out_w; ++j) {
      const double fx = std::clamp((static_cast<double>(j) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - static_cast<double>(x0);
      const double top = img.at(x0, y0) * (1.0 - tx) + img.at(x1, y0) * tx;
      const double bottom = img.at(x0, y1) * (1.0 - tx) + img.at(x1, y1) * tx;
      out[i * out_w + j] = std::clamp(top * (1.0 - ty) + bottom * ty, 0.0, 1.0);
    }
  }
  return Image(out_w, out_h, std::move(out));
}

Image mask_annotations(const Image& img, const MaskConfig& cfg) {
  cfg.validate(img.width(), img.height());
  Image out = img;
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  for (std::size_t y = 0; y < h; ++y) {
    const bool row_in_band = y < cfg.margin || y >= h - cfg.margin;
    for (std::size_t x = 0; x < w; ++x) {
      const bool in_band = row_in_band || x < cfg.margin || x >= w - cfg.margin;
      if (in_band && img.at(x, y) >= cfg.threshold) out.set(x, y, 0.0);
    }
  }
  return out;
}

Image rotate(const Image& img, double degrees) {
  if (degrees == 0.0) return img;
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;

  // Out-of-range taps contribute 0.0 (black fill).
  auto tap = [&](long x, long y) {
    if (x < 0 || y < 0 || x >= static_cast<long>(w) || y >= static_cast<long>(h)) return 0.0;
    return img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
  };

  std::vector<double> out(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    const double dy = static_cast<double>(y) - cy;
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = static_cast<double>(x) - cx;
      // Inverse map: y grows downward, so a counter-clockwise turn on screen
      // is a clockwise turn in (x, y) coordinates.
      const double src_x = c * dx - s * dy + cx;
      const double src_y = s * dx + c * dy + cy;
      const double fx = std::floor(src_x);
      const double fy = std::floor(src_y);
      const double tx = src_x - fx;
      const double ty = src_y - fy;
      const auto x0 = static_cast<long>(fx);
      const auto y0 = static_cast<long>(fy);
      const double v = tap(x0, y0) * (1.0 - tx) * (1.0 - ty) + tap(x0 + 1, y0) * tx * (1.0 - ty) +
                       tap(x0, y0 + 1) * (1.0 - tx) * ty + tap(x0 + 1, y0 + 1) * tx * ty;
      out[y * w + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  return Image(w, h, std::move(out));
}

Image flip_horizontal(const Image& img) {
  const std::size_t w = img.width();
  std::vector<double> out(img.pixels());
  for (std::size_t y = 0; y < img.height(); ++y) {
    std::reverse(out.begin() + static_cast<std::ptrdiff_t>(y * w),
                 out.begin() + static_cast<std::ptrdiff_t>((y + 1) * w));
  }
  return Image(w, img.height(), std::move(out));
}

Image scale_brightness(const Image& img, double factor) {
  if (factor == 1.0) return img;
  std::vector<double> out(img.pixels());
  for (double& v : out) v = std::clamp(v * factor, 0.0, 1.0);
  return Image(img.width(), img.height(), std::move(out));
}

Image augment(const Image& img, const AugmentConfig& cfg, RngStream& rng) {
  cfg.validate();
  if (img.width() != kCanonicalSize || img.height() != kCanonicalSize) {
    throw InvalidArgument("augment expects a " + std::to_string(kCanonicalSize) + "x" +
                          std::to_string(kCanonicalSize) + " image");
  }
  const double theta = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
  const bool flip = rng.bernoulli(cfg.hflip_prob);
  const double factor = rng.uniform(cfg.brightness_lo, cfg.brightness_hi);

  Image out = rotate(img, theta);
  if (flip) out = flip_horizontal(out);
  return scale_brightness(out, factor);
}

}  // namespace strokewave
