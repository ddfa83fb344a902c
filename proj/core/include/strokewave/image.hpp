#pragma once

#include <cstddef>
#include <filesystem>
#include <utility>
#include <vector>

#include "strokewave/matrix.hpp"
#include "strokewave/rng.hpp"

namespace strokewave {

/// Canonical edge length of every image entering the wavelet stage.
inline constexpr std::size_t kCanonicalSize = 256;

/// Grayscale raster with unit-interval intensities, stored row-major.
class Image {
 public:
  Image() = default;
  Image(std::size_t width, std::size_t height, double fill = 0.0);
  /// Throws InvalidArgument if the length is wrong or any value leaves [0, 1].
  Image(std::size_t width, std::size_t height, std::vector<double> data);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }

  /// Pixel at column x, row y.
  double at(std::size_t x, std::size_t y) const noexcept { return data_[y * width_ + x]; }
  /// Writes are clamped to [0, 1] so the range invariant cannot be broken.
  void set(std::size_t x, std::size_t y, double v) noexcept;

  const std::vector<double>& pixels() const noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

/// Rows = height, cols = width.
Matrix to_matrix(const Image& img);

/// Border-band annotation removal: bright pixels inside the outer band are zeroed.
struct MaskConfig {
  std::size_t margin = 32;
  double threshold = 200.0 / 255.0;

  /// Throws InvalidArgument unless margin < min(w, h) / 2 and threshold in [0, 1].
  void validate(std::size_t width, std::size_t height) const;
};

struct AugmentConfig {
  double max_rotation_deg = 10.0;
  double hflip_prob = 0.5;
  double brightness_lo = 0.9;
  double brightness_hi = 1.1;

  void validate() const;
};

/// Decodes PNG, JPEG or binary PGM (P5), sniffing the format from the file's
/// magic bytes. Color inputs collapse to BT.601 luma.
Image load_image(const std::filesystem::path& path);

/// Writes an 8-bit binary PGM (P5); intensities are rounded to the nearest level.
void save_pgm(const Image& img, const std::filesystem::path& path);

/// Bilinear resampling with pixel-center alignment and edge clamping.
Image resize_bilinear(const Image& img, std::size_t out_w, std::size_t out_h);

Image mask_annotations(const Image& img, const MaskConfig& cfg);

/// Counter-clockwise rotation (as displayed) about the image center, bilinear
/// sampling, 0.0 outside the source.
Image rotate(const Image& img, double degrees);
Image flip_horizontal(const Image& img);
/// Multiplies every pixel by factor and clamps to [0, 1].
Image scale_brightness(const Image& img, double factor);

/// Random rotation, then horizontal flip, then brightness. Draws are taken from
/// rng in that order, one each, whether or not the transform ends up a no-op.
Image augment(const Image& img, const AugmentConfig& cfg, RngStream& rng);

}  // namespace strokewave
