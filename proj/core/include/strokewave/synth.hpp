#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "strokewave/dataset.hpp"
#include "strokewave/image.hpp"
#include "strokewave/rng.hpp"

namespace strokewave {

/// Geometry and intensity ranges for synthetic brain phantoms. All lengths in
/// pixels on the canonical 256x256 grid; (lo, hi) pairs are uniform ranges.
struct PhantomSpec {
  std::size_t size = kCanonicalSize;
  double background = 0.02;

  double axis_x_lo = 76.0, axis_x_hi = 80.0;  // brain ellipse semi-axes
  double axis_y_lo = 90.0, axis_y_hi = 94.0;
  double center_jitter = 5.0;
  double brain_intensity = 0.45;
  double brain_gradient = 0.05;  // top-to-bottom ramp amplitude

  // Ischemic: dark sector with its apex near the brain center.
  double wedge_intensity = 0.15;
  double wedge_half_angle_lo = 0.35, wedge_half_angle_hi = 0.6;  // radians
  double wedge_radius_lo = 55.0, wedge_radius_hi = 75.0;

  // Hemorrhagic: bright disc inside the inner half of the brain.
  double disc_radius_lo = 12.0, disc_radius_hi = 22.0;
  double disc_intensity_lo = 0.85, disc_intensity_hi = 0.95;

  double noise_sigma = 0.03;

  /// Throws InvalidArgument if any structure could leave the image.
  void validate() const;
};

/// Draws one phantom. The noise field and brain geometry are drawn before the
/// class-specific lesion, so the same rng state yields the same anatomy for
/// every class.
Image gen_phantom(std::size_t label, RngStream& rng, const PhantomSpec& spec = {});

/// Writes n_per_class 8-bit PGM phantoms per class under
/// out_dir/{Hemorrhagic,Ischemic,Normal}/ and returns the scanned dataset.
/// Image i of class k uses the sub-seed mix_seed(mix_seed(seed, k), i).
Dataset gen_dataset(std::size_t n_per_class, std::uint64_t seed,
                    const std::filesystem::path& out_dir, const PhantomSpec& spec = {});

}  // namespace strokewave
