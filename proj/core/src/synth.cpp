#include "strokewave/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "strokewave/error.hpp"

namespace strokewave {

void PhantomSpec::validate() const {
  const double half = static_cast<double>(size) / 2.0;
  if (size < 32) throw InvalidArgument("phantom size must be at least 32");
  if (!(axis_x_lo > 0 && axis_x_lo <= axis_x_hi && axis_y_lo > 0 && axis_y_lo <= axis_y_hi)) {
    throw InvalidArgument("phantom axes must be positive ranges");
  }
  if (axis_x_hi + center_jitter >= half || axis_y_hi + center_jitter >= half) {
    throw InvalidArgument("phantom brain ellipse may leave the image");
  }
  if (!(wedge_half_angle_lo > 0 && wedge_half_angle_lo <= wedge_half_angle_hi &&
        wedge_half_angle_hi < std::numbers::pi)) {
    throw InvalidArgument("wedge half-angle range invalid");
  }
  if (!(wedge_radius_lo > 0 && wedge_radius_lo <= wedge_radius_hi &&
        disc_radius_lo > 0 && disc_radius_lo <= disc_radius_hi)) {
    throw InvalidArgument("lesion radius ranges invalid");
  }
  if (disc_radius_hi >= 0.5 * std::min(axis_x_lo, axis_y_lo)) {
    throw InvalidArgument("hemorrhage disc too large for the brain ellipse");
  }
  if (noise_sigma < 0) throw InvalidArgument("noise sigma must be non-negative");
}

Image gen_phantom(std::size_t label, RngStream& rng, const PhantomSpec& spec) {
  if (label >= kClassCount) throw InvalidArgument("phantom class out of range");
  spec.validate();

  RngStream noise(rng.next_u64());
  const double half = static_cast<double>(spec.size) / 2.0;
  const double cx = half + rng.uniform(-spec.center_jitter, spec.center_jitter);
  const double cy = half + rng.uniform(-spec.center_jitter, spec.center_jitter);
  const double ax = rng.uniform(spec.axis_x_lo, spec.axis_x_hi);
  const double ay = rng.uniform(spec.axis_y_lo, spec.axis_y_hi);

  const auto cls = static_cast<StrokeClass>(label);
  // Wedge: apex, direction, half-angle, radius.
  double wx = 0, wy = 0, wdir = 0, whalf = 0, wrad = 0;
  // Disc: center, radius, intensity.
  double dx = 0, dy = 0, drad = 0, dval = 0;
  if (cls == StrokeClass::Ischemic) {
    wx = cx + rng.uniform(-0.1, 0.1) * ax;
    wy = cy + rng.uniform(-0.1, 0.1) * ay;
    wdir = rng.uniform(0.0, 2.0 * std::numbers::pi);
    whalf = rng.uniform(spec.wedge_half_angle_lo, spec.wedge_half_angle_hi);
    wrad = rng.uniform(spec.wedge_radius_lo, spec.wedge_radius_hi);
  } else if (cls == StrokeClass::Hemorrhagic) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double reach = std::sqrt(rng.uniform()) * 0.45;
    dx = cx + reach * ax * std::cos(angle);
    dy = cy + reach * ay * std::sin(angle);
    drad = rng.uniform(spec.disc_radius_lo, spec.disc_radius_hi);
    dval = rng.uniform(spec.disc_intensity_lo, spec.disc_intensity_hi);
  }

  std::vector<double> px(spec.size * spec.size);
  for (std::size_t y = 0; y < spec.size; ++y) {
    for (std::size_t x = 0; x < spec.size; ++x) {
      const double fx = static_cast<double>(x);
      const double fy = static_cast<double>(y);
      const double ex = (fx - cx) / ax;
      const double ey = (fy - cy) / ay;
      double v = spec.background;
      if (ex * ex + ey * ey <= 1.0) {
        v = spec.brain_intensity + spec.brain_gradient * ey;
        if (cls == StrokeClass::Ischemic) {
          const double rx = fx - wx;
          const double ry = fy - wy;
          const double r = std::hypot(rx, ry);
          double dtheta = std::atan2(ry, rx) - wdir;
          dtheta = std::remainder(dtheta, 2.0 * std::numbers::pi);
          if (r <= wrad && std::abs(dtheta) <= whalf) v = spec.wedge_intensity;
        } else if (cls == StrokeClass::Hemorrhagic) {
          if (std::hypot(fx - dx, fy - dy) <= drad) v = dval;
        }
      }
      px[y * spec.size + x] = std::clamp(v + noise.normal(0.0, spec.noise_sigma), 0.0, 1.0);
    }
  }
  return Image(spec.size, spec.size, std::move(px));
}

Dataset gen_dataset(std::size_t n_per_class, std::uint64_t seed,
                    const std::filesystem::path& out_dir, const PhantomSpec& spec) {
  namespace fs = std::filesystem;
  if (n_per_class == 0) throw InvalidArgument("n_per_class must be at least 1");
  spec.validate();
  std::error_code ec;
  for (std::size_t k = 0; k < kClassCount; ++k) {
    const fs::path dir = out_dir / std::string(kClassTitles[k]);
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    for (std::size_t i = 0; i < n_per_class; ++i) {
      RngStream rng(mix_seed(mix_seed(seed, k), i));
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%05zu.pgm", kClassNames[k].data(), i);
      save_pgm(gen_phantom(k, rng, spec), dir / name);
    }
  }
  return scan_dataset(out_dir);
}

}  // namespace strokewave
