#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strokewave/matrix.hpp"

namespace strokewave {

/// Orthonormal two-channel filter bank.
///
/// The highpass is derived from the lowpass by the quadrature-mirror rule
/// g[n] = (-1)^n h[L-1-n]; build_filter certifies the orthonormality
/// conditions before returning.
struct WaveletFilter {
  std::string name;
  std::vector<double> lowpass;
  std::vector<double> highpass;

  std::size_t length() const noexcept { return lowpass.size(); }
};

/// Residuals of the filter-bank identities, all of which should be ~0.
struct FilterCertificate {
  double lowpass_sum_error = 0.0;      // |sum h - sqrt(2)|
  double lowpass_energy_error = 0.0;   // |sum h^2 - 1|
  double shift_orthogonality = 0.0;    // max_k!=0 |sum h[n] h[n+2k]|
  double highpass_sum_error = 0.0;     // |sum g|
  bool quadrature_mirror_exact = false;
  /// |sum (-1)^n n^p h[n]| for p = 0..3.
  std::array<double, 4> vanishing_moments{};
};

FilterCertificate certify(const WaveletFilter& f);

/// "haar" (2 taps) or "db4" (8-tap Daubechies, 4 vanishing moments).
WaveletFilter build_filter(std::string_view name);

/// Names accepted by build_filter.
std::span<const std::string_view> known_wavelets() noexcept;

struct Dwt1d {
  std::vector<double> approx;
  std::vector<double> detail;
};

/// One periodized analysis step:
///   approx[k] = sum_n h[n] x[(2k+n) mod N],  detail[k] = sum_n g[n] x[(2k+n) mod N].
Dwt1d dwt1d(std::span<const double> signal, const WaveletFilter& f);

/// Exact inverse (transpose) of dwt1d.
std::vector<double> idwt1d(std::span<const double> approx, std::span<const double> detail,
                           const WaveletFilter& f);

/// Detail orientation; the first letter names the filter run along rows, the
/// second the filter run along columns.
enum class Orientation { LH, HL, HH };

inline constexpr std::array<Orientation, 3> kOrientations{Orientation::LH, Orientation::HL,
                                                          Orientation::HH};

std::string_view to_string(Orientation o) noexcept;

struct DetailBands {
  Matrix lh;
  Matrix hl;
  Matrix hh;

  const Matrix& operator[](Orientation o) const noexcept;
};

/// Multi-level 2D decomposition. details[0] is the coarsest level.
struct SubbandPyramid {
  std::size_t levels = 0;
  Matrix ll;
  std::vector<DetailBands> details;

  /// Detail bands at `level`, where level 1 is the finest and `levels` the coarsest.
  const DetailBands& at_level(std::size_t level) const;
  std::size_t coefficient_count() const noexcept;
  /// Sum of squares over every coefficient.
  double energy() const noexcept;
};

/// Separable decomposition: rows first, then columns, recursing on LL.
/// Dimensions must be divisible by 2^levels and the coarsest pass must still
/// see at least filter-length samples.
SubbandPyramid decompose2d(const Matrix& m, const WaveletFilter& f, std::size_t levels);

Matrix reconstruct2d(const SubbandPyramid& p, const WaveletFilter& f);

}  // namespace strokewave
