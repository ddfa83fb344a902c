#include "strokewave/dwt.hpp"

#include <cmath>
#include <string>

#include "strokewave/error.hpp"

namespace strokewave {

namespace {

constexpr std::array<std::string_view, 2> kWaveletNames{"haar", "db4"};

// Minimum-phase Daubechies scaling filter with four vanishing moments,
// normalized to sum sqrt(2). Computed by spectral factorization at 50 digits.
constexpr std::array<double, 8> kDb4Lowpass{
    0.23037781330889650086,  0.71484657055291564709,  0.63088076792985890788,
    -0.027983769416859854211, -0.18703481171909308408, 0.030841381835560763627,
    0.032883011666885199735, -0.010597401785069032105,
};

constexpr double kCertifyTolerance = 1e-10;
constexpr double kMomentTolerance = 1e-8;

std::vector<double> quadrature_mirror(const std::vector<double>& h) {
  const std::size_t len = h.size();
  std::vector<double> g(len);
  for (std::size_t n = 0; n < len; ++n) {
    const double v = h[len - 1 - n];
    g[n] = (n % 2 == 0) ? v : -v;
  }
  return g;
}

// Strided analysis/synthesis kernels shared by the 1D and 2D transforms.
void analyze(const double* x, std::size_t stride, std::size_t n, const WaveletFilter& f,
             double* approx, double* detail, std::size_t out_stride) {
  const std::size_t len = f.length();
  const double* h = f.lowpass.data();
  const double* g = f.highpass.data();
  for (std::size_t k = 0; k < n / 2; ++k) {
    double a = 0.0;
    double d = 0.0;
    std::size_t idx = 2 * k;
    for (std::size_t t = 0; t < len; ++t) {
      if (idx >= n) idx -= n;
      const double v = x[idx * stride];
      a += h[t] * v;
      d += g[t] * v;
      ++idx;
    }
    approx[k * out_stride] = a;
    detail[k * out_stride] = d;
  }
}

void synthesize(const double* approx, const double* detail, std::size_t in_stride,
                std::size_t half, const WaveletFilter& f, double* x, std::size_t stride) {
  const std::size_t n = 2 * half;
  const std::size_t len = f.length();
  for (std::size_t i = 0; i < n; ++i) x[i * stride] = 0.0;
  for (std::size_t k = 0; k < half; ++k) {
    const double a = approx[k * in_stride];
    const double d = detail[k * in_stride];
    std::size_t idx = 2 * k;
    for (std::size_t t = 0; t < len; ++t) {
      if (idx >= n) idx -= n;
      x[idx * stride] += f.lowpass[t] * a + f.highpass[t] * d;
      ++idx;
    }
  }
}

void check_length(std::size_t n, const WaveletFilter& f) {
  if (n % 2 != 0) throw InvalidArgument("dwt1d needs an even-length signal, got " +
                                        std::to_string(n));
  if (n < f.length()) {
    throw InvalidArgument("signal of length " + std::to_string(n) + " is shorter than the " +
                          std::to_string(f.length()) + "-tap " + f.name + " filter");
  }
}

struct Level {
  Matrix ll;
  DetailBands bands;
};

Level analyze_level(const Matrix& m, const WaveletFilter& f) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  const std::size_t hr = rows / 2;
  const std::size_t hc = cols / 2;

  Matrix row_lo(rows, hc);
  Matrix row_hi(rows, hc);
  for (std::size_t r = 0; r < rows; ++r) {
    analyze(m.row(r).data(), 1, cols, f, row_lo.row(r).data(), row_hi.row(r).data(), 1);
  }

  Level out{Matrix(hr, hc), {Matrix(hr, hc), Matrix(hr, hc), Matrix(hr, hc)}};
  for (std::size_t c = 0; c < hc; ++c) {
    analyze(&row_lo(0, c), hc, rows, f, &out.ll(0, c), &out.bands.lh(0, c), hc);
    analyze(&row_hi(0, c), hc, rows, f, &out.bands.hl(0, c), &out.bands.hh(0, c), hc);
  }
  return out;
}

Matrix synthesize_level(const Matrix& ll, const DetailBands& bands, const WaveletFilter& f) {
  const std::size_t hr = ll.rows();
  const std::size_t hc = ll.cols();
  const std::size_t rows = 2 * hr;
  const std::size_t cols = 2 * hc;

  Matrix row_lo(rows, hc);
  Matrix row_hi(rows, hc);
  for (std::size_t c = 0; c < hc; ++c) {
    synthesize(ll.values().data() + c, bands.lh.values().data() + c, hc, hr, f, &row_lo(0, c), hc);
    synthesize(bands.hl.values().data() + c, bands.hh.values().data() + c, hc, hr, f, &row_hi(0, c), hc);
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    synthesize(row_lo.row(r).data(), row_hi.row(r).data(), 1, hc, f, out.row(r).data(), 1);
  }
  return out;
}

bool same_shape(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

}  // namespace

FilterCertificate certify(const WaveletFilter& f) {
  FilterCertificate cert;
  const auto& h = f.lowpass;
  const std::size_t len = h.size();

  double sum = 0.0;
  double energy = 0.0;
  for (double v : h) {
    sum += v;
    energy += v * v;
  }
  cert.lowpass_sum_error = std::abs(sum - std::sqrt(2.0));
  cert.lowpass_energy_error = std::abs(energy - 1.0);

  for (std::size_t shift = 2; shift < len; shift += 2) {
    double dot = 0.0;
    for (std::size_t n = 0; n + shift < len; ++n) dot += h[n] * h[n + shift];
    cert.shift_orthogonality = std::max(cert.shift_orthogonality, std::abs(dot));
  }

  double gsum = 0.0;
  for (double v : f.highpass) gsum += v;
  cert.highpass_sum_error = std::abs(gsum);
  cert.quadrature_mirror_exact =
      f.highpass.size() == len && f.highpass == quadrature_mirror(h);

  for (std::size_t p = 0; p < cert.vanishing_moments.size(); ++p) {
    double moment = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
      const double sign = (n % 2 == 0) ? 1.0 : -1.0;
      moment += sign * std::pow(static_cast<double>(n), static_cast<double>(p)) * h[n];
    }
    cert.vanishing_moments[p] = std::abs(moment);
  }
  return cert;
}

std::span<const std::string_view> known_wavelets() noexcept { return kWaveletNames; }

WaveletFilter build_filter(std::string_view name) {
  WaveletFilter f;
  f.name = std::string(name);
  if (name == "haar") {
    const double r = 1.0 / std::sqrt(2.0);
    f.lowpass = {r, r};
  } else if (name == "db4") {
    f.lowpass.assign(kDb4Lowpass.begin(), kDb4Lowpass.end());
  } else {
    throw InvalidArgument("unknown wavelet '" + std::string(name) +
                          "' (expected one of: haar, db4)");
  }
  f.highpass = quadrature_mirror(f.lowpass);

  const FilterCertificate cert = certify(f);
  const bool ok = cert.lowpass_sum_error < kCertifyTolerance &&
                  cert.lowpass_energy_error < kCertifyTolerance &&
                  cert.shift_orthogonality < kCertifyTolerance &&
                  cert.highpass_sum_error < kCertifyTolerance && cert.quadrature_mirror_exact;
  if (!ok) throw Error("filter '" + f.name + "' failed orthonormality certification");
  // Haar has one vanishing moment, db4 has four.
  const std::size_t moments = f.length() / 2;
  for (std::size_t p = 0; p < moments; ++p) {
    if (cert.vanishing_moments[p] >= kMomentTolerance) {
      throw Error("filter '" + f.name + "' failed vanishing-moment certification");
    }
  }
  return f;
}

Dwt1d dwt1d(std::span<const double> signal, const WaveletFilter& f) {
  check_length(signal.size(), f);
  Dwt1d out{std::vector<double>(signal.size() / 2), std::vector<double>(signal.size() / 2)};
  analyze(signal.data(), 1, signal.size(), f, out.approx.data(), out.detail.data(), 1);
  return out;
}

std::vector<double> idwt1d(std::span<const double> approx, std::span<const double> detail,
                           const WaveletFilter& f) {
  if (approx.size() != detail.size()) {
    throw InvalidArgument("idwt1d: approx and detail lengths differ (" +
                          std::to_string(approx.size()) + " vs " +
                          std::to_string(detail.size()) + ")");
  }
  check_length(2 * approx.size(), f);
  std::vector<double> x(2 * approx.size());
  synthesize(approx.data(), detail.data(), 1, approx.size(), f, x.data(), 1);
  return x;
}

std::string_view to_string(Orientation o) noexcept {
  switch (o) {
    case Orientation::LH: return "LH";
    case Orientation::HL: return "HL";
    case Orientation::HH: return "HH";
  }
  return "?";
}

const Matrix& DetailBands::operator[](Orientation o) const noexcept {
  switch (o) {
    case Orientation::LH: return lh;
    case Orientation::HL: return hl;
    case Orientation::HH: break;
  }
  return hh;
}

const DetailBands& SubbandPyramid::at_level(std::size_t level) const {
  if (level < 1 || level > levels) {
    throw InvalidArgument("pyramid has no level " + std::to_string(level));
  }
  return details[levels - level];
}

std::size_t SubbandPyramid::coefficient_count() const noexcept {
  std::size_t n = ll.size();
  for (const auto& d : details) n += d.lh.size() + d.hl.size() + d.hh.size();
  return n;
}

double SubbandPyramid::energy() const noexcept {
  auto sq = [](const Matrix& m) {
    double s = 0.0;
    for (double v : m.values()) s += v * v;
    return s;
  };
  double e = sq(ll);
  for (const auto& d : details) e += sq(d.lh) + sq(d.hl) + sq(d.hh);
  return e;
}

SubbandPyramid decompose2d(const Matrix& m, const WaveletFilter& f, std::size_t levels) {
  if (levels == 0) throw InvalidArgument("decompose2d needs at least one level");
  if (levels >= 32) throw InvalidArgument("too many decomposition levels");
  const std::size_t block = std::size_t{1} << levels;
  if (m.rows() == 0 || m.cols() == 0 || m.rows() % block != 0 || m.cols() % block != 0) {
    throw InvalidArgument("matrix " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + " is not divisible by 2^" +
                          std::to_string(levels));
  }
  const std::size_t coarsest_input = block / 2;
  if (m.rows() / coarsest_input < f.length() || m.cols() / coarsest_input < f.length()) {
    throw InvalidArgument("matrix too small for " + std::to_string(levels) + " levels of " +
                          f.name);
  }

  SubbandPyramid p;
  p.levels = levels;
  p.details.resize(levels);
  Matrix current = m;
  for (std::size_t lvl = 1; lvl <= levels; ++lvl) {
    Level step = analyze_level(current, f);
    p.details[levels - lvl] = std::move(step.bands);
    current = std::move(step.ll);
  }
  p.ll = std::move(current);
  return p;
}

Matrix reconstruct2d(const SubbandPyramid& p, const WaveletFilter& f) {
  if (p.details.size() != p.levels || p.levels == 0) {
    throw InvalidArgument("pyramid level count does not match its detail list");
  }
  Matrix current = p.ll;
  for (const DetailBands& bands : p.details) {
    if (!same_shape(bands.lh, current) || !same_shape(bands.hl, current) ||
        !same_shape(bands.hh, current)) {
      throw InvalidArgument("inconsistent subband sizes in pyramid");
    }
    if (current.rows() * 2 < f.length() || current.cols() * 2 < f.length()) {
      throw InvalidArgument("subband too small for filter " + f.name);
    }
    current = synthesize_level(current, bands, f);
  }
  return current;
}

}  // namespace strokewave
