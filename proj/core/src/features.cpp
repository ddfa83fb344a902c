#include "strokewave/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "strokewave/error.hpp"

namespace strokewave {

namespace {

constexpr double kLogEnergyFloor = 1e-12;

const Matrix& resolve(const SubbandPyramid& p, const FeatureSource& src) {
  if (src.kind == FeatureSource::Kind::Approximation) return p.ll;
  return p.at_level(src.level)[src.orientation];
}

}  // namespace

std::string FeatureSource::label() const {
  switch (kind) {
    case Kind::Approximation: return "LL";
    case Kind::Global: return "GLOBAL";
    case Kind::Detail: break;
  }
  return std::string(to_string(orientation)) + std::to_string(level);
}

std::size_t FeatureConfig::dimension() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.descriptor.output_length();
  return n;
}

void FeatureConfig::validate() const {
  std::set<std::tuple<int, std::size_t, int>> seen;
  for (const auto& e : entries) {
    const Descriptor& d = e.descriptor;
    if (d.kind == Descriptor::Kind::Pool && (d.rows == 0 || d.cols == 0)) {
      throw InvalidArgument("pool grid must be at least 1x1");
    }
    if (d.kind == Descriptor::Kind::Stats && d.stats != 1 && d.stats != 4) {
      throw InvalidArgument("stats descriptor must produce 1 or 4 values");
    }
    if (e.source.kind == FeatureSource::Kind::Detail &&
        (e.source.level < 1 || e.source.level > levels)) {
      throw InvalidArgument("feature source " + e.source.label() + " outside 1.." +
                            std::to_string(levels));
    }
    const auto key = std::make_tuple(static_cast<int>(e.source.kind),
                                     e.source.kind == FeatureSource::Kind::Detail ? e.source.level
                                                                                  : 0,
                                     e.source.kind == FeatureSource::Kind::Detail
                                         ? static_cast<int>(e.source.orientation)
                                         : 0);
    if (!seen.insert(key).second) {
      throw InvalidArgument("feature source " + e.source.label() + " referenced twice");
    }
  }
  if (dimension() != kFeatureDim) {
    throw InvalidArgument("feature config '" + id + "' yields " + std::to_string(dimension()) +
                          " values, expected " + std::to_string(kFeatureDim));
  }
}

FeatureConfig default_config(std::string_view wavelet, std::size_t levels) {
  FeatureConfig cfg;
  cfg.wavelet = std::string(wavelet);
  cfg.levels = levels;
  cfg.id = cfg.wavelet + "-L" + std::to_string(levels) + "-v1";

  auto add_details = [&](std::size_t level, Descriptor d) {
    for (Orientation o : kOrientations) cfg.entries.push_back({FeatureSource::detail(level, o), d});
  };

  if (wavelet == "haar" && levels == 2) {
    // 64 + 3*16 + 3*4 + 4 = 128
    cfg.entries.push_back({FeatureSource::approximation(), Descriptor::pool(8, 8)});
    add_details(2, Descriptor::pool(4, 4));
    add_details(1, Descriptor::summary(4));
    cfg.entries.push_back({FeatureSource::global(), Descriptor::summary(4)});
  } else if (wavelet == "db4" && levels == 3) {
    // 64 + 3*16 + 3*4 + 3*1 + 1 = 128
    cfg.entries.push_back({FeatureSource::approximation(), Descriptor::pool(8, 8)});
    add_details(3, Descriptor::pool(4, 4));
    add_details(2, Descriptor::summary(4));
    add_details(1, Descriptor::summary(1));
    cfg.entries.push_back({FeatureSource::global(), Descriptor::summary(1)});
  } else {
    throw InvalidArgument("no default feature config for (" + cfg.wavelet + ", " +
                          std::to_string(levels) + "); supported: (haar, 2), (db4, 3)");
  }
  cfg.validate();
  return cfg;
}

Matrix pool_mean(const Matrix& m, std::size_t rows, std::size_t cols, bool absolute) {
  if (rows == 0 || cols == 0 || rows > m.rows() || cols > m.cols()) {
    throw InvalidArgument("cannot pool " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + " onto a " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " grid");
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t r0 = i * m.rows() / rows;
    const std::size_t r1 = (i + 1) * m.rows() / rows;
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t c0 = j * m.cols() / cols;
      const std::size_t c1 = (j + 1) * m.cols() / cols;
      double sum = 0.0;
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) sum += absolute ? std::abs(m(r, c)) : m(r, c);
      }
      out(i, j) = sum / static_cast<double>((r1 - r0) * (c1 - c0));
    }
  }
  return out;
}

std::vector<double> subband_stats(std::span<const double> values, std::size_t k) {
  if (k != 1 && k != 4) throw InvalidArgument("subband_stats supports k = 1 or 4");
  if (values.empty()) throw InvalidArgument("subband_stats on an empty matrix");

  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  double sum_abs = 0.0;
  double max_abs = 0.0;
  for (double v : values) {
    sum += v;
    sum_sq += v * v;
    sum_abs += std::abs(v);
    max_abs = std::max(max_abs, std::abs(v));
  }
  const double log_energy = std::log(kLogEnergyFloor + sum_sq / n);
  if (k == 1) return {log_energy};

  // Two-pass variance around the mean.
  const double mean = sum / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {log_energy, sum_abs / n, std::sqrt(var / n), max_abs};
}

FeatureVector extract(const SubbandPyramid& p, const Image& img, const FeatureConfig& cfg) {
  cfg.validate();
  if (p.levels != cfg.levels) {
    throw InvalidArgument("feature config '" + cfg.id + "' expects " +
                          std::to_string(cfg.levels) + " levels, pyramid has " +
                          std::to_string(p.levels));
  }

  FeatureVector out{};
  std::size_t pos = 0;
  const Matrix source_image = to_matrix(img);
  for (const auto& e : cfg.entries) {
    const bool is_global = e.source.kind == FeatureSource::Kind::Global;
    const Matrix& m = is_global ? source_image : resolve(p, e.source);
    if (e.descriptor.kind == Descriptor::Kind::Pool) {
      if (e.descriptor.rows > m.rows() || e.descriptor.cols > m.cols()) {
        throw InvalidArgument("pool grid larger than subband " + e.source.label());
      }
      const bool absolute = e.source.kind == FeatureSource::Kind::Detail;
      const Matrix pooled = pool_mean(m, e.descriptor.rows, e.descriptor.cols, absolute);
      for (double v : pooled.values()) out[pos++] = v;
    } else {
      for (double v : subband_stats(m, e.descriptor.stats)) out[pos++] = v;
    }
  }
  for (double v : out) {
    if (!std::isfinite(v)) throw Error("non-finite feature value");
  }
  return out;
}

FeatureVector extract_features(const Image& img, const FeatureConfig& cfg) {
  const WaveletFilter f = build_filter(cfg.wavelet);
  return extract(decompose2d(to_matrix(img), f, cfg.levels), img, cfg);
}

Normalizer identity_normalizer() noexcept {
  Normalizer n;
  n.mean.fill(0.0);
  n.std.fill(1.0);
  return n;
}

Normalizer fit_normalizer(std::span<const FeatureVector> rows) {
  if (rows.size() < 2) throw InvalidArgument("fit_normalizer needs at least 2 rows");
  Normalizer n;
  const auto count = static_cast<double>(rows.size());
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    double sum = 0.0;
    for (const auto& r : rows) sum += r[i];
    const double mean = sum / count;
    double var = 0.0;
    for (const auto& r : rows) var += (r[i] - mean) * (r[i] - mean);
    n.mean[i] = mean;
    n.std[i] = std::max(std::sqrt(var / count), Normalizer::kStdFloor);
  }
  return n;
}

FeatureVector normalize(const FeatureVector& v, const Normalizer& n) noexcept {
  FeatureVector out;
  for (std::size_t i = 0; i < kFeatureDim; ++i) out[i] = (v[i] - n.mean[i]) / n.std[i];
  return out;
}

}  // namespace strokewave
