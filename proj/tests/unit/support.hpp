#pragma once

#include <filesystem>
#include <string>

#include "strokewave/matrix.hpp"
#include "strokewave/rng.hpp"

namespace strokewave::testing {

// Unique scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    RngStream rng(reinterpret_cast<std::uintptr_t>(this) ^ counter_++);
    path_ = std::filesystem::temp_directory_path() /
            ("strokewave-" + tag + "-" + std::to_string(rng.next_u64() % 1000000007ULL));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  static inline std::uint64_t counter_ = 0;
  std::filesystem::path path_;
};

inline Matrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(STROKEWAVE_TEST_DATA_DIR) / name;
}

}  // namespace strokewave::testing
