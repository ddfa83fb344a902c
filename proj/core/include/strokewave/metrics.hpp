#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace strokewave {

/// Class indices follow alphabetical directory order.
enum class StrokeClass : std::size_t { Hemorrhagic = 0, Ischemic = 1, Normal = 2 };

inline constexpr std::size_t kClassCount = 3;
inline constexpr std::array<std::string_view, kClassCount> kClassNames{"hemorrhagic", "ischemic",
                                                                       "normal"};
/// Display names used for dataset directories and reports.
inline constexpr std::array<std::string_view, kClassCount> kClassTitles{"Hemorrhagic", "Ischemic",
                                                                        "Normal"};

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kClassCount>, kClassCount> counts{};

  void add(std::size_t truth, std::size_t predicted);
  std::size_t total() const noexcept;
  std::size_t trace() const noexcept;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// F1 from precision and recall; 0 when both are 0.
double f1_score(double precision, double recall) noexcept;

/// Precision, recall and F1 for one class; every 0/0 is defined as 0.
ClassMetrics class_metrics(const ConfusionMatrix& c, std::size_t cls);

/// Fraction of true stroke samples (hemorrhagic or ischemic) predicted as
/// either stroke class. Confusing one stroke type for the other still counts
/// as detected.
double stroke_sensitivity(const ConfusionMatrix& c) noexcept;

double accuracy(const ConfusionMatrix& c) noexcept;

struct Metrics {
  std::array<ClassMetrics, kClassCount> per_class{};
  double accuracy = 0.0;
  double stroke_sensitivity = 0.0;
  ConfusionMatrix confusion;
};

Metrics compute_metrics(const ConfusionMatrix& c);
Metrics compute_metrics(std::span<const std::size_t> truth, std::span<const std::size_t> predicted);

/// Deterministic JSON text (fixed key order, shortest round-trip numbers).
std::string metrics_to_json(const Metrics& m);
Metrics metrics_from_json(std::string_view text);
void write_metrics(const Metrics& m, const std::filesystem::path& path);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

/// CSV `epoch,train_loss,train_acc,val_loss,val_acc`, numbers with 17 significant digits.
std::string history_to_csv(std::span<const EpochRecord> history);
void write_history(std::span<const EpochRecord> history, const std::filesystem::path& path);

}  // namespace strokewave
