#include "strokewave/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "strokewave/error.hpp"

namespace strokewave {

namespace {

double ratio(std::size_t num, std::size_t den) noexcept {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= kClassCount || predicted >= kClassCount) {
    throw InvalidArgument("class index out of range in confusion matrix");
  }
  ++counts[truth][predicted];
}

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (std::size_t v : row) n += v;
  }
  return n;
}

std::size_t ConfusionMatrix::trace() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < kClassCount; ++i) n += counts[i][i];
  return n;
}

double f1_score(double precision, double recall) noexcept {
  const double denom = precision + recall;
  return denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
}

ClassMetrics class_metrics(const ConfusionMatrix& c, std::size_t cls) {
  if (cls >= kClassCount) throw InvalidArgument("class index out of range");
  const std::size_t tp = c.counts[cls][cls];
  std::size_t predicted = 0;
  std::size_t actual = 0;
  for (std::size_t k = 0; k < kClassCount; ++k) {
    predicted += c.counts[k][cls];
    actual += c.counts[cls][k];
  }
  ClassMetrics m;
  m.precision = ratio(tp, predicted);
  m.recall = ratio(tp, actual);
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

double stroke_sensitivity(const ConfusionMatrix& c) noexcept {
  constexpr std::size_t kStroke[] = {static_cast<std::size_t>(StrokeClass::Hemorrhagic),
                                     static_cast<std::size_t>(StrokeClass::Ischemic)};
  std::size_t detected = 0;
  std::size_t strokes = 0;
  for (std::size_t t : kStroke) {
    for (std::size_t p = 0; p < kClassCount; ++p) strokes += c.counts[t][p];
    for (std::size_t p : kStroke) detected += c.counts[t][p];
  }
  return ratio(detected, strokes);
}

double accuracy(const ConfusionMatrix& c) noexcept { return ratio(c.trace(), c.total()); }

Metrics compute_metrics(const ConfusionMatrix& c) {
  Metrics m;
  m.confusion = c;
  for (std::size_t k = 0; k < kClassCount; ++k) m.per_class[k] = class_metrics(c, k);
  m.accuracy = accuracy(c);
  m.stroke_sensitivity = stroke_sensitivity(c);
  return m;
}

Metrics compute_metrics(std::span<const std::size_t> truth,
                        std::span<const std::size_t> predicted) {
  if (truth.size() != predicted.size()) {
    throw InvalidArgument("truth and prediction counts differ");
  }
  ConfusionMatrix c;
  for (std::size_t i = 0; i < truth.size(); ++i) c.add(truth[i], predicted[i]);
  return compute_metrics(c);
}

std::string metrics_to_json(const Metrics& m) {
  nlohmann::ordered_json doc;
  doc["samples"] = m.confusion.total();
  doc["accuracy"] = m.accuracy;
  doc["stroke_sensitivity"] = m.stroke_sensitivity;
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < kClassCount; ++k) {
    nlohmann::ordered_json entry;
    entry["class"] = kClassNames[k];
    entry["precision"] = m.per_class[k].precision;
    entry["recall"] = m.per_class[k].recall;
    entry["f1"] = m.per_class[k].f1;
    std::size_t support = 0;
    for (std::size_t v : m.confusion.counts[k]) support += v;
    entry["support"] = support;
    classes.push_back(std::move(entry));
  }
  doc["per_class"] = std::move(classes);
  doc["confusion"] = m.confusion.counts;
  doc["confusion_axes"] = "rows=true, cols=predicted, order=hemorrhagic,ischemic,normal";
  return doc.dump(2) + "\n";
}

Metrics metrics_from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text.begin(), text.end());
    Metrics m;
    m.accuracy = doc.at("accuracy").get<double>();
    m.stroke_sensitivity = doc.at("stroke_sensitivity").get<double>();
    const auto& classes = doc.at("per_class");
    if (classes.size() != kClassCount) throw FormatError("per_class must list 3 classes");
    for (std::size_t k = 0; k < kClassCount; ++k) {
      m.per_class[k].precision = classes[k].at("precision").get<double>();
      m.per_class[k].recall = classes[k].at("recall").get<double>();
      m.per_class[k].f1 = classes[k].at("f1").get<double>();
    }
    m.confusion.counts = doc.at("confusion").get<decltype(m.confusion.counts)>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed metrics JSON: ") + e.what());
  }
}

void write_metrics(const Metrics& m, const std::filesystem::path& path) {
  write_text(metrics_to_json(m), path);
}

std::string history_to_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss,
                  r.train_acc, r.val_loss, r.val_acc);
    out += buf;
  }
  return out;
}

void write_history(std::span<const EpochRecord> history, const std::filesystem::path& path) {
  write_text(history_to_csv(history), path);
}

}  // namespace strokewave
