#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "strokewave/metrics.hpp"
#include "support.hpp"

using namespace strokewave;
using strokewave::testing::TempDir;

namespace {

// Confusion matrix whose class 0 has the given true positives, misses and false alarms.
ConfusionMatrix with_class0(std::size_t tp, std::size_t fn, std::size_t fp) {
  ConfusionMatrix c;
  c.counts[0][0] = tp;
  c.counts[0][2] = fn;
  c.counts[2][0] = fp;
  c.counts[2][2] = 10;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("precision and recall pairs reproduce reference F1 scores") {
    struct Row {
      double p, r, f1;
    };
    for (Row row : {Row{0.90, 0.53, 0.67}, Row{0.80, 0.48, 0.60}, Row{0.88, 0.72, 0.79},
                    Row{0.74, 0.61, 0.67}, Row{0.87, 0.94, 0.90}}) {
      CHECK(std::abs(f1_score(row.p, row.r) - row.f1) <= 0.005);
    }
    CHECK(f1_score(0.90, 0.53) == doctest::Approx(0.6671).epsilon(1e-4));
    CHECK(f1_score(0.88, 0.72) == doctest::Approx(0.7920).epsilon(1e-4));
  }

  TEST_CASE("class_metrics from counts") {
    // 477 / (477 + 53) = 0.90 precision, 477 / 900 = 0.53 recall.
    const ClassMetrics m = class_metrics(with_class0(477, 423, 53), 0);
    CHECK(m.precision == doctest::Approx(0.90));
    CHECK(m.recall == doctest::Approx(0.53));
    CHECK(std::abs(m.f1 - 0.67) <= 0.005);

    const ClassMetrics absent = class_metrics(with_class0(0, 0, 0), 1);
    CHECK(absent.precision == 0.0);
    CHECK(absent.recall == 0.0);
    CHECK(absent.f1 == 0.0);
  }

  TEST_CASE("stroke sensitivity") {
    ConfusionMatrix c;
    c.counts[0] = {5, 3, 2};
    c.counts[1] = {2, 6, 2};
    c.counts[2] = {1, 0, 9};
    CHECK(stroke_sensitivity(c) == doctest::Approx(0.80));

    ConfusionMatrix id;
    for (std::size_t k = 0; k < 3; ++k) id.counts[k][k] = 4;
    CHECK(stroke_sensitivity(id) == 1.0);

    ConfusionMatrix missed;
    missed.counts[0][2] = 3;
    missed.counts[1][2] = 3;
    CHECK(stroke_sensitivity(missed) == 0.0);
  }

  TEST_CASE("degenerate and perfect predictors") {
    std::vector<std::size_t> truth, always_normal;
    for (std::size_t i = 0; i < 30; ++i) {
      truth.push_back(i % 3);
      always_normal.push_back(2);
    }
    const Metrics m = compute_metrics(truth, always_normal);
    CHECK(m.accuracy == doctest::Approx(1.0 / 3));
    CHECK(m.per_class[2].recall == 1.0);
    CHECK(m.stroke_sensitivity == 0.0);

    const Metrics p = compute_metrics(truth, truth);
    CHECK(p.accuracy == 1.0);
    for (const auto& c : p.per_class) CHECK(c.f1 == 1.0);
    CHECK(p.stroke_sensitivity == 1.0);

    const Metrics again = compute_metrics(truth, always_normal);
    CHECK(again.confusion == m.confusion);
    CHECK(again.accuracy == m.accuracy);
  }

  TEST_CASE("metrics json round-trips exactly") {
    ConfusionMatrix c;
    c.counts[0] = {7, 2, 1};
    c.counts[1] = {3, 5, 3};
    c.counts[2] = {0, 1, 11};
    const Metrics m = compute_metrics(c);
    const Metrics back = metrics_from_json(metrics_to_json(m));
    CHECK(back.accuracy == m.accuracy);
    CHECK(back.stroke_sensitivity == m.stroke_sensitivity);
    CHECK(back.confusion == m.confusion);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(back.per_class[k].precision == m.per_class[k].precision);
      CHECK(back.per_class[k].f1 == m.per_class[k].f1);
    }
  }

  TEST_CASE("history csv shape and determinism") {
    std::vector<EpochRecord> h;
    for (std::size_t e = 1; e <= 100; ++e) h.push_back({e, 1.0 / e, 0.5, 2.0 / e, 0.25});
    const std::string csv = history_to_csv(h);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 101);
    CHECK(csv.rfind("epoch,train_loss,train_acc,val_loss,val_acc\n", 0) == 0);

    TempDir dir("hist");
    write_history(h, dir / "a.csv");
    write_history(h, dir / "b.csv");
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(slurp(dir / "a.csv") == csv);
  }
}
