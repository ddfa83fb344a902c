#include <doctest.h>

#include <fstream>
#include <sstream>

#include "strokewave/error.hpp"
#include "strokewave/pipeline.hpp"
#include "strokewave/synth.hpp"
#include "support.hpp"

using namespace strokewave;
using strokewave::testing::TempDir;

namespace {

struct SmallRun {
  TempDir dir{"pipeline"};
  Dataset data = gen_dataset(10, 42, dir.path());
  FeaturePipelineConfig cfg = [] {
    FeaturePipelineConfig c;
    c.augment_copies = 1;
    return c;
  }();
  Split split = split_stratified(data, cfg.ratios, cfg.seed);
};

TrainConfig short_training() {
  TrainConfig t;
  t.epochs = 4;
  t.batch_size = 8;
  return t;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("preprocess resizes and masks") {
    Image raw(64, 32, 0.2);
    raw.set(0, 0, 1.0);
    const Image out = preprocess(raw, PreprocessConfig{});
    CHECK(out.width() == 256);
    CHECK(out.height() == 256);
    CHECK(out.at(0, 0) == 0.0);
    PreprocessConfig keep;
    keep.apply_mask = false;
    CHECK(preprocess(Image(256, 256, 0.9), keep) == Image(256, 256, 0.9));
  }

  TEST_CASE("split features carry augmented copies only in train") {
    SmallRun run;
    const SplitFeatures f = build_split_features(run.split, run.cfg);
    CHECK(f.train.size() == run.split.train.size() * 2);
    CHECK(f.val.size() == run.split.val.size());
    std::size_t augmented = 0;
    for (const auto& r : f.train) augmented += r.path.find("#aug") != std::string::npos;
    CHECK(augmented == run.split.train.size());

    FeaturePipelineConfig threaded = run.cfg;
    threaded.jobs = 3;
    const SplitFeatures g = build_split_features(run.split, threaded);
    for (std::size_t i = 0; i < f.train.size(); ++i) CHECK(f.train[i].values == g.train[i].values);
  }

  TEST_CASE("feature cache round trip and invalidation") {
    SmallRun run;
    const SplitFeatures f = build_split_features(run.split, run.cfg);
    const auto csv = run.dir / "cache.csv";
    write_feature_cache(f, run.cfg, csv);
    const auto back = load_feature_cache(csv, run.cfg);
    REQUIRE(back.has_value());
    REQUIRE(back->train.size() == f.train.size());
    for (std::size_t i = 0; i < f.train.size(); ++i) {
      CHECK(back->train[i].path == f.train[i].path);
      CHECK(back->train[i].values == f.train[i].values);
    }
    CHECK(back->test.size() == f.test.size());

    FeaturePipelineConfig other = run.cfg;
    other.wavelet = "db4";
    other.levels = 3;
    CHECK(other.hash() != run.cfg.hash());
    CHECK_FALSE(load_feature_cache(csv, other).has_value());
    FeaturePipelineConfig more_jobs = run.cfg;
    more_jobs.jobs = 4;
    CHECK(more_jobs.hash() == run.cfg.hash());
  }

  TEST_CASE("training is deterministic and records every epoch") {
    SmallRun run;
    const SplitFeatures f = build_split_features(run.split, run.cfg);
    const FeatureConfig fcfg = default_config("haar", 2);
    std::size_t calls = 0;
    const TrainResult a =
        train_on_features(f, fcfg, short_training(), [&](const EpochRecord&) { ++calls; });
    const TrainResult b = train_on_features(f, fcfg, short_training());
    CHECK(calls == 4);
    CHECK(a.history.size() == 4);
    CHECK(a.history == b.history);
    CHECK(a.model == b.model);
    CHECK(a.best_epoch >= 1);
    CHECK(a.best_epoch <= 4);
    CHECK(a.model.feature_config_id == "haar-L2-v1");
    CHECK(feature_config_for(a.model).id == fcfg.id);
    const double best = a.history[a.best_epoch - 1].val_acc;
    for (const auto& r : a.history) CHECK(r.val_acc <= best);
  }

  TEST_CASE("evaluation from images matches evaluation from feature rows") {
    SmallRun run;
    const SplitFeatures f = build_split_features(run.split, run.cfg);
    const TrainResult r = train_on_features(f, default_config("haar", 2), short_training());
    const Metrics from_rows = evaluate_rows(r.model, f.test);
    const Metrics from_images = evaluate(r.model, run.split.test, run.cfg.preprocess);
    CHECK(from_rows.confusion == from_images.confusion);
    CHECK(evaluate(r.model, run.split.test, run.cfg.preprocess, 2).confusion ==
          from_images.confusion);
  }
}
