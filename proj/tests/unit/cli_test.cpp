#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "strokewave/synth.hpp"
#include "support.hpp"

using namespace strokewave;
using namespace strokewave::cli;
using strokewave::testing::TempDir;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("train flags with defaults elsewhere") {
    const Command c = parse_args({"train", "--data", "d/", "--wavelet", "haar", "--levels", "2"});
    const auto* t = std::get_if<TrainCmd>(&c);
    REQUIRE(t != nullptr);
    CHECK(t->data == "d/");
    CHECK(t->pipeline.wavelet == "haar");
    CHECK(t->pipeline.levels == 2);
    CHECK(t->train.epochs == 100);
    CHECK(t->train.batch_size == 32);
    CHECK(t->train.seed == 42);
    CHECK(t->pipeline.augment_copies == 3);
    CHECK(t->model_out == "model.json");
  }

  TEST_CASE("seed and block order reach the training config") {
    const Command c =
        parse_args({"train", "--data", "d", "--seed", "9", "--block-order", "bn-relu"});
    const auto& t = std::get<TrainCmd>(c);
    CHECK(t.train.seed == 9);
    CHECK(t.pipeline.seed == 9);
    CHECK(t.train.block_order == BlockOrder::NormThenRelu);
  }

  TEST_CASE("usage errors") {
    CHECK_THROWS_WITH_AS(parse_args({"train", "--data", "d", "--wavelet", "sym5"}),
                         doctest::Contains("haar"), UsageError);
    CHECK_THROWS_AS(parse_args({"train", "--data", "d", "--wavelet", "db4", "--levels", "2"}),
                    UsageError);
    CHECK_THROWS_AS(parse_args({"train"}), UsageError);
    CHECK_THROWS_AS(parse_args({"frobnicate"}), UsageError);
    CHECK_THROWS_AS(parse_args({}), UsageError);

    const Outcome none = invoke({});
    CHECK(none.code == kExitUsage);
    CHECK(none.err.find("Usage") != std::string::npos);
    CHECK(invoke({"info", "--model"}).code == kExitUsage);
  }

  TEST_CASE("help exits zero") {
    const Outcome h = invoke({"--help"});
    CHECK(h.code == kExitOk);
    CHECK(h.out.find("dwt-roundtrip") != std::string::npos);
  }

  TEST_CASE("config file fills options the command line leaves out") {
    TempDir dir("cfg");
    std::ofstream(dir / "c.json")
        << R"({"wavelet": {"wavelet": "db4", "levels": 3}, "train": {"epochs": 7, "lr": 0.01},
             "preprocess": {"no-mask": true}, "io": {"model-out": "x.json"}})";
    const std::string cfg = (dir / "c.json").string();
    const auto& t =
        std::get<TrainCmd>(parse_args({"train", "--data", "d", "--config", cfg, "--epochs", "3"}));
    CHECK(t.pipeline.wavelet == "db4");
    CHECK(t.pipeline.levels == 3);
    CHECK(t.train.epochs == 3);
    CHECK(t.train.learning_rate == 0.01);
    CHECK_FALSE(t.pipeline.preprocess.apply_mask);
    CHECK(t.model_out == "x.json");

    // Keys the chosen subcommand lacks are ignored; unknown keys are not.
    const auto& info = std::get<InfoCmd>(parse_args({"info", "--model", "m", "--config", cfg}));
    CHECK(info.model == "m");

    std::ofstream(dir / "bad.json") << R"({"train": {"epochz": 3}})";
    CHECK_THROWS_WITH_AS(
        parse_args({"info", "--model", "m", "--config", (dir / "bad.json").string()}),
        doctest::Contains("epochz"), UsageError);
    std::ofstream(dir / "section.json") << R"({"optimizer": {}})";
    CHECK_THROWS_AS(
        parse_args({"info", "--model", "m", "--config", (dir / "section.json").string()}),
        UsageError);
  }

  TEST_CASE("runtime failures exit 1 with a diagnostic") {
    const Outcome o = invoke({"info", "--model", "/nonexistent/model.json"});
    CHECK(o.code == kExitFailure);
    CHECK(o.err.find("error:") == 0);
    CHECK(o.out.empty());
  }

  TEST_CASE("synth, train, predict, eval, info and roundtrip end to end") {
    TempDir dir("cli");
    const std::string data = (dir / "data").string();
    const std::string model = (dir / "m.json").string();
    REQUIRE(invoke({"synth", "--n", "10", "--out", data}).code == kExitOk);

    const Outcome tr = invoke({"train", "--data", data, "--epochs", "3", "--augment-copies", "0",
                               "--model-out", model, "--history-out",
                               (dir / "h.csv").string(), "--metrics-out",
                               (dir / "m_test.json").string(), "--cache",
                               (dir / "f.csv").string()});
    REQUIRE(tr.code == kExitOk);
    CHECK(std::count(tr.err.begin(), tr.err.end(), '\n') == 3);
    const auto summary = nlohmann::json::parse(tr.out);
    CHECK(summary["epochs"] == 3);
    CHECK(summary["cache_hit"] == false);
    CHECK(std::filesystem::exists(dir / "m_test.json"));

    const Outcome again = invoke({"train", "--cache", (dir / "f.csv").string(), "--epochs", "1",
                                  "--augment-copies", "0", "--quiet", "--model-out",
                                  (dir / "m2.json").string()});
    INFO(again.err);
    REQUIRE(again.code == kExitOk);
    CHECK(again.err.empty());
    CHECK(nlohmann::json::parse(again.out)["cache_hit"] == true);

    const std::string image = (dir / "data" / "Normal" / "normal_00000.pgm").string();
    const Outcome pr = invoke({"predict", "--model", model, "--image", image});
    REQUIRE(pr.code == kExitOk);
    const auto p = nlohmann::json::parse(pr.out);
    CHECK(p["probs"].size() == 3);
    CHECK(p["class"] == std::string(kClassNames[p["index"].get<std::size_t>()]));

    const Outcome ev = invoke({"eval", "--model", model, "--data", data, "--split", "test"});
    REQUIRE(ev.code == kExitOk);
    CHECK(nlohmann::json::parse(ev.out)["samples"] == 3);

    const Outcome info = invoke({"info", "--model", model});
    REQUIRE(info.code == kExitOk);
    CHECK(nlohmann::json::parse(info.out)["feature_config_id"] == "haar-L2-v1");

    const Outcome rt = invoke({"dwt-roundtrip", "--image", image, "--wavelet", "db4",
                               "--levels", "3"});
    REQUIRE(rt.code == kExitOk);
    const auto r = nlohmann::json::parse(rt.out);
    CHECK(r["max_abs_error"].get<double>() < 1e-8);
    CHECK(std::abs(r["energy_ratio"].get<double>() - 1.0) < 1e-10);

    const std::string pre_out = (dir / "pre").string();
    REQUIRE(invoke({"preprocess", "--in", data, "--out", pre_out}).code == kExitOk);
    CHECK(std::filesystem::exists(dir / "pre" / "Ischemic" / "ischemic_00005.pgm"));
  }
}
