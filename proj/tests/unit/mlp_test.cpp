#include <doctest.h>

#include <cmath>
#include <limits>

#include "strokewave/error.hpp"
#include "strokewave/mlp.hpp"
#include "support.hpp"

using namespace strokewave;
using strokewave::testing::random_matrix;
using strokewave::testing::TempDir;

namespace {

void zero_output_layer(MlpModel& m) {
  for (double& w : m.dense3.weights.values()) w = 0.0;
  for (double& b : m.dense3.bias) b = 0.0;
}

std::vector<std::size_t> random_labels(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = rng.below(kNumClasses);
  return labels;
}

ForwardCache infer(const MlpModel& m, const Matrix& x) {
  RngStream rng(0);
  return forward(m, x, Mode::Infer, DropoutRates{}, rng);
}

}  // namespace

TEST_SUITE("mlp") {
  TEST_CASE("initialization") {
    const MlpModel a = init_model(1);
    CHECK(a == init_model(1));
    CHECK(!(a == init_model(2)));
    CHECK(a.dense1.weights.rows() == 128);
    CHECK(a.dense1.weights.cols() == 128);
    CHECK(a.dense2.weights.cols() == 64);
    CHECK(a.dense3.weights.cols() == 3);

    double mean = 0.0, sq = 0.0;
    for (double w : a.dense1.weights.values()) {
      mean += w;
      sq += w * w;
    }
    mean /= 16384.0;
    CHECK(std::abs(mean) < 3 * 0.05 / std::sqrt(16384.0));
    CHECK(std::sqrt(sq / 16384.0) == doctest::Approx(0.05).epsilon(0.03));

    for (const auto* bias : {&a.dense1.bias, &a.dense2.bias, &a.dense3.bias})
      for (double b : *bias) CHECK(b == 0.0);
    for (double g : a.bn1.gamma) CHECK(g == 1.0);
    for (double v : a.bn2.running_var) CHECK(v == 1.0);
  }

  TEST_CASE("zero output layer gives uniform probabilities") {
    MlpModel m = init_model(3);
    zero_output_layer(m);
    RngStream rng(1);
    const ForwardCache c = infer(m, random_matrix(5, 128, rng));
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t k = 0; k < 3; ++k) CHECK(c.probs(r, k) == doctest::Approx(1.0 / 3));
  }

  TEST_CASE("softmax is stable for extreme logits") {
    Matrix logits(1, 3, {1000.0, 1000.0, -1000.0});
    softmax_rows(logits);
    for (double p : logits.values()) CHECK(std::isfinite(p));
    CHECK(logits(0, 0) == doctest::Approx(0.5));
    CHECK(logits(0, 1) == doctest::Approx(0.5));
  }

  TEST_CASE("inference is pure") {
    const MlpModel m = init_model(4);
    const MlpModel before = m;
    RngStream rng(2);
    const Matrix x = random_matrix(6, 128, rng);
    CHECK(infer(m, x).probs == infer(m, x).probs);
    CHECK(m == before);
  }

  TEST_CASE("training forward updates running statistics") {
    MlpModel m = init_model(5);
    RngStream rng(3);
    const Matrix x = random_matrix(8, 128, rng, 2.0, 4.0);
    RngStream drop(4);
    forward_train(m, x, DropoutRates{}, 0.99, drop);
    CHECK(!(m.bn1.running_mean == init_model(5).bn1.running_mean));
  }

  TEST_CASE("cross entropy") {
    const Matrix onehot(2, 3, {1, 0, 0, 0, 0, 1});
    const std::vector<std::size_t> labels{0, 2};
    CHECK(loss_ce(onehot, labels) == 0.0);

    const Matrix uniform(2, 3, {1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3});
    CHECK(loss_ce(uniform, labels) == doctest::Approx(std::log(3.0)));

    const Matrix miss(1, 3, {0, 1, 0});
    const std::vector<std::size_t> first{0};
    CHECK(loss_ce(miss, first) == doctest::Approx(-std::log(1e-12)));
  }

  TEST_CASE("output bias gradient vanishes for uniform predictions on balanced labels") {
    MlpModel m = init_model(6);
    zero_output_layer(m);
    RngStream rng(5);
    const Matrix x = random_matrix(6, 128, rng);
    const std::vector<std::size_t> labels{0, 1, 2, 0, 1, 2};
    RngStream drop(0);
    const ForwardCache c = forward(m, x, Mode::Train, DropoutRates{0.0, 0.0}, drop);
    const Gradients g = backward(m, c, labels);
    for (double v : g[Param::B3]) CHECK(std::abs(v) < 1e-15);
  }

  TEST_CASE("gradient check passes for both block orders and fails under mutation") {
    RngStream rng(7);
    for (BlockOrder order : {BlockOrder::ReluThenNorm, BlockOrder::NormThenRelu}) {
      const MlpModel m = init_model(8, 0.05, order);
      const Matrix x = random_matrix(8, 128, rng, -2.0, 2.0);
      const std::vector<std::size_t> labels = random_labels(8, rng);
      GradCheckOptions opts;
      opts.samples_per_tensor = 200;
      CHECK(grad_check(m, x, labels, opts).max_relative_error < 1e-5);

      opts.tamper = [](Gradients& g) {
        for (double& v : g[Param::W2]) v *= 2.0;
      };
      CHECK(grad_check(m, x, labels, opts).max_relative_error > 0.1);
    }
  }

  TEST_CASE("duplicated samples contribute identically") {
    const MlpModel m = init_model(9);
    RngStream rng(6);
    Matrix x = random_matrix(4, 128, rng);
    for (std::size_t j = 0; j < 128; ++j) x(1, j) = x(0, j);
    const std::vector<std::size_t> labels{2, 2, 0, 1};
    RngStream drop(0);
    const ForwardCache c = forward(m, x, Mode::Train, DropoutRates{0.0, 0.0}, drop);
    for (std::size_t k = 0; k < 3; ++k) CHECK(c.probs(0, k) == c.probs(1, k));
  }

  TEST_CASE("adam first step moves by the learning rate against the gradient sign") {
    MlpModel m = init_model(10);
    const MlpModel before = m;
    Gradients g = Gradients::zeros_like(m);
    g[Param::B3][0] = 0.37;
    g[Param::B3][1] = -2.5;
    AdamState state = AdamState::for_model(m);
    TrainConfig cfg;
    adam_step(m, g, state, 1, cfg);
    CHECK(m.dense3.bias[0] == doctest::Approx(-cfg.learning_rate).epsilon(1e-6));
    CHECK(m.dense3.bias[1] == doctest::Approx(cfg.learning_rate).epsilon(1e-6));
    CHECK(m.dense1 == before.dense1);
    CHECK_THROWS_AS(adam_step(m, g, state, 0, cfg), InvalidArgument);
  }

  TEST_CASE("adam with zero gradients is a no-op and is deterministic") {
    MlpModel m = init_model(11);
    const MlpModel before = m;
    const Gradients zero = Gradients::zeros_like(m);
    AdamState state = AdamState::for_model(m);
    for (std::uint64_t t = 1; t <= 5; ++t) adam_step(m, zero, state, t, TrainConfig{});
    CHECK(m == before);

    RngStream rng(3);
    Gradients g = Gradients::zeros_like(m);
    for (auto& t : g.tensors)
      for (double& v : t) v = rng.normal();
    MlpModel a = before, b = before;
    AdamState sa = AdamState::for_model(a), sb = AdamState::for_model(b);
    adam_step(a, g, sa, 1, TrainConfig{});
    adam_step(b, g, sb, 1, TrainConfig{});
    CHECK(a == b);
  }

  TEST_CASE("prediction tie-break and consistency") {
    MlpModel m = init_model(12);
    zero_output_layer(m);
    FeatureVector v{};
    const Prediction p = predict(m, v);
    CHECK(p.label == 0);
    for (double q : p.probs) CHECK(q == doctest::Approx(1.0 / 3));

    const MlpModel live = init_model(13);
    RngStream rng(1);
    for (int i = 0; i < 20; ++i) {
      for (double& x : v) x = rng.normal();
      const Prediction a = predict(live, v);
      CHECK(a.label == argmax(a.probs));
      const Prediction b = predict(live, v);
      CHECK(a.probs == b.probs);
    }
  }

  TEST_CASE("dropout is inverted and seeded") {
    const MlpModel m = init_model(14);
    RngStream rng(2);
    const Matrix x = random_matrix(16, 128, rng);
    RngStream a(5), b(5);
    const ForwardCache ca = forward(m, x, Mode::Train, DropoutRates{0.5, 0.5}, a);
    const ForwardCache cb = forward(m, x, Mode::Train, DropoutRates{0.5, 0.5}, b);
    CHECK(ca.probs == cb.probs);
    for (double s : ca.block1.dropout_scale.values()) CHECK((s == 0.0 || s == 2.0));
  }

  TEST_CASE("block order strings") {
    CHECK(block_order_from_string("relu-bn") == BlockOrder::ReluThenNorm);
    CHECK(block_order_from_string("bn-relu") == BlockOrder::NormThenRelu);
    CHECK(to_string(BlockOrder::NormThenRelu) == "bn-relu");
    CHECK_THROWS_AS(block_order_from_string("relu"), InvalidArgument);
  }
}

TEST_SUITE("model io") {
  TEST_CASE("round trip preserves the model and its predictions bit for bit") {
    MlpModel m = init_model(20, 0.05, BlockOrder::NormThenRelu);
    RngStream rng(4);
    for (auto& v : m.bn1.running_var) v = rng.uniform(0.5, 2.0);
    for (auto& v : m.normalizer.std) v = rng.uniform(0.5, 2.0);
    m.feature_config_id = "haar-L2-v1";

    TempDir dir("model");
    save_model(m, dir / "m.json");
    const MlpModel back = load_model(dir / "m.json");
    CHECK(back == m);

    std::vector<FeatureVector> inputs(100);
    for (auto& v : inputs)
      for (double& x : v) x = rng.normal();
    const auto before = predict_batch(m, inputs);
    const auto after = predict_batch(back, inputs);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      CHECK(before[i].label == after[i].label);
      CHECK(before[i].probs == after[i].probs);
    }
  }

  TEST_CASE("wrong version and truncation are explicit errors") {
    const std::string text = serialize_model(init_model(21));
    std::string wrong = text;
    const auto pos = wrong.find("\"format_version\"");
    REQUIRE(pos != std::string::npos);
    wrong.replace(wrong.find('1', pos), 1, "7");
    CHECK_THROWS_WITH_AS(deserialize_model(wrong), doctest::Contains("version"), FormatError);
    CHECK_THROWS_AS(deserialize_model(text.substr(0, text.size() / 2)), FormatError);
  }
}
