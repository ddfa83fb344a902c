#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strokewave/features.hpp"
#include "strokewave/matrix.hpp"
#include "strokewave/rng.hpp"

namespace strokewave {

inline constexpr std::size_t kHidden1 = 128;
inline constexpr std::size_t kHidden2 = 64;
inline constexpr std::size_t kNumClasses = 3;

/// Position of the activation relative to batch normalization inside a
/// hidden block. Dropout always comes last.
enum class BlockOrder { ReluThenNorm, NormThenRelu };

std::string_view to_string(BlockOrder order) noexcept;
BlockOrder block_order_from_string(std::string_view s);

enum class Mode { Train, Infer };

struct DenseLayer {
  Matrix weights;  // fan_in x fan_out
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct BatchNormLayer {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  friend bool operator==(const BatchNormLayer&, const BatchNormLayer&) = default;
};

/// 128 -> 128 -> 64 -> 3 classifier plus the feature normalizer it was trained with.
struct MlpModel {
  DenseLayer dense1;
  BatchNormLayer bn1;
  DenseLayer dense2;
  BatchNormLayer bn2;
  DenseLayer dense3;

  Normalizer normalizer = identity_normalizer();
  std::string wavelet = "haar";
  std::size_t levels = 2;
  std::string feature_config_id;
  BlockOrder block_order = BlockOrder::ReluThenNorm;
  double bn_eps = 1e-5;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

struct DropoutRates {
  double hidden1 = 0.3;
  double hidden2 = 0.1;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  DropoutRates dropout;
  double bn_momentum = 0.99;
  double bn_eps = 1e-5;
  double init_std = 0.05;
  BlockOrder block_order = BlockOrder::ReluThenNorm;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Trainable tensors in a fixed order; Gradients and the Adam moments use the
/// same layout.
enum class Param : std::size_t { W1, B1, Gamma1, Beta1, W2, B2, Gamma2, Beta2, W3, B3 };
inline constexpr std::size_t kParamCount = 10;

std::string_view param_name(std::size_t index) noexcept;

std::array<std::span<double>, kParamCount> parameters(MlpModel& m);
std::array<std::span<const double>, kParamCount> parameters(const MlpModel& m);

struct Gradients {
  std::array<std::vector<double>, kParamCount> tensors;

  static Gradients zeros_like(const MlpModel& m);
  std::vector<double>& operator[](Param p) { return tensors[static_cast<std::size_t>(p)]; }
  const std::vector<double>& operator[](Param p) const {
    return tensors[static_cast<std::size_t>(p)];
  }
};

/// Intermediates of one hidden block for one batch.
struct BlockCache {
  Matrix input;       // block input
  Matrix linear;      // x W + b
  Matrix norm_input;  // what batch norm saw
  Matrix xhat;        // normalized values
  Matrix norm_output; // gamma * xhat + beta
  Matrix output;      // after activation and dropout
  Matrix dropout_scale;  // 0 or 1/(1-p) per unit; empty when dropout is off
  std::vector<double> batch_mean;
  std::vector<double> batch_var;
  std::vector<double> inv_std;
};

struct ForwardCache {
  Mode mode = Mode::Infer;
  BlockCache block1;
  BlockCache block2;
  Matrix logits;
  Matrix probs;  // B x 3
};

/// Weights ~ Normal(0, init_std) drawn W1, W2, W3 in row-major order.
MlpModel init_model(std::uint64_t seed, double init_std = 0.05,
                    BlockOrder order = BlockOrder::ReluThenNorm);

/// Row-wise softmax with max subtraction.
void softmax_rows(Matrix& logits);

/// Pure forward pass. Train mode normalizes with batch statistics and applies
/// inverted dropout (draws from rng); infer mode uses running statistics and
/// never touches rng. The model is not modified; see update_running_stats.
ForwardCache forward(const MlpModel& model, const Matrix& batch, Mode mode,
                     const DropoutRates& rates, RngStream& rng);

/// running = momentum * running + (1 - momentum) * batch statistic.
void update_running_stats(MlpModel& model, const ForwardCache& cache, double momentum);

/// Train-mode forward followed by the running-statistics update.
ForwardCache forward_train(MlpModel& model, const Matrix& batch, const DropoutRates& rates,
                           double momentum, RngStream& rng);

/// Mean of -ln(max(p_true, 1e-12)).
double loss_ce(const Matrix& probs, std::span<const std::size_t> labels);

/// Analytic gradient of loss_ce with respect to every trainable tensor.
Gradients backward(const MlpModel& model, const ForwardCache& cache,
                   std::span<const std::size_t> labels);

struct AdamState {
  Gradients m;
  Gradients v;

  static AdamState for_model(const MlpModel& model);
};

/// Bias-corrected Adam update at step t (t >= 1).
void adam_step(MlpModel& model, const Gradients& grads, AdamState& state, std::uint64_t t,
               const TrainConfig& cfg);

struct Prediction {
  std::size_t label = 0;
  std::array<double, kNumClasses> probs{};
};

/// Normalizes raw features with the model's normalizer, runs an inference
/// forward pass, and takes the argmax (lowest index on ties).
Prediction predict(const MlpModel& model, const FeatureVector& raw_features);
std::vector<Prediction> predict_batch(const MlpModel& model,
                                      std::span<const FeatureVector> raw_features);

std::size_t argmax(std::span<const double> values) noexcept;

struct GradCheckOptions {
  double eps = 1e-5;
  /// Tensors larger than this are checked on a random subsample of this size.
  std::size_t samples_per_tensor = 500;
  std::uint64_t seed = 0;
  /// Applied to the analytic gradients before comparison (mutation testing).
  std::function<void(Gradients&)> tamper;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::array<double, kParamCount> per_tensor{};
  std::size_t checked = 0;
};

/// Central finite differences against backward(), dropout off, train-mode
/// batch norm on the fixed batch. The perturbed losses are evaluated in long
/// double. Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const MlpModel& model, const Matrix& batch,
                           std::span<const std::size_t> labels, const GradCheckOptions& opts = {});

/// Model file: one JSON document, format_version 1, every real written with
/// 17 significant digits so a load reproduces the model bit-for-bit.
inline constexpr int kModelFormatVersion = 1;

void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);
std::string serialize_model(const MlpModel& model);
MlpModel deserialize_model(std::string_view json_text);

}  // namespace strokewave
