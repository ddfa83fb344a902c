#include "strokewave/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "strokewave/error.hpp"

namespace strokewave {

namespace {

constexpr double kProbFloor = 1e-12;

constexpr std::array<std::string_view, kParamCount> kParamNames{
    "w1", "b1", "gamma1", "beta1", "w2", "b2", "gamma2", "beta2", "w3", "b3"};

DenseLayer make_dense(std::size_t fan_in, std::size_t fan_out, double init_std, RngStream& rng) {
  DenseLayer d{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
  for (double& w : d.weights.values()) w = rng.normal(0.0, init_std);
  return d;
}

BatchNormLayer make_bn(std::size_t width) {
  return {std::vector<double>(width, 1.0), std::vector<double>(width, 0.0),
          std::vector<double>(width, 0.0), std::vector<double>(width, 1.0)};
}

// out = x W + b
Matrix affine(const Matrix& x, const DenseLayer& d) {
  const std::size_t batch = x.rows();
  const std::size_t in = d.weights.rows();
  const std::size_t out_dim = d.weights.cols();
  Matrix out(batch, out_dim);
  for (std::size_t i = 0; i < batch; ++i) {
    auto o = out.row(i);
    std::copy(d.bias.begin(), d.bias.end(), o.begin());
    const auto xi = x.row(i);
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = xi[k];
      const auto wk = d.weights.row(k);
      for (std::size_t j = 0; j < out_dim; ++j) o[j] += xv * wk[j];
    }
  }
  return out;
}

Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.values()) v = std::max(v, 0.0);
  return out;
}

void batch_norm_forward(const Matrix& in, const BatchNormLayer& bn, Mode mode, double eps,
                        BlockCache& c) {
  const std::size_t batch = in.rows();
  const std::size_t width = in.cols();
  c.norm_input = in;
  c.batch_mean.assign(width, 0.0);
  c.batch_var.assign(width, 0.0);
  c.inv_std.assign(width, 0.0);

  if (mode == Mode::Train) {
    const auto n = static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < width; ++j) c.batch_mean[j] += in(i, j);
    }
    for (double& m : c.batch_mean) m /= n;
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        const double d = in(i, j) - c.batch_mean[j];
        c.batch_var[j] += d * d;
      }
    }
    for (double& v : c.batch_var) v /= n;
  }
  const std::vector<double>& mean = mode == Mode::Train ? c.batch_mean : bn.running_mean;
  const std::vector<double>& var = mode == Mode::Train ? c.batch_var : bn.running_var;
  for (std::size_t j = 0; j < width; ++j) c.inv_std[j] = 1.0 / std::sqrt(var[j] + eps);

  c.xhat = Matrix(batch, width);
  c.norm_output = Matrix(batch, width);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const double xh = (in(i, j) - mean[j]) * c.inv_std[j];
      c.xhat(i, j) = xh;
      c.norm_output(i, j) = bn.gamma[j] * xh + bn.beta[j];
    }
  }
}

BlockCache hidden_block(const Matrix& x, const DenseLayer& dense, const BatchNormLayer& bn,
                        const MlpModel& model, Mode mode, double drop_rate, RngStream& rng) {
  BlockCache c;
  c.input = x;
  c.linear = affine(x, dense);
  Matrix activated;
  if (model.block_order == BlockOrder::ReluThenNorm) {
    batch_norm_forward(relu(c.linear), bn, mode, model.bn_eps, c);
    activated = c.norm_output;
  } else {
    batch_norm_forward(c.linear, bn, mode, model.bn_eps, c);
    activated = relu(c.norm_output);
  }

  if (mode == Mode::Train && drop_rate > 0.0) {
    const double keep_scale = 1.0 / (1.0 - drop_rate);
    c.dropout_scale = Matrix(activated.rows(), activated.cols());
    auto& scale = c.dropout_scale.values();
    auto& vals = activated.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      scale[i] = rng.bernoulli(drop_rate) ? 0.0 : keep_scale;
      vals[i] *= scale[i];
    }
  }
  c.output = std::move(activated);
  return c;
}

// Returns d(block input) and writes the block's parameter gradients.
Matrix hidden_block_backward(const BlockCache& c, const DenseLayer& dense,
                             const BatchNormLayer& bn, BlockOrder order, Matrix grad_out,
                             std::vector<double>& dw, std::vector<double>& db,
                             std::vector<double>& dgamma, std::vector<double>& dbeta) {
  const std::size_t batch = grad_out.rows();
  const std::size_t width = grad_out.cols();
  const auto n = static_cast<double>(batch);

  if (!c.dropout_scale.empty()) {
    auto& g = grad_out.values();
    const auto& s = c.dropout_scale.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s[i];
  }
  if (order == BlockOrder::NormThenRelu) {
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        if (c.norm_output(i, j) <= 0.0) grad_out(i, j) = 0.0;
      }
    }
  }

  // Batch norm with batch statistics.
  dgamma.assign(width, 0.0);
  dbeta.assign(width, 0.0);
  std::vector<double> sum_dxhat(width, 0.0);
  std::vector<double> sum_dxhat_xhat(width, 0.0);
  Matrix dxhat(batch, width);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const double g = grad_out(i, j);
      dgamma[j] += g * c.xhat(i, j);
      dbeta[j] += g;
      const double dx = g * bn.gamma[j];
      dxhat(i, j) = dx;
      sum_dxhat[j] += dx;
      sum_dxhat_xhat[j] += dx * c.xhat(i, j);
    }
  }
  Matrix dlinear(batch, width);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      double d = c.inv_std[j] / n *
                 (n * dxhat(i, j) - sum_dxhat[j] - c.xhat(i, j) * sum_dxhat_xhat[j]);
      if (order == BlockOrder::ReluThenNorm && c.linear(i, j) <= 0.0) d = 0.0;
      dlinear(i, j) = d;
    }
  }

  const std::size_t in = dense.weights.rows();
  dw.assign(in * width, 0.0);
  db.assign(width, 0.0);
  Matrix dinput(batch, in);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto x = c.input.row(i);
    const auto d = dlinear.row(i);
    for (std::size_t j = 0; j < width; ++j) db[j] += d[j];
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = x[k];
      double* dwk = dw.data() + k * width;
      const auto wk = dense.weights.row(k);
      double acc = 0.0;
      for (std::size_t j = 0; j < width; ++j) {
        dwk[j] += xv * d[j];
        acc += d[j] * wk[j];
      }
      dinput(i, k) = acc;
    }
  }
  return dinput;
}

void check_finite(const Matrix& m, const char* what) {
  for (double v : m.values()) {
    if (!std::isfinite(v)) throw InvalidArgument(std::string("non-finite value in ") + what);
  }
}

}  // namespace

std::string_view to_string(BlockOrder order) noexcept {
  return order == BlockOrder::ReluThenNorm ? "relu-bn" : "bn-relu";
}

BlockOrder block_order_from_string(std::string_view s) {
  if (s == "relu-bn") return BlockOrder::ReluThenNorm;
  if (s == "bn-relu") return BlockOrder::NormThenRelu;
  throw InvalidArgument("unknown block order '" + std::string(s) +
                        "' (expected relu-bn or bn-relu)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InvalidArgument("adam_eps must be positive");
  if (batch_size < 2) throw InvalidArgument("batch size must be at least 2 for batch norm");
  if (epochs == 0) throw InvalidArgument("epochs must be at least 1");
  for (double p : {dropout.hidden1, dropout.hidden2}) {
    if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("dropout rates must lie in [0, 1)");
  }
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) {
    throw InvalidArgument("bn_momentum must lie in [0, 1]");
  }
  if (!(bn_eps > 0.0)) throw InvalidArgument("bn_eps must be positive");
  if (!(init_std > 0.0)) throw InvalidArgument("init_std must be positive");
}

std::string_view param_name(std::size_t index) noexcept {
  return index < kParamCount ? kParamNames[index] : "?";
}

std::array<std::span<double>, kParamCount> parameters(MlpModel& m) {
  return {m.dense1.weights.values(), m.dense1.bias, m.bn1.gamma, m.bn1.beta,
          m.dense2.weights.values(), m.dense2.bias, m.bn2.gamma, m.bn2.beta,
          m.dense3.weights.values(), m.dense3.bias};
}

std::array<std::span<const double>, kParamCount> parameters(const MlpModel& m) {
  return {m.dense1.weights.values(), m.dense1.bias, m.bn1.gamma, m.bn1.beta,
          m.dense2.weights.values(), m.dense2.bias, m.bn2.gamma, m.bn2.beta,
          m.dense3.weights.values(), m.dense3.bias};
}

Gradients Gradients::zeros_like(const MlpModel& m) {
  Gradients g;
  const auto params = parameters(m);
  for (std::size_t i = 0; i < kParamCount; ++i) g.tensors[i].assign(params[i].size(), 0.0);
  return g;
}

MlpModel init_model(std::uint64_t seed, double init_std, BlockOrder order) {
  RngStream rng(seed);
  MlpModel m;
  m.dense1 = make_dense(kFeatureDim, kHidden1, init_std, rng);
  m.bn1 = make_bn(kHidden1);
  m.dense2 = make_dense(kHidden1, kHidden2, init_std, rng);
  m.bn2 = make_bn(kHidden2);
  m.dense3 = make_dense(kHidden2, kNumClasses, init_std, rng);
  m.block_order = order;
  return m;
}

void softmax_rows(Matrix& logits) {
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

ForwardCache forward(const MlpModel& model, const Matrix& batch, Mode mode,
                     const DropoutRates& rates, RngStream& rng) {
  if (batch.cols() != kFeatureDim) {
    throw InvalidArgument("forward expects " + std::to_string(kFeatureDim) +
                          " features per row, got " + std::to_string(batch.cols()));
  }
  if (batch.rows() == 0) throw InvalidArgument("forward on an empty batch");
  if (mode == Mode::Train && batch.rows() < 2) {
    throw InvalidArgument("train-mode forward needs at least 2 rows for batch statistics");
  }
  check_finite(batch, "forward input");

  ForwardCache c;
  c.mode = mode;
  c.block1 = hidden_block(batch, model.dense1, model.bn1, model, mode, rates.hidden1, rng);
  c.block2 =
      hidden_block(c.block1.output, model.dense2, model.bn2, model, mode, rates.hidden2, rng);
  c.logits = affine(c.block2.output, model.dense3);
  c.probs = c.logits;
  softmax_rows(c.probs);
  return c;
}

void update_running_stats(MlpModel& model, const ForwardCache& cache, double momentum) {
  if (cache.mode != Mode::Train) return;
  auto blend = [momentum](std::vector<double>& running, const std::vector<double>& batch) {
    for (std::size_t j = 0; j < running.size(); ++j) {
      running[j] = momentum * running[j] + (1.0 - momentum) * batch[j];
    }
  };
  blend(model.bn1.running_mean, cache.block1.batch_mean);
  blend(model.bn1.running_var, cache.block1.batch_var);
  blend(model.bn2.running_mean, cache.block2.batch_mean);
  blend(model.bn2.running_var, cache.block2.batch_var);
}

ForwardCache forward_train(MlpModel& model, const Matrix& batch, const DropoutRates& rates,
                           double momentum, RngStream& rng) {
  ForwardCache c = forward(model, batch, Mode::Train, rates, rng);
  update_running_stats(model, c, momentum);
  return c;
}

double loss_ce(const Matrix& probs, std::span<const std::size_t> labels) {
  if (labels.size() != probs.rows()) throw InvalidArgument("label count != batch size");
  if (labels.empty()) throw InvalidArgument("loss on an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= probs.cols()) {
      throw InvalidArgument("label " + std::to_string(labels[i]) + " out of range");
    }
    total -= std::log(std::max(probs(i, labels[i]), kProbFloor));
  }
  return total / static_cast<double>(labels.size());
}

Gradients backward(const MlpModel& model, const ForwardCache& cache,
                   std::span<const std::size_t> labels) {
  if (cache.mode != Mode::Train) {
    throw InvalidArgument("backward needs a cache from a train-mode forward pass");
  }
  const std::size_t batch = cache.probs.rows();
  if (labels.size() != batch) throw InvalidArgument("label count does not match cached batch");

  Gradients g = Gradients::zeros_like(model);
  const auto n = static_cast<double>(batch);

  // Softmax + cross-entropy: dL/dlogits = (p - onehot) / B.
  Matrix dlogits = cache.probs;
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] >= kNumClasses) {
      throw InvalidArgument("label " + std::to_string(labels[i]) + " out of range");
    }
    dlogits(i, labels[i]) -= 1.0;
    for (double& v : dlogits.row(i)) v /= n;
  }

  const Matrix& h2 = cache.block2.output;
  auto& dw3 = g[Param::W3];
  auto& db3 = g[Param::B3];
  Matrix dh2(batch, kHidden2);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = 0; j < kNumClasses; ++j) db3[j] += dlogits(i, j);
    for (std::size_t k = 0; k < kHidden2; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < kNumClasses; ++j) {
        dw3[k * kNumClasses + j] += h2(i, k) * dlogits(i, j);
        acc += dlogits(i, j) * model.dense3.weights(k, j);
      }
      dh2(i, k) = acc;
    }
  }

  Matrix dh1 = hidden_block_backward(cache.block2, model.dense2, model.bn2, model.block_order,
                                     std::move(dh2), g[Param::W2], g[Param::B2],
                                     g[Param::Gamma2], g[Param::Beta2]);
  hidden_block_backward(cache.block1, model.dense1, model.bn1, model.block_order, std::move(dh1),
                        g[Param::W1], g[Param::B1], g[Param::Gamma1], g[Param::Beta1]);
  return g;
}

AdamState AdamState::for_model(const MlpModel& model) {
  return {Gradients::zeros_like(model), Gradients::zeros_like(model)};
}

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state, std::uint64_t t,
               const TrainConfig& cfg) {
  if (t == 0) throw InvalidArgument("adam_step counts steps from 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  auto params = parameters(model);
  for (std::size_t p = 0; p < kParamCount; ++p) {
    auto& m = state.m.tensors[p];
    auto& v = state.v.tensors[p];
    const auto& g = grads.tensors[p];
    if (g.size() != params[p].size() || m.size() != g.size() || v.size() != g.size()) {
      throw InvalidArgument("gradient/optimizer shape mismatch on " +
                            std::string(param_name(p)));
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      params[p][i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

std::size_t argmax(std::span<const double> values) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<Prediction> predict_batch(const MlpModel& model,
                                      std::span<const FeatureVector> raw_features) {
  std::vector<Prediction> out;
  if (raw_features.empty()) return out;
  Matrix batch(raw_features.size(), kFeatureDim);
  for (std::size_t i = 0; i < raw_features.size(); ++i) {
    for (double v : raw_features[i]) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite feature value");
    }
    const FeatureVector z = normalize(raw_features[i], model.normalizer);
    std::copy(z.begin(), z.end(), batch.row(i).begin());
  }
  RngStream unused(0);
  const ForwardCache c = forward(model, batch, Mode::Infer, {}, unused);
  out.resize(raw_features.size());
  for (std::size_t i = 0; i < raw_features.size(); ++i) {
    const auto row = c.probs.row(i);
    std::copy(row.begin(), row.end(), out[i].probs.begin());
    out[i].label = argmax(row);
  }
  return out;
}

Prediction predict(const MlpModel& model, const FeatureVector& raw_features) {
  return predict_batch(model, std::span<const FeatureVector>(&raw_features, 1)).front();
}

namespace {

using Wide = long double;
using WideRows = std::vector<std::vector<Wide>>;

WideRows wide_affine(const WideRows& x, const DenseLayer& d) {
  const std::size_t out = d.weights.cols();
  WideRows z(x.size(), std::vector<Wide>(out));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < out; ++j) {
      Wide acc = d.bias[j];
      for (std::size_t k = 0; k < x[i].size(); ++k) acc += x[i][k] * Wide{d.weights(k, j)};
      z[i][j] = acc;
    }
  }
  return z;
}

void wide_relu(WideRows& x) {
  for (auto& row : x)
    for (Wide& v : row) v = std::max(v, Wide{0});
}

void wide_batch_norm(WideRows& x, const BatchNormLayer& bn, double eps) {
  const auto n = static_cast<Wide>(x.size());
  for (std::size_t j = 0; j < x.front().size(); ++j) {
    Wide mean = 0;
    for (const auto& row : x) mean += row[j];
    mean /= n;
    Wide var = 0;
    for (const auto& row : x) var += (row[j] - mean) * (row[j] - mean);
    var /= n;
    const Wide inv = 1 / std::sqrt(var + eps);
    for (auto& row : x) row[j] = bn.gamma[j] * (row[j] - mean) * inv + bn.beta[j];
  }
}

// Training-mode loss without dropout, in extended precision.
Wide reference_loss(const MlpModel& m, const Matrix& batch,
                    std::span<const std::size_t> labels) {
  WideRows h(batch.rows(), std::vector<Wide>(batch.cols()));
  for (std::size_t i = 0; i < batch.rows(); ++i)
    for (std::size_t j = 0; j < batch.cols(); ++j) h[i][j] = batch(i, j);

  const std::pair<const DenseLayer*, const BatchNormLayer*> blocks[] = {{&m.dense1, &m.bn1},
                                                                        {&m.dense2, &m.bn2}};
  for (const auto& [dense, bn] : blocks) {
    h = wide_affine(h, *dense);
    if (m.block_order == BlockOrder::ReluThenNorm) {
      wide_relu(h);
      wide_batch_norm(h, *bn, m.bn_eps);
    } else {
      wide_batch_norm(h, *bn, m.bn_eps);
      wide_relu(h);
    }
  }
  const WideRows logits = wide_affine(h, m.dense3);
  Wide total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Wide top = *std::max_element(logits[i].begin(), logits[i].end());
    Wide denom = 0;
    for (Wide z : logits[i]) denom += std::exp(z - top);
    const Wide p = std::exp(logits[i][labels[i]] - top) / denom;
    total -= std::log(std::max(p, Wide{kProbFloor}));
  }
  return total / static_cast<Wide>(labels.size());
}

}  // namespace

GradCheckReport grad_check(const MlpModel& model, const Matrix& batch,
                           std::span<const std::size_t> labels, const GradCheckOptions& opts) {
  const DropoutRates no_dropout{0.0, 0.0};
  RngStream rng(opts.seed);

  RngStream unused(0);
  Gradients analytic =
      backward(model, forward(model, batch, Mode::Train, no_dropout, unused), labels);
  if (opts.tamper) opts.tamper(analytic);

  MlpModel probe = model;
  auto params = parameters(probe);
  auto loss_at = [&] { return reference_loss(probe, batch, labels); };

  GradCheckReport report;
  for (std::size_t p = 0; p < kParamCount; ++p) {
    const std::size_t size = params[p].size();
    std::vector<std::size_t> indices(size);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (size > opts.samples_per_tensor) {
      // Partial Fisher-Yates: the first samples_per_tensor slots are a uniform subset.
      for (std::size_t i = 0; i < opts.samples_per_tensor; ++i) {
        std::swap(indices[i], indices[i + rng.below(size - i)]);
      }
      indices.resize(opts.samples_per_tensor);
    }
    double worst = 0.0;
    for (std::size_t idx : indices) {
      double& theta = params[p][idx];
      const double saved = theta;
      theta = saved + opts.eps;
      const Wide up = loss_at();
      theta = saved - opts.eps;
      const Wide down = loss_at();
      theta = saved;
      const auto numeric = static_cast<double>((up - down) / (2 * Wide{opts.eps}));
      const double a = analytic.tensors[p][idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
      ++report.checked;
    }
    report.per_tensor[p] = worst;
    report.max_relative_error = std::max(report.max_relative_error, worst);
  }
  return report;
}

}  // namespace strokewave
