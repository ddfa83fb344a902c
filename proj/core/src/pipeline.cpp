#include "strokewave/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "parallel.hpp"
#include "strokewave/error.hpp"
#include "strokewave/rng.hpp"

namespace strokewave {

namespace {

constexpr std::uint64_t kAugmentStream = 0xA11;
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;
constexpr double kProbFloor = 1e-12;

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Splits one CSV record; only the quoting rules written by csv_quote are needed.
std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw FormatError("unterminated quote in CSV record");
  fields.push_back(std::move(cur));
  return fields;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool is_augmented(const std::string& path) { return path.find("#aug") != std::string::npos; }

std::string base_path(const std::string& path) {
  const auto pos = path.rfind("#aug");
  return pos == std::string::npos ? path : path.substr(0, pos);
}

Matrix stack_normalized(std::span<const FeatureRow> rows, const Normalizer& n) {
  Matrix x(rows.size(), kFeatureDim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const FeatureVector z = normalize(rows[i].values, n);
    std::copy(z.begin(), z.end(), x.row(i).begin());
  }
  return x;
}

struct SetScore {
  double loss = 0.0;
  double acc = 0.0;
};

SetScore score_set(const MlpModel& model, const Matrix& x, std::span<const std::size_t> labels) {
  if (labels.empty()) return {};
  RngStream unused(0);
  const ForwardCache c = forward(model, x, Mode::Infer, {}, unused);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    loss -= std::log(std::max(c.probs(i, labels[i]), kProbFloor));
    if (argmax(c.probs.row(i)) == labels[i]) ++correct;
  }
  const auto n = static_cast<double>(labels.size());
  return {loss / n, static_cast<double>(correct) / n};
}

}  // namespace

Image preprocess(const Image& raw, const PreprocessConfig& cfg) {
  Image img = (raw.width() == cfg.size && raw.height() == cfg.size)
                  ? raw
                  : resize_bilinear(raw, cfg.size, cfg.size);
  return cfg.apply_mask ? mask_annotations(img, cfg.mask) : img;
}

Image load_preprocessed(const std::filesystem::path& path, const PreprocessConfig& cfg) {
  try {
    return preprocess(load_image(path), cfg);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument("'" + path.string() + "': " + e.what());
  }
}

std::string FeaturePipelineConfig::fingerprint() const {
  std::ostringstream s;
  s << "wavelet=" << wavelet << ";levels=" << levels << ";mask=" << preprocess.apply_mask
    << ";margin=" << preprocess.mask.margin << ";threshold=" << fmt17(preprocess.mask.threshold)
    << ";size=" << preprocess.size << ";rot=" << fmt17(augment.max_rotation_deg)
    << ";hflip=" << fmt17(augment.hflip_prob) << ";bright=" << fmt17(augment.brightness_lo)
    << "," << fmt17(augment.brightness_hi) << ";copies=" << augment_copies
    << ";ratios=" << fmt17(ratios.train) << "," << fmt17(ratios.val) << ","
    << fmt17(ratios.test) << ";seed=" << seed << ";features=v1";
  return s.str();
}

std::string FeaturePipelineConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : fingerprint()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<FeatureRow> extract_rows(std::span<const Sample> samples, const FeatureConfig& fcfg,
                                     const PreprocessConfig& pre, std::size_t jobs) {
  std::vector<FeatureRow> rows(samples.size());
  detail::parallel_for(samples.size(), jobs, [&](std::size_t i) {
    const Image img = load_preprocessed(samples[i].path, pre);
    rows[i] = {samples[i].path, samples[i].label, extract_features(img, fcfg)};
  });
  return rows;
}

SplitFeatures build_split_features(const Split& split, const FeaturePipelineConfig& cfg) {
  cfg.augment.validate();
  const FeatureConfig fcfg = default_config(cfg.wavelet, cfg.levels);
  const std::size_t copies = cfg.augment_copies;

  std::vector<std::vector<FeatureRow>> per_sample(split.train.size());
  detail::parallel_for(split.train.size(), cfg.jobs, [&](std::size_t i) {
    const Sample& s = split.train[i];
    const Image img = load_preprocessed(s.path, cfg.preprocess);
    auto& out = per_sample[i];
    out.reserve(copies + 1);
    out.push_back({s.path, s.label, extract_features(img, fcfg)});
    RngStream rng(mix_seed(mix_seed(cfg.seed, kAugmentStream), i));
    for (std::size_t k = 1; k <= copies; ++k) {
      const Image aug = augment(img, cfg.augment, rng);
      out.push_back({s.path + "#aug" + std::to_string(k), s.label, extract_features(aug, fcfg)});
    }
  });

  SplitFeatures f;
  for (auto& rows : per_sample) {
    for (auto& r : rows) f.train.push_back(std::move(r));
  }
  f.val = extract_rows(split.val, fcfg, cfg.preprocess, cfg.jobs);
  f.test = extract_rows(split.test, fcfg, cfg.preprocess, cfg.jobs);
  return f;
}

void write_feature_csv(std::span<const FeatureRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "path,label";
  for (std::size_t i = 0; i < kFeatureDim; ++i) out << ",f" << i;
  out << '\n';
  for (const auto& r : rows) {
    out << csv_quote(r.path) << ',' << r.label;
    for (double v : r.values) out << ',' << fmt17(v);
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature cache '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty feature cache '" + path.string() + "'");
  const auto header = csv_fields(line);
  if (header.size() != kFeatureDim + 2 || header[0] != "path" || header[1] != "label") {
    throw FormatError("feature cache '" + path.string() + "' has an unexpected header");
  }

  std::vector<FeatureRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = csv_fields(line);
    if (fields.size() != kFeatureDim + 2) {
      throw FormatError("feature cache '" + path.string() + "' line " +
                        std::to_string(line_no) + ": expected " +
                        std::to_string(kFeatureDim + 2) + " fields");
    }
    FeatureRow r;
    r.path = fields[0];
    try {
      std::size_t used = 0;
      const unsigned long label = std::stoul(fields[1], &used);
      if (used != fields[1].size() || label >= kClassCount) throw FormatError("bad label");
      r.label = label;
      for (std::size_t i = 0; i < kFeatureDim; ++i) {
        r.values[i] = std::stod(fields[i + 2], &used);
        if (used != fields[i + 2].size()) throw FormatError("bad number");
      }
    } catch (const std::exception&) {
      throw FormatError("feature cache '" + path.string() + "' line " +
                        std::to_string(line_no) + ": malformed value");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_feature_cache(const SplitFeatures& f, const FeaturePipelineConfig& cfg,
                         const std::filesystem::path& path) {
  std::vector<FeatureRow> all;
  all.reserve(f.train.size() + f.val.size() + f.test.size());
  all.insert(all.end(), f.train.begin(), f.train.end());
  all.insert(all.end(), f.val.begin(), f.val.end());
  all.insert(all.end(), f.test.begin(), f.test.end());
  write_feature_csv(all, path);

  nlohmann::ordered_json meta;
  meta["config_hash"] = cfg.hash();
  meta["fingerprint"] = cfg.fingerprint();
  meta["rows"] = all.size();
  std::ofstream out(path.string() + ".meta.json", std::ios::binary);
  if (!out) throw IoError("cannot write cache metadata next to '" + path.string() + "'");
  out << meta.dump(2) << '\n';
}

std::optional<SplitFeatures> load_feature_cache(const std::filesystem::path& path,
                                                const FeaturePipelineConfig& cfg) {
  std::ifstream meta_in(path.string() + ".meta.json", std::ios::binary);
  if (!meta_in || !std::filesystem::exists(path)) return std::nullopt;
  try {
    const auto meta = nlohmann::json::parse(meta_in);
    if (meta.at("config_hash").get<std::string>() != cfg.hash()) return std::nullopt;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }

  const std::vector<FeatureRow> rows = read_feature_csv(path);
  Dataset d;
  std::map<std::string, const FeatureRow*> originals;
  std::map<std::string, std::vector<const FeatureRow*>> copies;
  for (const auto& r : rows) {
    if (is_augmented(r.path)) {
      copies[base_path(r.path)].push_back(&r);
    } else {
      d.samples.push_back({r.path, r.label});
      originals[r.path] = &r;
    }
  }
  std::sort(d.samples.begin(), d.samples.end(),
            [](const Sample& a, const Sample& b) { return a.path < b.path; });
  const Split split = split_stratified(d, cfg.ratios, cfg.seed);

  SplitFeatures f;
  for (const auto& s : split.train) {
    f.train.push_back(*originals.at(s.path));
    const auto it = copies.find(s.path);
    const std::size_t have = it == copies.end() ? 0 : it->second.size();
    if (have != cfg.augment_copies) {
      throw FormatError("feature cache '" + path.string() + "' has " + std::to_string(have) +
                        " augmented copies of '" + s.path + "'");
    }
    if (have > 0) {
      for (const FeatureRow* r : it->second) f.train.push_back(*r);
    }
  }
  for (const auto& s : split.val) f.val.push_back(*originals.at(s.path));
  for (const auto& s : split.test) f.test.push_back(*originals.at(s.path));
  return f;
}

FeatureConfig feature_config_for(const MlpModel& model) {
  FeatureConfig cfg = default_config(model.wavelet, model.levels);
  if (!model.feature_config_id.empty() && cfg.id != model.feature_config_id) {
    throw FormatError("model was trained with feature config '" + model.feature_config_id +
                      "', this build provides '" + cfg.id + "'");
  }
  return cfg;
}

TrainResult train_on_features(const SplitFeatures& features, const FeatureConfig& fcfg,
                              const TrainConfig& tcfg, const EpochCallback& on_epoch) {
  tcfg.validate();
  if (features.train.size() < 2) throw InvalidArgument("need at least 2 training rows");

  std::vector<FeatureVector> raw;
  raw.reserve(features.train.size());
  for (const auto& r : features.train) raw.push_back(r.values);

  MlpModel model =
      init_model(mix_seed(tcfg.seed, kInitStream), tcfg.init_std, tcfg.block_order);
  model.normalizer = fit_normalizer(raw);
  model.wavelet = fcfg.wavelet;
  model.levels = fcfg.levels;
  model.feature_config_id = fcfg.id;
  model.bn_eps = tcfg.bn_eps;

  const Matrix x_train = stack_normalized(features.train, model.normalizer);
  const Matrix x_val = stack_normalized(features.val, model.normalizer);
  std::vector<std::size_t> y_train;
  std::vector<std::size_t> y_val;
  for (const auto& r : features.train) y_train.push_back(r.label);
  for (const auto& r : features.val) y_val.push_back(r.label);

  const std::size_t n = x_train.rows();
  std::vector<std::size_t> order(n);
  AdamState adam = AdamState::for_model(model);
  RngStream dropout_rng(mix_seed(tcfg.seed, kDropoutStream));
  std::uint64_t step = 0;

  TrainResult result;
  result.model = model;
  double best_val = -1.0;

  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    RngStream shuffle(mix_seed(mix_seed(tcfg.seed, kShuffleStream), epoch));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle.below(i + 1)]);

    for (std::size_t start = 0; start < n;) {
      std::size_t end = std::min(start + tcfg.batch_size, n);
      // A lone trailing sample joins the previous batch; batch norm needs two.
      if (n - end == 1) end = n;
      Matrix xb(end - start, kFeatureDim);
      std::vector<std::size_t> yb(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const auto src = x_train.row(order[i]);
        std::copy(src.begin(), src.end(), xb.row(i - start).begin());
        yb[i - start] = y_train[order[i]];
      }
      const ForwardCache cache =
          forward_train(model, xb, tcfg.dropout, tcfg.bn_momentum, dropout_rng);
      const Gradients grads = backward(model, cache, yb);
      adam_step(model, grads, adam, ++step, tcfg);
      start = end;
    }

    const SetScore tr = score_set(model, x_train, y_train);
    const SetScore va = score_set(model, x_val, y_val);
    EpochRecord rec{epoch, tr.loss, tr.acc, va.loss, va.acc};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    // Without validation rows the last epoch wins.
    const bool better = y_val.empty() ? true : va.acc > best_val;
    if (better) {
      best_val = va.acc;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

TrainResult train(const Split& split, const FeaturePipelineConfig& cfg, const TrainConfig& tcfg,
                  const EpochCallback& on_epoch) {
  if (split.train.empty()) throw InvalidArgument("training split is empty");
  const FeatureConfig fcfg = default_config(cfg.wavelet, cfg.levels);
  return train_on_features(build_split_features(split, cfg), fcfg, tcfg, on_epoch);
}

Metrics evaluate_rows(const MlpModel& model, std::span<const FeatureRow> rows) {
  if (rows.empty()) throw InvalidArgument("evaluate needs at least one sample");
  std::vector<FeatureVector> raw;
  raw.reserve(rows.size());
  for (const auto& r : rows) raw.push_back(r.values);
  const auto preds = predict_batch(model, raw);
  ConfusionMatrix c;
  for (std::size_t i = 0; i < rows.size(); ++i) c.add(rows[i].label, preds[i].label);
  return compute_metrics(c);
}

Metrics evaluate(const MlpModel& model, std::span<const Sample> samples,
                 const PreprocessConfig& pre, std::size_t jobs) {
  if (samples.empty()) throw InvalidArgument("evaluate needs at least one sample");
  const FeatureConfig fcfg = feature_config_for(model);
  return evaluate_rows(model, extract_rows(samples, fcfg, pre, jobs));
}

}  // namespace strokewave
