#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include "json.hpp"
#include "strokewave/dwt.hpp"
#include "strokewave/error.hpp"
#include "strokewave/features.hpp"
#include "strokewave/image.hpp"
#include "strokewave/metrics.hpp"
#include "strokewave/synth.hpp"

namespace strokewave::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kConfigSections[] = {"preprocess", "wavelet", "features",
                                           "mlp",        "train",   "io"};

class HelpRequested : public std::runtime_error {
 public:
  explicit HelpRequested(std::string text) : std::runtime_error(std::move(text)) {}
};

// Everything a command line can set; each subcommand binds the slice it uses.
struct Bindings {
  SynthCmd synth;
  PreprocessCmd preprocess;
  FeaturesCmd features;
  TrainCmd train;
  EvalCmd eval;
  PredictCmd predict;
  DwtRoundtripCmd roundtrip;
  InfoCmd info;
  std::uint64_t train_seed = 42;
  std::uint64_t features_seed = 42;
  std::string block_order = "relu-bn";
  std::string config_file;  // consumed before CLI11 sees the args
};

void add_config_flag(CLI::App* sub, Bindings& b) {
  sub->add_option("--config", b.config_file, "JSON config file (flags override it)");
}

void add_preprocess_flags(CLI::App* sub, PreprocessConfig& p) {
  sub->add_option("--mask-margin", p.mask.margin, "Annotation mask border band (px)")
      ->capture_default_str();
  sub->add_option("--mask-threshold", p.mask.threshold, "Annotation mask intensity threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_flag("--no-mask{false}", p.apply_mask, "Skip annotation masking");
  sub->add_option("--size", p.size, "Canonical image size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_wavelet_flags(CLI::App* sub, std::string& wavelet, std::size_t& levels) {
  sub->add_option("--wavelet", wavelet, "Wavelet family")
      ->check(CLI::IsMember({"haar", "db4"}))
      ->capture_default_str();
  sub->add_option("--levels", levels, "Decomposition levels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_split_flags(CLI::App* sub, SplitRatios& r) {
  sub->add_option("--train-ratio", r.train, "Training share")->capture_default_str();
  sub->add_option("--val-ratio", r.val, "Validation share")->capture_default_str();
  sub->add_option("--test-ratio", r.test, "Test share")->capture_default_str();
}

void add_pipeline_flags(CLI::App* sub, FeaturePipelineConfig& p, std::uint64_t& seed) {
  add_preprocess_flags(sub, p.preprocess);
  add_wavelet_flags(sub, p.wavelet, p.levels);
  add_split_flags(sub, p.ratios);
  sub->add_option("--max-rotation", p.augment.max_rotation_deg, "Max augmentation rotation (deg)")
      ->capture_default_str();
  sub->add_option("--hflip-prob", p.augment.hflip_prob, "Horizontal flip probability")
      ->capture_default_str();
  sub->add_option("--brightness-lo", p.augment.brightness_lo, "Brightness factor lower bound")
      ->capture_default_str();
  sub->add_option("--brightness-hi", p.augment.brightness_hi, "Brightness factor upper bound")
      ->capture_default_str();
  sub->add_option("--augment-copies", p.augment_copies, "Augmented copies per training image")
      ->capture_default_str();
  sub->add_option("--seed", seed, "Random seed")->capture_default_str();
  sub->add_option("--jobs", p.jobs, "Worker threads for per-image stages")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

std::unique_ptr<CLI::App> build_app(Bindings& b) {
  auto app = std::make_unique<CLI::App>(
      "Wavelet-feature MLP stroke classifier for grayscale DWI slices", "strokewave");
  app->require_subcommand(1);

  auto* synth = app->add_subcommand("synth", "Write a seeded three-class phantom dataset");
  add_config_flag(synth, b);
  synth->add_option("--n", b.synth.n, "Images per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--seed", b.synth.seed, "Random seed")->capture_default_str();
  synth->add_option("--out", b.synth.out, "Output dataset directory")->required();

  auto* pre = app->add_subcommand("preprocess", "Mask and resize an image or dataset tree to PGM");
  add_config_flag(pre, b);
  pre->add_option("--in", b.preprocess.in, "Input image or directory")->required();
  pre->add_option("--out", b.preprocess.out, "Output image or directory")->required();
  pre->add_option("--jobs", b.preprocess.jobs, "Worker threads")->check(CLI::PositiveNumber);
  add_preprocess_flags(pre, b.preprocess.preprocess);

  auto* feat = app->add_subcommand("features", "Extract the training feature cache CSV");
  add_config_flag(feat, b);
  feat->add_option("--data", b.features.data, "Dataset root")->required();
  feat->add_option("--out", b.features.out_csv, "Output CSV")->required();
  add_pipeline_flags(feat, b.features.pipeline, b.features_seed);

  auto* train = app->add_subcommand("train", "Train the classifier and report test metrics");
  add_config_flag(train, b);
  train->add_option("--data", b.train.data, "Dataset root");
  train->add_option("--cache", b.train.cache, "Feature cache CSV (reused when its hash matches)");
  train->add_option("--model-out", b.train.model_out, "Model JSON output")->capture_default_str();
  train->add_option("--history-out", b.train.history_out, "Per-epoch history CSV");
  train->add_option("--metrics-out", b.train.metrics_out, "Test-split metrics JSON");
  add_pipeline_flags(train, b.train.pipeline, b.train_seed);
  TrainConfig& t = b.train.train;
  train->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  train->add_option("--batch-size", t.batch_size, "Mini-batch size")->capture_default_str();
  train->add_option("--lr", t.learning_rate, "Adam learning rate")->capture_default_str();
  train->add_option("--beta1", t.beta1, "Adam beta1")->capture_default_str();
  train->add_option("--beta2", t.beta2, "Adam beta2")->capture_default_str();
  train->add_option("--adam-eps", t.adam_eps, "Adam epsilon")->capture_default_str();
  train->add_option("--dropout1", t.dropout.hidden1, "Dropout after hidden layer 1")
      ->capture_default_str();
  train->add_option("--dropout2", t.dropout.hidden2, "Dropout after hidden layer 2")
      ->capture_default_str();
  train->add_option("--bn-momentum", t.bn_momentum, "Batch-norm running-stat momentum")
      ->capture_default_str();
  train->add_option("--bn-eps", t.bn_eps, "Batch-norm epsilon")->capture_default_str();
  train->add_option("--init-std", t.init_std, "Normal initializer std")->capture_default_str();
  train->add_option("--block-order", b.block_order, "Hidden block order")
      ->check(CLI::IsMember({"relu-bn", "bn-relu"}))
      ->capture_default_str();
  train->add_flag("--quiet", b.train.quiet, "No per-epoch progress on stderr");

  auto* eval = app->add_subcommand("eval", "Evaluate a model on a dataset");
  add_config_flag(eval, b);
  eval->add_option("--model", b.eval.model, "Model JSON")->required();
  eval->add_option("--data", b.eval.data, "Dataset root")->required();
  eval->add_option("--metrics-out", b.eval.metrics_out, "Metrics JSON output");
  eval->add_option("--split", b.eval.split, "Which samples to score")
      ->check(CLI::IsMember({"all", "train", "val", "test"}))
      ->capture_default_str();
  eval->add_option("--seed", b.eval.seed, "Split seed")->capture_default_str();
  eval->add_option("--jobs", b.eval.jobs, "Worker threads")->check(CLI::PositiveNumber);
  add_split_flags(eval, b.eval.ratios);
  add_preprocess_flags(eval, b.eval.preprocess);

  auto* predict = app->add_subcommand("predict", "Classify one image");
  add_config_flag(predict, b);
  predict->add_option("--model", b.predict.model, "Model JSON")->required();
  predict->add_option("--image", b.predict.image, "Image file")->required();
  add_preprocess_flags(predict, b.predict.preprocess);

  auto* rt = app->add_subcommand("dwt-roundtrip", "Report wavelet reconstruction diagnostics");
  add_config_flag(rt, b);
  rt->add_option("--image", b.roundtrip.image, "Image file")->required();
  add_wavelet_flags(rt, b.roundtrip.wavelet, b.roundtrip.levels);
  add_preprocess_flags(rt, b.roundtrip.preprocess);

  auto* info = app->add_subcommand("info", "Describe a saved model");
  add_config_flag(info, b);
  info->add_option("--model", b.info.model, "Model JSON")->required();

  return app;
}

std::string scalar_to_arg(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return v.dump();
  if (v.is_number_float()) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
    return buf;
  }
  throw UsageError("config key '" + key + "' must be a string, number, boolean or array");
}

bool flag_present(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

std::string find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file argument");
      return args[i + 1];
    }
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

// Appends config-file values for every option the user did not pass explicitly.
std::vector<std::string> layer_config(const std::vector<std::string>& args, CLI::App& app) {
  const std::string path = find_config_path(args);
  if (path.empty() || args.empty()) return args;

  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw UsageError("config file must hold a JSON object");

  CLI::App* sub = nullptr;
  for (CLI::App* s : app.get_subcommands([](CLI::App*) { return true; })) {
    if (s->get_name() == args.front()) sub = s;
  }
  if (sub == nullptr) return args;  // CLI11 reports the bad subcommand

  auto known_anywhere = [&](const std::string& flag) {
    for (CLI::App* s : app.get_subcommands([](CLI::App*) { return true; })) {
      if (s->get_option_no_throw(flag) != nullptr) return true;
    }
    return false;
  };

  std::vector<std::string> out = args;
  for (const auto& [section, body] : doc.items()) {
    if (std::find(std::begin(kConfigSections), std::end(kConfigSections), section) ==
        std::end(kConfigSections)) {
      throw UsageError("unknown config section '" + section +
                       "' (expected preprocess, wavelet, features, mlp, train, io)");
    }
    if (!body.is_object()) throw UsageError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      const std::string flag = "--" + key;
      if (key == "config" || !known_anywhere(flag)) {
        throw UsageError("unknown config key '" + section + "." + key + "'");
      }
      if (sub->get_option_no_throw(flag) == nullptr || flag_present(args, flag)) continue;
      if (value.is_boolean()) {
        if (value.get<bool>()) out.push_back(flag);
      } else if (value.is_array()) {
        out.push_back(flag);
        for (const auto& v : value) out.push_back(scalar_to_arg(v, key));
      } else {
        out.push_back(flag);
        out.push_back(scalar_to_arg(value, key));
      }
    }
  }
  return out;
}

void check_pipeline(const FeaturePipelineConfig& p) {
  try {
    default_config(p.wavelet, p.levels);
    p.augment.validate();
    p.ratios.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

// --- execution --------------------------------------------------------------

void emit(std::ostream& out, const ordered_json& summary) { out << summary.dump() << '\n'; }

std::vector<Sample> select_split(const Dataset& d, const EvalCmd& cmd) {
  if (cmd.split == "all") return d.samples;
  const Split s = split_stratified(d, cmd.ratios, cmd.seed);
  if (cmd.split == "train") return s.train;
  if (cmd.split == "val") return s.val;
  return s.test;
}

void run_synth(const SynthCmd& c, std::ostream& out, std::ostream&) {
  const Dataset d = gen_dataset(c.n, c.seed, c.out);
  ordered_json j{{"command", "synth"}, {"out", c.out}, {"images", d.samples.size()},
                 {"per_class", d.class_counts()}, {"seed", c.seed}};
  emit(out, j);
}

void run_preprocess(const PreprocessCmd& c, std::ostream& out, std::ostream&) {
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(c.in)) {
    for (const auto& e : fs::recursive_directory_iterator(c.in)) {
      if (!e.is_regular_file() || !is_raster_file(e.path())) continue;
      fs::path target = fs::path(c.out) / fs::relative(e.path(), c.in);
      target.replace_extension(".pgm");
      jobs.emplace_back(e.path(), target);
    }
    std::sort(jobs.begin(), jobs.end());
  } else {
    jobs.emplace_back(c.in, c.out);
  }
  for (const auto& [src, dst] : jobs) {
    if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
    save_pgm(load_preprocessed(src, c.preprocess), dst);
  }
  emit(out, ordered_json{{"command", "preprocess"}, {"images", jobs.size()}, {"out", c.out}});
}

SplitFeatures features_for(const std::string& data, const FeaturePipelineConfig& p) {
  const Dataset d = scan_dataset(data);
  return build_split_features(split_stratified(d, p.ratios, p.seed), p);
}

void run_features(const FeaturesCmd& c, std::ostream& out, std::ostream&) {
  const SplitFeatures f = features_for(c.data, c.pipeline);
  write_feature_cache(f, c.pipeline, c.out_csv);
  emit(out, ordered_json{{"command", "features"},
                         {"out", c.out_csv},
                         {"config_hash", c.pipeline.hash()},
                         {"train_rows", f.train.size()},
                         {"val_rows", f.val.size()},
                         {"test_rows", f.test.size()}});
}

void run_train(const TrainCmd& c, std::ostream& out, std::ostream& err) {
  std::optional<SplitFeatures> features;
  bool cache_hit = false;
  if (!c.cache.empty()) {
    features = load_feature_cache(c.cache, c.pipeline);
    cache_hit = features.has_value();
  }
  if (!features) {
    if (c.data.empty()) {
      throw Error("feature cache '" + c.cache + "' is missing or was built with a different " +
                  "config, and no --data was given");
    }
    features = features_for(c.data, c.pipeline);
    if (!c.cache.empty()) write_feature_cache(*features, c.pipeline, c.cache);
  }

  const FeatureConfig fcfg = default_config(c.pipeline.wavelet, c.pipeline.levels);
  EpochCallback progress;
  if (!c.quiet) {
    progress = [&err, total = c.train.epochs](const EpochRecord& r) {
      char line[160];
      std::snprintf(line, sizeof(line),
                    "epoch %zu/%zu  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f\n", r.epoch,
                    total, r.train_loss, r.train_acc, r.val_loss, r.val_acc);
      err << line << std::flush;
    };
  }
  const TrainResult result = train_on_features(*features, fcfg, c.train, progress);

  save_model(result.model, c.model_out);
  if (!c.history_out.empty()) write_history(result.history, c.history_out);

  ordered_json j{{"command", "train"},
                 {"model", c.model_out},
                 {"wavelet", c.pipeline.wavelet},
                 {"levels", c.pipeline.levels},
                 {"epochs", result.history.size()},
                 {"best_epoch", result.best_epoch},
                 {"cache_hit", cache_hit},
                 {"train_rows", features->train.size()},
                 {"val_rows", features->val.size()},
                 {"test_rows", features->test.size()}};
  if (result.best_epoch > 0) {
    j["val_accuracy"] = result.history[result.best_epoch - 1].val_acc;
  }
  if (!features->test.empty()) {
    const Metrics m = evaluate_rows(result.model, features->test);
    if (!c.metrics_out.empty()) write_metrics(m, c.metrics_out);
    j["test_accuracy"] = m.accuracy;
    j["stroke_sensitivity"] = m.stroke_sensitivity;
  }
  emit(out, j);
}

void run_eval(const EvalCmd& c, std::ostream& out, std::ostream&) {
  const MlpModel model = load_model(c.model);
  const std::vector<Sample> samples = select_split(scan_dataset(c.data), c);
  const Metrics m = evaluate(model, samples, c.preprocess, c.jobs);
  if (!c.metrics_out.empty()) write_metrics(m, c.metrics_out);
  emit(out, ordered_json{{"command", "eval"},
                         {"split", c.split},
                         {"samples", samples.size()},
                         {"accuracy", m.accuracy},
                         {"stroke_sensitivity", m.stroke_sensitivity}});
}

void run_predict(const PredictCmd& c, std::ostream& out, std::ostream&) {
  const MlpModel model = load_model(c.model);
  const FeatureConfig fcfg = feature_config_for(model);
  const Image img = load_preprocessed(c.image, c.preprocess);
  const Prediction p = predict(model, extract_features(img, fcfg));
  emit(out, ordered_json{{"command", "predict"},
                         {"image", c.image},
                         {"class", kClassNames[p.label]},
                         {"index", p.label},
                         {"probs", p.probs}});
}

void run_roundtrip(const DwtRoundtripCmd& c, std::ostream& out, std::ostream&) {
  const Image img = load_preprocessed(c.image, c.preprocess);
  const Matrix m = to_matrix(img);
  const WaveletFilter f = build_filter(c.wavelet);
  const SubbandPyramid p = decompose2d(m, f, c.levels);
  const Matrix back = reconstruct2d(p, f);
  double max_err = 0.0;
  double energy = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    max_err = std::max(max_err, std::abs(back.values()[i] - m.values()[i]));
    energy += m.values()[i] * m.values()[i];
  }
  emit(out, ordered_json{{"command", "dwt-roundtrip"},
                         {"image", c.image},
                         {"wavelet", c.wavelet},
                         {"levels", c.levels},
                         {"max_abs_error", max_err},
                         {"energy_ratio", energy == 0.0 ? 1.0 : p.energy() / energy}});
}

void run_info(const InfoCmd& c, std::ostream& out, std::ostream&) {
  const MlpModel m = load_model(c.model);
  std::size_t params = 0;
  for (const auto& t : parameters(m)) params += t.size();
  emit(out, ordered_json{{"command", "info"},
                         {"model", c.model},
                         {"format_version", kModelFormatVersion},
                         {"wavelet", m.wavelet},
                         {"levels", m.levels},
                         {"feature_config_id", m.feature_config_id},
                         {"block_order", std::string(to_string(m.block_order))},
                         {"layers", {kFeatureDim, kHidden1, kHidden2, kNumClasses}},
                         {"trainable_parameters", params}});
}

}  // namespace

std::string usage() {
  Bindings b;
  return build_app(b)->help();
}

Command parse_args(const std::vector<std::string>& args) {
  Bindings b;
  auto app = build_app(b);
  std::vector<std::string> layered = layer_config(args, *app);
  // CLI11 consumes a reversed vector.
  std::vector<std::string> reversed(layered.rbegin(), layered.rend());
  try {
    app->parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app->help());
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested(app->help("", CLI::AppFormatMode::All));
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  const CLI::App* sub = app->get_subcommands().front();
  const std::string name = sub->get_name();
  if (name == "synth") return b.synth;
  if (name == "preprocess") return b.preprocess;
  if (name == "features") {
    b.features.pipeline.seed = b.features_seed;
    check_pipeline(b.features.pipeline);
    return b.features;
  }
  if (name == "train") {
    if (b.train.data.empty() && b.train.cache.empty()) {
      throw UsageError("train needs --data or --cache");
    }
    b.train.pipeline.seed = b.train_seed;
    b.train.train.seed = b.train_seed;
    b.train.train.block_order = block_order_from_string(b.block_order);
    check_pipeline(b.train.pipeline);
    try {
      b.train.train.validate();
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    return b.train;
  }
  if (name == "eval") return b.eval;
  if (name == "predict") return b.predict;
  if (name == "dwt-roundtrip") {
    try {
      default_config(b.roundtrip.wavelet, b.roundtrip.levels);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    return b.roundtrip;
  }
  return b.info;
}

void execute(const Command& cmd, std::ostream& out, std::ostream& err) {
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, SynthCmd>) run_synth(c, out, err);
        else if constexpr (std::is_same_v<T, PreprocessCmd>) run_preprocess(c, out, err);
        else if constexpr (std::is_same_v<T, FeaturesCmd>) run_features(c, out, err);
        else if constexpr (std::is_same_v<T, TrainCmd>) run_train(c, out, err);
        else if constexpr (std::is_same_v<T, EvalCmd>) run_eval(c, out, err);
        else if constexpr (std::is_same_v<T, PredictCmd>) run_predict(c, out, err);
        else if constexpr (std::is_same_v<T, DwtRoundtripCmd>) run_roundtrip(c, out, err);
        else run_info(c, out, err);
      },
      cmd);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Command cmd;
  try {
    cmd = parse_args(args);
  } catch (const HelpRequested& h) {
    out << h.what();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << usage();
    return kExitUsage;
  }
  try {
    execute(cmd, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace strokewave::cli
