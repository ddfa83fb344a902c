#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "strokewave/dataset.hpp"
#include "strokewave/mlp.hpp"
#include "strokewave/pipeline.hpp"

namespace strokewave::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Bad command line or config file. what() holds the diagnostic.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthCmd {
  std::size_t n = 200;
  std::uint64_t seed = 42;
  std::string out;
};

struct PreprocessCmd {
  std::string in;
  std::string out;
  PreprocessConfig preprocess;
  std::size_t jobs = 1;
};

struct FeaturesCmd {
  std::string data;
  std::string out_csv;
  FeaturePipelineConfig pipeline;
};

struct TrainCmd {
  std::string data;
  std::string cache;
  FeaturePipelineConfig pipeline;
  TrainConfig train;
  std::string model_out = "model.json";
  std::string history_out;
  std::string metrics_out;
  bool quiet = false;
};

struct EvalCmd {
  std::string model;
  std::string data;
  std::string metrics_out;
  std::string split = "all";  // all | train | val | test
  SplitRatios ratios;
  std::uint64_t seed = 42;
  PreprocessConfig preprocess;
  std::size_t jobs = 1;
};

struct PredictCmd {
  std::string model;
  std::string image;
  PreprocessConfig preprocess;
};

struct DwtRoundtripCmd {
  std::string image;
  std::string wavelet = "haar";
  std::size_t levels = 2;
  PreprocessConfig preprocess;
};

struct InfoCmd {
  std::string model;
};

using Command = std::variant<SynthCmd, PreprocessCmd, FeaturesCmd, TrainCmd, EvalCmd, PredictCmd,
                             DwtRoundtripCmd, InfoCmd>;

/// args excludes the program name. Precedence: defaults < --config file < flags.
/// Throws UsageError on anything malformed.
Command parse_args(const std::vector<std::string>& args);

std::string usage();

/// Parses and executes; returns the process exit code. The one-line JSON
/// summary goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Executes an already-parsed command. Throws on runtime failure.
void execute(const Command& cmd, std::ostream& out, std::ostream& err);

}  // namespace strokewave::cli
