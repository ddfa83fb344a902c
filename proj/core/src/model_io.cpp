#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "json.hpp"
#include "strokewave/error.hpp"
#include "strokewave/mlp.hpp"

namespace strokewave {

namespace {

using nlohmann::json;

// Scientific notation with 16 fractional digits: 17 significant digits,
// enough for an exact round trip of any double.
void write_real(std::string& out, double v) {
  if (!std::isfinite(v)) throw InvalidArgument("cannot serialize a non-finite model parameter");
  char buf[40];
  const int n = std::snprintf(buf, sizeof(buf), "%.16e", v);
  out.append(buf, static_cast<std::size_t>(n));
}

template <typename Range>
void write_array(std::string& out, const Range& values) {
  out += '[';
  bool first = true;
  for (double v : values) {
    if (!first) out += ',';
    first = false;
    write_real(out, v);
  }
  out += ']';
}

void write_matrix(std::string& out, const Matrix& m) {
  out += '[';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (r) out += ",\n      ";
    write_array(out, m.row(r));
  }
  out += ']';
}

void write_string(std::string& out, const std::string& s) { out += json(s).dump(); }

void write_bn(std::string& out, const BatchNormLayer& bn) {
  out += "{\"gamma\": ";
  write_array(out, bn.gamma);
  out += ",\n      \"beta\": ";
  write_array(out, bn.beta);
  out += ",\n      \"running_mean\": ";
  write_array(out, bn.running_mean);
  out += ",\n      \"running_var\": ";
  write_array(out, bn.running_var);
  out += '}';
}

const json& field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw FormatError(std::string("model file is missing field '") + key + "'");
  }
  return obj.at(key);
}

std::vector<double> read_vector(const json& j, std::size_t expected, const char* what) {
  if (!j.is_array() || j.size() != expected) {
    throw FormatError(std::string("model field '") + what + "' must be an array of " +
                      std::to_string(expected) + " numbers");
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : j) {
    if (!v.is_number()) throw FormatError(std::string("non-numeric entry in '") + what + "'");
    out.push_back(v.get<double>());
  }
  return out;
}

Matrix read_matrix(const json& j, std::size_t rows, std::size_t cols, const char* what) {
  if (!j.is_array() || j.size() != rows) {
    throw FormatError(std::string("model field '") + what + "' must have " +
                      std::to_string(rows) + " rows");
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& row : j) {
    const auto values = read_vector(row, cols, what);
    data.insert(data.end(), values.begin(), values.end());
  }
  return Matrix(rows, cols, std::move(data));
}

BatchNormLayer read_bn(const json& j, std::size_t width, const char* what) {
  BatchNormLayer bn{read_vector(field(j, "gamma"), width, what),
                    read_vector(field(j, "beta"), width, what),
                    read_vector(field(j, "running_mean"), width, what),
                    read_vector(field(j, "running_var"), width, what)};
  for (double v : bn.running_var) {
    if (v < 0.0) throw FormatError(std::string("negative running variance in '") + what + "'");
  }
  return bn;
}

FeatureVector to_feature_vector(const std::vector<double>& v) {
  FeatureVector out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

std::string serialize_model(const MlpModel& m) {
  std::string out;
  out.reserve(1 << 20);
  out += "{\n  \"format_version\": " + std::to_string(kModelFormatVersion) + ",\n";
  out += "  \"wavelet\": ";
  write_string(out, m.wavelet);
  out += ",\n  \"levels\": " + std::to_string(m.levels) + ",\n";
  out += "  \"feature_config_id\": ";
  write_string(out, m.feature_config_id);
  out += ",\n  \"block_order\": ";
  write_string(out, std::string(to_string(m.block_order)));
  out += ",\n  \"bn_eps\": ";
  write_real(out, m.bn_eps);
  out += ",\n  \"normalizer\": {\n    \"mean\": ";
  write_array(out, m.normalizer.mean);
  out += ",\n    \"std\": ";
  write_array(out, m.normalizer.std);
  out += "\n  },\n  \"layers\": {\n    \"w1\": ";
  write_matrix(out, m.dense1.weights);
  out += ",\n    \"b1\": ";
  write_array(out, m.dense1.bias);
  out += ",\n    \"bn1\": ";
  write_bn(out, m.bn1);
  out += ",\n    \"w2\": ";
  write_matrix(out, m.dense2.weights);
  out += ",\n    \"b2\": ";
  write_array(out, m.dense2.bias);
  out += ",\n    \"bn2\": ";
  write_bn(out, m.bn2);
  out += ",\n    \"w3\": ";
  write_matrix(out, m.dense3.weights);
  out += ",\n    \"b3\": ";
  write_array(out, m.dense3.bias);
  out += "\n  }\n}\n";
  return out;
}

MlpModel deserialize_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  const json& version = field(doc, "format_version");
  if (!version.is_number_integer() || version.get<long long>() != kModelFormatVersion) {
    throw FormatError("unsupported model format_version " + version.dump() + " (expected " +
                      std::to_string(kModelFormatVersion) + ")");
  }

  MlpModel m;
  try {
    m.wavelet = field(doc, "wavelet").get<std::string>();
    m.levels = field(doc, "levels").get<std::size_t>();
    m.feature_config_id = field(doc, "feature_config_id").get<std::string>();
    if (doc.contains("block_order")) {
      m.block_order = block_order_from_string(doc.at("block_order").get<std::string>());
    }
    if (doc.contains("bn_eps")) m.bn_eps = doc.at("bn_eps").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad model header field: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }

  const json& norm = field(doc, "normalizer");
  m.normalizer.mean = to_feature_vector(read_vector(field(norm, "mean"), kFeatureDim, "mean"));
  m.normalizer.std = to_feature_vector(read_vector(field(norm, "std"), kFeatureDim, "std"));

  const json& layers = field(doc, "layers");
  m.dense1 = {read_matrix(field(layers, "w1"), kFeatureDim, kHidden1, "w1"),
              read_vector(field(layers, "b1"), kHidden1, "b1")};
  m.bn1 = read_bn(field(layers, "bn1"), kHidden1, "bn1");
  m.dense2 = {read_matrix(field(layers, "w2"), kHidden1, kHidden2, "w2"),
              read_vector(field(layers, "b2"), kHidden2, "b2")};
  m.bn2 = read_bn(field(layers, "bn2"), kHidden2, "bn2");
  m.dense3 = {read_matrix(field(layers, "w3"), kHidden2, kNumClasses, "w3"),
              read_vector(field(layers, "b3"), kNumClasses, "b3")};
  return m;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  const std::string text = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for model '" + path.string() + "'");
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path.string() + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_model(text);
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace strokewave
