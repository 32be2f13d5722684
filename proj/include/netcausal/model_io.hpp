#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "netcausal/common.hpp"
#include "netcausal/layers.hpp"

namespace netcausal {

constexpr int kModelFormatVersion = 1;

inline nlohmann::json mat_to_json(const Mat& m) {
  std::vector<double> data;
  data.reserve(static_cast<size_t>(m.size()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Mat mat_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") ||
      !j.contains("data"))
    throw parse_error("matrix record needs rows/cols/data");
  const long r = j.at("rows").get<long>();
  const long c = j.at("cols").get<long>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (r < 0 || c < 0 ||
      static_cast<size_t>(r) * static_cast<size_t>(c) != data.size())
    throw parse_error("matrix record shape disagrees with data length");
  Mat m(r, c);
  size_t k = 0;
  for (long i = 0; i < r; ++i)
    for (long jj = 0; jj < c; ++jj) m(i, jj) = data[k++];
  return m;
}

inline nlohmann::json mlp_to_json(const Mlp& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers)
    layers.push_back(
        {{"w", mat_to_json(l.W->value)}, {"b", mat_to_json(l.b->value)}});
  return layers;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw parse_error("mlp record must be a nonempty array");
  Mlp m;
  for (const auto& l : j)
    m.layers.push_back({make_var(mat_from_json(l.at("w")), true),
                        make_var(mat_from_json(l.at("b")), true)});
  return m;
}

inline void write_model_file(const std::string& path, const std::string& kind,
                             nlohmann::json body) {
  nlohmann::json doc{{"format", "netcausal-model"},
                     {"version", kModelFormatVersion},
                     {"kind", kind},
                     {"body", std::move(body)}};
  std::ofstream out(path);
  if (!out) throw invalid_input("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
}

inline nlohmann::json read_model_file(const std::string& path,
                                      const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(path + ": " + e.what());
  }
  if (doc.value("format", "") != "netcausal-model")
    throw parse_error(path + ": not a model file");
  if (doc.value("version", -1) != kModelFormatVersion)
    throw parse_error(path + ": unsupported model format version");
  if (doc.value("kind", "") != kind)
    throw parse_error(path + ": expected a '" + kind + "' model, found '" +
                      doc.value("kind", "") + "'");
  return doc.at("body");
}

}  // namespace netcausal
