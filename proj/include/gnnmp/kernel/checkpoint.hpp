#pragma once

#include <string>

#include <json.hpp>

#include "gnnmp/kernel/tensor.hpp"

namespace gnnmp::kernel {

inline constexpr int kParameterFormatVersion = 1;

/// {"format_version": 1, "parameters": {name: {"shape": [r, c], "data": [...]}}}
/// with data in row-major order.
template <class Scalar>
nlohmann::json parameters_to_json(const ParameterList<Scalar>& params) {
  nlohmann::json doc;
  doc["format_version"] = kParameterFormatVersion;
  doc["parameters"] = nlohmann::json::object();
  for (const auto* p : params) {
    nlohmann::json data = nlohmann::json::array();
    for (Index r = 0; r < p->value.rows(); ++r)
      for (Index c = 0; c < p->value.cols(); ++c) data.push_back(static_cast<double>(p->value(r, c)));
    doc["parameters"][p->name] = {{"shape", {p->value.rows(), p->value.cols()}}, {"data", data}};
  }
  return doc;
}

template <class Scalar>
void parameters_from_json(const nlohmann::json& doc, const ParameterList<Scalar>& params) {
  if (doc.at("format_version").get<int>() != kParameterFormatVersion)
    throw std::invalid_argument("unsupported parameter format version");
  const nlohmann::json& table = doc.at("parameters");
  if (table.size() != params.size()) throw std::invalid_argument("parameter count mismatch");
  for (auto* p : params) {
    if (!table.contains(p->name)) throw std::invalid_argument("missing parameter " + p->name);
    const nlohmann::json& entry = table.at(p->name);
    const Index rows = entry.at("shape")[0].get<Index>();
    const Index cols = entry.at("shape")[1].get<Index>();
    if (rows != p->value.rows() || cols != p->value.cols())
      throw std::invalid_argument("shape mismatch for " + p->name);
    const nlohmann::json& data = entry.at("data");
    if (data.size() != static_cast<std::size_t>(rows * cols))
      throw std::invalid_argument("data length mismatch for " + p->name);
    std::size_t k = 0;
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) p->value(r, c) = static_cast<Scalar>(data[k++].get<double>());
    p->zero_grad();
  }
}

}  // namespace gnnmp::kernel
