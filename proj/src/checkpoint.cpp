#include "molrl/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace molrl::nc {

using nlohmann::json;

void Checkpoint::save(const std::string& path) const {
  json j;
  j["format"] = "molrl-checkpoint";
  j["schema_version"] = schema_version;
  j["dtype"] = dtype;
  j["meta"] = meta;
  json blocks = json::object();
  for (const auto& [name, t] : params) {
    blocks[name] = {{"shape", t.shape()}, {"values", t.values()}};
  }
  j["params"] = blocks;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << j.dump();
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
  json j = json::parse(in);
  if (j.value("format", "") != "molrl-checkpoint")
    throw std::runtime_error("checkpoint: unrecognized container in " + path);
  Checkpoint ck;
  ck.schema_version = j.at("schema_version").get<int>();
  ck.dtype = j.at("dtype").get<std::string>();
  if (j.contains("meta")) ck.meta = j.at("meta").get<std::map<std::string, std::string>>();
  for (auto& [name, block] : j.at("params").items()) {
    auto shape = block.at("shape").get<std::vector<std::size_t>>();
    auto values = block.at("values").get<std::vector<double>>();
    ck.params.emplace(name, Tensor::from_values(shape, std::move(values), true));
  }
  return ck;
}

}  // namespace molrl::nc
