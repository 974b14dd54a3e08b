#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "common/tensor.hpp"

namespace ctig {

using json = nlohmann::ordered_json;

// Self-describing weight container: magic, JSON header (tensor table +
// arbitrary metadata), then raw float32 blobs in table order.
struct Checkpoint {
  json meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  void put(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }
  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
  const Tensor& get(const std::string& name) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const json& j);

}  // namespace ctig
