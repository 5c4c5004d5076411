#ifndef MOLRL_CHECKPOINT_HPP
#define MOLRL_CHECKPOINT_HPP

#include <map>
#include <string>
#include <vector>

#include "molrl/tensor.hpp"

namespace molrl::nc {

// Self-describing checkpoint container: named parameter blocks with shapes,
// a dtype tag, a schema version and a free-form metadata section. Stored as
// JSON on disk.
struct Checkpoint {
  int schema_version = 1;
  std::string dtype = "float64";
  std::map<std::string, Tensor> params;
  std::map<std::string, std::string> meta;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace molrl::nc

#endif
