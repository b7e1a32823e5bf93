#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hoist/graph.hpp"
#include "hoist/tensor.hpp"

namespace hoist {

// Named learnable tensors plus AdamW state, shared by the feature net and the
// decoder. Checkpoints serialize every named tensor with a config echo.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return values_.count(name) != 0; }

  const std::vector<std::string>& names() const { return names_; }
  size_t count() const { return names_.size(); }
  int64_t total_elements() const;
  bool all_finite() const;

  // Moment buffers for the optimizer, allocated on demand.
  Tensor& moment1(const std::string& name);
  Tensor& moment2(const std::string& name);

 private:
  std::vector<std::string> names_;
  std::map<std::string, Tensor> values_;
  std::map<std::string, Tensor> m1_, m2_;
};

// Binds every parameter into a graph as a grad-requiring leaf and remembers
// the node ids so gradients can be read back after backward().
class ParamBinding {
 public:
  ParamBinding(Graph& g, const ParamStore& store);
  Graph::Val operator[](const std::string& name) const;
  const std::vector<std::pair<std::string, Graph::Val>>& entries() const { return entries_; }

 private:
  std::map<std::string, Graph::Val> vals_;
  std::vector<std::pair<std::string, Graph::Val>> entries_;
};

inline constexpr char kCheckpointMagic[] = "HOISTLAB1";

// Binary archive: magic, version, config echo text, then each tensor as
// (name, rank, dims, little-endian doubles).
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const std::string& config_echo);
std::string load_checkpoint(const std::filesystem::path& path, ParamStore& store);

}  // namespace hoist
