#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dialgraph/tensor.hpp"

namespace dialgraph {

enum class Init { XavierUniform, Zeros, Ones };

/// Named registry of trainable tensors. Iteration order is the sorted name
/// order everywhere (optimizer sweeps, checkpoints), which keeps runs
/// reproducible for a fixed configuration.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed);

  /// Registers a new parameter; throws ContractError on duplicate names.
  Tensor create(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init);

  bool contains(const std::string& name) const;
  Tensor get(const std::string& name) const;
  std::vector<std::string> names() const;
  std::size_t count() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::uint64_t seed() const { return seed_; }

  /// Allocates (if needed) and zeroes every gradient buffer.
  void zero_grads();
  void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;

  /// Checkpoint layout: one compact JSON manifest line (parameter names,
  /// shapes and byte offsets), then a contiguous little-endian f64 blob in
  /// manifest order. `extra` travels inside the manifest and comes back from
  /// load(); round trips are bit-exact.
  void save(const std::string& path, const std::string& extra_json = "{}") const;
  /// Loads values into already-registered parameters; every name must exist
  /// with a matching shape. Returns the manifest's extra JSON text.
  std::string load(const std::string& path);
  /// Reads only the extra JSON from a checkpoint.
  static std::string peek_extra(const std::string& path);

 private:
  double next_uniform();  // in [0, 1)

  std::map<std::string, Tensor> params_;
  std::uint64_t seed_;
  std::uint64_t rng_state_;
};

}  // namespace dialgraph
