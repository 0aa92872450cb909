#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "avsd/rng.hpp"
#include "avsd/tensor.hpp"
#include "json.hpp"

namespace avsd {

// Ordered, named set of trainable tensors. Iteration follows insertion order,
// which fixes the optimizer and serialization order.
template <typename T>
class ParamStore {
 public:
  using Entry = std::pair<std::string, nc::Tensor<T>>;

  const nc::Tensor<T>& add(std::string name, nc::Tensor<T> t);
  // Shares `t` instead of copying it; updates through either store are visible to both.
  const nc::Tensor<T>& alias(std::string name, const nc::Tensor<T>& t);
  const nc::Tensor<T>& add_normal(const std::string& name, nc::Shape shape, double stddev, Rng& rng);
  const nc::Tensor<T>& add_constant(const std::string& name, nc::Shape shape, T value);

  const nc::Tensor<T>& get(const std::string& name) const;
  nc::Tensor<T>& get(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void zero_grad();
  std::size_t value_count() const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

// Serialized parameter tensor (always 32-bit on disk).
struct NamedArray {
  std::string name;
  nc::Shape shape;
  std::vector<float> values;
};

// Checkpoint file: magic "AVSDCKPT", u32 version, canonical JSON config
// (u32 length + UTF-8), u32 tensor count, then per tensor: name (u32 length +
// UTF-8), u32 rank, u32 extents, float32 little-endian values.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  nlohmann::json config;
  std::vector<NamedArray> tensors;

  std::string serialize() const;
  static Checkpoint parse(std::string_view bytes, const std::string& source);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  const NamedArray& find(const std::string& name) const;
};

template <typename T>
std::vector<NamedArray> export_params(const ParamStore<T>& params);

// Loads tensors by name into a store with the expected names and shapes.
template <typename T>
void import_params(ParamStore<T>& params, const std::vector<NamedArray>& arrays);

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace avsd
