#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "editlab/tensor.hpp"

namespace editlab {

class Tape;

/// Ordered name -> tensor map; insertion order defines file layout and
/// training update order.
class NamedTensors {
 public:
  void add(const std::string& name, Tensor t);
  void set(const std::string& name, Tensor t);  // name must exist
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
  size_t size() const { return items_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }

  /// Registers every tensor on the tape; returns the traced copies.
  NamedTensors watch_all(Tape& tape) const;

  bool all_finite() const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, size_t> index_;
};

/// One-file tensor store: a text header listing field names, shapes, the
/// dtype tag "f64" and byte offsets, followed by raw little-endian doubles.
/// Round-trips bit-exactly.
void save_tensors(const std::string& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::string& path);

/// FNV-1a hash of a file's bytes, as fixed-width hex.
std::string file_hash_hex(const std::string& path);

}  // namespace editlab
