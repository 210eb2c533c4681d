#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "dopnet/tensor.hpp"

namespace dopnet {

/// Named weights with same-shaped gradient accumulators, kept in insertion
/// order. Gradient accumulation is single-writer.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
  };

  /// Adds a new parameter; throws if the name already exists.
  Tensor& add(const std::string& name, Tensor value);

  bool contains(const std::string& name) const;
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  const Tensor& grad(const std::string& name) const;

  /// grad(name) += g
  void accumulate(const std::string& name, const Tensor& g);
  void zero_grad();

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const;

 private:
  Entry& find(const std::string& name);
  const Entry& find(const std::string& name) const;

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// DOPW weight file: "DOPW", u32 version (=1), u32 count, then per tensor
// u32 name length, UTF-8 name, u32 ndim, u32 dims..., f32 LE payload.
inline constexpr std::uint32_t kDopwVersion = 1;

std::vector<unsigned char> encode_dopw(const ParamStore& store);
ParamStore decode_dopw(const std::vector<unsigned char>& bytes);

void save_dopw(const ParamStore& store, const std::filesystem::path& path);
ParamStore load_dopw(const std::filesystem::path& path);

/// Copy values from `src` into `dst` by name. Every entry of dst must be
/// present in src with the same shape.
void assign_values(ParamStore& dst, const ParamStore& src);

}  // namespace dopnet
