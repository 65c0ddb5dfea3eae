#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "semcom/io.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

// Ordered, named collection of FP32 tensors. Order is the model-definition
// order and must be identical on both parties so sets can be aggregated
// index-by-index.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  void add(std::string name, Tensor value) {
    for (const auto& e : entries_)
      if (e.name == name)
        throw std::invalid_argument("param set: duplicate name " + name);
    entries_.push_back({std::move(name), std::move(value)});
  }

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Entry& operator[](size_t i) const { return entries_[i]; }
  Entry& operator[](size_t i) { return entries_[i]; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  int64_t total_elements() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  ParamSet deep_copy() const {
    ParamSet out;
    for (const auto& e : entries_) out.entries_.push_back({e.name, e.value.clone()});
    return out;
  }

  // Same names, same order, same shapes. On mismatch returns the first
  // offending tensor name through `why`.
  bool structurally_equal(const ParamSet& other, std::string* why = nullptr) const {
    if (entries_.size() != other.entries_.size()) {
      if (why) *why = "tensor count differs";
      return false;
    }
    for (size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name != other.entries_[i].name) {
        if (why) *why = entries_[i].name + " vs " + other.entries_[i].name;
        return false;
      }
      if (!entries_[i].value.same_shape(other.entries_[i].value)) {
        if (why) *why = entries_[i].name;
        return false;
      }
    }
    return true;
  }

  bool bitwise_equal(const ParamSet& other) const {
    if (!structurally_equal(other)) return false;
    for (size_t i = 0; i < entries_.size(); ++i)
      if (!entries_[i].value.bitwise_equal(other.entries_[i].value)) return false;
    return true;
  }

  // Copies values element-wise into this set (shapes must match).
  void assign_from(const ParamSet& src) {
    std::string why;
    if (!structurally_equal(src, &why))
      throw std::invalid_argument("param set assign: structure mismatch at " + why);
    for (size_t i = 0; i < entries_.size(); ++i) {
      const Tensor& s = src.entries_[i].value;
      Tensor& d = entries_[i].value;
      std::copy(s.data(), s.data() + s.numel(), d.data());
    }
  }

  std::vector<uint8_t> serialize() const {
    ByteWriter w;
    w.str(kMagic);
    w.u16(kVersion);
    w.u32(static_cast<uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
      w.u16(static_cast<uint16_t>(e.name.size()));
      w.str(e.name);
      w.u8(static_cast<uint8_t>(e.value.rank()));
      for (int64_t d : e.value.shape()) w.u32(static_cast<uint32_t>(d));
      w.bytes(e.value.data(), sizeof(float) * static_cast<size_t>(e.value.numel()));
    }
    return w.take();
  }

  static ParamSet deserialize(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.str(4) != kMagic) throw DecodeError("param set: bad magic");
    const uint16_t version = r.u16();
    if (version != kVersion) throw DecodeError("param set: unsupported version");
    const uint32_t count = r.u32();
    ParamSet ps;
    for (uint32_t i = 0; i < count; ++i) {
      const uint16_t name_len = r.u16();
      std::string name = r.str(name_len);
      const uint8_t rank = r.u8();
      std::vector<int64_t> shape(rank);
      for (auto& d : shape) d = r.u32();
      Tensor t(shape);
      r.bytes(t.data(), sizeof(float) * static_cast<size_t>(t.numel()));
      ps.add(std::move(name), std::move(t));
    }
    if (!r.done()) throw DecodeError("param set: trailing bytes");
    return ps;
  }

  void save(const std::filesystem::path& path) const {
    atomic_write_file(path, serialize());
  }

  static ParamSet load(const std::filesystem::path& path) {
    return deserialize(read_file_bytes(path));
  }

  static constexpr const char* kMagic = "TCLP";
  static constexpr uint16_t kVersion = 1;

 private:
  std::vector<Entry> entries_;
};

}  // namespace semcom
