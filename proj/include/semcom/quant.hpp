#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "semcom/io.hpp"
#include "semcom/params.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

// Per-tensor asymmetric affine INT8 quantization: x ~ scale * (q - zero_point).
struct QuantTensor {
  std::vector<int64_t> shape;
  std::vector<int8_t> values;
  float scale = 1.0f;
  int16_t zero_point = 0;

  int64_t numel() const { return static_cast<int64_t>(values.size()); }
};

inline QuantTensor quantize(const Tensor& t) {
  const int64_t n = t.numel();
  float lo = 0.0f;
  float hi = 0.0f;
  const float* x = t.data();
  // Zero-inclusive range: with zero always representable the zero-point
  // formula below never clamps away from the data, so the s/2 reconstruction
  // bound holds for one-sided tensors too (and constants map exactly).
  for (int64_t i = 0; i < n; ++i) {
    lo = std::min(lo, x[i]);
    hi = std::max(hi, x[i]);
  }

  float scale = hi > lo ? (hi - lo) / 255.0f : 1e-8f;
  scale = std::max(scale, 1e-38f);

  const double zp_raw = std::round(-128.0 - static_cast<double>(lo) / scale);
  const auto zero_point =
      static_cast<int16_t>(std::clamp(zp_raw, -128.0, 127.0));

  QuantTensor q;
  q.shape = t.shape();
  q.scale = scale;
  q.zero_point = zero_point;
  q.values.resize(static_cast<size_t>(n));
  const double inv_scale = 1.0 / scale;
  for (int64_t i = 0; i < n; ++i) {
    const double level = std::round(x[i] * inv_scale) + zero_point;
    q.values[static_cast<size_t>(i)] =
        static_cast<int8_t>(std::clamp(level, -128.0, 127.0));
  }
  return q;
}

inline Tensor dequantize(const QuantTensor& q) {
  Tensor t(q.shape);
  float* out = t.data();
  for (int64_t i = 0; i < q.numel(); ++i)
    out[static_cast<size_t>(i)] =
        q.scale * static_cast<float>(q.values[static_cast<size_t>(i)] - q.zero_point);
  return t;
}

class QuantizedParamSet {
 public:
  struct Entry {
    std::string name;
    QuantTensor tensor;
  };

  static QuantizedParamSet from(const ParamSet& params) {
    QuantizedParamSet out;
    for (const auto& e : params)
      out.entries_.push_back({e.name, quantize(e.value)});
    return out;
  }

  ParamSet dequantized() const {
    ParamSet out;
    for (const auto& e : entries_) out.add(e.name, dequantize(e.tensor));
    return out;
  }

  size_t size() const { return entries_.size(); }
  const Entry& operator[](size_t i) const { return entries_[i]; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // INT8 payload plus the fixed per-tensor quantization fields (scale,
  // zero-point, rank byte, name-length prefix).
  size_t payload_bytes() const {
    size_t bytes = 0;
    for (const auto& e : entries_)
      bytes += static_cast<size_t>(e.tensor.numel()) + 9;
    return bytes;
  }

 private:
  friend struct ParamMessage;
  std::vector<Entry> entries_;
};

// One parameter-sharing message: a quantized set plus exchange metadata,
// framed for the wire.
struct ParamMessage {
  uint32_t round = 0;
  uint8_t party = 0;        // 0 = A, 1 = B
  uint64_t data_size = 0;   // sender's local training-set size in sentences
  QuantizedParamSet payload;

  static constexpr const char* kMagic = "TCLQ";
  static constexpr uint16_t kVersion = 1;

  std::vector<uint8_t> encode() const {
    ByteWriter w;
    w.str(kMagic);
    w.u16(kVersion);
    w.u32(round);
    w.u8(party);
    w.u64(data_size);
    w.u32(static_cast<uint32_t>(payload.size()));
    for (const auto& e : payload) {
      w.u16(static_cast<uint16_t>(e.name.size()));
      w.str(e.name);
      w.u8(static_cast<uint8_t>(e.tensor.shape.size()));
      for (int64_t d : e.tensor.shape) w.u32(static_cast<uint32_t>(d));
      w.f32(e.tensor.scale);
      w.i16(e.tensor.zero_point);
      w.bytes(e.tensor.values.data(), e.tensor.values.size());
    }
    return w.take();
  }

  static ParamMessage decode(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.str(4) != kMagic) throw DecodeError("param message: bad magic");
    if (r.u16() != kVersion) throw DecodeError("param message: unsupported version");
    ParamMessage msg;
    msg.round = r.u32();
    msg.party = r.u8();
    msg.data_size = r.u64();
    const uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
      QuantizedParamSet::Entry e;
      const uint16_t name_len = r.u16();
      e.name = r.str(name_len);
      const uint8_t rank = r.u8();
      int64_t numel = 1;
      e.tensor.shape.resize(rank);
      for (auto& d : e.tensor.shape) {
        d = r.u32();
        numel *= d;
      }
      if (rank == 0) numel = 0;
      e.tensor.scale = r.f32();
      e.tensor.zero_point = r.i16();
      if (e.tensor.scale <= 0.0f)
        throw DecodeError("param message: non-positive scale");
      e.tensor.values.resize(static_cast<size_t>(numel));
      r.bytes(e.tensor.values.data(), e.tensor.values.size());
      msg.payload.entries_.push_back(std::move(e));
    }
    if (!r.done()) throw DecodeError("param message: trailing bytes");
    return msg;
  }
};

}  // namespace semcom
