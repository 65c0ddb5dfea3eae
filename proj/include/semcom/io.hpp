#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace semcom {

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Little-endian byte-stream writer backed by a growable buffer.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) { append(&v, 2); }
  void u32(uint32_t v) { append(&v, 4); }
  void u64(uint64_t v) { append(&v, 8); }
  void i8(int8_t v) { buf_.push_back(static_cast<uint8_t>(v)); }
  void i16(int16_t v) { append(&v, 2); }
  void f32(float v) { append(&v, 4); }

  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }

  void str(const std::string& s) { bytes(s.data(), s.size()); }

  const std::vector<uint8_t>& data() const { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }
  size_t size() const { return buf_.size(); }

 private:
  void append(const void* p, size_t n) {
    // Host is little-endian on every supported target; memcpy keeps the
    // representation exact for floats.
    const auto* b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }

  std::vector<uint8_t> buf_;
};

// Bounds-checked little-endian reader; throws DecodeError on truncation.
class ByteReader {
 public:
  ByteReader(const uint8_t* p, size_t n) : p_(p), n_(n) {}
  explicit ByteReader(const std::vector<uint8_t>& buf)
      : ByteReader(buf.data(), buf.size()) {}

  uint8_t u8() { return take<uint8_t>(); }
  uint16_t u16() { return take<uint16_t>(); }
  uint32_t u32() { return take<uint32_t>(); }
  uint64_t u64() { return take<uint64_t>(); }
  int8_t i8() { return static_cast<int8_t>(take<uint8_t>()); }
  int16_t i16() { return take<int16_t>(); }
  float f32() { return take<float>(); }

  std::string str(size_t n) {
    require(n);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
    pos_ += n;
    return s;
  }

  void bytes(void* out, size_t n) {
    require(n);
    std::memcpy(out, p_ + pos_, n);
    pos_ += n;
  }

  size_t remaining() const { return n_ - pos_; }
  bool done() const { return pos_ == n_; }

 private:
  template <typename T>
  T take() {
    require(sizeof(T));
    T v;
    std::memcpy(&v, p_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void require(size_t n) const {
    if (pos_ + n > n_) throw DecodeError("byte stream truncated");
  }

  const uint8_t* p_;
  size_t n_;
  size_t pos_ = 0;
};

// Writes via a temp file in the same directory, then renames into place.
inline void atomic_write_file(const std::filesystem::path& path,
                              const void* data, size_t size) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& text) {
  atomic_write_file(path, text.data(), text.size());
}

inline void atomic_write_file(const std::filesystem::path& path,
                              const std::vector<uint8_t>& bytes) {
  atomic_write_file(path, bytes.data(), bytes.size());
}

inline std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                              std::istreambuf_iterator<char>());
}

inline std::string read_file_text(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

// FNV-1a, used for config fingerprints in run manifests.
inline uint64_t fnv1a64(const void* data, size_t n) {
  const auto* p = static_cast<const uint8_t*>(data);
  uint64_t h = 1469598103934665603ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace semcom
