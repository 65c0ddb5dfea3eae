#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

namespace semcom::gf256 {

// GF(2^8) with the primitive polynomial x^8+x^4+x^3+x^2+1 (0x11D) and
// generator alpha = 2. exp table is doubled so mul can skip a modulo.
struct Tables {
  std::array<uint8_t, 512> exp{};
  std::array<int16_t, 256> log{};

  Tables() {
    uint16_t x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[static_cast<size_t>(i)] = static_cast<uint8_t>(x);
      log[x] = static_cast<int16_t>(i);
      x <<= 1;
      if (x & 0x100) x ^= 0x11D;
    }
    for (int i = 255; i < 512; ++i) exp[static_cast<size_t>(i)] = exp[static_cast<size_t>(i - 255)];
    log[0] = -1;
  }
};

inline const Tables& tables() {
  static const Tables t;
  return t;
}

inline uint8_t add(uint8_t a, uint8_t b) { return a ^ b; }

inline uint8_t mul(uint8_t a, uint8_t b) {
  if (a == 0 || b == 0) return 0;
  const auto& t = tables();
  return t.exp[static_cast<size_t>(t.log[a] + t.log[b])];
}

inline uint8_t inv(uint8_t a) {
  if (a == 0) throw std::domain_error("gf256: inverse of zero");
  const auto& t = tables();
  return t.exp[static_cast<size_t>(255 - t.log[a])];
}

inline uint8_t div(uint8_t a, uint8_t b) { return mul(a, inv(b)); }

// alpha^e for any integer exponent.
inline uint8_t alpha_pow(int e) {
  e %= 255;
  if (e < 0) e += 255;
  return tables().exp[static_cast<size_t>(e)];
}

inline uint8_t pow(uint8_t a, int e) {
  if (a == 0) return e == 0 ? 1 : 0;
  const auto& t = tables();
  long idx = static_cast<long>(t.log[a]) * e % 255;
  if (idx < 0) idx += 255;
  return t.exp[static_cast<size_t>(idx)];
}

}  // namespace semcom::gf256
