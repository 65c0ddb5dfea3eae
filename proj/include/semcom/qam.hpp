#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "semcom/huffman.hpp"

namespace semcom {

// Gray-labeled 16-QAM with unit average symbol energy. Two bits select the I
// level and two the Q level; per-axis Gray order 00,01,11,10 maps to
// -3,-1,+1,+3 (scaled by 1/sqrt(10)), so I/Q-adjacent labels differ in one bit.
struct Qam16 {
  static constexpr float kScale = 0.31622776601683794f;  // 1/sqrt(10)

  static float axis_level(uint8_t two_bits) {
    switch (two_bits) {
      case 0b00: return -3.0f * kScale;
      case 0b01: return -1.0f * kScale;
      case 0b11: return 1.0f * kScale;
      default: return 3.0f * kScale;  // 0b10
    }
  }

  static uint8_t axis_bits(float level) {
    // Hard decision on the three per-axis thresholds.
    if (level < -2.0f * kScale) return 0b00;
    if (level < 0.0f) return 0b01;
    if (level < 2.0f * kScale) return 0b11;
    return 0b10;
  }

  // All 16 constellation points indexed by the 4-bit label (I bits high).
  static std::array<std::complex<float>, 16> constellation() {
    std::array<std::complex<float>, 16> pts;
    for (uint8_t label = 0; label < 16; ++label)
      pts[label] = {axis_level(static_cast<uint8_t>(label >> 2)),
                    axis_level(static_cast<uint8_t>(label & 0x3))};
    return pts;
  }
};

// Bits (MSB-style order within each symbol: I-pair then Q-pair) to symbols.
// Bit count is zero-padded up to a multiple of 4.
inline std::vector<std::complex<float>> qam16_modulate(const BitString& bits) {
  BitString padded(bits);
  while (padded.size() % 4 != 0) padded.push_back(0);
  std::vector<std::complex<float>> symbols;
  symbols.reserve(padded.size() / 4);
  for (size_t i = 0; i < padded.size(); i += 4) {
    const uint8_t ibits = static_cast<uint8_t>((padded[i] << 1) | padded[i + 1]);
    const uint8_t qbits = static_cast<uint8_t>((padded[i + 2] << 1) | padded[i + 3]);
    symbols.emplace_back(Qam16::axis_level(ibits), Qam16::axis_level(qbits));
  }
  return symbols;
}

inline BitString qam16_demodulate(const std::vector<std::complex<float>>& symbols) {
  BitString bits;
  bits.reserve(symbols.size() * 4);
  for (const auto& s : symbols) {
    const uint8_t ibits = Qam16::axis_bits(s.real());
    const uint8_t qbits = Qam16::axis_bits(s.imag());
    bits.push_back((ibits >> 1) & 1);
    bits.push_back(ibits & 1);
    bits.push_back((qbits >> 1) & 1);
    bits.push_back(qbits & 1);
  }
  return bits;
}

// Bit/byte packing, MSB first.
inline std::vector<uint8_t> pack_bits(const BitString& bits) {
  std::vector<uint8_t> bytes((bits.size() + 7) / 8, 0);
  for (size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) bytes[i / 8] |= static_cast<uint8_t>(0x80u >> (i % 8));
  return bytes;
}

inline BitString unpack_bits(const std::vector<uint8_t>& bytes, size_t bit_count) {
  BitString bits(bit_count, 0);
  for (size_t i = 0; i < bit_count; ++i)
    bits[i] = (bytes[i / 8] >> (7 - i % 8)) & 1;
  return bits;
}

}  // namespace semcom
