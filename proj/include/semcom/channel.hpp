#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "semcom/rng.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

struct ChannelConfig {
  double snr_db = 15.0;
  bool noiseless = false;
  uint64_t seed = 0;

  static ChannelConfig awgn(double snr_db, uint64_t seed = 0) {
    return {snr_db, false, seed};
  }
  static ChannelConfig clean() { return {0.0, true, 0}; }

  // Total noise power per complex symbol for unit signal power.
  double noise_power() const {
    return noiseless ? 0.0 : std::pow(10.0, -snr_db / 10.0);
  }
  // Per real component.
  double noise_sigma_component() const { return std::sqrt(noise_power() / 2.0); }
};

// Batch of complex channel symbols stored as (re,im) pairs, shape [B,S,2].
// `valid` marks the symbols that carry payload (one flag per complex symbol);
// power accounting runs over valid symbols only.
struct ChannelFrame {
  Tensor symbols;
  std::vector<uint8_t> valid;

  ChannelFrame() = default;
  explicit ChannelFrame(Tensor syms) : symbols(std::move(syms)) {
    if (symbols.rank() < 1 || symbols.shape().back() != 2)
      throw std::invalid_argument("channel frame: last extent must be 2");
    valid.assign(static_cast<size_t>(symbols.numel() / 2), 1);
  }
  ChannelFrame(Tensor syms, std::vector<uint8_t> mask) : symbols(std::move(syms)), valid(std::move(mask)) {
    if (symbols.shape().back() != 2 ||
        static_cast<int64_t>(valid.size()) != symbols.numel() / 2)
      throw std::invalid_argument("channel frame: mask length mismatch");
  }

  int64_t symbol_count() const { return symbols.numel() / 2; }

  double average_power() const {
    const float* p = symbols.data();
    double total = 0.0;
    int64_t n = 0;
    for (int64_t s = 0; s < symbol_count(); ++s) {
      if (!valid[static_cast<size_t>(s)]) continue;
      total += static_cast<double>(p[2 * s]) * p[2 * s] +
               static_cast<double>(p[2 * s + 1]) * p[2 * s + 1];
      ++n;
    }
    return n ? total / static_cast<double>(n) : 0.0;
  }
};

// Gaussian noise tensor with the per-component sigma of `cfg`, shaped like a
// symbol tensor. Exposed separately so training can inject the same noise
// convention inside the autodiff graph.
inline Tensor sample_awgn_like(const std::vector<int64_t>& shape,
                               const ChannelConfig& cfg, Rng& rng) {
  Tensor noise(shape);
  if (cfg.noiseless) return noise;
  const float sigma = static_cast<float>(cfg.noise_sigma_component());
  for (int64_t i = 0; i < noise.numel(); ++i)
    noise.data()[i] = sigma * rng.gaussian_f();
  return noise;
}

inline ChannelFrame awgn_transmit(const ChannelFrame& z, const ChannelConfig& cfg,
                                  Rng& rng) {
  ChannelFrame out;
  out.valid = z.valid;
  if (cfg.noiseless) {
    out.symbols = z.symbols;  // shared storage; bitwise-identical payload
    return out;
  }
  out.symbols = z.symbols.clone();
  const float sigma = static_cast<float>(cfg.noise_sigma_component());
  float* p = out.symbols.data();
  for (int64_t i = 0; i < out.symbols.numel(); ++i)
    p[i] += sigma * rng.gaussian_f();
  return out;
}

// 10*log10(power(z) / power(z_hat - z)); +infinity when the frames agree.
inline double measure_empirical_snr(const ChannelFrame& z, const ChannelFrame& z_hat) {
  if (!z.symbols.same_shape(z_hat.symbols))
    throw std::invalid_argument("empirical snr: shape mismatch");
  const float* a = z.symbols.data();
  const float* b = z_hat.symbols.data();
  double signal = 0.0, noise = 0.0;
  for (int64_t i = 0; i < z.symbols.numel(); ++i) {
    signal += static_cast<double>(a[i]) * a[i];
    const double d = static_cast<double>(b[i]) - a[i];
    noise += d * d;
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

}  // namespace semcom
