#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cmath>

#include "semcom/channel.hpp"
#include "semcom/qam.hpp"
#include "semcom/rng.hpp"

using namespace semcom;

namespace {

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// Gray 16-QAM bit error rate over AWGN at Es/N0 (per-axis 4-PAM analysis):
// BER = 3/4 Q(x) + 1/2 Q(3x) - 1/4 Q(5x), x = sqrt(Es/N0 / 5).
double gray_qam16_ber(double es_n0_db) {
  const double es_n0 = std::pow(10.0, es_n0_db / 10.0);
  const double x = std::sqrt(es_n0 / 5.0);
  return 0.75 * q_function(x) + 0.5 * q_function(3 * x) - 0.25 * q_function(5 * x);
}

}  // namespace

TEST_CASE("constellation has unit average energy", "[qam]") {
  double total = 0.0;
  for (const auto& p : Qam16::constellation())
    total += static_cast<double>(p.real()) * p.real() +
             static_cast<double>(p.imag()) * p.imag();
  REQUIRE(total / 16.0 == Catch::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("axis-adjacent labels differ in exactly one bit", "[qam]") {
  const auto pts = Qam16::constellation();
  const float step = 2.0f * Qam16::kScale;
  for (unsigned a = 0; a < 16; ++a)
    for (unsigned b = 0; b < 16; ++b) {
      if (a == b) continue;
      const auto d = pts[a] - pts[b];
      const bool adjacent_i =
          std::abs(std::abs(d.real()) - step) < 1e-6 && std::abs(d.imag()) < 1e-6;
      const bool adjacent_q =
          std::abs(std::abs(d.imag()) - step) < 1e-6 && std::abs(d.real()) < 1e-6;
      if (adjacent_i || adjacent_q) REQUIRE(std::popcount(a ^ b) == 1);
    }
}

TEST_CASE("noiseless modulate/demodulate round-trips any bitstring", "[qam]") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    BitString bits(5 + rng.uniform_below(200));
    for (auto& b : bits) b = static_cast<uint8_t>(rng.uniform_below(2));
    const auto symbols = qam16_modulate(bits);
    const BitString back = qam16_demodulate(symbols);
    REQUIRE(back.size() >= bits.size());
    for (size_t i = 0; i < bits.size(); ++i) REQUIRE(back[i] == bits[i]);
    for (size_t i = bits.size(); i < back.size(); ++i) REQUIRE(back[i] == 0);
  }
}

TEST_CASE("bit pack/unpack round-trip", "[qam]") {
  Rng rng(2);
  BitString bits(77);
  for (auto& b : bits) b = static_cast<uint8_t>(rng.uniform_below(2));
  REQUIRE(unpack_bits(pack_bits(bits), bits.size()) == bits);
}

TEST_CASE("monte-carlo ber at 10 dB matches the gray-coding analysis", "[qam]") {
  constexpr size_t kBits = 1'000'000;
  Rng rng(3);
  BitString bits(kBits);
  for (auto& b : bits) b = static_cast<uint8_t>(rng.uniform_below(2));
  auto symbols = qam16_modulate(bits);

  Tensor t({1, static_cast<int64_t>(symbols.size()), 2});
  for (size_t i = 0; i < symbols.size(); ++i) {
    t.data()[2 * i] = symbols[i].real();
    t.data()[2 * i + 1] = symbols[i].imag();
  }
  const ChannelFrame rx = awgn_transmit(ChannelFrame(std::move(t)),
                                        ChannelConfig::awgn(10.0), rng);
  std::vector<std::complex<float>> noisy(symbols.size());
  for (size_t i = 0; i < noisy.size(); ++i)
    noisy[i] = {rx.symbols.data()[2 * i], rx.symbols.data()[2 * i + 1]};
  const BitString received = qam16_demodulate(noisy);

  size_t errors = 0;
  for (size_t i = 0; i < kBits; ++i)
    if (received[i] != bits[i]) ++errors;
  const double measured = static_cast<double>(errors) / static_cast<double>(kBits);
  const double predicted = gray_qam16_ber(10.0);
  REQUIRE(measured == Catch::Approx(predicted).epsilon(0.20));
}
