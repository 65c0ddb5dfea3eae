#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "semcom/channel.hpp"

using namespace semcom;

namespace {

ChannelFrame unit_power_frame(int64_t symbols, uint64_t seed) {
  Rng rng(seed);
  Tensor t({1, symbols, 2});
  for (int64_t i = 0; i < t.numel(); ++i)
    t.data()[i] = rng.gaussian_f() / std::sqrt(2.0f);
  return ChannelFrame(std::move(t));
}

}  // namespace

TEST_CASE("noiseless channel returns the frame bitwise", "[channel]") {
  auto z = unit_power_frame(64, 1);
  Rng rng(2);
  const ChannelFrame out = awgn_transmit(z, ChannelConfig::clean(), rng);
  REQUIRE(out.symbols.bitwise_equal(z.symbols));
  REQUIRE(measure_empirical_snr(z, out) == std::numeric_limits<double>::infinity());
}

TEST_CASE("configured noise power follows 10^(-snr/10)", "[channel]") {
  REQUIRE(ChannelConfig::awgn(15.0).noise_power() ==
          Catch::Approx(0.0316227766).epsilon(1e-9));
  REQUIRE(ChannelConfig::awgn(0.0).noise_power() == Catch::Approx(1.0));
  REQUIRE(ChannelConfig::awgn(10.0).noise_power() == Catch::Approx(0.1));
}

TEST_CASE("empirical noise power at 10 dB is within 1 percent", "[channel]") {
  auto z = unit_power_frame(1'000'000, 3);
  Rng rng(4);
  const ChannelFrame out = awgn_transmit(z, ChannelConfig::awgn(10.0), rng);
  double noise = 0.0;
  for (int64_t i = 0; i < z.symbols.numel(); ++i) {
    const double d = static_cast<double>(out.symbols.data()[i]) - z.symbols.data()[i];
    noise += d * d;
  }
  noise /= static_cast<double>(z.symbol_count());
  REQUIRE(noise == Catch::Approx(0.1).epsilon(0.01));
}

TEST_CASE("empirical snr estimate converges with symbol count", "[channel]") {
  for (double snr : {0.0, 15.0}) {
    auto z5 = unit_power_frame(100'000, 5);
    Rng rng5(6);
    const double est5 =
        measure_empirical_snr(z5, awgn_transmit(z5, ChannelConfig::awgn(snr), rng5));
    REQUIRE(std::abs(est5 - snr) < 0.3);

    auto z6 = unit_power_frame(1'000'000, 7);
    Rng rng6(8);
    const double est6 =
        measure_empirical_snr(z6, awgn_transmit(z6, ChannelConfig::awgn(snr), rng6));
    REQUIRE(std::abs(est6 - snr) < 0.1);
  }
}

TEST_CASE("noise realizations are deterministic per seed", "[channel]") {
  auto z = unit_power_frame(512, 9);
  Rng rng_a(33), rng_b(33);
  const auto out_a = awgn_transmit(z, ChannelConfig::awgn(5.0), rng_a);
  const auto out_b = awgn_transmit(z, ChannelConfig::awgn(5.0), rng_b);
  REQUIRE(out_a.symbols.bitwise_equal(out_b.symbols));

  const auto out_c = awgn_transmit(z, ChannelConfig::awgn(5.0), rng_a);  // stream advanced
  REQUIRE_FALSE(out_c.symbols.bitwise_equal(out_a.symbols));
}

TEST_CASE("frame power accounting respects the valid mask", "[channel]") {
  Tensor t({1, 4, 2});
  const float vals[8] = {2, 0, 2, 0, 0, 0, 0, 0};
  std::copy(vals, vals + 8, t.data());
  ChannelFrame all(t);
  REQUIRE(all.average_power() == Catch::Approx(2.0));  // (4+4+0+0)/4
  ChannelFrame masked(t, {1, 1, 0, 0});
  REQUIRE(masked.average_power() == Catch::Approx(4.0));
}
