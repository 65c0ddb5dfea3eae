#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "semcom/quant.hpp"
#include "semcom/rng.hpp"

using namespace semcom;

TEST_CASE("all-zero tensor dequantizes to exact zeros", "[quant]") {
  Tensor t({17});
  const QuantTensor q = quantize(t);
  const Tensor back = dequantize(q);
  for (int64_t i = 0; i < back.numel(); ++i) REQUIRE(back.data()[i] == 0.0f);
}

TEST_CASE("uniform [-1,1] tensor meets the rounding bound with s=2/255", "[quant]") {
  Rng rng(4);
  Tensor t({4096});
  t.data()[0] = -1.0f;  // pin the extremes so scale is exactly 2/255
  t.data()[1] = 1.0f;
  for (int64_t i = 2; i < t.numel(); ++i) t.data()[i] = rng.uniform(-1.0f, 1.0f);
  const QuantTensor q = quantize(t);
  REQUIRE(q.scale == Catch::Approx(2.0 / 255.0).epsilon(1e-6));
  const Tensor back = dequantize(q);
  for (int64_t i = 0; i < t.numel(); ++i)
    REQUIRE(std::abs(back.data()[i] - t.data()[i]) <= q.scale / 2 + 1e-7f);
}

TEST_CASE("round-trip bound holds for 1000 random tensors", "[quant]") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng.uniform_below(400));
    Tensor t({n});
    const int kind = static_cast<int>(rng.uniform_below(3));
    const float spread = rng.uniform(0.01f, 10.0f);
    const float offset = rng.uniform(-5.0f, 5.0f);
    for (int64_t i = 0; i < n; ++i) {
      if (kind == 0) t.data()[i] = offset + spread * rng.gaussian_f();
      else if (kind == 1) t.data()[i] = offset + rng.uniform(-spread, spread);
      else t.data()[i] = offset;  // constant
    }
    const QuantTensor q = quantize(t);
    REQUIRE(q.scale > 0.0f);
    REQUIRE(q.zero_point >= -128);
    REQUIRE(q.zero_point <= 127);
    const Tensor back = dequantize(q);
    for (int64_t i = 0; i < n; ++i)
      REQUIRE(std::abs(back.data()[i] - t.data()[i]) <= q.scale / 2 + 1e-6f);
  }
}

TEST_CASE("quantization is monotone within a tensor", "[quant]") {
  Rng rng(6);
  Tensor t({512});
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.gaussian_f() * 3.0f;
  const QuantTensor q = quantize(t);
  for (int64_t i = 0; i < t.numel(); ++i)
    for (int64_t j = 0; j < 64; ++j)
      if (t.data()[i] <= t.data()[j])
        REQUIRE(q.values[static_cast<size_t>(i)] <= q.values[static_cast<size_t>(j)]);
}

TEST_CASE("second quantize round-trip is a fixed point", "[quant]") {
  Rng rng(7);
  Tensor t({333});
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.gaussian_f();
  const Tensor once = dequantize(quantize(t));
  const Tensor twice = dequantize(quantize(once));
  REQUIRE(once.bitwise_equal(twice));
}

TEST_CASE("dequantize applies s*(q-z)", "[quant]") {
  QuantTensor q;
  q.shape = {3};
  q.scale = 1.0f;
  q.zero_point = 0;
  q.values = {-1, 0, 5};
  const Tensor t = dequantize(q);
  REQUIRE(t.data()[0] == -1.0f);
  REQUIRE(t.data()[1] == 0.0f);
  REQUIRE(t.data()[2] == 5.0f);
}

TEST_CASE("int8 payload is about a quarter of fp32", "[quant]") {
  ParamSet ps;
  Tensor t({10000});
  Rng rng(8);
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.gaussian_f();
  ps.add("w", t);
  ParamMessage msg;
  msg.payload = QuantizedParamSet::from(ps);
  const size_t fp32_bytes = 4 * 10000;
  const double ratio = static_cast<double>(fp32_bytes) /
                       static_cast<double>(msg.payload.payload_bytes());
  REQUIRE(ratio > 3.9);
  REQUIRE(ratio < 4.0);
}

TEST_CASE("message encode/decode is byte-exact", "[quant]") {
  ParamSet ps;
  Rng rng(9);
  for (int k = 0; k < 3; ++k) {
    Tensor t({4, 8});
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.gaussian_f();
    ps.add("layer." + std::to_string(k), t);
  }
  ParamMessage msg;
  msg.round = 3;
  msg.party = 1;
  msg.data_size = 1200;
  msg.payload = QuantizedParamSet::from(ps);
  const auto bytes = msg.encode();
  const ParamMessage back = ParamMessage::decode(bytes);
  REQUIRE(back.round == 3);
  REQUIRE(back.party == 1);
  REQUIRE(back.data_size == 1200);
  REQUIRE(back.encode() == bytes);
}

TEST_CASE("truncated or corrupted messages raise decode errors", "[quant]") {
  ParamSet ps;
  ps.add("w", Tensor({16}));
  ParamMessage msg;
  msg.payload = QuantizedParamSet::from(ps);
  auto bytes = msg.encode();

  auto truncated = bytes;
  truncated.resize(bytes.size() - 5);
  REQUIRE_THROWS_AS(ParamMessage::decode(truncated), DecodeError);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  REQUIRE_THROWS_AS(ParamMessage::decode(bad_magic), DecodeError);

  auto bad_version = bytes;
  bad_version[4] = 0x7f;
  REQUIRE_THROWS_AS(ParamMessage::decode(bad_version), DecodeError);
}

TEST_CASE("param set file round-trip is bitwise exact", "[quant]") {
  ParamSet ps;
  Rng rng(10);
  Tensor a({5, 7}), b({11});
  for (int64_t i = 0; i < a.numel(); ++i) a.data()[i] = rng.gaussian_f();
  for (int64_t i = 0; i < b.numel(); ++i) b.data()[i] = rng.gaussian_f();
  ps.add("a", a);
  ps.add("b", b);
  const auto path = std::filesystem::temp_directory_path() / "semcom_params_test.bin";
  ps.save(path);
  const ParamSet back = ParamSet::load(path);
  REQUIRE(back.bitwise_equal(ps));
  std::filesystem::remove(path);
}
