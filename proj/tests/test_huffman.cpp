#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "semcom/huffman.hpp"
#include "semcom/rng.hpp"

using namespace semcom;

namespace {

// Exact Kraft sum check: sum over codewords of 2^(Lmax-len) must equal 2^Lmax.
bool kraft_equality(const HuffmanCode& code) {
  size_t lmax = 0;
  for (const auto& [token, bits] : code.codewords()) lmax = std::max(lmax, bits.size());
  if (lmax >= 127) return false;
  unsigned __int128 sum = 0;
  for (const auto& [token, bits] : code.codewords())
    sum += static_cast<unsigned __int128>(1) << (lmax - bits.size());
  return sum == (static_cast<unsigned __int128>(1) << lmax);
}

}  // namespace

TEST_CASE("four equal-frequency tokens all get two-bit codes", "[huffman]") {
  // exactly the four specials, all at floor frequency
  const HuffmanCode code = HuffmanCode::build({{PAD, 1}, {SOS, 1}, {EOS, 1}, {UNK, 1}});
  for (const auto& [token, len] : code.lengths()) REQUIRE(len == 2);
  REQUIRE(kraft_equality(code));
}

TEST_CASE("textbook frequencies give the textbook lengths", "[huffman]") {
  // {8,4,2,1,1} -> lengths {1,2,3,4,4}; use specials as the five symbols
  const HuffmanCode code =
      HuffmanCode::build({{PAD, 1}, {SOS, 1}, {EOS, 2}, {UNK, 4}, {4, 8}});
  auto lens = code.lengths();
  REQUIRE(lens[4] == 1);
  REQUIRE(lens[UNK] == 2);
  REQUIRE(lens[EOS] == 3);
  REQUIRE(lens[PAD] == 4);
  REQUIRE(lens[SOS] == 4);
}

TEST_CASE("average code length lands within one bit of the entropy", "[huffman]") {
  Rng rng(1);
  std::map<int32_t, uint64_t> freqs;
  uint64_t total = 0;
  for (int32_t t = 4; t < 204; ++t) {
    freqs[t] = 1 + rng.uniform_below(5000);
    total += freqs[t];
  }
  const HuffmanCode code = HuffmanCode::build(freqs);
  double entropy = 0.0, avg_len = 0.0;
  for (const auto& [token, f] : freqs) {
    const double p = static_cast<double>(f) / static_cast<double>(total);
    entropy -= p * std::log2(p);
    avg_len += p * static_cast<double>(code.codeword(token).size());
  }
  REQUIRE(avg_len >= entropy);
  REQUIRE(avg_len < entropy + 1.0);
  REQUIRE(kraft_equality(code));
}

TEST_CASE("kraft equality holds over random frequency tables", "[huffman]") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<int32_t, uint64_t> freqs;
    const int symbols = 2 + static_cast<int>(rng.uniform_below(60));
    for (int t = 0; t < symbols; ++t)
      freqs[t + 4] = rng.uniform_below(1000);  // zeros get the floor of 1
    REQUIRE(kraft_equality(HuffmanCode::build(freqs)));
  }
}

TEST_CASE("encode/decode round-trips and stops at eos", "[huffman]") {
  const HuffmanCode code = HuffmanCode::build(
      {{4, 10}, {5, 7}, {6, 3}, {7, 1}, {8, 1}});
  const IdSeq sentence = {4, 5, 6, 7, 8, 4, 4};
  BitString bits = code.encode(sentence);
  // arbitrary trailing garbage after the EOS marker must be ignored
  bits.push_back(1);
  bits.push_back(0);
  const auto dec = code.decode(bits);
  REQUIRE(dec.found_eos);
  REQUIRE(dec.ids == sentence);
}

TEST_CASE("empty sentence encodes to the eos codeword alone", "[huffman]") {
  const HuffmanCode code = HuffmanCode::build({{4, 3}, {5, 2}});
  REQUIRE(code.encode({}) == code.codeword(EOS));
  const auto dec = code.decode(code.encode({}));
  REQUIRE(dec.found_eos);
  REQUIRE(dec.ids.empty());
}

TEST_CASE("mid-codeword exhaustion emits a single unk", "[huffman]") {
  const HuffmanCode code = HuffmanCode::build({{4, 10}, {5, 1}, {6, 1}, {7, 1}});
  BitString bits = code.encode({5, 5});
  bits.pop_back();  // the EOS codeword is now incomplete
  // remove enough that the final codeword cannot resolve
  const auto dec = code.decode(BitString(bits.begin(), bits.end() - 1));
  REQUIRE_FALSE(dec.found_eos);
  REQUIRE(dec.malformed_tail);
  REQUIRE_FALSE(dec.ids.empty());
  REQUIRE(dec.ids.back() == UNK);
}

TEST_CASE("a flipped bit near the start desynchronizes the suffix", "[huffman]") {
  Rng rng(3);
  std::map<int32_t, uint64_t> freqs;
  for (int32_t t = 4; t < 40; ++t) freqs[t] = 1 + rng.uniform_below(100);
  const HuffmanCode code = HuffmanCode::build(freqs);
  IdSeq sentence;
  for (int i = 0; i < 12; ++i)
    sentence.push_back(4 + static_cast<int32_t>(rng.uniform_below(36)));
  BitString bits = code.encode(sentence);
  bits[1] ^= 1;
  const auto dec = code.decode(bits, 64);
  REQUIRE(dec.ids != sentence);  // decoded suffix diverges
}

TEST_CASE("empty frequency table is rejected", "[huffman]") {
  REQUIRE_THROWS(HuffmanCode::build({}));
}

TEST_CASE("every vocabulary token including specials gets a codeword", "[huffman]") {
  const HuffmanCode code = HuffmanCode::build({{9, 100}, {10, 50}});
  for (int32_t sp : {PAD, SOS, EOS, UNK}) REQUIRE(code.has_token(sp));
  REQUIRE(code.symbol_count() == 6);
}
