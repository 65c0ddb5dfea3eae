#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/huffman.hpp"
#include "semcom/metrics.hpp"
#include "semcom/qam.hpp"
#include "semcom/rs.hpp"

namespace semcom {

// Traditional chain: Huffman source coding, Reed-Solomon channel coding,
// Gray 16-QAM over the shared AWGN channel, hard-decision demodulation.
struct ClassicConfig {
  int rs_n = 255;
  int rs_k = 223;
  size_t max_words = 30;  // cap when rendering a failed sentence as UNKs
};

struct SentenceTransmission {
  IdSeq recovered;
  uint64_t bits_sent = 0;
  uint64_t bit_errors = 0;  // raw channel errors before RS correction
  bool rs_failure = false;
};

namespace detail {

inline std::vector<std::complex<float>> frame_to_symbols(const ChannelFrame& f) {
  std::vector<std::complex<float>> out(static_cast<size_t>(f.symbol_count()));
  const float* p = f.symbols.data();
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = {p[2 * i], p[2 * i + 1]};
  return out;
}

inline ChannelFrame symbols_to_frame(const std::vector<std::complex<float>>& syms) {
  Tensor t({1, static_cast<int64_t>(syms.size()), 2});
  for (size_t i = 0; i < syms.size(); ++i) {
    t.data()[2 * i] = syms[i].real();
    t.data()[2 * i + 1] = syms[i].imag();
  }
  return ChannelFrame(std::move(t));
}

}  // namespace detail

// One sentence through the whole chain. The Huffman payload is preceded by a
// 16-bit bit-count header so the receiver discards block padding and any
// desync is bounded per sentence. The final partial RS block is zero-padded
// logically and transmitted shortened (pad bytes are known zeros on both
// sides and never sent).
inline SentenceTransmission classic_transmit_sentence(const IdSeq& ids,
                                                      const HuffmanCode& code,
                                                      const ClassicConfig& cfg,
                                                      const ChannelConfig& channel,
                                                      Rng& rng) {
  SentenceTransmission out;
  const BitString payload = code.encode(ids);
  BitString framed;
  framed.reserve(16 + payload.size());
  const auto bit_count = static_cast<uint16_t>(payload.size());
  for (int i = 15; i >= 0; --i) framed.push_back((bit_count >> i) & 1);
  framed.insert(framed.end(), payload.begin(), payload.end());
  const std::vector<uint8_t> data = pack_bits(framed);

  const RsCode full(cfg.rs_n, cfg.rs_k);
  const int two_t = full.parity();
  std::vector<uint8_t> coded;
  std::vector<std::pair<int, int>> chunk_sizes;  // (data bytes, coded bytes)
  for (size_t pos = 0; pos < data.size(); pos += static_cast<size_t>(full.k())) {
    const int len = static_cast<int>(
        std::min(data.size() - pos, static_cast<size_t>(full.k())));
    std::vector<uint8_t> chunk(data.begin() + static_cast<std::ptrdiff_t>(pos),
                               data.begin() + static_cast<std::ptrdiff_t>(pos) + len);
    std::vector<uint8_t> block;
    if (len == full.k()) {
      block = full.encode(chunk);
    } else {
      const RsCode shortened(len + two_t, len);
      block = shortened.encode(chunk);
    }
    chunk_sizes.emplace_back(len, static_cast<int>(block.size()));
    coded.insert(coded.end(), block.begin(), block.end());
  }

  const BitString tx_bits = unpack_bits(coded, coded.size() * 8);
  out.bits_sent = tx_bits.size();
  const auto symbols = qam16_modulate(tx_bits);
  const ChannelFrame rx =
      awgn_transmit(detail::symbols_to_frame(symbols), channel, rng);
  const BitString rx_bits = qam16_demodulate(detail::frame_to_symbols(rx));
  for (size_t i = 0; i < tx_bits.size(); ++i)
    if (tx_bits[i] != rx_bits[i]) ++out.bit_errors;
  const std::vector<uint8_t> rx_bytes = pack_bits(
      BitString(rx_bits.begin(), rx_bits.begin() + static_cast<std::ptrdiff_t>(tx_bits.size())));

  std::vector<uint8_t> decoded_data;
  size_t pos = 0;
  bool ok = true;
  for (const auto& [len, coded_len] : chunk_sizes) {
    std::vector<uint8_t> block(rx_bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                               rx_bytes.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<size_t>(coded_len)));
    pos += static_cast<size_t>(coded_len);
    const RsCode rs_block =
        (len == full.k()) ? full : RsCode(len + two_t, len);
    auto res = rs_block.decode(block);
    if (!res.ok) {
      ok = false;
      // keep the received systematic bytes so the header stays readable
      decoded_data.insert(decoded_data.end(), block.begin(),
                          block.begin() + len);
    } else {
      decoded_data.insert(decoded_data.end(), res.data.begin(), res.data.end());
    }
  }

  uint16_t declared_bits = 0;
  if (decoded_data.size() >= 2)
    declared_bits = static_cast<uint16_t>((decoded_data[0] << 8) | decoded_data[1]);
  if (!ok) {
    out.rs_failure = true;
    const size_t words =
        std::clamp<size_t>(declared_bits / 8, 1, cfg.max_words);
    out.recovered.assign(words, UNK);
    return out;
  }
  const size_t available = decoded_data.size() * 8 - 16;
  const size_t take = std::min<size_t>(declared_bits, available);
  const BitString all_bits = unpack_bits(decoded_data, 16 + take);
  const BitString body(all_bits.begin() + 16, all_bits.end());
  auto dec = code.decode(body, cfg.max_words);
  out.recovered = std::move(dec.ids);
  return out;
}

struct ClassicRunStats {
  std::vector<IdSeq> recovered;
  double ber = 0.0;
  double word_accuracy = 0.0;
  size_t rs_failures = 0;
  uint64_t bits_sent = 0;
};

// Per-sentence rng streams keep the sweep deterministic regardless of
// execution order.
inline ClassicRunStats classic_pipeline(const std::vector<IdSeq>& sentences,
                                        const HuffmanCode& code,
                                        const ClassicConfig& cfg,
                                        const ChannelConfig& channel,
                                        const Rng& base_rng) {
  ClassicRunStats stats;
  uint64_t errors = 0;
  for (size_t i = 0; i < sentences.size(); ++i) {
    Rng rng = base_rng.fork(i);
    auto tx = classic_transmit_sentence(sentences[i], code, cfg, channel, rng);
    errors += tx.bit_errors;
    stats.bits_sent += tx.bits_sent;
    if (tx.rs_failure) ++stats.rs_failures;
    stats.recovered.push_back(std::move(tx.recovered));
  }
  stats.ber = stats.bits_sent
                  ? static_cast<double>(errors) / static_cast<double>(stats.bits_sent)
                  : 0.0;
  stats.word_accuracy = word_accuracy(stats.recovered, sentences);
  return stats;
}

}  // namespace semcom
