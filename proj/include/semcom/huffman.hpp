#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <stdexcept>
#include <vector>

#include "semcom/corpus.hpp"

namespace semcom {

using BitString = std::vector<uint8_t>;  // one bit per element, 0/1

// Optimal prefix code over token ids. Specials always get a codeword (floor
// frequency 1) so EOS can terminate every sentence and UNK is encodable.
class HuffmanCode {
 public:
  struct TrieNode {
    int32_t left = -1;    // index into nodes, -1 = none
    int32_t right = -1;
    int32_t token = -1;   // leaf payload
  };

  // freqs maps token id -> count. Ties break on (frequency, creation order),
  // with leaves created in ascending token id.
  static HuffmanCode build(const std::map<int32_t, uint64_t>& freqs) {
    if (freqs.empty()) throw std::invalid_argument("huffman: empty frequency table");
    std::map<int32_t, uint64_t> table(freqs);
    for (int32_t sp : {PAD, SOS, EOS, UNK}) {
      auto& f = table[sp];
      if (f == 0) f = 1;
    }
    for (auto& [token, f] : table)
      if (f == 0) f = 1;

    HuffmanCode code;
    struct HeapItem {
      uint64_t freq;
      uint64_t order;
      int32_t node;
      bool operator>(const HeapItem& o) const {
        return std::tie(freq, order) > std::tie(o.freq, o.order);
      }
    };
    std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap;
    uint64_t order = 0;
    for (const auto& [token, f] : table) {  // ascending token id
      code.nodes_.push_back({-1, -1, token});
      heap.push({f, order++, static_cast<int32_t>(code.nodes_.size() - 1)});
    }
    while (heap.size() > 1) {
      const HeapItem a = heap.top();
      heap.pop();
      const HeapItem b = heap.top();
      heap.pop();
      code.nodes_.push_back({a.node, b.node, -1});
      heap.push({a.freq + b.freq, order++, static_cast<int32_t>(code.nodes_.size() - 1)});
    }
    code.root_ = heap.top().node;
    code.assign_codewords(code.root_, BitString{});
    return code;
  }

  bool has_token(int32_t token) const {
    return codewords_.count(token) != 0;
  }

  const BitString& codeword(int32_t token) const {
    auto it = codewords_.find(token);
    if (it == codewords_.end())
      throw std::out_of_range("huffman: token has no codeword");
    return it->second;
  }

  size_t symbol_count() const { return codewords_.size(); }

  const std::map<int32_t, BitString>& codewords() const { return codewords_; }

  // Codeword lengths keyed by token.
  std::map<int32_t, size_t> lengths() const {
    std::map<int32_t, size_t> out;
    for (const auto& [token, bits] : codewords_) out[token] = bits.size();
    return out;
  }

  // Sentence ids followed by the EOS marker.
  BitString encode(const IdSeq& ids) const {
    BitString bits;
    for (int32_t id : ids) {
      const BitString& cw = codeword(has_token(id) ? id : UNK);
      bits.insert(bits.end(), cw.begin(), cw.end());
    }
    const BitString& eos = codeword(EOS);
    bits.insert(bits.end(), eos.begin(), eos.end());
    return bits;
  }

  struct DecodeResult {
    IdSeq ids;
    size_t bits_consumed = 0;
    bool found_eos = false;
    bool malformed_tail = false;  // stream ended mid-codeword; UNK was emitted
  };

  // Walks the trie until the EOS codeword or bit exhaustion. A trailing
  // partial codeword decodes to a single UNK and sets the malformed flag.
  DecodeResult decode(const BitString& bits, size_t max_tokens = SIZE_MAX) const {
    DecodeResult res;
    size_t pos = 0;
    while (pos < bits.size() && res.ids.size() < max_tokens) {
      int32_t node = root_;
      const size_t start = pos;
      while (nodes_[static_cast<size_t>(node)].token < 0) {
        if (pos >= bits.size()) {
          res.ids.push_back(UNK);
          res.malformed_tail = true;
          res.bits_consumed = bits.size();
          return res;
        }
        node = bits[pos++] ? nodes_[static_cast<size_t>(node)].right
                           : nodes_[static_cast<size_t>(node)].left;
      }
      const int32_t token = nodes_[static_cast<size_t>(node)].token;
      res.bits_consumed = pos;
      if (token == EOS) {
        res.found_eos = true;
        return res;
      }
      res.ids.push_back(token);
      (void)start;
    }
    return res;
  }

 private:
  void assign_codewords(int32_t node, BitString prefix) {
    const TrieNode& n = nodes_[static_cast<size_t>(node)];
    if (n.token >= 0) {
      // Degenerate single-symbol tree would give an empty codeword; the
      // specials floor guarantees at least four symbols, so prefix is
      // nonempty here.
      codewords_[n.token] = prefix;
      return;
    }
    prefix.push_back(0);
    assign_codewords(n.left, prefix);
    prefix.back() = 1;
    assign_codewords(n.right, prefix);
  }

  std::vector<TrieNode> nodes_;
  int32_t root_ = -1;
  std::map<int32_t, BitString> codewords_;
};

// Frequency table for a Huffman code, counted over encoded sentences.
inline std::map<int32_t, uint64_t> count_token_frequencies(
    const std::vector<IdSeq>& sentences) {
  std::map<int32_t, uint64_t> freqs;
  for (const auto& s : sentences)
    for (int32_t id : s) ++freqs[id];
  return freqs;
}

}  // namespace semcom
