#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "semcom/gf256.hpp"

namespace semcom {

// Systematic Reed-Solomon code over GF(2^8). n < 255 behaves as the (255,.)
// code shortened by implicit leading zeros, so (15,11) and (7,3) share the
// machinery of (255,223). Generator roots are alpha^0 .. alpha^(2t-1).
class RsCode {
 public:
  RsCode(int n, int k) : n_(n), k_(k) {
    if (n > 255 || n < 3) throw std::invalid_argument("rs: n out of range");
    if (k < 1 || k >= n) throw std::invalid_argument("rs: k out of range");
    if ((n - k) % 2 != 0) throw std::invalid_argument("rs: n-k must be even");
    if ((n - k) / 2 < 1) throw std::invalid_argument("rs: t must be >= 1");
    build_generator();
  }

  int n() const { return n_; }
  int k() const { return k_; }
  int parity() const { return n_ - k_; }
  int t() const { return (n_ - k_) / 2; }

  // data.size() == k; returns n bytes, data first, parity appended.
  std::vector<uint8_t> encode(const std::vector<uint8_t>& data) const {
    if (static_cast<int>(data.size()) != k_)
      throw std::invalid_argument("rs encode: expected k data bytes");
    const int p = parity();
    std::vector<uint8_t> rem(static_cast<size_t>(p), 0);
    // Polynomial long division of data(x) * x^p by g(x).
    for (uint8_t byte : data) {
      const uint8_t factor = byte ^ rem[0];
      for (int j = 0; j + 1 < p; ++j)
        rem[static_cast<size_t>(j)] =
            rem[static_cast<size_t>(j + 1)] ^ gf256::mul(factor, gen_[static_cast<size_t>(j + 1)]);
      rem[static_cast<size_t>(p - 1)] = gf256::mul(factor, gen_[static_cast<size_t>(p)]);
    }
    std::vector<uint8_t> block(data);
    block.insert(block.end(), rem.begin(), rem.end());
    return block;
  }

  struct DecodeResult {
    bool ok = false;
    std::vector<uint8_t> data;  // k bytes when ok
    int corrected = 0;
  };

  // Corrects up to t symbol errors; on more, returns ok=false whenever the
  // failure is detectable.
  DecodeResult decode(const std::vector<uint8_t>& block) const {
    if (static_cast<int>(block.size()) != n_)
      throw std::invalid_argument("rs decode: expected n bytes");
    const int p = parity();

    // Syndromes S_j = r(alpha^j). block[0] is the highest-degree coefficient.
    std::vector<uint8_t> synd(static_cast<size_t>(p), 0);
    bool clean = true;
    for (int j = 0; j < p; ++j) {
      uint8_t s = 0;
      const uint8_t a = gf256::alpha_pow(j);
      for (uint8_t byte : block) s = gf256::add(gf256::mul(s, a), byte);
      synd[static_cast<size_t>(j)] = s;
      clean = clean && s == 0;
    }
    DecodeResult res;
    if (clean) {
      res.ok = true;
      res.data.assign(block.begin(), block.begin() + k_);
      return res;
    }

    // Berlekamp-Massey for the error locator polynomial (ascending powers).
    std::vector<uint8_t> lambda = {1}, prev = {1};
    int L = 0, m = 1;
    uint8_t b = 1;
    for (int i = 0; i < p; ++i) {
      uint8_t delta = synd[static_cast<size_t>(i)];
      for (int j = 1; j <= L && j < static_cast<int>(lambda.size()); ++j)
        delta ^= gf256::mul(lambda[static_cast<size_t>(j)], synd[static_cast<size_t>(i - j)]);
      if (delta == 0) {
        ++m;
        continue;
      }
      std::vector<uint8_t> next = lambda;
      const uint8_t coef = gf256::div(delta, b);
      if (next.size() < prev.size() + static_cast<size_t>(m))
        next.resize(prev.size() + static_cast<size_t>(m), 0);
      for (size_t j = 0; j < prev.size(); ++j)
        next[j + static_cast<size_t>(m)] ^= gf256::mul(coef, prev[j]);
      if (2 * L <= i) {
        prev = lambda;
        L = i + 1 - L;
        b = delta;
        m = 1;
      } else {
        ++m;
      }
      lambda = std::move(next);
    }
    const int nu = static_cast<int>(lambda.size()) - 1;
    if (nu > t() || L != nu) return res;  // uncorrectable

    // Chien search over valid positions of the (possibly shortened) block.
    // Position pos counts from block start; its locator is alpha^(n-1-pos).
    std::vector<int> error_pos;
    for (int pos = 0; pos < n_; ++pos) {
      const int loc_exp = n_ - 1 - pos;
      const uint8_t x_inv = gf256::alpha_pow(-loc_exp);
      uint8_t v = 0;
      for (int j = nu; j >= 0; --j)
        v = gf256::add(gf256::mul(v, x_inv), lambda[static_cast<size_t>(j)]);
      if (v == 0) error_pos.push_back(pos);
    }
    if (static_cast<int>(error_pos.size()) != nu) return res;

    // Omega(x) = S(x) * Lambda(x) mod x^p.
    std::vector<uint8_t> omega(static_cast<size_t>(p), 0);
    for (int i = 0; i < p; ++i) {
      uint8_t acc = 0;
      for (int j = 0; j <= i && j < static_cast<int>(lambda.size()); ++j)
        acc ^= gf256::mul(lambda[static_cast<size_t>(j)], synd[static_cast<size_t>(i - j)]);
      omega[static_cast<size_t>(i)] = acc;
    }

    std::vector<uint8_t> corrected(block);
    for (int pos : error_pos) {
      const int loc_exp = n_ - 1 - pos;
      const uint8_t x = gf256::alpha_pow(loc_exp);
      const uint8_t x_inv = gf256::alpha_pow(-loc_exp);
      uint8_t om = 0;
      for (int j = p - 1; j >= 0; --j)
        om = gf256::add(gf256::mul(om, x_inv), omega[static_cast<size_t>(j)]);
      // Lambda'(x) keeps only odd-power terms in characteristic 2.
      uint8_t lp = 0;
      for (int j = 1; j < static_cast<int>(lambda.size()); j += 2) {
        uint8_t term = lambda[static_cast<size_t>(j)];
        term = gf256::mul(term, gf256::pow(x_inv, j - 1));
        lp ^= term;
      }
      if (lp == 0) return res;
      const uint8_t magnitude = gf256::mul(x, gf256::div(om, lp));
      corrected[static_cast<size_t>(pos)] ^= magnitude;
    }

    // Re-check syndromes; a residual means miscorrection was detected.
    for (int j = 0; j < p; ++j) {
      uint8_t s = 0;
      const uint8_t a = gf256::alpha_pow(j);
      for (uint8_t byte : corrected) s = gf256::add(gf256::mul(s, a), byte);
      if (s != 0) return res;
    }

    res.ok = true;
    res.corrected = nu;
    res.data.assign(corrected.begin(), corrected.begin() + k_);
    return res;
  }

 private:
  void build_generator() {
    // g(x) = prod_{i=0}^{2t-1} (x - alpha^i), stored highest degree first.
    gen_ = {1};
    for (int i = 0; i < parity(); ++i) {
      std::vector<uint8_t> next(gen_.size() + 1, 0);
      const uint8_t root = gf256::alpha_pow(i);
      for (size_t j = 0; j < gen_.size(); ++j) {
        next[j] ^= gen_[j];
        next[j + 1] ^= gf256::mul(gen_[j], root);
      }
      gen_ = std::move(next);
    }
  }

  int n_, k_;
  std::vector<uint8_t> gen_;  // degree p, gen_[0] == 1
};

}  // namespace semcom
