#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "semcom/corpus.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

struct MetricsReport {
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double sentence_similarity = 0.0;
  double word_accuracy = 0.0;
  size_t sentences = 0;
  size_t tokens = 0;
};

namespace detail {

// n-gram key packed into a string of raw id bytes; fine for ids < 2^31.
template <typename Seq>
std::string ngram_key(const Seq& s, size_t start, size_t n) {
  std::string key;
  key.reserve(n * sizeof(typename Seq::value_type));
  for (size_t i = 0; i < n; ++i) {
    const auto& v = s[start + i];
    key.append(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  return key;
}

template <>
inline std::string ngram_key<TokenSeq>(const TokenSeq& s, size_t start, size_t n) {
  std::string key;
  for (size_t i = 0; i < n; ++i) {
    key += s[start + i];
    key.push_back('\x1f');
  }
  return key;
}

}  // namespace detail

// Corpus-level BLEU with uniform weights over orders 1..max_n and the usual
// brevity penalty. A zero precision at any order yields score zero.
template <typename Seq>
double bleu(const std::vector<Seq>& candidates, const std::vector<Seq>& references,
            int max_n) {
  if (candidates.empty() || references.empty())
    throw std::invalid_argument("bleu: empty corpus");
  if (candidates.size() != references.size())
    throw std::invalid_argument("bleu: candidate/reference count mismatch");
  if (max_n < 1) throw std::invalid_argument("bleu: max_n must be >= 1");

  std::vector<uint64_t> matched(static_cast<size_t>(max_n), 0);
  std::vector<uint64_t> total(static_cast<size_t>(max_n), 0);
  uint64_t cand_len = 0, ref_len = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const Seq& cand = candidates[i];
    const Seq& ref = references[i];
    cand_len += cand.size();
    ref_len += ref.size();
    for (int n = 1; n <= max_n; ++n) {
      if (cand.size() < static_cast<size_t>(n)) continue;
      std::unordered_map<std::string, uint64_t> ref_counts;
      if (ref.size() >= static_cast<size_t>(n))
        for (size_t s = 0; s + n <= ref.size(); ++s)
          ++ref_counts[detail::ngram_key(ref, s, static_cast<size_t>(n))];
      std::unordered_map<std::string, uint64_t> cand_counts;
      for (size_t s = 0; s + n <= cand.size(); ++s)
        ++cand_counts[detail::ngram_key(cand, s, static_cast<size_t>(n))];
      for (const auto& [key, count] : cand_counts) {
        total[static_cast<size_t>(n - 1)] += count;
        auto it = ref_counts.find(key);
        if (it != ref_counts.end())
          matched[static_cast<size_t>(n - 1)] += std::min(count, it->second);
      }
    }
  }

  double log_precision = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const uint64_t m = matched[static_cast<size_t>(n - 1)];
    const uint64_t t = total[static_cast<size_t>(n - 1)];
    if (m == 0 || t == 0) return 0.0;
    log_precision += std::log(static_cast<double>(m) / static_cast<double>(t));
  }
  log_precision /= static_cast<double>(max_n);
  double bp = 1.0;
  if (cand_len < ref_len && cand_len > 0)
    bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  if (cand_len == 0) return 0.0;
  return bp * std::exp(log_precision);
}

// Per-sentence BLEU with add-one smoothed precisions, kept for diagnostics.
template <typename Seq>
double bleu_sentence_smoothed(const Seq& candidate, const Seq& reference, int max_n) {
  double log_precision = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    uint64_t matched = 0, total = 0;
    std::unordered_map<std::string, uint64_t> ref_counts;
    if (reference.size() >= static_cast<size_t>(n))
      for (size_t s = 0; s + n <= reference.size(); ++s)
        ++ref_counts[detail::ngram_key(reference, s, static_cast<size_t>(n))];
    std::unordered_map<std::string, uint64_t> cand_counts;
    if (candidate.size() >= static_cast<size_t>(n))
      for (size_t s = 0; s + n <= candidate.size(); ++s)
        ++cand_counts[detail::ngram_key(candidate, s, static_cast<size_t>(n))];
    for (const auto& [key, count] : cand_counts) {
      total += count;
      auto it = ref_counts.find(key);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
    log_precision +=
        std::log(static_cast<double>(matched + 1) / static_cast<double>(total + 1));
  }
  log_precision /= static_cast<double>(max_n);
  double bp = 1.0;
  if (candidate.size() < reference.size() && !candidate.empty())
    bp = std::exp(1.0 - static_cast<double>(reference.size()) /
                            static_cast<double>(candidate.size()));
  if (candidate.empty()) return 0.0;
  return bp * std::exp(log_precision);
}

// Cosine similarity of mean-pooled token embeddings mapped to [0,1].
// PAD tokens are excluded from the pool; an empty pool scores 0 and raises
// the flag. The embedding table comes from a frozen reference model, not the
// model under test. Mean pooling is order-invariant by construction.
inline double sentence_similarity(const IdSeq& candidate, const IdSeq& reference,
                                  const Tensor& embedding, bool* empty_flag = nullptr) {
  if (embedding.rank() != 2)
    throw std::invalid_argument("sentence_similarity: embedding must be [V,D]");
  const int64_t v_size = embedding.dim(0);
  const int64_t d = embedding.dim(1);
  if (empty_flag) *empty_flag = false;
  auto pool = [&](const IdSeq& s, std::vector<double>& out) {
    out.assign(static_cast<size_t>(d), 0.0);
    size_t n = 0;
    for (int32_t id : s) {
      if (id == PAD) continue;
      if (id < 0 || id >= v_size)
        throw std::out_of_range("sentence_similarity: id outside embedding");
      const float* row = embedding.data() + static_cast<int64_t>(id) * d;
      for (int64_t j = 0; j < d; ++j) out[static_cast<size_t>(j)] += row[j];
      ++n;
    }
    if (n == 0) return false;
    for (auto& x : out) x /= static_cast<double>(n);
    return true;
  };
  std::vector<double> a, b;
  if (!pool(candidate, a) || !pool(reference, b)) {
    if (empty_flag) *empty_flag = true;
    return 0.0;
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int64_t j = 0; j < d; ++j) {
    dot += a[static_cast<size_t>(j)] * b[static_cast<size_t>(j)];
    na += a[static_cast<size_t>(j)] * a[static_cast<size_t>(j)];
    nb += b[static_cast<size_t>(j)] * b[static_cast<size_t>(j)];
  }
  if (na == 0.0 || nb == 0.0) {
    if (empty_flag) *empty_flag = true;
    return 0.0;
  }
  const double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
  return 0.5 * (1.0 + std::clamp(cosine, -1.0, 1.0));
}

// Position-wise matches up to the shorter length, over the reference token
// count.
template <typename Seq>
double word_accuracy(const std::vector<Seq>& candidates,
                     const std::vector<Seq>& references) {
  if (candidates.size() != references.size())
    throw std::invalid_argument("word_accuracy: size mismatch");
  uint64_t matches = 0, ref_tokens = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& r = references[i];
    ref_tokens += r.size();
    const size_t upto = std::min(c.size(), r.size());
    for (size_t j = 0; j < upto; ++j)
      if (c[j] == r[j]) ++matches;
  }
  if (ref_tokens == 0) return 0.0;
  return static_cast<double>(matches) / static_cast<double>(ref_tokens);
}

inline MetricsReport compute_metrics(const std::vector<IdSeq>& candidates,
                                     const std::vector<IdSeq>& references,
                                     const Tensor& embedding) {
  MetricsReport rep;
  rep.sentences = candidates.size();
  for (const auto& r : references) rep.tokens += r.size();
  rep.bleu1 = bleu(candidates, references, 1);
  rep.bleu2 = bleu(candidates, references, 2);
  rep.word_accuracy = word_accuracy(candidates, references);
  double sim_sum = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i)
    sim_sum += sentence_similarity(candidates[i], references[i], embedding);
  rep.sentence_similarity = candidates.empty() ? 0.0 : sim_sum / static_cast<double>(candidates.size());
  return rep;
}

}  // namespace semcom
