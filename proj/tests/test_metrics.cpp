#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>

#include "semcom/metrics.hpp"
#include "semcom/rng.hpp"

using namespace semcom;

namespace {

// Independent BLEU oracle: sorted-vector n-gram counting, no hashing, own
// arithmetic path. Kept deliberately different from the implementation.
double bleu_oracle(const std::vector<IdSeq>& cands, const std::vector<IdSeq>& refs,
                   int max_n) {
  double log_p_sum = 0.0;
  long long cand_len = 0, ref_len = 0;
  std::vector<long long> match(static_cast<size_t>(max_n), 0),
      total(static_cast<size_t>(max_n), 0);
  for (size_t i = 0; i < cands.size(); ++i) {
    cand_len += static_cast<long long>(cands[i].size());
    ref_len += static_cast<long long>(refs[i].size());
    for (int n = 1; n <= max_n; ++n) {
      std::vector<IdSeq> cg, rg;
      for (size_t s = 0; s + n <= cands[i].size(); ++s)
        cg.emplace_back(cands[i].begin() + static_cast<std::ptrdiff_t>(s),
                        cands[i].begin() + static_cast<std::ptrdiff_t>(s + n));
      for (size_t s = 0; s + n <= refs[i].size(); ++s)
        rg.emplace_back(refs[i].begin() + static_cast<std::ptrdiff_t>(s),
                        refs[i].begin() + static_cast<std::ptrdiff_t>(s + n));
      std::sort(cg.begin(), cg.end());
      std::sort(rg.begin(), rg.end());
      total[static_cast<size_t>(n - 1)] += static_cast<long long>(cg.size());
      // clipped matches = sum over distinct grams of min(count_c, count_r)
      size_t a = 0;
      while (a < cg.size()) {
        size_t a2 = a;
        while (a2 < cg.size() && cg[a2] == cg[a]) ++a2;
        const auto lo = std::lower_bound(rg.begin(), rg.end(), cg[a]);
        const auto hi = std::upper_bound(rg.begin(), rg.end(), cg[a]);
        match[static_cast<size_t>(n - 1)] +=
            std::min<long long>(static_cast<long long>(a2 - a), hi - lo);
        a = a2;
      }
    }
  }
  for (int n = 1; n <= max_n; ++n) {
    if (match[static_cast<size_t>(n - 1)] == 0 || total[static_cast<size_t>(n - 1)] == 0)
      return 0.0;
    log_p_sum += std::log(static_cast<double>(match[static_cast<size_t>(n - 1)]) /
                          static_cast<double>(total[static_cast<size_t>(n - 1)]));
  }
  const double brevity =
      (cand_len < ref_len && cand_len > 0)
          ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len))
          : 1.0;
  if (cand_len == 0) return 0.0;
  return brevity * std::exp(log_p_sum / max_n);
}

}  // namespace

TEST_CASE("perfect recovery of the worked example scores bleu-2 of one", "[metrics]") {
  const std::vector<TokenSeq> sentence = {{"the", "cat", "is", "on", "the", "sofa"}};
  REQUIRE(bleu(sentence, sentence, 2) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(bleu(sentence, sentence, 1) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("disjoint vocabularies score zero", "[metrics]") {
  const std::vector<TokenSeq> cand = {{"aa", "bb", "cc"}};
  const std::vector<TokenSeq> ref = {{"xx", "yy", "zz"}};
  REQUIRE(bleu(cand, ref, 1) == 0.0);
}

TEST_CASE("clipping caps repeated candidate tokens", "[metrics]") {
  const std::vector<TokenSeq> cand = {{"the", "the", "the", "the"}};
  const std::vector<TokenSeq> ref = {{"the", "cat", "is", "here"}};
  REQUIRE(bleu(cand, ref, 1) == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("brevity penalty applies for short candidates", "[metrics]") {
  const std::vector<TokenSeq> cand = {{"the", "cat"}};
  const std::vector<TokenSeq> ref = {{"the", "cat", "is", "here"}};
  // p1 = 1, bp = exp(1 - 4/2)
  REQUIRE(bleu(cand, ref, 1) == Catch::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("bleu matches an independent counting oracle to 1e-9", "[metrics]") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<IdSeq> cands, refs;
    for (int i = 0; i < 20; ++i) {
      IdSeq c, r;
      const size_t len_r = 4 + rng.uniform_below(10);
      const size_t len_c = 1 + rng.uniform_below(14);
      for (size_t j = 0; j < len_r; ++j)
        r.push_back(static_cast<int32_t>(4 + rng.uniform_below(12)));
      for (size_t j = 0; j < len_c; ++j)
        c.push_back(static_cast<int32_t>(4 + rng.uniform_below(12)));
      cands.push_back(c);
      refs.push_back(r);
    }
    for (int n : {1, 2}) {
      const double got = bleu(cands, refs, n);
      const double want = bleu_oracle(cands, refs, n);
      REQUIRE(got == Catch::Approx(want).margin(1e-9));
    }
  }
}

TEST_CASE("bleu(x,x) is one for any nonempty corpus", "[metrics]") {
  Rng rng(12);
  std::vector<IdSeq> corpus;
  for (int i = 0; i < 30; ++i) {
    IdSeq s;
    for (size_t j = 0; j < 4 + rng.uniform_below(8); ++j)
      s.push_back(static_cast<int32_t>(4 + rng.uniform_below(50)));
    corpus.push_back(s);
  }
  REQUIRE(bleu(corpus, corpus, 1) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(bleu(corpus, corpus, 2) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("corrupting more tokens never raises bleu-1 on average", "[metrics]") {
  Rng rng(13);
  std::vector<IdSeq> refs;
  for (int i = 0; i < 40; ++i) {
    IdSeq s;
    for (size_t j = 0; j < 8; ++j)
      s.push_back(static_cast<int32_t>(4 + rng.uniform_below(60)));
    refs.push_back(s);
  }
  auto corrupt = [&](const std::vector<IdSeq>& in, size_t flips, Rng& r) {
    std::vector<IdSeq> out = in;
    for (auto& s : out)
      for (size_t f = 0; f < flips; ++f)
        s[r.uniform_below(s.size())] = static_cast<int32_t>(4 + r.uniform_below(60));
    return out;
  };
  double prev = 1.0;
  for (size_t flips : {1u, 3u, 6u}) {
    double sum = 0.0;
    for (int trial = 0; trial < 100; ++trial)
      sum += bleu(corrupt(refs, flips, rng), refs, 1);
    const double mean = sum / 100.0;
    REQUIRE(mean <= prev + 0.01);
    prev = mean;
  }
}

TEST_CASE("empty corpus is an error", "[metrics]") {
  std::vector<IdSeq> none;
  REQUIRE_THROWS(bleu(none, none, 1));
}

TEST_CASE("sentence similarity basics", "[metrics]") {
  Tensor emb({8, 4});
  Rng rng(14);
  for (int64_t i = 0; i < emb.numel(); ++i) emb.data()[i] = rng.gaussian_f();

  const IdSeq a = {4, 5, 6};
  REQUIRE(sentence_similarity(a, a, emb) == Catch::Approx(1.0).margin(1e-9));

  // mean pooling is order-invariant (documented limitation)
  const IdSeq perm = {6, 4, 5};
  REQUIRE(sentence_similarity(perm, a, emb) == Catch::Approx(1.0).margin(1e-9));

  bool flagged = false;
  REQUIRE(sentence_similarity({}, a, emb, &flagged) == 0.0);
  REQUIRE(flagged);

  // PAD ids are excluded from the pool
  const IdSeq padded = {4, 5, 6, PAD, PAD};
  REQUIRE(sentence_similarity(padded, a, emb) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("scores stay in the unit interval", "[metrics]") {
  Tensor emb({16, 6});
  Rng rng(15);
  for (int64_t i = 0; i < emb.numel(); ++i) emb.data()[i] = rng.gaussian_f();
  for (int trial = 0; trial < 50; ++trial) {
    IdSeq a, b;
    for (size_t j = 0; j < 1 + rng.uniform_below(9); ++j)
      a.push_back(static_cast<int32_t>(4 + rng.uniform_below(12)));
    for (size_t j = 0; j < 1 + rng.uniform_below(9); ++j)
      b.push_back(static_cast<int32_t>(4 + rng.uniform_below(12)));
    const double s = sentence_similarity(a, b, emb);
    REQUIRE(s >= 0.0);
    REQUIRE(s <= 1.0);
  }
}

TEST_CASE("word accuracy counts positional matches over reference tokens", "[metrics]") {
  using V = std::vector<IdSeq>;
  REQUIRE(word_accuracy(V{{4, 5, 6}}, V{{4, 5, 6}}) == 1.0);
  REQUIRE(word_accuracy(V{{UNK, UNK, UNK}}, V{{4, 5, 6}}) == 0.0);
  IdSeq ref(10, 4), cand(10, 4);
  cand[3] = 9;
  REQUIRE(word_accuracy(V{cand}, V{ref}) == Catch::Approx(0.9));
  // shorter candidate: missing tail counts against the reference length
  REQUIRE(word_accuracy(V{{4, 5}}, V{{4, 5, 6, 7}}) == Catch::Approx(0.5));
}
