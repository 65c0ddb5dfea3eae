#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "semcom/corpus.hpp"

using namespace semcom;

TEST_CASE("tokenize lowercases, strips punctuation, filters by length", "[corpus]") {
  auto out = tokenize_and_filter("The cat is on the sofa.\n", 4, 30);
  REQUIRE(out.size() == 1);
  REQUIRE(out[0] == TokenSeq{"the", "cat", "is", "on", "the", "sofa"});

  REQUIRE(tokenize_and_filter("hi there\n", 4, 30).empty());
  REQUIRE(tokenize_and_filter("", 4, 30).empty());
}

TEST_CASE("tokenize skips undecodable lines and tallies them", "[corpus]") {
  std::string text = "a good line here\n";
  text += "bad \xff\xfe bytes line\n";
  text += "another good line too\n";
  TokenizeStats stats;
  auto out = tokenize_and_filter(text, 4, 30, &stats);
  REQUIRE(out.size() == 2);
  REQUIRE(stats.skipped_undecodable == 1);
}

TEST_CASE("tokenize is idempotent on its own output", "[corpus]") {
  auto first = tokenize_and_filter("The CAT, is on; the sofa!\nBig--dogs run fast today\n", 4, 30);
  std::string rejoined;
  for (const auto& s : first) {
    for (size_t i = 0; i < s.size(); ++i) rejoined += (i ? " " : "") + s[i];
    rejoined += "\n";
  }
  REQUIRE(tokenize_and_filter(rejoined, 4, 30) == first);
}

TEST_CASE("vocabulary keeps ids contiguous with fixed specials", "[corpus]") {
  std::vector<TokenSeq> corpus = {{"a", "a", "a", "a", "a"},
                                  {"b", "b", "b", "b", "b"},
                                  {"c"}};
  Vocabulary v = build_vocab(corpus, 2);
  REQUIRE(v.size() == 6);  // 4 specials + a + b
  REQUIRE(v.id_of("a") >= 4);
  REQUIRE(v.id_of("c") == UNK);
  REQUIRE(v.token_of(PAD) == "<pad>");
  REQUIRE(v.token_of(EOS) == "<eos>");
}

TEST_CASE("vocabulary of a uniform 4-token corpus has 8 entries", "[corpus]") {
  std::vector<TokenSeq> corpus = {{"w", "x", "y", "z"}};
  REQUIRE(build_vocab(corpus, 1).size() == 8);
}

TEST_CASE("vocabulary tie-break is lexicographic under max_size", "[corpus]") {
  std::vector<TokenSeq> corpus = {{"b", "a", "b", "a", "b", "a"}};
  Vocabulary v = build_vocab(corpus, 1, /*max_size=*/1);
  REQUIRE(v.size() == 5);
  REQUIRE(v.id_of("a") == 4);
  REQUIRE(v.id_of("b") == UNK);
}

TEST_CASE("encode/decode round-trips in-vocab tokens, OOV becomes <unk>", "[corpus]") {
  std::vector<TokenSeq> corpus = {{"red", "fox", "jumps", "high"}};
  Vocabulary v = build_vocab(corpus, 1);
  TokenSeq s = {"red", "fox", "sleeps"};
  const IdSeq ids = v.encode(s);
  const TokenSeq back = v.decode(ids);
  REQUIRE(back == TokenSeq{"red", "fox", "<unk>"});
}

TEST_CASE("vocabulary file round-trip", "[corpus]") {
  std::vector<TokenSeq> corpus = {{"alpha", "beta", "gamma", "alpha"}};
  Vocabulary v = build_vocab(corpus, 1);
  const auto path = std::filesystem::temp_directory_path() / "semcom_vocab_test.tsv";
  v.save(path);
  Vocabulary loaded = Vocabulary::load(path);
  REQUIRE(loaded.size() == v.size());
  REQUIRE(loaded.id_of("alpha") == v.id_of("alpha"));
  std::filesystem::remove(path);
}

TEST_CASE("partition produces the documented case sizes", "[corpus]") {
  std::vector<TokenSeq> corpus(100, TokenSeq{"a", "b", "c", "d"});
  auto c1 = partition(corpus, SplitSpec::case1(42));
  REQUIRE(c1.public_data.size() == 10);
  REQUIRE(c1.private_a.size() == 40);
  REQUIRE(c1.private_b.size() == 40);
  REQUIRE(c1.test.size() == 10);

  auto c2 = partition(corpus, SplitSpec::case2(42));
  REQUIRE(c2.private_a.size() == 60);
  REQUIRE(c2.private_b.size() == 20);
}

TEST_CASE("degenerate split puts everything in one part", "[corpus]") {
  std::vector<TokenSeq> corpus(10, TokenSeq{"a"});
  auto s = partition(corpus, SplitSpec{0, 1, 0, 0, 3});
  REQUIRE(s.private_a.size() == 10);
  REQUIRE(s.public_data.empty());
  REQUIRE(s.test.empty());
}

TEST_CASE("partition rejects tiny corpora and bad fractions", "[corpus]") {
  std::vector<TokenSeq> tiny(3, TokenSeq{"a"});
  REQUIRE_THROWS(partition(tiny, SplitSpec::case1(1)));
  std::vector<TokenSeq> corpus(10, TokenSeq{"a"});
  REQUIRE_THROWS(partition(corpus, SplitSpec{0.5, 0.5, 0.5, 0.0, 1}));
}

TEST_CASE("partition is disjoint and exhaustive for random specs", "[corpus]") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t n = 4 + rng.uniform_below(400);
    // random fractions summing to 1
    double cuts[3] = {rng.uniform_double(), rng.uniform_double(), rng.uniform_double()};
    std::sort(cuts, cuts + 3);
    SplitSpec spec{cuts[0], cuts[1] - cuts[0], cuts[2] - cuts[1], 1.0 - cuts[2],
                   rng.next_u64()};
    auto idx = partition_indices(n, spec);
    std::vector<size_t> all;
    for (const auto* part : {&idx.public_data, &idx.private_a, &idx.private_b, &idx.test})
      all.insert(all.end(), part->begin(), part->end());
    REQUIRE(all.size() == n);
    std::sort(all.begin(), all.end());
    for (size_t i = 0; i < n; ++i) REQUIRE(all[i] == i);
  }
}

TEST_CASE("synthetic generator is deterministic and honors the mixture", "[corpus]") {
  const TopicParams params = TopicParams::defaults();
  auto a = generate_synthetic(params, 50, 99);
  auto b = generate_synthetic(params, 50, 99);
  REQUIRE(a == b);

  TopicParams only_a = params;
  only_a.mix_a = 1.0;
  std::set<std::string> a_words;
  for (const auto& w : params.topic_a.all()) a_words.insert(w);
  for (const auto& w : params.shared_words) a_words.insert(w);
  for (const auto& s : generate_synthetic(only_a, 20, 5))
    for (const auto& w : s) REQUIRE(a_words.count(w) == 1);
}

TEST_CASE("synthetic topic counts match the binomial expectation", "[corpus]") {
  TopicParams params = TopicParams::defaults();
  params.mix_a = 0.5;
  std::vector<int> labels;
  generate_synthetic(params, 10000, 123, &labels);
  int count_a = 0;
  for (int l : labels)
    if (l == 0) ++count_a;
  // 3 sigma around n*p with sigma = sqrt(n*p*(1-p)) = 50
  REQUIRE(count_a > 5000 - 150);
  REQUIRE(count_a < 5000 + 150);
}

TEST_CASE("synthetic sentences stay in the 4..12 token band", "[corpus]") {
  for (const auto& s : generate_synthetic(TopicParams::defaults(), 300, 11)) {
    REQUIRE(s.size() >= 4);
    REQUIRE(s.size() <= 12);
  }
}

TEST_CASE("overlapping topic vocabularies are rejected", "[corpus]") {
  TopicParams params = TopicParams::defaults();
  params.topic_b.nouns.push_back(params.topic_a.nouns.front());
  REQUIRE_THROWS(generate_synthetic(params, 5, 1));
}

TEST_CASE("disjoint topics give disjoint non-shared vocabularies", "[corpus]") {
  TopicParams params = TopicParams::defaults();
  std::vector<int> labels;
  auto sents = generate_synthetic(params, 500, 17, &labels);
  std::set<std::string> shared(params.shared_words.begin(), params.shared_words.end());
  std::set<std::string> seen_a, seen_b;
  for (size_t i = 0; i < sents.size(); ++i)
    for (const auto& w : sents[i]) {
      if (shared.count(w)) continue;
      (labels[i] == 0 ? seen_a : seen_b).insert(w);
    }
  std::vector<std::string> overlap;
  std::set_intersection(seen_a.begin(), seen_a.end(), seen_b.begin(), seen_b.end(),
                        std::back_inserter(overlap));
  REQUIRE(overlap.empty());
}
