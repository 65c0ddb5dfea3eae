#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "semcom/io.hpp"
#include "semcom/rng.hpp"

namespace semcom {

using TokenSeq = std::vector<std::string>;
using IdSeq = std::vector<int32_t>;

// Special token ids, fixed for every vocabulary.
enum SpecialId : int32_t { PAD = 0, SOS = 1, EOS = 2, UNK = 3 };

inline const char* special_token(int32_t id) {
  switch (id) {
    case PAD: return "<pad>";
    case SOS: return "<sos>";
    case EOS: return "<eos>";
    case UNK: return "<unk>";
    default: return nullptr;
  }
}

class Vocabulary {
 public:
  Vocabulary() {
    for (int32_t id = 0; id < 4; ++id) {
      id_to_token_.push_back(special_token(id));
      token_to_id_[id_to_token_.back()] = id;
    }
  }

  // Adds a regular token; returns its id (existing id if already present).
  int32_t add(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    const int32_t id = static_cast<int32_t>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_[token] = id;
    return id;
  }

  int32_t id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? UNK : it->second;
  }

  const std::string& token_of(int32_t id) const { return id_to_token_.at(id); }
  int32_t size() const { return static_cast<int32_t>(id_to_token_.size()); }

  IdSeq encode(const TokenSeq& tokens) const {
    IdSeq ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id_of(t));
    return ids;
  }

  TokenSeq decode(const IdSeq& ids) const {
    TokenSeq tokens;
    tokens.reserve(ids.size());
    for (int32_t id : ids) tokens.push_back(token_of(id));
    return tokens;
  }

  void save(const std::filesystem::path& path) const {
    std::ostringstream os;
    for (int32_t id = 0; id < size(); ++id)
      os << id_to_token_[id] << '\t' << id << '\n';
    atomic_write_file(path, os.str());
  }

  static Vocabulary load(const std::filesystem::path& path) {
    Vocabulary v;
    std::istringstream in(read_file_text(path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw std::runtime_error("vocabulary file: missing tab in line");
      const std::string token = line.substr(0, tab);
      const int32_t id = std::stoi(line.substr(tab + 1));
      if (id < 4) continue;  // specials are built in
      if (v.add(token) != id)
        throw std::runtime_error("vocabulary file: ids not contiguous");
    }
    return v;
  }

 private:
  std::unordered_map<std::string, int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
};

struct TokenizeStats {
  size_t lines_in = 0;
  size_t kept = 0;
  size_t filtered_length = 0;
  size_t skipped_undecodable = 0;
};

namespace detail {

inline bool valid_utf8(const std::string& s) {
  size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    size_t extra;
    if (c < 0x80) extra = 0;
    else if ((c >> 5) == 0x6) extra = 1;
    else if ((c >> 4) == 0xe) extra = 2;
    else if ((c >> 3) == 0x1e) extra = 3;
    else return false;
    for (size_t k = 1; k <= extra; ++k) {
      if (i + k >= s.size()) return false;
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    i += extra + 1;
  }
  return true;
}

inline bool is_punct_byte(char c) {
  static const std::string punct = ".,;:!?\"'()[]{}<>-_/\\|@#$%^&*+=~`";
  return punct.find(c) != std::string::npos;
}

}  // namespace detail

// Lowercases, strips punctuation, splits on whitespace; keeps sentences whose
// token count lies in [min_len, max_len]. Lines that are not valid UTF-8 are
// skipped and tallied.
inline std::vector<TokenSeq> tokenize_and_filter(const std::string& raw_text,
                                                 size_t min_len, size_t max_len,
                                                 TokenizeStats* stats = nullptr) {
  if (min_len < 1 || max_len < min_len)
    throw std::invalid_argument("tokenize_and_filter: bad length bounds");
  TokenizeStats local;
  TokenizeStats& st = stats ? *stats : local;
  std::vector<TokenSeq> out;
  std::istringstream in(raw_text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++st.lines_in;
    if (!detail::valid_utf8(line)) {
      ++st.skipped_undecodable;
      continue;
    }
    TokenSeq tokens;
    std::string word;
    auto flush = [&] {
      if (!word.empty()) {
        tokens.push_back(word);
        word.clear();
      }
    };
    for (char c : line) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        flush();
      } else if (detail::is_punct_byte(c)) {
        // punctuation acts as a separator
        flush();
      } else {
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      }
    }
    flush();
    if (tokens.size() >= min_len && tokens.size() <= max_len) {
      out.push_back(std::move(tokens));
      ++st.kept;
    } else {
      ++st.filtered_length;
    }
  }
  return out;
}

// Keeps tokens with frequency >= min_freq, up to max_size non-special slots,
// by descending frequency with lexicographic tie-break.
inline Vocabulary build_vocab(const std::vector<TokenSeq>& sentences,
                              size_t min_freq = 1, size_t max_size = SIZE_MAX) {
  if (sentences.empty())
    throw std::invalid_argument("build_vocab: no sentences");
  std::map<std::string, size_t> freq;  // ordered map gives the lexicographic order
  for (const auto& s : sentences)
    for (const auto& t : s) ++freq[t];
  std::vector<std::pair<std::string, size_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  size_t kept = 0;
  for (const auto& [token, count] : items) {
    if (count < min_freq || kept >= max_size) continue;
    v.add(token);
    ++kept;
  }
  return v;
}

struct SplitSpec {
  double frac_public = 0.10;
  double frac_a = 0.40;
  double frac_b = 0.40;
  double frac_test = 0.10;
  uint64_t seed = 1;

  void validate() const {
    const double sum = frac_public + frac_a + frac_b + frac_test;
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("split fractions must sum to 1");
    for (double f : {frac_public, frac_a, frac_b, frac_test})
      if (f < 0.0 || f > 1.0)
        throw std::invalid_argument("split fraction out of [0,1]");
  }

  // The two corpus partitions studied: near-equal private sizes, and A much
  // larger than B.
  static SplitSpec case1(uint64_t seed) { return {0.10, 0.40, 0.40, 0.10, seed}; }
  static SplitSpec case2(uint64_t seed) { return {0.10, 0.60, 0.20, 0.10, seed}; }
};

template <typename Sentence>
struct Split {
  std::vector<Sentence> public_data;
  std::vector<Sentence> private_a;
  std::vector<Sentence> private_b;
  std::vector<Sentence> test;

  size_t total() const {
    return public_data.size() + private_a.size() + private_b.size() + test.size();
  }
};

using CorpusSplit = Split<TokenSeq>;

struct PartitionIndices {
  std::vector<size_t> public_data, private_a, private_b, test;
};

// Deterministic shuffle then contiguous slices in order public/A/B/test;
// floor-rounded sizes, remainder goes to test.
inline PartitionIndices partition_indices(size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n < 4)
    throw std::invalid_argument("partition: need at least 4 sentences");
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);
  const size_t n_pub = static_cast<size_t>(spec.frac_public * static_cast<double>(n));
  const size_t n_a = static_cast<size_t>(spec.frac_a * static_cast<double>(n));
  const size_t n_b = static_cast<size_t>(spec.frac_b * static_cast<double>(n));
  if (n_pub + n_a + n_b > n)
    throw std::invalid_argument("partition: fractions overflow corpus");
  PartitionIndices idx;
  size_t pos = 0;
  auto grab = [&](size_t count) {
    std::vector<size_t> part(order.begin() + static_cast<std::ptrdiff_t>(pos),
                             order.begin() + static_cast<std::ptrdiff_t>(pos + count));
    pos += count;
    return part;
  };
  idx.public_data = grab(n_pub);
  idx.private_a = grab(n_a);
  idx.private_b = grab(n_b);
  idx.test = grab(n - pos);
  return idx;
}

template <typename Sentence>
Split<Sentence> partition(const std::vector<Sentence>& sentences, const SplitSpec& spec) {
  const PartitionIndices idx = partition_indices(sentences.size(), spec);
  Split<Sentence> split;
  auto pick = [&](const std::vector<size_t>& which) {
    std::vector<Sentence> part;
    part.reserve(which.size());
    for (size_t i : which) part.push_back(sentences[i]);
    return part;
  };
  split.public_data = pick(idx.public_data);
  split.private_a = pick(idx.private_a);
  split.private_b = pick(idx.private_b);
  split.test = pick(idx.test);
  return split;
}

// Topic-aware split for the synthetic mismatch scenario: each party's
// private data comes from its own topic pool, while public and test draw
// evenly from both. `labels` holds 0 (topic A) or 1 (topic B) per sentence;
// `total` sentences are consumed, the rest of the pools stay unused.
inline PartitionIndices partition_by_topic_indices(const std::vector<int>& labels,
                                                   const SplitSpec& spec,
                                                   size_t total) {
  spec.validate();
  if (total < 4)
    throw std::invalid_argument("partition_by_topic: need >= 4 sentences");
  std::vector<size_t> pool_a, pool_b;
  for (size_t i = 0; i < labels.size(); ++i)
    (labels[i] == 0 ? pool_a : pool_b).push_back(i);
  Rng rng(spec.seed);
  rng.shuffle(pool_a);
  rng.shuffle(pool_b);

  const auto n = static_cast<double>(total);
  const size_t n_pub = static_cast<size_t>(spec.frac_public * n);
  const size_t n_a = static_cast<size_t>(spec.frac_a * n);
  const size_t n_b = static_cast<size_t>(spec.frac_b * n);
  if (n_pub + n_a + n_b > total)
    throw std::invalid_argument("partition_by_topic: fractions overflow corpus");
  const size_t n_test = total - n_pub - n_a - n_b;

  size_t next_a = 0, next_b = 0;
  auto take = [&](std::vector<size_t>& pool, size_t& cursor, const char* which) {
    if (cursor >= pool.size())
      throw std::invalid_argument(std::string("partition_by_topic: topic pool ") +
                                  which + " exhausted");
    return pool[cursor++];
  };
  PartitionIndices idx;
  for (size_t i = 0; i < n_a; ++i) idx.private_a.push_back(take(pool_a, next_a, "A"));
  for (size_t i = 0; i < n_b; ++i) idx.private_b.push_back(take(pool_b, next_b, "B"));
  // public and test alternate between the pools so both stay topic-balanced
  for (size_t i = 0; i < n_pub; ++i)
    idx.public_data.push_back(i % 2 == 0 ? take(pool_a, next_a, "A")
                                         : take(pool_b, next_b, "B"));
  for (size_t i = 0; i < n_test; ++i)
    idx.test.push_back(i % 2 == 1 ? take(pool_a, next_a, "A")
                                  : take(pool_b, next_b, "B"));
  return idx;
}

template <typename Sentence>
Split<Sentence> partition_by_topic(const std::vector<Sentence>& sentences,
                                   const std::vector<int>& labels,
                                   const SplitSpec& spec, size_t total) {
  if (sentences.size() != labels.size())
    throw std::invalid_argument("partition_by_topic: label count mismatch");
  const PartitionIndices idx = partition_by_topic_indices(labels, spec, total);
  Split<Sentence> split;
  auto pick = [&](const std::vector<size_t>& which, std::vector<Sentence>& dst) {
    dst.reserve(which.size());
    for (size_t i : which) dst.push_back(sentences[i]);
  };
  pick(idx.public_data, split.public_data);
  pick(idx.private_a, split.private_a);
  pick(idx.private_b, split.private_b);
  pick(idx.test, split.test);
  return split;
}

inline void save_split_manifest(const PartitionIndices& idx,
                                const std::filesystem::path& dir) {
  auto write = [&](const char* name, const std::vector<size_t>& which) {
    std::ostringstream os;
    for (size_t i : which) os << i << '\n';
    atomic_write_file(dir / (std::string("split_") + name + ".idx"), os.str());
  };
  write("public", idx.public_data);
  write("a", idx.private_a);
  write("b", idx.private_b);
  write("test", idx.test);
}

// ---------------------------------------------------------------------------
// Synthetic corpus with two disjoint topic vocabularies over shared function
// words. Models two parties whose local data cover different subject matter.
// ---------------------------------------------------------------------------

struct TopicLexicon {
  std::vector<std::string> nouns;
  std::vector<std::string> verbs;
  std::vector<std::string> adjectives;
  std::vector<std::string> places;

  std::vector<std::string> all() const {
    std::vector<std::string> words;
    for (const auto* pool : {&nouns, &verbs, &adjectives, &places})
      words.insert(words.end(), pool->begin(), pool->end());
    return words;
  }
};

struct TopicParams {
  std::vector<std::string> shared_words;  // function words common to both topics
  TopicLexicon topic_a;
  TopicLexicon topic_b;
  double mix_a = 0.5;  // probability a sentence is drawn from topic A

  static TopicParams defaults();
};

namespace detail {

inline std::vector<std::string> words(const char* csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  std::string w;
  while (std::getline(in, w, ' '))
    if (!w.empty()) out.push_back(w);
  return out;
}

}  // namespace detail

inline TopicParams TopicParams::defaults() {
  TopicParams p;
  p.shared_words = detail::words(
      "the a my your their this that some near on in at with and is are was "
      "were has have very quite really often always never today again still");
  p.topic_a.nouns = detail::words(
      "car truck bus train engine wheel tire brake road bridge tunnel driver "
      "garage trailer cargo wagon taxi scooter van convoy traffic signal "
      "highway junction depot freight piston gearbox clutch chassis bumper "
      "dashboard headlight windshield exhaust fuel diesel battery motor axle");
  p.topic_a.verbs = detail::words(
      "drives parks accelerates brakes tows hauls refuels repairs overtakes "
      "stalls reverses steers honks loads unloads idles skids merges races turns");
  p.topic_a.adjectives = detail::words(
      "fast slow heavy rusty electric diesel-powered loaded empty noisy shiny");
  p.topic_a.places = detail::words(
      "station workshop crossing roundabout lot ferry dock ramp yard lane");
  p.topic_b.nouns = detail::words(
      "bird fish tree river forest wing nest feather beak owl heron sparrow "
      "salmon trout otter beaver meadow valley cliff pond reed willow acorn "
      "moss fern berry fox deer rabbit squirrel hawk crane swan duck goose "
      "minnow tadpole dragonfly firefly thicket");
  p.topic_b.verbs = detail::words(
      "flies swims nests perches migrates dives wades hatches sings moults "
      "forages burrows grazes leaps splashes soars glides hoots pecks hides");
  p.topic_b.adjectives = detail::words(
      "wild quiet feathered speckled swift timid sleek damp mossy golden");
  p.topic_b.places = detail::words(
      "marsh glade bank hollow grove shore island burrow canopy clearing");
  return p;
}

namespace detail {

// Sentence templates; slots draw from the chosen topic's pools. All lengths
// land in [4, 12] tokens.
enum class Slot {
  N, N2, V, Adj, Place,                                  // topic content
  The, A, My, Near, On, In, At, And, Is, Are, Very, Today, Again  // shared words
};

inline const std::vector<std::vector<Slot>>& sentence_templates() {
  using S = Slot;
  static const std::vector<std::vector<S>> templates = {
      {S::The, S::N, S::V, S::Near, S::The, S::Place},
      {S::My, S::Adj, S::N, S::V, S::Today},
      {S::The, S::N, S::And, S::The, S::N2, S::V, S::In, S::The, S::Place},
      {S::A, S::N, S::Is, S::Very, S::Adj},
      {S::The, S::Adj, S::N, S::V, S::On, S::The, S::N2},
      {S::The, S::N, S::In, S::The, S::Place, S::Is, S::Adj},
      {S::A, S::Adj, S::N, S::V, S::Near, S::The, S::N2, S::Today},
      {S::The, S::N, S::V, S::And, S::The, S::N2, S::V, S::Again},
      {S::N, S::And, S::N2, S::Are, S::In, S::The, S::Place},
      {S::The, S::N, S::V, S::At, S::The, S::Place, S::Again},
  };
  return templates;
}

inline const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
  if (pool.empty()) throw std::invalid_argument("synthetic: empty word pool");
  return pool[rng.uniform_below(pool.size())];
}

}  // namespace detail

inline std::vector<TokenSeq> generate_synthetic(const TopicParams& params, size_t n,
                                                uint64_t seed,
                                                std::vector<int>* topic_labels = nullptr) {
  // Disjointness of the topic vocabularies is the premise of the whole
  // mismatch scenario; refuse to generate otherwise.
  {
    auto a = params.topic_a.all();
    auto b = params.topic_b.all();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::string> overlap;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                          std::back_inserter(overlap));
    if (!overlap.empty())
      throw std::invalid_argument("synthetic: topic vocabularies overlap at '" +
                                  overlap.front() + "'");
  }
  Rng rng(seed);
  std::vector<TokenSeq> out;
  out.reserve(n);
  if (topic_labels) topic_labels->clear();
  using detail::Slot;
  for (size_t i = 0; i < n; ++i) {
    const bool is_a = rng.uniform_double() < params.mix_a;
    const TopicLexicon& lex = is_a ? params.topic_a : params.topic_b;
    const auto& tpl =
        detail::sentence_templates()[rng.uniform_below(detail::sentence_templates().size())];
    TokenSeq s;
    std::string noun1;
    for (Slot slot : tpl) {
      switch (slot) {
        case Slot::N: noun1 = detail::pick(lex.nouns, rng); s.push_back(noun1); break;
        case Slot::N2: {
          // second noun distinct from the first where possible
          const std::string* w = &detail::pick(lex.nouns, rng);
          if (*w == noun1 && lex.nouns.size() > 1) w = &detail::pick(lex.nouns, rng);
          s.push_back(*w);
          break;
        }
        case Slot::V: s.push_back(detail::pick(lex.verbs, rng)); break;
        case Slot::Adj: s.push_back(detail::pick(lex.adjectives, rng)); break;
        case Slot::Place: s.push_back(detail::pick(lex.places, rng)); break;
        case Slot::The: s.push_back("the"); break;
        case Slot::A: s.push_back("a"); break;
        case Slot::My: s.push_back("my"); break;
        case Slot::Near: s.push_back("near"); break;
        case Slot::On: s.push_back("on"); break;
        case Slot::In: s.push_back("in"); break;
        case Slot::At: s.push_back("at"); break;
        case Slot::And: s.push_back("and"); break;
        case Slot::Is: s.push_back("is"); break;
        case Slot::Are: s.push_back("are"); break;
        case Slot::Very: s.push_back("very"); break;
        case Slot::Today: s.push_back("today"); break;
        case Slot::Again: s.push_back("again"); break;
      }
    }
    out.push_back(std::move(s));
    if (topic_labels) topic_labels->push_back(is_a ? 0 : 1);
  }
  return out;
}

}  // namespace semcom
