#pragma once

#include <atomic>
#include <chrono>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "semcom/classic.hpp"
#include "semcom/coop.hpp"
#include "semcom/corpus.hpp"
#include "semcom/metrics.hpp"
#include "semcom/model.hpp"
#include "semcom/version.hpp"

namespace semcom {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Experiment configuration: flat key=value text, '#' comments.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  // corpus
  std::string corpus_source = "synthetic";  // synthetic | file
  std::string corpus_path;
  size_t corpus_sentences = 3000;
  uint64_t corpus_seed = 7;
  double mix_a = 0.5;
  size_t min_tokens = 4;
  size_t max_tokens = 30;
  // split
  std::vector<std::string> cases = {"case1", "case2"};
  double frac_public = 0.10, frac_a = 0.40, frac_b = 0.40, frac_test = 0.10;
  uint64_t split_seed = 11;
  std::string vocab_source = "full";  // full | public
  size_t vocab_min_freq = 1;
  size_t vocab_max_size = 4096;
  // model
  int64_t model_layers = 2;
  int64_t model_heads = 4;
  int64_t model_dim = 32;
  int64_t model_ff = 64;
  int64_t symbols_per_token = 4;
  int64_t max_len = 16;
  // training
  double train_snr_db = 15.0;
  int64_t epochs = 80;
  int64_t rounds = 8;
  std::vector<int64_t> rounds_list = {1, 4, 8, 10, 20, 40};
  int64_t warmup_epochs = 10;
  int64_t batch_size = 32;
  double lr = 1e-3;
  bool concurrent_parties = false;
  // evaluation
  std::vector<double> eval_snr_list = {0, 3, 6, 9, 12, 15, 18};
  std::vector<std::string> schemes = {"tclsc", "selftrain_a", "selftrain_b", "classic"};
  std::vector<uint64_t> seeds = {1, 2, 3};
  int threads = 1;
  std::string out_dir = "results";
  // classic chain
  int rs_n = 255;
  int rs_k = 223;
  // reporting
  double plateau_delta = 0.02;

  void validate() const {
    if (corpus_source != "synthetic" && corpus_source != "file")
      throw ConfigError("corpus must be 'synthetic' or 'file'");
    if (corpus_source == "file" && corpus_path.empty())
      throw ConfigError("corpus_path required for file corpus");
    if (corpus_source == "file" && !std::filesystem::exists(corpus_path))
      throw ConfigError("corpus_path does not exist: " + corpus_path);
    if (schemes.empty()) throw ConfigError("need at least one scheme");
    if (seeds.empty()) throw ConfigError("need at least one seed");
    if (cases.empty()) throw ConfigError("need at least one case");
    for (const auto& s : schemes)
      if (s != "tclsc" && s != "selftrain_a" && s != "selftrain_b" && s != "classic")
        throw ConfigError("unknown scheme: " + s);
    for (const auto& c : cases)
      if (c != "case1" && c != "case2" && c != "custom")
        throw ConfigError("unknown case: " + c);
    if (epochs < 1 || batch_size < 1) throw ConfigError("bad epochs/batch_size");
    if (rounds < 0 || rounds > epochs) throw ConfigError("rounds must be in [0, epochs]");
    for (int64_t r : rounds_list)
      if (r < 1 || r > epochs) throw ConfigError("rounds_list entry outside [1, epochs]");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (rs_n > 255 || rs_k < 1 || rs_k >= rs_n || (rs_n - rs_k) % 2 != 0)
      throw ConfigError("bad RS parameters");
  }

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path) {
    return parse(read_file_text(path));
  }
  std::string canonical_text() const;
  uint64_t hash() const { return fnv1a64(canonical_text()); }

  SplitSpec split_for_case(const std::string& case_name) const {
    if (case_name == "case1") return SplitSpec::case1(split_seed);
    if (case_name == "case2") return SplitSpec::case2(split_seed);
    return SplitSpec{frac_public, frac_a, frac_b, frac_test, split_seed};
  }
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    // trim
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      if (key == "corpus") cfg.corpus_source = value;
      else if (key == "corpus_path") cfg.corpus_path = value;
      else if (key == "corpus_sentences") cfg.corpus_sentences = std::stoull(value);
      else if (key == "corpus_seed") cfg.corpus_seed = std::stoull(value);
      else if (key == "mix_a") cfg.mix_a = std::stod(value);
      else if (key == "min_tokens") cfg.min_tokens = std::stoull(value);
      else if (key == "max_tokens") cfg.max_tokens = std::stoull(value);
      else if (key == "cases") cfg.cases = detail::split_csv(value);
      else if (key == "frac_public") cfg.frac_public = std::stod(value);
      else if (key == "frac_a") cfg.frac_a = std::stod(value);
      else if (key == "frac_b") cfg.frac_b = std::stod(value);
      else if (key == "frac_test") cfg.frac_test = std::stod(value);
      else if (key == "split_seed") cfg.split_seed = std::stoull(value);
      else if (key == "vocab_source") cfg.vocab_source = value;
      else if (key == "vocab_min_freq") cfg.vocab_min_freq = std::stoull(value);
      else if (key == "vocab_max_size") cfg.vocab_max_size = std::stoull(value);
      else if (key == "model_layers") cfg.model_layers = std::stoll(value);
      else if (key == "model_heads") cfg.model_heads = std::stoll(value);
      else if (key == "model_dim") cfg.model_dim = std::stoll(value);
      else if (key == "model_ff") cfg.model_ff = std::stoll(value);
      else if (key == "symbols_per_token") cfg.symbols_per_token = std::stoll(value);
      else if (key == "max_len") cfg.max_len = std::stoll(value);
      else if (key == "train_snr_db") cfg.train_snr_db = std::stod(value);
      else if (key == "epochs") cfg.epochs = std::stoll(value);
      else if (key == "rounds") cfg.rounds = std::stoll(value);
      else if (key == "rounds_list") {
        cfg.rounds_list.clear();
        for (const auto& r : detail::split_csv(value)) cfg.rounds_list.push_back(std::stoll(r));
      } else if (key == "warmup_epochs") cfg.warmup_epochs = std::stoll(value);
      else if (key == "batch_size") cfg.batch_size = std::stoll(value);
      else if (key == "lr") cfg.lr = std::stod(value);
      else if (key == "concurrent_parties") cfg.concurrent_parties = (value == "true" || value == "1");
      else if (key == "eval_snr_list") {
        cfg.eval_snr_list.clear();
        for (const auto& s : detail::split_csv(value)) cfg.eval_snr_list.push_back(std::stod(s));
      } else if (key == "schemes") cfg.schemes = detail::split_csv(value);
      else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& s : detail::split_csv(value)) cfg.seeds.push_back(std::stoull(s));
      } else if (key == "threads") cfg.threads = std::stoi(value);
      else if (key == "out") cfg.out_dir = value;
      else if (key == "rs_n") cfg.rs_n = std::stoi(value);
      else if (key == "rs_k") cfg.rs_k = std::stoi(value);
      else if (key == "plateau_delta") cfg.plateau_delta = std::stod(value);
      else throw ConfigError("unknown key: " + key);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(line_no) + ": bad value for " + key);
    }
  }
  cfg.validate();
  return cfg;
}

inline std::string ExperimentConfig::canonical_text() const {
  std::ostringstream os;
  os << "corpus=" << corpus_source << "\ncorpus_path=" << corpus_path
     << "\ncorpus_sentences=" << corpus_sentences << "\ncorpus_seed=" << corpus_seed
     << "\nmix_a=" << mix_a << "\nmin_tokens=" << min_tokens
     << "\nmax_tokens=" << max_tokens << "\ncases=";
  for (size_t i = 0; i < cases.size(); ++i) os << (i ? "," : "") << cases[i];
  os << "\nfrac=" << frac_public << "," << frac_a << "," << frac_b << "," << frac_test
     << "\nsplit_seed=" << split_seed << "\nvocab_source=" << vocab_source
     << "\nvocab_min_freq=" << vocab_min_freq << "\nvocab_max_size=" << vocab_max_size
     << "\nmodel=" << model_layers << "," << model_heads << "," << model_dim << ","
     << model_ff << "," << symbols_per_token << "," << max_len
     << "\ntrain_snr_db=" << train_snr_db << "\nepochs=" << epochs
     << "\nrounds=" << rounds << "\nrounds_list=";
  for (size_t i = 0; i < rounds_list.size(); ++i) os << (i ? "," : "") << rounds_list[i];
  os << "\nwarmup_epochs=" << warmup_epochs << "\nbatch_size=" << batch_size
     << "\nlr=" << lr << "\nconcurrent=" << concurrent_parties << "\neval_snr=";
  for (size_t i = 0; i < eval_snr_list.size(); ++i) os << (i ? "," : "") << eval_snr_list[i];
  os << "\nschemes=";
  for (size_t i = 0; i < schemes.size(); ++i) os << (i ? "," : "") << schemes[i];
  os << "\nseeds=";
  for (size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
  os << "\nrs=" << rs_n << "," << rs_k << "\nplateau_delta=" << plateau_delta << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Dataset preparation
// ---------------------------------------------------------------------------

struct PreparedData {
  Vocabulary vocab;
  std::vector<IdSeq> public_ids, a_ids, b_ids, test_ids;
  ModelConfig model_cfg;
  PartitionIndices indices;  // into the generated/ingested sentence list
};

inline PreparedData prepare_data(const ExperimentConfig& cfg,
                                 const std::string& case_name) {
  std::vector<TokenSeq> sentences;
  PreparedData prep;
  if (cfg.corpus_source == "synthetic") {
    // Mismatched knowledge bases: each party's private split comes from its
    // own topic pool; public and test stay topic-balanced. Pools are
    // generated oversized so every case's fractions can be met exactly.
    TopicParams params = TopicParams::defaults();
    params.mix_a = 1.0;
    sentences = generate_synthetic(params, cfg.corpus_sentences, cfg.corpus_seed);
    std::vector<int> labels(sentences.size(), 0);
    params.mix_a = 0.0;
    auto pool_b = generate_synthetic(params, cfg.corpus_sentences, cfg.corpus_seed + 1);
    labels.insert(labels.end(), pool_b.size(), 1);
    sentences.insert(sentences.end(), pool_b.begin(), pool_b.end());
    prep.indices = partition_by_topic_indices(labels, cfg.split_for_case(case_name),
                                              cfg.corpus_sentences);
  } else {
    sentences = tokenize_and_filter(read_file_text(cfg.corpus_path), cfg.min_tokens,
                                    cfg.max_tokens);
    if (sentences.size() > cfg.corpus_sentences)
      sentences.resize(cfg.corpus_sentences);
    if (sentences.size() < 4) throw ConfigError("corpus too small after filtering");
    prep.indices = partition_indices(sentences.size(), cfg.split_for_case(case_name));
  }
  Split<TokenSeq> split;
  {
    auto pick = [&](const std::vector<size_t>& which, std::vector<TokenSeq>& dst) {
      dst.reserve(which.size());
      for (size_t i : which) dst.push_back(sentences[i]);
    };
    pick(prep.indices.public_data, split.public_data);
    pick(prep.indices.private_a, split.private_a);
    pick(prep.indices.private_b, split.private_b);
    pick(prep.indices.test, split.test);
  }
  std::vector<TokenSeq> used = split.public_data;
  used.insert(used.end(), split.private_a.begin(), split.private_a.end());
  used.insert(used.end(), split.private_b.begin(), split.private_b.end());
  used.insert(used.end(), split.test.begin(), split.test.end());

  prep.vocab = build_vocab(cfg.vocab_source == "public" ? split.public_data : used,
                           cfg.vocab_min_freq, cfg.vocab_max_size);

  size_t longest = 0;
  for (const auto& s : used) longest = std::max(longest, s.size());
  if (static_cast<int64_t>(longest) + 1 > cfg.max_len)
    throw ConfigError("max_len too small: need at least " +
                      std::to_string(longest + 1));

  auto encode_all = [&](const std::vector<TokenSeq>& part) {
    std::vector<IdSeq> out;
    out.reserve(part.size());
    for (const auto& s : part) out.push_back(prep.vocab.encode(s));
    return out;
  };
  prep.public_ids = encode_all(split.public_data);
  prep.a_ids = encode_all(split.private_a);
  prep.b_ids = encode_all(split.private_b);
  prep.test_ids = encode_all(split.test);

  prep.model_cfg.vocab_size = prep.vocab.size();
  prep.model_cfg.max_len = cfg.max_len;
  prep.model_cfg.dim = cfg.model_dim;
  prep.model_cfg.symbols_per_token = cfg.symbols_per_token;
  prep.model_cfg.layers = cfg.model_layers;
  prep.model_cfg.heads = cfg.model_heads;
  prep.model_cfg.d_ff = cfg.model_ff;
  prep.model_cfg.validate();
  return prep;
}

// ---------------------------------------------------------------------------
// Result rows and reporting
// ---------------------------------------------------------------------------

struct ResultRow {
  std::string scheme;
  std::string case_name;
  double snr_db = 0.0;
  int64_t rounds = 0;
  uint64_t seed = 0;
  MetricsReport metrics;
  size_t exchanged_bytes = 0;
  double wall_seconds = 0.0;
  bool flagged = false;  // divergence: metric fields written as nan

  std::string sort_key() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s|%s|%08" PRId64 "|%+09.2f|%020" PRIu64,
                  scheme.c_str(), case_name.c_str(), rounds, snr_db, seed);
    return buf;
  }
};

namespace detail {

inline std::string format_metric(double v, bool flagged) {
  if (flagged) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

// Deterministic results CSV. Wall-clock times go to a separate timings file
// so identical configurations reproduce byte-identical results.
inline void write_results_csv(std::vector<ResultRow> rows,
                              const std::filesystem::path& path) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& x, const ResultRow& y) {
    return x.sort_key() < y.sort_key();
  });
  std::ostringstream os;
  os << "scheme,case,snr_db,rounds,seed,bleu1,bleu2,sentence_similarity,"
        "word_accuracy,exchanged_bytes\n";
  for (const auto& r : rows) {
    char head[128];
    std::snprintf(head, sizeof(head), "%s,%s,%.2f,%" PRId64 ",%" PRIu64,
                  r.scheme.c_str(), r.case_name.c_str(), r.snr_db, r.rounds, r.seed);
    os << head << ',' << detail::format_metric(r.metrics.bleu1, r.flagged) << ','
       << detail::format_metric(r.metrics.bleu2, r.flagged) << ','
       << detail::format_metric(r.metrics.sentence_similarity, r.flagged) << ','
       << detail::format_metric(r.metrics.word_accuracy, r.flagged) << ','
       << r.exchanged_bytes << '\n';
  }
  atomic_write_file(path, os.str());
}

inline void write_timings_csv(std::vector<ResultRow> rows,
                              const std::filesystem::path& path) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& x, const ResultRow& y) {
    return x.sort_key() < y.sort_key();
  });
  std::ostringstream os;
  os << "scheme,case,snr_db,rounds,seed,wall_seconds\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%s,%.2f,%" PRId64 ",%" PRIu64 ",%.3f\n",
                  r.scheme.c_str(), r.case_name.c_str(), r.snr_db, r.rounds, r.seed,
                  r.wall_seconds);
    os << buf;
  }
  atomic_write_file(path, os.str());
}

}  // namespace semcom

#include "semcom/harness_runs.hpp"
