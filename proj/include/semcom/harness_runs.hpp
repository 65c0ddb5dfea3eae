#pragma once

// Sweep execution for the experiment harness; included at the end of
// harness.hpp.

namespace semcom {

namespace detail {

// Deterministic per-evaluation rng stream, decoupled from training streams.
inline Rng eval_rng(uint64_t seed, double snr_db) {
  const auto centi = static_cast<uint64_t>(llround(snr_db * 100.0) + 100000);
  return Rng(seed).fork(0xE7A1u).fork(centi);
}

struct SchemeArtifacts {
  ParamSet params;         // final model parameters (learned schemes)
  size_t exchanged_bytes = 0;
  bool diverged = false;
  CoopRunRecord record;
};

inline CoopConfig coop_config(const ExperimentConfig& cfg, const ModelConfig& model,
                              uint64_t seed, int64_t rounds) {
  CoopConfig c;
  c.model = model;
  c.train_channel = ChannelConfig::awgn(cfg.train_snr_db);
  c.epochs = cfg.epochs;
  c.rounds = rounds;
  c.warmup_epochs = cfg.warmup_epochs;
  c.batch_size = cfg.batch_size;
  c.optimizer.lr = static_cast<float>(cfg.lr);
  c.seed = seed;
  c.concurrent = cfg.concurrent_parties;
  return c;
}

inline SchemeArtifacts train_learned_scheme(const std::string& scheme,
                                            const ExperimentConfig& cfg,
                                            const PreparedData& prep, uint64_t seed,
                                            int64_t rounds, const ParamSet& init) {
  SchemeArtifacts art;
  const CoopConfig cc = coop_config(cfg, prep.model_cfg, seed, rounds);
  if (scheme == "tclsc") {
    CoopResult res = run_cooperative_training(cc, prep.a_ids, prep.b_ids, init);
    art.record = res.record;
    art.diverged = res.record.diverged;
    art.exchanged_bytes = res.record.total_exchanged_bytes;
    art.params = std::move(res.final_a);
  } else if (scheme == "selftrain_a") {
    art.params = run_self_training(cc, prep.a_ids, 0, init);
  } else if (scheme == "selftrain_b") {
    art.params = run_self_training(cc, prep.b_ids, 1, init);
  } else {
    throw std::invalid_argument("not a learned scheme: " + scheme);
  }
  return art;
}

inline MetricsReport evaluate_learned(const ModelConfig& model_cfg,
                                      const ParamSet& params,
                                      const std::vector<IdSeq>& test,
                                      const Tensor& frozen_embedding, double snr_db,
                                      uint64_t seed) {
  SemanticModel model(model_cfg, /*init_seed=*/0);
  model.load_params(params);
  Rng rng = eval_rng(seed, snr_db);
  const auto decoded =
      model.transmit_greedy(test, ChannelConfig::awgn(snr_db), rng);
  return compute_metrics(decoded, test, frozen_embedding);
}

inline MetricsReport evaluate_classic(const ExperimentConfig& cfg,
                                      const PreparedData& prep,
                                      const Tensor& frozen_embedding, double snr_db,
                                      uint64_t seed, uint64_t* bits_sent = nullptr) {
  // Sender-side frequency estimate: public data plus A's private split.
  std::vector<IdSeq> freq_source = prep.public_ids;
  freq_source.insert(freq_source.end(), prep.a_ids.begin(), prep.a_ids.end());
  const HuffmanCode code = HuffmanCode::build(count_token_frequencies(freq_source));
  ClassicConfig ccfg;
  ccfg.rs_n = cfg.rs_n;
  ccfg.rs_k = cfg.rs_k;
  ccfg.max_words = cfg.max_tokens;
  const Rng rng = eval_rng(seed, snr_db).fork(0xC1A55);
  const auto stats = classic_pipeline(prep.test_ids, code, ccfg,
                                      ChannelConfig::awgn(snr_db), rng);
  if (bits_sent) *bits_sent = stats.bits_sent;
  return compute_metrics(stats.recovered, prep.test_ids, frozen_embedding);
}

// Simple fan-out over independent jobs; row assembly stays order-independent
// because results are sorted by key before writing.
inline void run_jobs(std::vector<std::function<void()>>& jobs, int threads) {
  if (threads <= 1) {
    for (auto& job : jobs) job();
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= jobs.size()) break;
        jobs[i]();
      }
    });
  for (auto& t : pool) t.join();
}

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace detail

struct SweepOutput {
  std::vector<ResultRow> rows;
  std::vector<std::string> manifest_lines;
  bool any_flagged = false;
};

// ---------------------------------------------------------------------------
// Round sweep: cooperative training for each communication-round count.
// ---------------------------------------------------------------------------

inline SweepOutput run_round_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  SweepOutput out;
  std::mutex collect;

  struct Point {
    std::string case_name;
    int64_t rounds;
    uint64_t seed;
  };
  std::vector<Point> points;
  for (const auto& case_name : cfg.cases)
    for (int64_t r : cfg.rounds_list)
      for (uint64_t seed : cfg.seeds) points.push_back({case_name, r, seed});

  // Data and warm start are fixed per case (corpus and split define the
  // scenario; seeds vary the learning).
  std::map<std::string, PreparedData> prep_by_case;
  for (const auto& case_name : cfg.cases)
    prep_by_case.emplace(case_name, prepare_data(cfg, case_name));

  std::vector<std::function<void()>> jobs;
  for (const auto& pt : points)
    jobs.emplace_back([&, pt] {
      const PreparedData& prep = prep_by_case.at(pt.case_name);
      const auto t0 = std::chrono::steady_clock::now();
      const ParamSet init = pretrain_public(
          prep.model_cfg, prep.public_ids, cfg.warmup_epochs,
          ChannelConfig::awgn(cfg.train_snr_db), {static_cast<float>(cfg.lr)},
          pt.seed, cfg.batch_size);
      Tensor frozen_embedding;
      for (const auto& e : init)
        if (e.name == "embed.weight") frozen_embedding = e.value.clone();

      ResultRow row;
      row.scheme = "tclsc";
      row.case_name = pt.case_name;
      row.rounds = pt.rounds;
      row.seed = pt.seed;
      row.snr_db = cfg.train_snr_db;
      std::string note;
      try {
        auto art = detail::train_learned_scheme("tclsc", cfg, prep, pt.seed,
                                                pt.rounds, init);
        row.exchanged_bytes = art.exchanged_bytes;
        if (art.diverged) {
          row.flagged = true;
          note = art.record.divergence_note;
        } else {
          row.metrics = detail::evaluate_learned(prep.model_cfg, art.params,
                                                 prep.test_ids, frozen_embedding,
                                                 cfg.train_snr_db, pt.seed);
        }
      } catch (const TrainingDiverged& e) {
        row.flagged = true;
        note = e.what();
      }
      row.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard<std::mutex> lock(collect);
      out.rows.push_back(row);
      if (row.flagged) {
        out.any_flagged = true;
        out.manifest_lines.push_back("diverged case=" + pt.case_name +
                                     " rounds=" + std::to_string(pt.rounds) +
                                     " seed=" + std::to_string(pt.seed) + " : " + note);
      }
    });
  detail::run_jobs(jobs, cfg.threads);

  // Plateau summary: smallest round count whose seed-mean BLEU-1 comes within
  // plateau_delta of the best over the sweep.
  for (const auto& case_name : cfg.cases) {
    std::map<int64_t, std::vector<double>> by_rounds;
    for (const auto& r : out.rows)
      if (r.case_name == case_name && !r.flagged)
        by_rounds[r.rounds].push_back(r.metrics.bleu1);
    if (by_rounds.empty()) continue;
    double best = 0.0;
    for (const auto& [r, scores] : by_rounds) best = std::max(best, detail::mean(scores));
    int64_t plateau_r = -1;
    for (const auto& [r, scores] : by_rounds)
      if (detail::mean(scores) >= best - cfg.plateau_delta) {
        plateau_r = r;
        break;
      }
    char line[160];
    std::snprintf(line, sizeof(line),
                  "plateau case=%s best_bleu1=%.6f rounds_within_delta=%" PRId64
                  " delta=%.3f",
                  case_name.c_str(), best, plateau_r, cfg.plateau_delta);
    out.manifest_lines.push_back(line);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SNR sweep: learned schemes trained once at the training SNR, every scheme
// evaluated across the SNR grid.
// ---------------------------------------------------------------------------

inline SweepOutput run_snr_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  SweepOutput out;
  std::mutex collect;

  std::map<std::string, PreparedData> prep_by_case;
  for (const auto& case_name : cfg.cases)
    prep_by_case.emplace(case_name, prepare_data(cfg, case_name));

  struct Unit {
    std::string case_name;
    std::string scheme;
    uint64_t seed;
  };
  std::vector<Unit> units;
  for (const auto& case_name : cfg.cases)
    for (const auto& scheme : cfg.schemes)
      for (uint64_t seed : cfg.seeds) units.push_back({case_name, scheme, seed});

  std::vector<std::function<void()>> jobs;
  for (const auto& u : units)
    jobs.emplace_back([&, u] {
      const PreparedData& prep = prep_by_case.at(u.case_name);
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<ResultRow> rows;
      std::vector<std::string> notes;
      bool flagged_any = false;
      const ParamSet init = pretrain_public(
          prep.model_cfg, prep.public_ids, cfg.warmup_epochs,
          ChannelConfig::awgn(cfg.train_snr_db), {static_cast<float>(cfg.lr)},
          u.seed, cfg.batch_size);
      Tensor frozen_embedding;
      for (const auto& e : init)
        if (e.name == "embed.weight") frozen_embedding = e.value.clone();

      if (u.scheme == "classic") {
        for (double snr : cfg.eval_snr_list) {
          ResultRow row;
          row.scheme = u.scheme;
          row.case_name = u.case_name;
          row.rounds = 0;
          row.seed = u.seed;
          row.snr_db = snr;
          uint64_t bits = 0;
          row.metrics =
              detail::evaluate_classic(cfg, prep, frozen_embedding, snr, u.seed, &bits);
          rows.push_back(row);
        }
      } else {
        try {
          auto art = detail::train_learned_scheme(u.scheme, cfg, prep, u.seed,
                                                  cfg.rounds, init);
          for (double snr : cfg.eval_snr_list) {
            ResultRow row;
            row.scheme = u.scheme;
            row.case_name = u.case_name;
            row.rounds = u.scheme == "tclsc" ? cfg.rounds : 0;
            row.seed = u.seed;
            row.snr_db = snr;
            row.exchanged_bytes = art.exchanged_bytes;
            if (art.diverged) {
              row.flagged = true;
            } else {
              row.metrics = detail::evaluate_learned(prep.model_cfg, art.params,
                                                     prep.test_ids, frozen_embedding,
                                                     snr, u.seed);
            }
            rows.push_back(row);
          }
          if (art.diverged) {
            flagged_any = true;
            notes.push_back("diverged scheme=" + u.scheme + " case=" + u.case_name +
                            " seed=" + std::to_string(u.seed) + " : " +
                            art.record.divergence_note);
          }
        } catch (const TrainingDiverged& e) {
          for (double snr : cfg.eval_snr_list) {
            ResultRow row;
            row.scheme = u.scheme;
            row.case_name = u.case_name;
            row.rounds = u.scheme == "tclsc" ? cfg.rounds : 0;
            row.seed = u.seed;
            row.snr_db = snr;
            row.flagged = true;
            rows.push_back(row);
          }
          flagged_any = true;
          notes.push_back("diverged scheme=" + u.scheme + " case=" + u.case_name +
                          " seed=" + std::to_string(u.seed) + " : " + e.what());
        }
      }
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      for (auto& r : rows) r.wall_seconds = wall / static_cast<double>(rows.size());
      std::lock_guard<std::mutex> lock(collect);
      for (auto& r : rows) out.rows.push_back(std::move(r));
      for (auto& n : notes) out.manifest_lines.push_back(std::move(n));
      out.any_flagged = out.any_flagged || flagged_any;
    });
  detail::run_jobs(jobs, cfg.threads);
  return out;
}

// ---------------------------------------------------------------------------
// Quantization overhead bench
// ---------------------------------------------------------------------------

struct QuantBenchResult {
  size_t fp32_bytes = 0;
  size_t message_bytes = 0;
  double ratio = 0.0;
  double max_error = 0.0;
  std::string csv;
};

inline QuantBenchResult run_quantize_bench(const ExperimentConfig& cfg) {
  cfg.validate();
  const PreparedData prep = prepare_data(cfg, cfg.cases.front());
  SemanticModel model(prep.model_cfg, cfg.seeds.front());
  const ParamSet params = model.params();
  QuantBenchResult res;
  std::ostringstream csv;
  csv << "tensor,elements,fp32_bytes,int8_bytes,scale,zero_point,max_abs_error\n";
  ParamMessage msg;
  msg.payload = QuantizedParamSet::from(params);
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& e = params[i];
    const QuantTensor& q = msg.payload[i].tensor;
    const Tensor back = dequantize(q);
    double max_err = 0.0;
    for (int64_t j = 0; j < back.numel(); ++j)
      max_err = std::max(max_err, std::abs(static_cast<double>(back.data()[j]) -
                                           e.value.data()[j]));
    res.max_error = std::max(res.max_error, max_err);
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%" PRId64 ",%" PRId64 ",%" PRId64 ",%.9g,%d,%.9g\n",
                  e.name.c_str(), e.value.numel(), e.value.numel() * 4,
                  e.value.numel(), static_cast<double>(q.scale), q.zero_point,
                  max_err);
    csv << line;
  }
  res.fp32_bytes = params.serialize().size();
  res.message_bytes = msg.encode().size();
  res.ratio = static_cast<double>(res.fp32_bytes) / static_cast<double>(res.message_bytes);
  res.csv = csv.str();
  return res;
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

inline void write_manifest(const ExperimentConfig& cfg, SweepOutput out,
                           const std::string& sweep_name,
                           const std::filesystem::path& dir) {
  // Collection order can vary across worker threads; canonicalize.
  std::sort(out.manifest_lines.begin(), out.manifest_lines.end());
  std::ostringstream os;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016" PRIx64, cfg.hash());
  os << "version=" << kVersion << "\nsweep=" << sweep_name
     << "\nconfig_hash=" << hash << "\nseeds=";
  for (size_t i = 0; i < cfg.seeds.size(); ++i) os << (i ? "," : "") << cfg.seeds[i];
  os << "\n";
  if (sweep_name == "round-sweep" || sweep_name == "snr-sweep") {
    // exchange schedule for the configured round counts
    const auto rounds = sweep_name == "round-sweep"
                            ? cfg.rounds_list
                            : std::vector<int64_t>{cfg.rounds};
    for (int64_t r : rounds) {
      if (r < 1) continue;
      os << "exchange_epochs rounds=" << r << " :";
      for (int64_t e : ExchangeSchedule::make(cfg.epochs, r).exchange_epochs)
        os << ' ' << e;
      os << "\n";
    }
  }
  std::map<std::string, size_t> bytes_by_rounds;
  for (const auto& r : out.rows)
    if (r.scheme == "tclsc" && !r.flagged)
      bytes_by_rounds["rounds=" + std::to_string(r.rounds)] = r.exchanged_bytes;
  for (const auto& [k, v] : bytes_by_rounds)
    os << "exchanged_bytes " << k << " : " << v << "\n";
  for (const auto& line : out.manifest_lines) os << line << "\n";
  os << "rows=" << out.rows.size() << "\n";
  atomic_write_file(dir / "manifest.txt", os.str());
}

// Gnuplot-compatible: seed-averaged BLEU-1 per round count and case.
inline void write_round_plot(const ExperimentConfig& cfg, const SweepOutput& out,
                             const std::filesystem::path& dir) {
  std::ostringstream os;
  os << "# rounds";
  for (const auto& c : cfg.cases) os << " bleu1_" << c;
  os << "\n";
  for (int64_t r : cfg.rounds_list) {
    os << r;
    for (const auto& c : cfg.cases) {
      std::vector<double> scores;
      for (const auto& row : out.rows)
        if (row.case_name == c && row.rounds == r && !row.flagged)
          scores.push_back(row.metrics.bleu1);
      char buf[32];
      std::snprintf(buf, sizeof(buf), " %.6f", detail::mean(scores));
      os << buf;
    }
    os << "\n";
  }
  atomic_write_file(dir / "round_sweep.dat", os.str());
}

inline void write_snr_plot(const ExperimentConfig& cfg, const SweepOutput& out,
                           const std::filesystem::path& dir) {
  std::ostringstream os;
  os << "# snr_db";
  for (const auto& c : cfg.cases)
    for (const auto& s : cfg.schemes) os << " bleu1_" << c << "_" << s;
  os << "\n";
  for (double snr : cfg.eval_snr_list) {
    char head[32];
    std::snprintf(head, sizeof(head), "%.2f", snr);
    os << head;
    for (const auto& c : cfg.cases)
      for (const auto& s : cfg.schemes) {
        std::vector<double> scores;
        for (const auto& row : out.rows)
          if (row.case_name == c && row.scheme == s &&
              std::abs(row.snr_db - snr) < 1e-9 && !row.flagged)
            scores.push_back(row.metrics.bleu1);
        char buf[32];
        std::snprintf(buf, sizeof(buf), " %.6f", detail::mean(scores));
        os << buf;
      }
    os << "\n";
  }
  atomic_write_file(dir / "snr_sweep.dat", os.str());
}

}  // namespace semcom
