// Command-line experiment runner: round sweeps, SNR sweeps, the classic
// baseline chain, a quantization bench, and a quick selftest.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "semcom/harness.hpp"

namespace {

using namespace semcom;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitDiverged = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string seeds_csv;
  int threads = 0;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "experiment config file (key=value)");
  sub->add_option("--out", args.out_dir, "output directory");
  sub->add_option("--seeds", args.seeds_csv, "comma-separated seed list override");
  sub->add_option("--threads", args.threads, "worker threads for config points");
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = ExperimentConfig::load(args.config_path);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (!args.seeds_csv.empty()) {
    cfg.seeds.clear();
    for (const auto& s : semcom::detail::split_csv(args.seeds_csv))
      cfg.seeds.push_back(std::stoull(s));
  }
  if (args.threads > 0) cfg.threads = args.threads;
  cfg.validate();
  return cfg;
}

void emit_data_artifacts(const ExperimentConfig& cfg,
                         const std::filesystem::path& dir) {
  for (const auto& case_name : cfg.cases) {
    const PreparedData prep = prepare_data(cfg, case_name);
    prep.vocab.save(dir / ("vocab_" + case_name + ".tsv"));
    save_split_manifest(prep.indices, dir / ("data_" + case_name));
  }
}

int finish_sweep(const ExperimentConfig& cfg, const SweepOutput& out,
                 const std::string& name) {
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  write_results_csv(out.rows, dir / "results.csv");
  write_timings_csv(out.rows, dir / "timings.csv");
  write_manifest(cfg, out, name, dir);
  emit_data_artifacts(cfg, dir);
  std::printf("%s: %zu rows -> %s\n", name.c_str(), out.rows.size(),
              (dir / "results.csv").c_str());
  if (out.any_flagged) {
    std::fprintf(stderr, "warning: divergence-flagged rows present\n");
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_round_sweep(const ExperimentConfig& cfg) {
  SweepOutput out = run_round_sweep(cfg);
  const int rc = finish_sweep(cfg, out, "round-sweep");
  write_round_plot(cfg, out, cfg.out_dir);
  return rc;
}

int cmd_snr_sweep(ExperimentConfig cfg) {
  SweepOutput out = run_snr_sweep(cfg);
  const int rc = finish_sweep(cfg, out, "snr-sweep");
  write_snr_plot(cfg, out, cfg.out_dir);
  return rc;
}

int cmd_baseline(ExperimentConfig cfg) {
  cfg.schemes = {"classic"};
  SweepOutput out = run_snr_sweep(cfg);
  const int rc = finish_sweep(cfg, out, "baseline");
  write_snr_plot(cfg, out, cfg.out_dir);
  return rc;
}

int cmd_quantize_bench(const ExperimentConfig& cfg) {
  const QuantBenchResult res = run_quantize_bench(cfg);
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  atomic_write_file(dir / "quantize_bench.csv", res.csv);
  std::printf("fp32 param file : %zu bytes\n", res.fp32_bytes);
  std::printf("int8 message    : %zu bytes\n", res.message_bytes);
  std::printf("compression     : %.3fx\n", res.ratio);
  std::printf("max dequant err : %.3g\n", res.max_error);
  return kExitOk;
}

bool check(const char* name, bool ok) {
  std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name);
  return ok;
}

// Fast end-to-end smoke of the main blocks; a few seconds of work.
int cmd_selftest() {
  bool all = true;

  {
    Rng rng(1);
    bool ok = true;
    for (int i = 0; i < 50 && ok; ++i) {
      Tensor t({257});
      for (int64_t j = 0; j < t.numel(); ++j) t.data()[j] = rng.gaussian_f();
      const QuantTensor q = quantize(t);
      const Tensor back = dequantize(q);
      for (int64_t j = 0; j < t.numel(); ++j)
        ok = ok && std::abs(back.data()[j] - t.data()[j]) <= q.scale / 2 + 1e-6f;
    }
    all &= check("int8 quantization round-trip bound", ok);
  }
  {
    RsCode rs(15, 11);
    Rng rng(2);
    bool ok = true;
    for (int trial = 0; trial < 200 && ok; ++trial) {
      std::vector<uint8_t> data(11);
      for (auto& b : data) b = static_cast<uint8_t>(rng.uniform_below(256));
      auto block = rs.encode(data);
      const size_t p1 = rng.uniform_below(15);
      size_t p2 = rng.uniform_below(15);
      while (p2 == p1) p2 = rng.uniform_below(15);
      block[p1] ^= static_cast<uint8_t>(1 + rng.uniform_below(255));
      block[p2] ^= static_cast<uint8_t>(1 + rng.uniform_below(255));
      auto res = rs.decode(block);
      ok = ok && res.ok && res.data == data;
    }
    all &= check("reed-solomon double-error correction", ok);
  }
  {
    std::vector<IdSeq> sents = {{4, 5, 6, 5}, {6, 6, 7, 4, 5}};
    const HuffmanCode code = HuffmanCode::build(count_token_frequencies(sents));
    auto dec = code.decode(code.encode(sents[0]));
    all &= check("huffman encode/decode round-trip",
                 dec.found_eos && dec.ids == sents[0]);
  }
  {
    std::vector<TokenSeq> sample = {{"the", "cat", "is", "on", "the", "sofa"}};
    all &= check("bleu identity on matching corpus",
                 std::abs(bleu(sample, sample, 2) - 1.0) < 1e-12);
  }
  {
    Rng rng(3);
    Tensor z({1, 100000, 2});
    for (int64_t i = 0; i < z.numel(); ++i) z.data()[i] = rng.gaussian_f() / std::sqrt(2.0f);
    const ChannelFrame frame(z);
    const auto cfg15 = ChannelConfig::awgn(15.0);
    const ChannelFrame rx = awgn_transmit(frame, cfg15, rng);
    const double est = measure_empirical_snr(frame, rx);
    all &= check("awgn channel calibration (15 dB +- 0.3)", std::abs(est - 15.0) < 0.3);
  }
  {
    // Tiny overfit: loss after a few epochs must drop clearly.
    ModelConfig mc;
    mc.vocab_size = 16;
    mc.max_len = 6;
    mc.dim = 16;
    mc.symbols_per_token = 2;
    mc.layers = 1;
    mc.heads = 2;
    mc.d_ff = 32;
    SemanticModel model(mc, 5);
    std::vector<IdSeq> data = {{4, 5, 6}, {7, 8, 9}, {4, 6, 8}, {5, 7, 9}};
    AdamOptimizer opt({1e-3f, 0.9f, 0.98f, 1e-9f});
    Rng rng(6);
    const ChannelConfig clean = ChannelConfig::clean();
    const double first = model.train_epoch(data, clean, opt, rng, 4);
    double last = first;
    for (int e = 0; e < 60; ++e) last = model.train_epoch(data, clean, opt, rng, 4);
    all &= check("micro model overfits a toy corpus", last < 0.5 * first);
  }

  std::printf("%s\n", all ? "selftest: all checks passed" : "selftest: FAILURES");
  return all ? kExitOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semcom: semantic text transmission with cooperative transceiver learning"};
  app.require_subcommand(1);
  CommonArgs args;

  auto* round = app.add_subcommand("round-sweep", "cooperative training across communication-round counts");
  add_common(round, args);
  auto* snr = app.add_subcommand("snr-sweep", "all schemes evaluated across an SNR grid");
  add_common(snr, args);
  auto* base = app.add_subcommand("baseline", "classic Huffman+RS+16QAM chain only");
  add_common(base, args);
  auto* bench = app.add_subcommand("quantize-bench", "parameter-exchange payload sizes and errors");
  add_common(bench, args);
  app.add_subcommand("selftest", "fast smoke checks of the main blocks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("selftest")) return cmd_selftest();
    const ExperimentConfig cfg = load_config(args);
    if (app.got_subcommand(round)) return cmd_round_sweep(cfg);
    if (app.got_subcommand(snr)) return cmd_snr_sweep(cfg);
    if (app.got_subcommand(base)) return cmd_baseline(cfg);
    if (app.got_subcommand(bench)) return cmd_quantize_bench(cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
