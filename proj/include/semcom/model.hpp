#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "semcom/autodiff.hpp"
#include "semcom/channel.hpp"
#include "semcom/corpus.hpp"
#include "semcom/io.hpp"
#include "semcom/nn.hpp"

namespace semcom {

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  int64_t vocab_size = 64;       // V
  int64_t max_len = 16;          // L, tokens per sentence slot incl. EOS
  int64_t dim = 32;              // D, semantic feature width
  int64_t symbols_per_token = 4; // N, complex channel symbols per token
  int64_t layers = 2;
  int64_t heads = 4;
  int64_t d_ff = 64;

  void validate() const {
    if (vocab_size <= 4) throw std::invalid_argument("model: vocab too small");
    if (max_len < 5) throw std::invalid_argument("model: max_len must be >= 5");
    if (dim % heads != 0) throw std::invalid_argument("model: heads must divide dim");
    if (symbols_per_token < 1) throw std::invalid_argument("model: need >= 1 symbol per token");
    if (layers < 1 || d_ff < 1) throw std::invalid_argument("model: bad depth/width");
  }

  std::string to_key_values() const {
    std::ostringstream os;
    os << "vocab_size=" << vocab_size << '\n'
       << "max_len=" << max_len << '\n'
       << "dim=" << dim << '\n'
       << "symbols_per_token=" << symbols_per_token << '\n'
       << "layers=" << layers << '\n'
       << "heads=" << heads << '\n'
       << "d_ff=" << d_ff << '\n';
    return os.str();
  }

  static ModelConfig from_key_values(const std::string& text) {
    ModelConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::map<std::string, int64_t*> fields = {
        {"vocab_size", &cfg.vocab_size}, {"max_len", &cfg.max_len},
        {"dim", &cfg.dim},               {"symbols_per_token", &cfg.symbols_per_token},
        {"layers", &cfg.layers},         {"heads", &cfg.heads},
        {"d_ff", &cfg.d_ff}};
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw std::runtime_error("model config: bad line " + line);
      auto it = fields.find(line.substr(0, eq));
      if (it == fields.end()) throw std::runtime_error("model config: unknown field " + line);
      *it->second = std::stoll(line.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

// Transformer-based transceiver: token embedding + encoder stack, a dense
// mapping to channel symbols and back, decoder stack with cross-attention,
// and an output projection. Both parties build the identical structure from
// one ModelConfig, so their parameter sets align index-by-index.
class SemanticModel {
 public:
  SemanticModel(ModelConfig cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    build();
    Rng rng(init_seed);
    initialize(rng);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore& store() { return store_; }
  ParamSet params() const { return store_.snapshot(); }
  void load_params(const ParamSet& ps) { store_.load(ps); }
  Tensor embedding_table() const { return embed_->value.clone(); }

  // One padded training batch. `src` is the sentence plus EOS padded to L;
  // the decoder input is the same sequence shifted right behind SOS.
  struct Batch {
    int64_t rows = 0;
    std::vector<int32_t> src;
    std::vector<int32_t> dec_in;
    std::vector<int32_t> targets;
    std::vector<float> target_mask;
    std::vector<uint8_t> symbol_valid;
    int64_t valid_tokens = 0;
  };

  Batch make_batch(std::span<const IdSeq> sentences) const {
    const int64_t L = cfg_.max_len;
    const int64_t N = cfg_.symbols_per_token;
    Batch b;
    b.rows = static_cast<int64_t>(sentences.size());
    b.src.assign(static_cast<size_t>(b.rows * L), PAD);
    b.dec_in.assign(static_cast<size_t>(b.rows * L), PAD);
    b.targets.assign(static_cast<size_t>(b.rows * L), PAD);
    b.target_mask.assign(static_cast<size_t>(b.rows * L), 0.0f);
    b.symbol_valid.assign(static_cast<size_t>(b.rows * L * N), 0);
    for (int64_t r = 0; r < b.rows; ++r) {
      const IdSeq& s = sentences[static_cast<size_t>(r)];
      if (static_cast<int64_t>(s.size()) + 1 > L)
        throw std::invalid_argument("batch: sentence exceeds max_len");
      for (int64_t j = 0; j < L; ++j) {
        int32_t id = PAD;
        if (j < static_cast<int64_t>(s.size())) id = s[static_cast<size_t>(j)];
        else if (j == static_cast<int64_t>(s.size())) id = EOS;
        b.src[static_cast<size_t>(r * L + j)] = id;
        b.targets[static_cast<size_t>(r * L + j)] = id;
        if (id != PAD) {
          b.target_mask[static_cast<size_t>(r * L + j)] = 1.0f;
          ++b.valid_tokens;
          for (int64_t n = 0; n < N; ++n)
            b.symbol_valid[static_cast<size_t>((r * L + j) * N + n)] = 1;
        }
      }
      b.dec_in[static_cast<size_t>(r * L)] = SOS;
      for (int64_t j = 1; j < L; ++j)
        b.dec_in[static_cast<size_t>(r * L + j)] =
            b.targets[static_cast<size_t>(r * L + j - 1)];
    }
    return b;
  }

  // Contextual features for the batch, [B,L,D].
  Node* semantic_encode(Graph& g, const Batch& b) {
    Node* table = g.param(*embed_);
    Node* x = g.embedding(table, b.src);
    x = g.scale(x, std::sqrt(static_cast<float>(cfg_.dim)));
    x = g.add_const(x, replicate_pos_encoding(b.rows));
    x = g.reshape(x, {b.rows, cfg_.max_len, cfg_.dim});
    const Tensor mask = pad_attn_mask(b.src, b.rows, cfg_.max_len, cfg_.max_len, false);
    for (auto& layer : encoder_) {
      Node* a = attention(g, layer_norm(g, x, layer.ln1), layer.attn, mask, b.rows,
                          cfg_.max_len, cfg_.max_len, /*kv=*/nullptr);
      x = g.add(x, a);
      Node* f = feed_forward(g, layer_norm(g, x, layer.ln2), layer.ffn);
      x = g.add(x, f);
    }
    return layer_norm(g, x, enc_ln_out_);
  }

  // Dense map to channel symbols plus batch power normalization, [B,N*L,2].
  Node* jscc_encode(Graph& g, Node* features, const Batch& b) {
    Node* flat = g.reshape(features, {b.rows * cfg_.max_len, cfg_.dim});
    Node* sym = g.add_bias(g.linear(flat, g.param(*jscc_enc_w_)), g.param(*jscc_enc_b_));
    sym = g.reshape(sym, {b.rows, cfg_.max_len * cfg_.symbols_per_token, 2});
    return g.power_normalize(sym, b.symbol_valid);
  }

  // Teacher-forced logits [B,L,V] from noisy channel symbols.
  Node* decode_teacher_forced(Graph& g, Node* z_hat, const Batch& b) {
    return decoder_logits(g, z_hat, b.dec_in, b.src, b.rows);
  }

  // Full chain: encode, normalize, add channel noise, decode, masked loss.
  Node* teacher_forced_loss(Graph& g, const Batch& b, const ChannelConfig& channel,
                            Rng& rng) {
    Node* x = semantic_encode(g, b);
    Node* z = jscc_encode(g, x, b);
    Node* z_hat = channel.noiseless
                      ? z
                      : g.add_const(z, sample_awgn_like(z->value.shape(), channel, rng));
    Node* logits = decode_teacher_forced(g, z_hat, b);
    Node* flat = g.reshape(logits, {b.rows * cfg_.max_len, cfg_.vocab_size});
    return g.cross_entropy(flat, b.targets, b.target_mask);
  }

  // One pass over `data` in shuffled minibatches; returns the token-weighted
  // mean loss. Throws TrainingDiverged on a non-finite loss.
  double train_epoch(const std::vector<IdSeq>& data, const ChannelConfig& channel,
                     AdamOptimizer& opt, Rng& rng, int64_t batch_size = 32) {
    if (data.empty()) throw std::invalid_argument("train_epoch: no data");
    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double loss_sum = 0.0;
    int64_t token_sum = 0;
    std::vector<IdSeq> chunk;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
      chunk.clear();
      const size_t end = std::min(order.size(), start + static_cast<size_t>(batch_size));
      for (size_t i = start; i < end; ++i) chunk.push_back(data[order[i]]);
      const Batch b = make_batch(chunk);
      Graph g;
      Node* loss = teacher_forced_loss(g, b, channel, rng);
      const double value = loss->value.at(0);
      if (!std::isfinite(value))
        throw TrainingDiverged("train_epoch: non-finite loss " + std::to_string(value));
      g.backward(loss);
      store_.mark_grads_ready();
      opt.step(store_);
      loss_sum += value * static_cast<double>(b.valid_tokens);
      token_sum += b.valid_tokens;
    }
    return loss_sum / static_cast<double>(token_sum);
  }

  // Teacher-forced evaluation loss without updates.
  double evaluate_loss(const std::vector<IdSeq>& data, const ChannelConfig& channel,
                       Rng& rng, int64_t batch_size = 32) {
    double loss_sum = 0.0;
    int64_t token_sum = 0;
    for (size_t start = 0; start < data.size(); start += static_cast<size_t>(batch_size)) {
      const size_t end = std::min(data.size(), start + static_cast<size_t>(batch_size));
      std::vector<IdSeq> chunk(data.begin() + static_cast<std::ptrdiff_t>(start),
                               data.begin() + static_cast<std::ptrdiff_t>(end));
      const Batch b = make_batch(chunk);
      Graph g(/*enable_grad=*/false);
      Node* loss = teacher_forced_loss(g, b, channel, rng);
      loss_sum += loss->value.at(0) * static_cast<double>(b.valid_tokens);
      token_sum += b.valid_tokens;
    }
    return loss_sum / static_cast<double>(token_sum);
  }

  // Transmits sentences through the channel and decodes greedily: emit
  // left-to-right from SOS, argmax per step (ties to the lowest id), stop at
  // EOS or after L tokens.
  std::vector<IdSeq> transmit_greedy(const std::vector<IdSeq>& sentences,
                                     const ChannelConfig& channel, Rng& rng,
                                     int64_t batch_size = 32) {
    std::vector<IdSeq> decoded;
    decoded.reserve(sentences.size());
    for (size_t start = 0; start < sentences.size(); start += static_cast<size_t>(batch_size)) {
      const size_t end = std::min(sentences.size(), start + static_cast<size_t>(batch_size));
      std::vector<IdSeq> chunk(sentences.begin() + static_cast<std::ptrdiff_t>(start),
                               sentences.begin() + static_cast<std::ptrdiff_t>(end));
      auto batch_out = greedy_decode_batch(chunk, channel, rng);
      for (auto& s : batch_out) decoded.push_back(std::move(s));
    }
    return decoded;
  }

  void save_checkpoint(const std::filesystem::path& prefix) const {
    params().save(std::filesystem::path(prefix.string() + ".params"));
    atomic_write_file(std::filesystem::path(prefix.string() + ".config"),
                      cfg_.to_key_values());
  }

  static SemanticModel load_checkpoint(const std::filesystem::path& prefix) {
    const ModelConfig cfg = ModelConfig::from_key_values(
        read_file_text(std::filesystem::path(prefix.string() + ".config")));
    SemanticModel model(cfg, /*init_seed=*/0);
    model.load_params(ParamSet::load(std::filesystem::path(prefix.string() + ".params")));
    return model;
  }

 private:
  struct LayerNormParams {
    Param* gain = nullptr;
    Param* bias = nullptr;
  };
  struct AttentionParams {
    Param *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
  };
  struct FeedForwardParams {
    Param *w1, *b1, *w2, *b2;
  };
  struct EncoderLayer {
    LayerNormParams ln1, ln2;
    AttentionParams attn;
    FeedForwardParams ffn;
  };
  struct DecoderLayer {
    LayerNormParams ln1, ln2, ln3;
    AttentionParams self_attn, cross_attn;
    FeedForwardParams ffn;
  };

  void build() {
    embed_ = &store_.create("embed.weight", {cfg_.vocab_size, cfg_.dim});
    encoder_.resize(static_cast<size_t>(cfg_.layers));
    for (int64_t i = 0; i < cfg_.layers; ++i) {
      auto tag = "enc." + std::to_string(i) + ".";
      EncoderLayer& l = encoder_[static_cast<size_t>(i)];
      l.ln1 = make_ln(tag + "ln1");
      l.attn = make_attention(tag + "attn");
      l.ln2 = make_ln(tag + "ln2");
      l.ffn = make_ffn(tag + "ffn");
    }
    enc_ln_out_ = make_ln("enc.ln_out");
    jscc_enc_w_ = &store_.create("jscc_enc.w", {cfg_.dim, 2 * cfg_.symbols_per_token});
    jscc_enc_b_ = &store_.create("jscc_enc.b", {2 * cfg_.symbols_per_token});
    jscc_dec_w_ = &store_.create("jscc_dec.w", {2 * cfg_.symbols_per_token, cfg_.dim});
    jscc_dec_b_ = &store_.create("jscc_dec.b", {cfg_.dim});
    jscc_dec_ln_ = make_ln("jscc_dec.ln");
    decoder_.resize(static_cast<size_t>(cfg_.layers));
    for (int64_t i = 0; i < cfg_.layers; ++i) {
      auto tag = "dec." + std::to_string(i) + ".";
      DecoderLayer& l = decoder_[static_cast<size_t>(i)];
      l.ln1 = make_ln(tag + "ln1");
      l.self_attn = make_attention(tag + "self");
      l.ln2 = make_ln(tag + "ln2");
      l.cross_attn = make_attention(tag + "cross");
      l.ln3 = make_ln(tag + "ln3");
      l.ffn = make_ffn(tag + "ffn");
    }
    dec_ln_out_ = make_ln("dec.ln_out");
    out_w_ = &store_.create("out.w", {cfg_.dim, cfg_.vocab_size});
    out_b_ = &store_.create("out.b", {cfg_.vocab_size});
    pos_encoding_ = positional_encoding(cfg_.max_len, cfg_.dim);
  }

  LayerNormParams make_ln(const std::string& tag) {
    return {&store_.create(tag + ".g", {cfg_.dim}), &store_.create(tag + ".b", {cfg_.dim})};
  }

  AttentionParams make_attention(const std::string& tag) {
    const int64_t d = cfg_.dim;
    return {&store_.create(tag + ".wq", {d, d}), &store_.create(tag + ".bq", {d}),
            &store_.create(tag + ".wk", {d, d}), &store_.create(tag + ".bk", {d}),
            &store_.create(tag + ".wv", {d, d}), &store_.create(tag + ".bv", {d}),
            &store_.create(tag + ".wo", {d, d}), &store_.create(tag + ".bo", {d})};
  }

  FeedForwardParams make_ffn(const std::string& tag) {
    return {&store_.create(tag + ".w1", {cfg_.dim, cfg_.d_ff}),
            &store_.create(tag + ".b1", {cfg_.d_ff}),
            &store_.create(tag + ".w2", {cfg_.d_ff, cfg_.dim}),
            &store_.create(tag + ".b2", {cfg_.dim})};
  }

  void initialize(Rng& rng) {
    for (auto& p : store_) {
      const auto& shape = p.value.shape();
      if (p.name == "embed.weight") {
        init::normal(p.value, 1.0f / std::sqrt(static_cast<float>(cfg_.dim)), rng);
      } else if (shape.size() == 2) {
        init::xavier_uniform(p.value, shape[0], shape[1], rng);
      } else if (p.name.ends_with(".g")) {
        p.value.fill(1.0f);
      } else {
        p.value.fill(0.0f);
      }
    }
  }

  Node* layer_norm(Graph& g, Node* x, const LayerNormParams& ln) {
    return g.layer_norm(x, g.param(*ln.gain), g.param(*ln.bias));
  }

  Node* feed_forward(Graph& g, Node* x, const FeedForwardParams& ffn) {
    Node* h = g.add_bias(g.linear(x, g.param(*ffn.w1)), g.param(*ffn.b1));
    h = g.relu(h);
    return g.add_bias(g.linear(h, g.param(*ffn.w2)), g.param(*ffn.b2));
  }

  // Multi-head attention. When kv is null the keys/values come from `q_in`
  // (self-attention); otherwise from `kv` (cross-attention).
  Node* attention(Graph& g, Node* q_in, const AttentionParams& p, const Tensor& mask,
                  int64_t rows, int64_t len_q, int64_t len_k, Node* kv) {
    Node* kv_in = kv ? kv : q_in;
    const int64_t d = cfg_.dim, h = cfg_.heads, dh = d / h;
    auto heads = [&](Node* x, Param& w, Param& b, int64_t len) {
      Node* y = g.add_bias(g.linear(x, g.param(w)), g.param(b));
      y = g.reshape(y, {rows, len, h, dh});
      y = g.permute_0213(y);
      return g.reshape(y, {rows * h, len, dh});
    };
    Node* q = heads(q_in, *p.wq, *p.bq, len_q);
    Node* k = heads(kv_in, *p.wk, *p.bk, len_k);
    Node* v = heads(kv_in, *p.wv, *p.bv, len_k);
    Node* scores = g.scale(g.bmm_nt(q, k), 1.0f / std::sqrt(static_cast<float>(dh)));
    scores = g.add_const(scores, mask);
    Node* probs = g.softmax_rows(scores);
    Node* ctx = g.bmm_nn(probs, v);
    ctx = g.reshape(ctx, {rows, h, len_q, dh});
    ctx = g.permute_0213(ctx);
    ctx = g.reshape(ctx, {rows, len_q, d});
    return g.add_bias(g.linear(ctx, g.param(*p.wo)), g.param(*p.bo));
  }

  // Additive attention mask [B*H, Lq, Lk]: -1e9 where the key is PAD, plus
  // the causal constraint when requested.
  Tensor pad_attn_mask(const std::vector<int32_t>& key_ids, int64_t rows, int64_t len_q,
                       int64_t len_k, bool causal) const {
    Tensor mask({rows * cfg_.heads, len_q, len_k});
    float* m = mask.data();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t hq = 0; hq < cfg_.heads; ++hq)
        for (int64_t i = 0; i < len_q; ++i)
          for (int64_t j = 0; j < len_k; ++j) {
            const bool key_pad = key_ids[static_cast<size_t>(r * len_k + j)] == PAD;
            const bool future = causal && j > i;
            m[((r * cfg_.heads + hq) * len_q + i) * len_k + j] =
                (key_pad || future) ? -1e9f : 0.0f;
          }
    return mask;
  }

  Tensor replicate_pos_encoding(int64_t rows) const {
    Tensor out({rows * cfg_.max_len, cfg_.dim});
    const int64_t n = cfg_.max_len * cfg_.dim;
    for (int64_t r = 0; r < rows; ++r)
      std::copy(pos_encoding_.data(), pos_encoding_.data() + n, out.data() + r * n);
    return out;
  }

  Node* decoder_logits(Graph& g, Node* z_hat, const std::vector<int32_t>& dec_in,
                       const std::vector<int32_t>& src_ids, int64_t rows) {
    const int64_t L = cfg_.max_len;
    // channel symbols back to per-token features
    Node* flat = g.reshape(z_hat, {rows * L, 2 * cfg_.symbols_per_token});
    Node* mem = g.add_bias(g.linear(flat, g.param(*jscc_dec_w_)), g.param(*jscc_dec_b_));
    mem = layer_norm(g, mem, jscc_dec_ln_);
    mem = g.reshape(mem, {rows, L, cfg_.dim});

    Node* table = g.param(*embed_);
    Node* y = g.embedding(table, dec_in);
    y = g.scale(y, std::sqrt(static_cast<float>(cfg_.dim)));
    y = g.add_const(y, replicate_pos_encoding(rows));
    y = g.reshape(y, {rows, L, cfg_.dim});

    const Tensor self_mask = pad_attn_mask(dec_in, rows, L, L, /*causal=*/true);
    const Tensor cross_mask = pad_attn_mask(src_ids, rows, L, L, /*causal=*/false);
    for (auto& layer : decoder_) {
      Node* a = attention(g, layer_norm(g, y, layer.ln1), layer.self_attn, self_mask,
                          rows, L, L, nullptr);
      y = g.add(y, a);
      Node* c = attention(g, layer_norm(g, y, layer.ln2), layer.cross_attn, cross_mask,
                          rows, L, L, mem);
      y = g.add(y, c);
      Node* f = feed_forward(g, layer_norm(g, y, layer.ln3), layer.ffn);
      y = g.add(y, f);
    }
    y = layer_norm(g, y, dec_ln_out_);
    Node* logits = g.add_bias(g.linear(y, g.param(*out_w_)), g.param(*out_b_));
    return g.reshape(logits, {rows, L, cfg_.vocab_size});
  }

  std::vector<IdSeq> greedy_decode_batch(const std::vector<IdSeq>& sentences,
                                         const ChannelConfig& channel, Rng& rng) {
    const int64_t L = cfg_.max_len;
    const Batch b = make_batch(sentences);
    // Encode and cross the channel once; the decoder then runs step by step
    // on the received symbols.
    Tensor z_hat_value;
    {
      Graph g(/*enable_grad=*/false);
      Node* x = semantic_encode(g, b);
      Node* z = jscc_encode(g, x, b);
      z_hat_value = z->value.clone();
      if (!channel.noiseless) {
        Tensor noise = sample_awgn_like(z->value.shape(), channel, rng);
        for (int64_t i = 0; i < z_hat_value.numel(); ++i)
          z_hat_value.data()[i] += noise.data()[i];
      }
    }
    std::vector<int32_t> dec_in(static_cast<size_t>(b.rows * L), PAD);
    std::vector<int32_t> emitted(static_cast<size_t>(b.rows * L), PAD);
    std::vector<bool> done(static_cast<size_t>(b.rows), false);
    for (int64_t r = 0; r < b.rows; ++r) dec_in[static_cast<size_t>(r * L)] = SOS;
    for (int64_t t = 0; t < L; ++t) {
      Graph g(/*enable_grad=*/false);
      Node* z_hat = g.constant(z_hat_value);
      Node* logits = decoder_logits(g, z_hat, dec_in, b.src, b.rows);
      bool all_done = true;
      for (int64_t r = 0; r < b.rows; ++r) {
        if (done[static_cast<size_t>(r)]) continue;
        const float* row = logits->value.data() + (r * L + t) * cfg_.vocab_size;
        int32_t best = 0;
        for (int64_t v = 1; v < cfg_.vocab_size; ++v)
          if (row[v] > row[best]) best = static_cast<int32_t>(v);
        emitted[static_cast<size_t>(r * L + t)] = best;
        if (best == EOS) done[static_cast<size_t>(r)] = true;
        else all_done = false;
        if (t + 1 < L) dec_in[static_cast<size_t>(r * L + t + 1)] = best;
      }
      if (all_done) break;
    }
    std::vector<IdSeq> out(static_cast<size_t>(b.rows));
    for (int64_t r = 0; r < b.rows; ++r) {
      IdSeq& s = out[static_cast<size_t>(r)];
      for (int64_t t = 0; t < L; ++t) {
        const int32_t id = emitted[static_cast<size_t>(r * L + t)];
        if (id == EOS || id == PAD) break;
        s.push_back(id);
      }
    }
    return out;
  }

  ModelConfig cfg_;
  ParamStore store_;
  Param* embed_ = nullptr;
  std::vector<EncoderLayer> encoder_;
  LayerNormParams enc_ln_out_;
  Param *jscc_enc_w_ = nullptr, *jscc_enc_b_ = nullptr;
  Param *jscc_dec_w_ = nullptr, *jscc_dec_b_ = nullptr;
  LayerNormParams jscc_dec_ln_;
  std::vector<DecoderLayer> decoder_;
  LayerNormParams dec_ln_out_;
  Param *out_w_ = nullptr, *out_b_ = nullptr;
  Tensor pos_encoding_;
};

}  // namespace semcom
