#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "semcom/model.hpp"
#include "semcom/quant.hpp"

namespace semcom {

// Evenly spaced exchange epochs floor(k*E/R) for k=1..R; the last exchange
// always lands on epoch E so both parties finish on the aggregated model.
struct ExchangeSchedule {
  int64_t total_epochs = 0;
  int64_t rounds = 0;
  std::vector<int64_t> exchange_epochs;

  static ExchangeSchedule make(int64_t epochs, int64_t rounds) {
    if (rounds < 1 || rounds > epochs)
      throw std::invalid_argument("schedule: need 1 <= rounds <= epochs");
    ExchangeSchedule s;
    s.total_epochs = epochs;
    s.rounds = rounds;
    for (int64_t k = 1; k <= rounds; ++k)
      s.exchange_epochs.push_back(k * epochs / rounds);
    return s;
  }

  // No-exchange ablation (distinct from make(), whose contract requires R>=1).
  static ExchangeSchedule none(int64_t epochs) {
    ExchangeSchedule s;
    s.total_epochs = epochs;
    return s;
  }

  bool is_exchange_epoch(int64_t epoch) const {
    return std::find(exchange_epochs.begin(), exchange_epochs.end(), epoch) !=
           exchange_epochs.end();
  }
};

struct AggregationWeights {
  double m_a = 0.5;
  double m_b() const { return 1.0 - m_a; }

  static AggregationWeights from_data_sizes(uint64_t size_a, uint64_t size_b) {
    if (size_a + size_b == 0)
      throw std::invalid_argument("aggregation weights: zero total data size");
    return {static_cast<double>(size_a) / static_cast<double>(size_a + size_b)};
  }
};

// Elementwise convex combination of two structurally identical sets.
inline ParamSet aggregate(const ParamSet& a, const ParamSet& b,
                          const AggregationWeights& w) {
  std::string why;
  if (!a.structurally_equal(b, &why))
    throw std::invalid_argument("aggregate: structure mismatch at " + why);
  ParamSet out;
  const auto ma = static_cast<float>(w.m_a);
  const auto mb = static_cast<float>(w.m_b());
  for (size_t i = 0; i < a.size(); ++i) {
    Tensor t(a[i].value.shape());
    const float* pa = a[i].value.data();
    const float* pb = b[i].value.data();
    float* po = t.data();
    for (int64_t j = 0; j < t.numel(); ++j) po[j] = ma * pa[j] + mb * pb[j];
    out.add(a[i].name, std::move(t));
  }
  return out;
}

// In-process transport carrying encoded ParamMessage bytes; a socket-based
// transport can slot in behind the same push/pop contract.
class MessageQueue {
 public:
  void push(std::vector<uint8_t> bytes) {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      queue_.push(std::move(bytes));
    }
    cv_.notify_one();
  }

  std::vector<uint8_t> pop() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [&] { return !queue_.empty(); });
    auto bytes = std::move(queue_.front());
    queue_.pop();
    return bytes;
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::queue<std::vector<uint8_t>> queue_;
};

struct CoopConfig {
  ModelConfig model;
  ChannelConfig train_channel = ChannelConfig::awgn(15.0);
  int64_t epochs = 80;
  int64_t rounds = 8;  // 0 disables exchanges entirely
  int64_t warmup_epochs = 10;
  int64_t batch_size = 32;
  AdamOptimizer::Config optimizer;
  uint64_t seed = 1;
  bool concurrent = false;  // two worker threads with a rendezvous per exchange
  bool verify_exchange_equality = true;
};

struct CoopRunRecord {
  std::vector<double> loss_a;  // one entry per completed epoch
  std::vector<double> loss_b;
  std::vector<int64_t> exchange_epochs;
  std::vector<size_t> round_bytes;       // both directions, per round
  std::vector<bool> post_exchange_equal; // set when verification is enabled
  size_t total_exchanged_bytes = 0;
  size_t message_bytes_a_to_b = 0;  // size of one A->B message (constant per run)
  bool diverged = false;
  std::string divergence_note;
};

struct CoopResult {
  CoopRunRecord record;
  ParamSet final_a;
  ParamSet final_b;
};

// Shared warm start: one model trained on the public split; both parties
// clone it, so their initial states are bitwise identical.
inline ParamSet pretrain_public(const ModelConfig& model_cfg,
                                const std::vector<IdSeq>& public_data,
                                int64_t warmup_epochs, const ChannelConfig& channel,
                                const AdamOptimizer::Config& opt_cfg, uint64_t seed,
                                int64_t batch_size = 32) {
  SemanticModel model(model_cfg, seed);
  if (warmup_epochs > 0 && !public_data.empty()) {
    AdamOptimizer opt(opt_cfg);
    Rng rng = Rng(seed).fork(99);
    for (int64_t e = 0; e < warmup_epochs; ++e)
      model.train_epoch(public_data, channel, opt, rng, batch_size);
  }
  return model.params().deep_copy();
}

namespace detail {

struct Party {
  int id;  // 0 = A, 1 = B
  SemanticModel model;
  AdamOptimizer opt;
  Rng rng;
  const std::vector<IdSeq>* data;
  std::vector<double> losses;
  std::vector<size_t> sent_bytes;
  std::vector<std::vector<uint8_t>> post_exchange_state;
  bool failed = false;
  std::string failure;

  Party(int party_id, const CoopConfig& cfg, const ParamSet& init,
        const std::vector<IdSeq>& d)
      : id(party_id),
        model(cfg.model, cfg.seed),
        opt(cfg.optimizer),
        rng(Rng(cfg.seed).fork(static_cast<uint64_t>(party_id))),
        data(&d) {
    model.load_params(init);
  }
};

inline std::vector<uint8_t> a_outgoing_message(Party& a, uint32_t round) {
  ParamMessage msg;
  msg.round = round;
  msg.party = 0;
  msg.data_size = a.data->size();
  msg.payload = QuantizedParamSet::from(a.model.params());
  auto bytes = msg.encode();
  a.sent_bytes.push_back(bytes.size());
  return bytes;
}

inline void a_adopt_reply(Party& a, const std::vector<uint8_t>& reply,
                          const CoopConfig& cfg) {
  const ParamMessage back = ParamMessage::decode(reply);
  a.model.load_params(back.payload.dequantized());
  a.opt.reset();
  if (cfg.verify_exchange_equality)
    a.post_exchange_state.push_back(a.model.params().serialize());
}

// A's side of one exchange: send quantized parameters, adopt the returned
// aggregate. Returns false if the peer aborted.
inline bool exchange_as_a(Party& a, uint32_t round, MessageQueue& to_b,
                          MessageQueue& from_b, const CoopConfig& cfg) {
  to_b.push(a_outgoing_message(a, round));
  auto reply = from_b.pop();
  if (reply.empty()) return false;  // peer aborted
  a_adopt_reply(a, reply, cfg);
  return true;
}

// B's side: receive A's parameters, aggregate with data-size weights,
// return the quantized aggregate and adopt its own dequantized copy, so both
// parties land on bitwise-identical states.
inline bool exchange_as_b(Party& b, uint32_t round, MessageQueue& from_a,
                          MessageQueue& to_a, const CoopConfig& cfg) {
  auto bytes = from_a.pop();
  if (bytes.empty()) return false;
  const ParamMessage msg = ParamMessage::decode(bytes);
  const ParamSet theta_a = msg.payload.dequantized();
  const AggregationWeights w =
      AggregationWeights::from_data_sizes(msg.data_size, b.data->size());
  const ParamSet aggregated = aggregate(theta_a, b.model.params(), w);
  ParamMessage reply;
  reply.round = round;
  reply.party = 1;
  reply.data_size = b.data->size();
  reply.payload = QuantizedParamSet::from(aggregated);
  auto reply_bytes = reply.encode();
  b.sent_bytes.push_back(reply_bytes.size());
  // Adopt via the same decode path A will run on these bytes.
  const ParamMessage own = ParamMessage::decode(reply_bytes);
  to_a.push(std::move(reply_bytes));
  b.model.load_params(own.payload.dequantized());
  b.opt.reset();
  if (cfg.verify_exchange_equality)
    b.post_exchange_state.push_back(b.model.params().serialize());
  return true;
}

inline void party_loop(Party& p, const CoopConfig& cfg, const ExchangeSchedule& sched,
                       MessageQueue& a_to_b, MessageQueue& b_to_a) {
  uint32_t round = 0;
  for (int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    try {
      p.losses.push_back(p.model.train_epoch(*p.data, cfg.train_channel, p.opt,
                                             p.rng, cfg.batch_size));
    } catch (const TrainingDiverged& e) {
      p.failed = true;
      p.failure = e.what();
      // Unblock the peer if it is waiting on this party.
      if (p.id == 0) a_to_b.push({});
      else b_to_a.push({});
      return;
    }
    if (sched.is_exchange_epoch(epoch)) {
      ++round;
      const bool ok = (p.id == 0) ? exchange_as_a(p, round, a_to_b, b_to_a, cfg)
                                  : exchange_as_b(p, round, a_to_b, b_to_a, cfg);
      if (!ok) {
        p.failed = true;
        p.failure = "peer aborted during exchange";
        return;
      }
    }
  }
}

}  // namespace detail

// The full cooperative loop: both parties run local epochs on their own data
// and rendezvous at every scheduled epoch for quantized parameter exchange
// with data-size-weighted aggregation. The sequential and concurrent modes
// produce bitwise-identical results.
inline CoopResult run_cooperative_training(const CoopConfig& cfg,
                                           const std::vector<IdSeq>& data_a,
                                           const std::vector<IdSeq>& data_b,
                                           const ParamSet& init) {
  const ExchangeSchedule sched = cfg.rounds == 0
                                     ? ExchangeSchedule::none(cfg.epochs)
                                     : ExchangeSchedule::make(cfg.epochs, cfg.rounds);
  detail::Party a(0, cfg, init, data_a);
  detail::Party b(1, cfg, init, data_b);
  MessageQueue a_to_b, b_to_a;

  if (cfg.concurrent) {
    std::thread ta([&] { detail::party_loop(a, cfg, sched, a_to_b, b_to_a); });
    std::thread tb([&] { detail::party_loop(b, cfg, sched, a_to_b, b_to_a); });
    ta.join();
    tb.join();
  } else {
    // Same steps, one worker: train both parties each epoch, then run the
    // exchange in A-send, B-aggregate, A-adopt order.
    uint32_t round = 0;
    for (int64_t epoch = 1; epoch <= cfg.epochs && !a.failed && !b.failed; ++epoch) {
      for (detail::Party* p : {&a, &b}) {
        try {
          p->losses.push_back(p->model.train_epoch(*p->data, cfg.train_channel,
                                                   p->opt, p->rng, cfg.batch_size));
        } catch (const TrainingDiverged& e) {
          p->failed = true;
          p->failure = e.what();
        }
      }
      if (a.failed || b.failed) break;
      if (sched.is_exchange_epoch(epoch)) {
        ++round;
        // A's message is produced first, so B's (blocking) pop finds it.
        a_to_b.push(detail::a_outgoing_message(a, round));
        detail::exchange_as_b(b, round, a_to_b, b_to_a, cfg);
        detail::a_adopt_reply(a, b_to_a.pop(), cfg);
      }
    }
  }

  CoopResult result;
  CoopRunRecord& rec = result.record;
  rec.loss_a = a.losses;
  rec.loss_b = b.losses;
  rec.exchange_epochs = sched.exchange_epochs;
  rec.diverged = a.failed || b.failed;
  if (a.failed) rec.divergence_note = "party A: " + a.failure;
  if (b.failed) rec.divergence_note += (rec.divergence_note.empty() ? "" : "; ") +
                                       ("party B: " + b.failure);
  const size_t rounds_done = std::min(a.sent_bytes.size(), b.sent_bytes.size());
  for (size_t r = 0; r < rounds_done; ++r) {
    rec.round_bytes.push_back(a.sent_bytes[r] + b.sent_bytes[r]);
    rec.total_exchanged_bytes += rec.round_bytes.back();
  }
  if (!a.sent_bytes.empty()) rec.message_bytes_a_to_b = a.sent_bytes.front();
  if (cfg.verify_exchange_equality) {
    const size_t n = std::min(a.post_exchange_state.size(), b.post_exchange_state.size());
    for (size_t r = 0; r < n; ++r)
      rec.post_exchange_equal.push_back(a.post_exchange_state[r] ==
                                        b.post_exchange_state[r]);
  }
  result.final_a = a.model.params().deep_copy();
  result.final_b = b.model.params().deep_copy();
  return result;
}

// One party trained alone on its own data; shares the cooperative code path
// with exchanges disabled, so comparisons isolate the effect of cooperation.
inline ParamSet run_self_training(const CoopConfig& cfg, const std::vector<IdSeq>& data,
                                  int party_id, const ParamSet& init,
                                  std::vector<double>* losses = nullptr) {
  detail::Party p(party_id, cfg, init, data);
  const ExchangeSchedule sched = ExchangeSchedule::none(cfg.epochs);
  MessageQueue unused_a, unused_b;
  detail::party_loop(p, cfg, sched, unused_a, unused_b);
  if (p.failed) throw TrainingDiverged(p.failure);
  if (losses) *losses = p.losses;
  return p.model.params().deep_copy();
}

}  // namespace semcom
