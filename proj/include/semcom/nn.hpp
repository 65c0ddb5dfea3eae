#pragma once

#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "semcom/autodiff.hpp"
#include "semcom/params.hpp"
#include "semcom/rng.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

// Owns the trainable parameters of one model instance, in definition order.
class ParamStore {
 public:
  Param& create(std::string name, std::vector<int64_t> shape) {
    params_.emplace_back(std::move(name), Tensor(std::move(shape)));
    return params_.back();
  }

  size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // Snapshot sharing storage with the live parameters (cheap; mutations
  // through either side are visible to both).
  ParamSet snapshot() const {
    ParamSet ps;
    for (const auto& p : params_) ps.add(p.name, p.value);
    return ps;
  }

  void load(const ParamSet& ps) {
    ParamSet mine = snapshot();
    mine.assign_from(ps);
  }

  void zero_grads() {
    for (auto& p : params_) p.grad.fill(0.0f);
    grads_ready_ = false;
  }

  void mark_grads_ready() { grads_ready_ = true; }
  bool grads_ready() const { return grads_ready_; }

  int64_t total_elements() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

 private:
  std::deque<Param> params_;  // stable addresses
  bool grads_ready_ = false;
};

// Adaptive-moment optimizer with bias correction.
class AdamOptimizer {
 public:
  struct Config {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.98f;
    float eps = 1e-9f;
  };

  AdamOptimizer() = default;
  explicit AdamOptimizer(Config cfg) : cfg_(cfg) {}

  const Config& config() const { return cfg_; }
  int64_t step_count() const { return t_; }

  void step(ParamStore& store) {
    if (!store.grads_ready())
      throw std::logic_error("optimizer step: gradients not populated");
    if (slots_.empty())
      for (auto& p : store)
        slots_.push_back({Tensor(p.value.shape()), Tensor(p.value.shape())});
    ++t_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_));
    size_t i = 0;
    for (auto& p : store) {
      Slot& s = slots_[i++];
      float* m = s.m.data();
      float* v = s.v.data();
      float* w = p.value.data();
      const float* g = p.grad.data();
      const int64_t n = p.value.numel();
      for (int64_t j = 0; j < n; ++j) {
        m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * g[j];
        v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * g[j] * g[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        w[j] -= static_cast<float>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
    store.zero_grads();
  }

  // Aggregated parameters invalidate the moment history; called at every
  // cooperative exchange.
  void reset() {
    for (auto& s : slots_) {
      s.m.fill(0.0f);
      s.v.fill(0.0f);
    }
    t_ = 0;
  }

 private:
  struct Slot {
    Tensor m, v;
  };
  Config cfg_;
  std::vector<Slot> slots_;
  int64_t t_ = 0;
};

namespace init {

inline void xavier_uniform(Tensor& t, int64_t fan_in, int64_t fan_out, Rng& rng) {
  const float a = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-a, a);
}

inline void normal(Tensor& t, float stddev, Rng& rng) {
  for (int64_t i = 0; i < t.numel(); ++i)
    t.data()[i] = rng.gaussian_f() * stddev;
}

}  // namespace init

// Sinusoidal positional encoding table [max_len, d].
inline Tensor positional_encoding(int64_t max_len, int64_t d) {
  Tensor pe({max_len, d});
  for (int64_t pos = 0; pos < max_len; ++pos)
    for (int64_t i = 0; i < d; ++i) {
      const double angle =
          static_cast<double>(pos) /
          std::pow(10000.0, 2.0 * static_cast<double>(i / 2) / static_cast<double>(d));
      pe.data()[pos * d + i] =
          static_cast<float>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  return pe;
}

}  // namespace semcom
