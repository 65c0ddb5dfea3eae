#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <stdexcept>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

// Reverse-mode autodiff over a per-step tape. A Graph owns the nodes of one
// forward pass; backward() walks the tape in reverse creation order (which is
// a topological order by construction) and is valid exactly once.
//
// Parameter leaves share their grad storage with the owning Param, so
// backward() accumulates straight into the parameter gradients.

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
};

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::function<void(Node&)> backward;  // accumulate into parents, may be empty
  // Scalar reductions also keep their double-precision value; finite-
  // difference checks read it to avoid the final FP32 rounding.
  double scalar_double = 0.0;
};

class Graph {
 public:
  // enable_grad=false builds a forward-only graph (no gradient buffers);
  // backward() on such a graph is an error.
  explicit Graph(bool enable_grad = true) : enable_grad_(enable_grad) {}

  Node* constant(Tensor v) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(v);
    n.requires_grad = false;
    return &n;
  }

  Node* param(Param& p) {
    Node& n = nodes_.emplace_back();
    n.value = p.value;  // shared storage
    if (enable_grad_) {
      n.grad = p.grad;  // shared storage: backward writes the param grad
      n.requires_grad = true;
    }
    return &n;
  }

  // ---- elementwise ----

  Node* add(Node* a, Node* b) {
    check_same_shape(a, b, "add");
    Node* out = alloc(a->value.shape(), a->requires_grad || b->requires_grad);
    const float* pa = a->value.data();
    const float* pb = b->value.data();
    float* po = out->value.data();
    const int64_t n = a->value.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    if (out->requires_grad)
      out->backward = [a, b, n](Node& self) {
        const float* g = self.grad.data();
        if (a->requires_grad) {
          float* ga = a->grad.data();
          for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (b->requires_grad) {
          float* gb = b->grad.data();
          for (int64_t i = 0; i < n; ++i) gb[i] += g[i];
        }
      };
    return out;
  }

  // x[..., D] + bias[D]
  Node* add_bias(Node* x, Node* bias) {
    const int64_t d = bias->value.numel();
    if (x->value.numel() % d != 0)
      throw std::invalid_argument("add_bias: dimension mismatch");
    Node* out = alloc(x->value.shape(), x->requires_grad || bias->requires_grad);
    const int64_t rows = x->value.numel() / d;
    const float* px = x->value.data();
    const float* pb = bias->value.data();
    float* po = out->value.data();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t j = 0; j < d; ++j) po[r * d + j] = px[r * d + j] + pb[j];
    if (out->requires_grad)
      out->backward = [x, bias, rows, d](Node& self) {
        const float* g = self.grad.data();
        if (x->requires_grad) {
          float* gx = x->grad.data();
          const int64_t n = rows * d;
          for (int64_t i = 0; i < n; ++i) gx[i] += g[i];
        }
        if (bias->requires_grad) {
          float* gb = bias->grad.data();
          for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
        }
      };
    return out;
  }

  Node* scale(Node* a, float c) {
    Node* out = alloc(a->value.shape(), a->requires_grad);
    const float* pa = a->value.data();
    float* po = out->value.data();
    const int64_t n = a->value.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * c;
    if (out->requires_grad)
      out->backward = [a, c, n](Node& self) {
        const float* g = self.grad.data();
        float* ga = a->grad.data();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * c;
      };
    return out;
  }

  // a + c where c carries no gradient (noise injection, positional encoding,
  // additive attention masks).
  Node* add_const(Node* a, const Tensor& c) {
    if (!a->value.same_shape(c))
      throw std::invalid_argument("add_const: shape mismatch");
    Node* out = alloc(a->value.shape(), a->requires_grad);
    const float* pa = a->value.data();
    const float* pc = c.data();
    float* po = out->value.data();
    const int64_t n = a->value.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pc[i];
    if (out->requires_grad)
      out->backward = [a, n](Node& self) {
        const float* g = self.grad.data();
        float* ga = a->grad.data();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
      };
    return out;
  }

  Node* mul_const(Node* a, const Tensor& c) {
    if (!a->value.same_shape(c))
      throw std::invalid_argument("mul_const: shape mismatch");
    Node* out = alloc(a->value.shape(), a->requires_grad);
    const float* pa = a->value.data();
    const float* pc = c.data();
    float* po = out->value.data();
    const int64_t n = a->value.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pc[i];
    if (out->requires_grad)
      out->backward = [a, c, n](Node& self) {
        const float* g = self.grad.data();
        const float* pc2 = c.data();
        float* ga = a->grad.data();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * pc2[i];
      };
    return out;
  }

  Node* relu(Node* a) {
    Node* out = alloc(a->value.shape(), a->requires_grad);
    const float* pa = a->value.data();
    float* po = out->value.data();
    const int64_t n = a->value.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] > 0.0f ? pa[i] : 0.0f;
    if (out->requires_grad)
      out->backward = [a, n](Node& self) {
        const float* g = self.grad.data();
        const float* pa2 = a->value.data();
        float* ga = a->grad.data();
        for (int64_t i = 0; i < n; ++i)
          if (pa2[i] > 0.0f) ga[i] += g[i];
      };
    return out;
  }

  // ---- shape ----

  // Zero-cost view: value and grad share the parent's storage, so no
  // backward work is needed.
  Node* reshape(Node* a, std::vector<int64_t> shape) {
    Node& n = nodes_.emplace_back();
    n.value = a->value.reshaped(shape);
    n.requires_grad = a->requires_grad;
    if (a->requires_grad) n.grad = a->grad.reshaped(std::move(shape));
    return &n;
  }

  // [A,B,C,D] -> [A,C,B,D]
  Node* permute_0213(Node* a) {
    const auto& s = a->value.shape();
    if (s.size() != 4) throw std::invalid_argument("permute_0213: need rank 4");
    const int64_t A = s[0], B = s[1], C = s[2], D = s[3];
    Node* out = alloc({A, C, B, D}, a->requires_grad);
    const float* pa = a->value.data();
    float* po = out->value.data();
    for (int64_t i = 0; i < A; ++i)
      for (int64_t j = 0; j < B; ++j)
        for (int64_t k = 0; k < C; ++k) {
          const float* src = pa + ((i * B + j) * C + k) * D;
          float* dst = po + ((i * C + k) * B + j) * D;
          std::copy(src, src + D, dst);
        }
    if (out->requires_grad)
      out->backward = [a, A, B, C, D](Node& self) {
        const float* g = self.grad.data();
        float* ga = a->grad.data();
        for (int64_t i = 0; i < A; ++i)
          for (int64_t j = 0; j < B; ++j)
            for (int64_t k = 0; k < C; ++k) {
              const float* src = g + ((i * C + k) * B + j) * D;
              float* dst = ga + ((i * B + j) * C + k) * D;
              for (int64_t l = 0; l < D; ++l) dst[l] += src[l];
            }
      };
    return out;
  }

  // ---- linear algebra ----

  // x[..., K] * w[K, N] -> [..., N]
  Node* linear(Node* x, Node* w) {
    const auto& ws = w->value.shape();
    if (ws.size() != 2) throw std::invalid_argument("linear: weight must be rank 2");
    const int64_t K = ws[0], N = ws[1];
    if (x->value.numel() % K != 0 || x->value.shape().back() != K)
      throw std::invalid_argument("linear: inner dimension mismatch");
    const int64_t R = x->value.numel() / K;
    std::vector<int64_t> out_shape = x->value.shape();
    out_shape.back() = N;
    Node* out = alloc(out_shape, x->requires_grad || w->requires_grad);
    matmul(x->value.data(), w->value.data(), out->value.data(), R, K, N);
    if (out->requires_grad)
      out->backward = [x, w, R, K, N](Node& self) {
        const float* g = self.grad.data();
        if (x->requires_grad) {
          // gx[r,k] = sum_n g[r,n] * w[k,n]
          const float* pw = w->value.data();
          float* gx = x->grad.data();
          for (int64_t r = 0; r < R; ++r)
            for (int64_t k = 0; k < K; ++k) {
              const float* grow = g + r * N;
              const float* wrow = pw + k * N;
              double acc = 0.0;
              for (int64_t n2 = 0; n2 < N; ++n2) acc += static_cast<double>(grow[n2]) * wrow[n2];
              gx[r * K + k] += static_cast<float>(acc);
            }
        }
        if (w->requires_grad) {
          // gw[k,n] += sum_r x[r,k] * g[r,n]
          const float* px = x->value.data();
          float* gw = w->grad.data();
          for (int64_t r = 0; r < R; ++r)
            for (int64_t k = 0; k < K; ++k) {
              const float a = px[r * K + k];
              if (a == 0.0f) continue;
              const float* grow = g + r * N;
              float* wrow = gw + k * N;
              for (int64_t n2 = 0; n2 < N; ++n2) wrow[n2] += a * grow[n2];
            }
        }
      };
    return out;
  }

  // a[G,M,K] x b[G,N,K]^T -> [G,M,N]  (attention scores)
  Node* bmm_nt(Node* a, Node* b) {
    const auto& sa = a->value.shape();
    const auto& sb = b->value.shape();
    if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0] || sa[2] != sb[2])
      throw std::invalid_argument("bmm_nt: shape mismatch");
    const int64_t G = sa[0], M = sa[1], K = sa[2], N = sb[1];
    Node* out = alloc({G, M, N}, a->requires_grad || b->requires_grad);
    for (int64_t g = 0; g < G; ++g) {
      const float* pa = a->value.data() + g * M * K;
      const float* pb = b->value.data() + g * N * K;
      float* po = out->value.data() + g * M * N;
      for (int64_t m = 0; m < M; ++m)
        for (int64_t n2 = 0; n2 < N; ++n2) {
          double acc = 0.0;
          const float* ar = pa + m * K;
          const float* br = pb + n2 * K;
          for (int64_t k = 0; k < K; ++k) acc += static_cast<double>(ar[k]) * br[k];
          po[m * N + n2] = static_cast<float>(acc);
        }
    }
    if (out->requires_grad)
      out->backward = [a, b, G, M, K, N](Node& self) {
        for (int64_t g = 0; g < G; ++g) {
          const float* gout = self.grad.data() + g * M * N;
          const float* pa = a->value.data() + g * M * K;
          const float* pb = b->value.data() + g * N * K;
          if (a->requires_grad) {
            float* ga = a->grad.data() + g * M * K;
            // ga[m,k] += sum_n gout[m,n] * b[n,k]
            for (int64_t m = 0; m < M; ++m)
              for (int64_t n2 = 0; n2 < N; ++n2) {
                const float gv = gout[m * N + n2];
                if (gv == 0.0f) continue;
                const float* br = pb + n2 * K;
                float* gar = ga + m * K;
                for (int64_t k = 0; k < K; ++k) gar[k] += gv * br[k];
              }
          }
          if (b->requires_grad) {
            float* gb = b->grad.data() + g * N * K;
            // gb[n,k] += sum_m gout[m,n] * a[m,k]
            for (int64_t m = 0; m < M; ++m)
              for (int64_t n2 = 0; n2 < N; ++n2) {
                const float gv = gout[m * N + n2];
                if (gv == 0.0f) continue;
                const float* ar = pa + m * K;
                float* gbr = gb + n2 * K;
                for (int64_t k = 0; k < K; ++k) gbr[k] += gv * ar[k];
              }
          }
        }
      };
    return out;
  }

  // a[G,M,K] x b[G,K,N] -> [G,M,N]  (attention context)
  Node* bmm_nn(Node* a, Node* b) {
    const auto& sa = a->value.shape();
    const auto& sb = b->value.shape();
    if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0] || sa[2] != sb[1])
      throw std::invalid_argument("bmm_nn: shape mismatch");
    const int64_t G = sa[0], M = sa[1], K = sa[2], N = sb[2];
    Node* out = alloc({G, M, N}, a->requires_grad || b->requires_grad);
    for (int64_t g = 0; g < G; ++g)
      matmul(a->value.data() + g * M * K, b->value.data() + g * K * N,
             out->value.data() + g * M * N, M, K, N);
    if (out->requires_grad)
      out->backward = [a, b, G, M, K, N](Node& self) {
        for (int64_t g = 0; g < G; ++g) {
          const float* gout = self.grad.data() + g * M * N;
          const float* pa = a->value.data() + g * M * K;
          const float* pb = b->value.data() + g * K * N;
          if (a->requires_grad) {
            float* ga = a->grad.data() + g * M * K;
            // ga[m,k] += sum_n gout[m,n] * b[k,n]
            for (int64_t m = 0; m < M; ++m)
              for (int64_t k = 0; k < K; ++k) {
                const float* grow = gout + m * N;
                const float* brow = pb + k * N;
                double acc = 0.0;
                for (int64_t n2 = 0; n2 < N; ++n2) acc += static_cast<double>(grow[n2]) * brow[n2];
                ga[m * K + k] += static_cast<float>(acc);
              }
          }
          if (b->requires_grad) {
            float* gb = b->grad.data() + g * K * N;
            // gb[k,n] += sum_m a[m,k] * gout[m,n]
            for (int64_t m = 0; m < M; ++m)
              for (int64_t k = 0; k < K; ++k) {
                const float av = pa[m * K + k];
                if (av == 0.0f) continue;
                const float* grow = gout + m * N;
                float* gbr = gb + k * N;
                for (int64_t n2 = 0; n2 < N; ++n2) gbr[n2] += av * grow[n2];
              }
          }
        }
      };
    return out;
  }

  // table[V,D] gathered by ids -> [rows(ids), D]
  Node* embedding(Node* table, const std::vector<int32_t>& ids) {
    const auto& ts = table->value.shape();
    if (ts.size() != 2) throw std::invalid_argument("embedding: table must be rank 2");
    const int64_t V = ts[0], D = ts[1];
    const int64_t R = static_cast<int64_t>(ids.size());
    Node* out = alloc({R, D}, table->requires_grad);
    const float* pt = table->value.data();
    float* po = out->value.data();
    for (int64_t r = 0; r < R; ++r) {
      const int32_t id = ids[static_cast<size_t>(r)];
      if (id < 0 || id >= V) throw std::out_of_range("embedding: id out of range");
      std::copy(pt + id * D, pt + (id + 1) * D, po + r * D);
    }
    if (out->requires_grad)
      out->backward = [table, ids, D](Node& self) {
        const float* g = self.grad.data();
        float* gt = table->grad.data();
        for (size_t r = 0; r < ids.size(); ++r) {
          float* dst = gt + static_cast<int64_t>(ids[r]) * D;
          const float* src = g + static_cast<int64_t>(r) * D;
          for (int64_t j = 0; j < D; ++j) dst[j] += src[j];
        }
      };
    return out;
  }

  // ---- normalization & activations over the last dimension ----

  Node* layer_norm(Node* x, Node* gamma, Node* beta, float eps = 1e-5f) {
    const int64_t d = gamma->value.numel();
    if (beta->value.numel() != d || x->value.shape().back() != d)
      throw std::invalid_argument("layer_norm: dimension mismatch");
    const int64_t rows = x->value.numel() / d;
    Node* out = alloc(x->value.shape(),
                      x->requires_grad || gamma->requires_grad || beta->requires_grad);
    // Cache normalized activations and inverse stddev for backward.
    auto xhat = std::make_shared<std::vector<float>>(static_cast<size_t>(rows * d));
    auto inv_std = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
    const float* px = x->value.data();
    const float* pg = gamma->value.data();
    const float* pb = beta->value.data();
    float* po = out->value.data();
    for (int64_t r = 0; r < rows; ++r) {
      const float* row = px + r * d;
      double mean = 0.0;
      for (int64_t j = 0; j < d; ++j) mean += row[j];
      mean /= static_cast<double>(d);
      double var = 0.0;
      for (int64_t j = 0; j < d; ++j) {
        const double t = row[j] - mean;
        var += t * t;
      }
      var /= static_cast<double>(d);
      const float istd = static_cast<float>(1.0 / std::sqrt(var + eps));
      (*inv_std)[static_cast<size_t>(r)] = istd;
      for (int64_t j = 0; j < d; ++j) {
        const float xh = (row[j] - static_cast<float>(mean)) * istd;
        (*xhat)[static_cast<size_t>(r * d + j)] = xh;
        po[r * d + j] = pg[j] * xh + pb[j];
      }
    }
    if (out->requires_grad)
      out->backward = [x, gamma, beta, xhat, inv_std, rows, d](Node& self) {
        const float* g = self.grad.data();
        const float* pg2 = gamma->value.data();
        if (gamma->requires_grad) {
          float* gg = gamma->grad.data();
          for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < d; ++j)
              gg[j] += g[r * d + j] * (*xhat)[static_cast<size_t>(r * d + j)];
        }
        if (beta->requires_grad) {
          float* gb = beta->grad.data();
          for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
        }
        if (x->requires_grad) {
          float* gx = x->grad.data();
          for (int64_t r = 0; r < rows; ++r) {
            double mean_dy = 0.0, mean_dy_xhat = 0.0;
            for (int64_t j = 0; j < d; ++j) {
              const double dy = static_cast<double>(g[r * d + j]) * pg2[j];
              mean_dy += dy;
              mean_dy_xhat += dy * (*xhat)[static_cast<size_t>(r * d + j)];
            }
            mean_dy /= static_cast<double>(d);
            mean_dy_xhat /= static_cast<double>(d);
            const float istd = (*inv_std)[static_cast<size_t>(r)];
            for (int64_t j = 0; j < d; ++j) {
              const double dy = static_cast<double>(g[r * d + j]) * pg2[j];
              const double xh = (*xhat)[static_cast<size_t>(r * d + j)];
              gx[r * d + j] += static_cast<float>(istd * (dy - mean_dy - xh * mean_dy_xhat));
            }
          }
        }
      };
    return out;
  }

  Node* softmax_rows(Node* x) {
    const int64_t d = x->value.shape().back();
    const int64_t rows = x->value.numel() / d;
    Node* out = alloc(x->value.shape(), x->requires_grad);
    const float* px = x->value.data();
    float* po = out->value.data();
    for (int64_t r = 0; r < rows; ++r) {
      const float* row = px + r * d;
      float mx = row[0];
      for (int64_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
      double denom = 0.0;
      for (int64_t j = 0; j < d; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
      const double inv = 1.0 / denom;
      for (int64_t j = 0; j < d; ++j)
        po[r * d + j] = static_cast<float>(std::exp(static_cast<double>(row[j] - mx)) * inv);
    }
    if (out->requires_grad)
      out->backward = [x, out, rows, d](Node& self) {
        const float* g = self.grad.data();
        const float* y = out->value.data();
        float* gx = x->grad.data();
        for (int64_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (int64_t j = 0; j < d; ++j)
            dot += static_cast<double>(g[r * d + j]) * y[r * d + j];
          for (int64_t j = 0; j < d; ++j)
            gx[r * d + j] += static_cast<float>(
                y[r * d + j] * (static_cast<double>(g[r * d + j]) - dot));
        }
      };
    return out;
  }

  // ---- reductions and task heads ----

  Node* sum(Node* x) {
    Node* out = alloc({1}, x->requires_grad);
    double acc = 0.0;
    const float* px = x->value.data();
    const int64_t n = x->value.numel();
    for (int64_t i = 0; i < n; ++i) acc += px[i];
    out->scalar_double = acc;
    out->value.at(0) = static_cast<float>(acc);
    if (out->requires_grad)
      out->backward = [x, n](Node& self) {
        const float g = self.grad.at(0);
        float* gx = x->grad.data();
        for (int64_t i = 0; i < n; ++i) gx[i] += g;
      };
    return out;
  }

  // Mean of -log softmax(logits)[target] over rows with mask != 0.
  // logits [R,V]; targets/mask length R. Throws if every row is masked.
  Node* cross_entropy(Node* logits, const std::vector<int32_t>& targets,
                      const std::vector<float>& mask) {
    const int64_t V = logits->value.shape().back();
    const int64_t R = logits->value.numel() / V;
    if (static_cast<int64_t>(targets.size()) != R ||
        static_cast<int64_t>(mask.size()) != R)
      throw std::invalid_argument("cross_entropy: target/mask length mismatch");
    double n_valid = 0.0;
    for (float m : mask) n_valid += m;
    if (n_valid <= 0.0)
      throw std::invalid_argument("cross_entropy: all positions masked");
    Node* out = alloc({1}, logits->requires_grad);
    auto probs = std::make_shared<std::vector<float>>(static_cast<size_t>(R * V));
    const float* pl = logits->value.data();
    double loss = 0.0;
    for (int64_t r = 0; r < R; ++r) {
      const float* row = pl + r * V;
      float mx = row[0];
      for (int64_t j = 1; j < V; ++j) mx = std::max(mx, row[j]);
      double denom = 0.0;
      for (int64_t j = 0; j < V; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
      const double log_denom = std::log(denom);
      for (int64_t j = 0; j < V; ++j)
        (*probs)[static_cast<size_t>(r * V + j)] =
            static_cast<float>(std::exp(static_cast<double>(row[j] - mx)) / denom);
      if (mask[static_cast<size_t>(r)] != 0.0f) {
        const int32_t t = targets[static_cast<size_t>(r)];
        if (t < 0 || t >= V) throw std::out_of_range("cross_entropy: target id");
        loss += mask[static_cast<size_t>(r)] *
                (log_denom - static_cast<double>(row[t] - mx));
      }
    }
    out->scalar_double = loss / n_valid;
    out->value.at(0) = static_cast<float>(loss / n_valid);
    if (out->requires_grad)
      out->backward = [logits, targets, mask, probs, R, V, n_valid](Node& self) {
        const float g = self.grad.at(0);
        float* gl = logits->grad.data();
        for (int64_t r = 0; r < R; ++r) {
          const float m = mask[static_cast<size_t>(r)];
          if (m == 0.0f) continue;
          const float coef = g * m / static_cast<float>(n_valid);
          const int32_t t = targets[static_cast<size_t>(r)];
          const float* prow = probs->data() + r * V;
          float* grow = gl + r * V;
          for (int64_t j = 0; j < V; ++j) grow[j] += coef * prow[j];
          grow[t] -= coef;
        }
      };
    return out;
  }

  // Scales x so the mean power of valid complex symbols is one. x is viewed
  // as consecutive (re,im) pairs; valid has one entry per pair. Invalid pairs
  // are scaled with the same factor but do not enter the power estimate.
  Node* power_normalize(Node* x, const std::vector<uint8_t>& valid) {
    const int64_t n = x->value.numel();
    if (n % 2 != 0 || static_cast<int64_t>(valid.size()) != n / 2)
      throw std::invalid_argument("power_normalize: bad mask length");
    int64_t n_valid = 0;
    double total = 0.0;
    const float* px = x->value.data();
    for (int64_t s = 0; s < n / 2; ++s) {
      if (!valid[static_cast<size_t>(s)]) continue;
      ++n_valid;
      total += static_cast<double>(px[2 * s]) * px[2 * s] +
               static_cast<double>(px[2 * s + 1]) * px[2 * s + 1];
    }
    if (n_valid == 0)
      throw std::invalid_argument("power_normalize: no valid symbols");
    const double mean_power = total / static_cast<double>(n_valid) + 1e-12;
    const float nu = static_cast<float>(1.0 / std::sqrt(mean_power));
    Node* out = alloc(x->value.shape(), x->requires_grad);
    float* po = out->value.data();
    for (int64_t i = 0; i < n; ++i) po[i] = px[i] * nu;
    if (out->requires_grad)
      out->backward = [x, valid, n, n_valid, nu](Node& self) {
        const float* g = self.grad.data();
        const float* px2 = x->value.data();
        float* gx = x->grad.data();
        double gdotx = 0.0;
        for (int64_t i = 0; i < n; ++i)
          gdotx += static_cast<double>(g[i]) * px2[i];
        const double correction =
            gdotx * static_cast<double>(nu) * nu * nu / static_cast<double>(n_valid);
        for (int64_t i = 0; i < n; ++i) {
          double gi = static_cast<double>(g[i]) * nu;
          if (valid[static_cast<size_t>(i / 2)]) gi -= px2[i] * correction;
          gx[i] += static_cast<float>(gi);
        }
      };
    return out;
  }

  // Runs accumulation in reverse tape order. Valid once per graph.
  void backward(Node* loss) {
    if (nodes_.empty()) throw std::logic_error("backward: empty graph");
    if (backward_done_) throw std::logic_error("backward: already run");
    if (loss == nullptr || loss->value.numel() != 1)
      throw std::invalid_argument("backward: loss must be a scalar node");
    backward_done_ = true;
    if (!loss->requires_grad) return;  // constant loss: every gradient is zero
    loss->grad.at(0) = 1.0f;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
      if (it->requires_grad && it->backward) it->backward(*it);
  }

  size_t size() const { return nodes_.size(); }

 private:
  Node* alloc(std::vector<int64_t> shape, bool requires_grad) {
    Node& n = nodes_.emplace_back();
    n.value = Tensor(shape);
    n.requires_grad = requires_grad;
    if (requires_grad) n.grad = Tensor(std::move(shape));
    return &n;
  }

  static void check_same_shape(Node* a, Node* b, const char* op) {
    if (!a->value.same_shape(b->value))
      throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                  a->value.shape_str() + " vs " + b->value.shape_str());
  }

  // out[M,N] = a[M,K] * b[K,N], accumulating in the output buffer.
  static void matmul(const float* a, const float* b, float* out, int64_t M,
                     int64_t K, int64_t N) {
    for (int64_t m = 0; m < M; ++m) {
      float* orow = out + m * N;
      std::fill(orow, orow + N, 0.0f);
      const float* arow = a + m * K;
      for (int64_t k = 0; k < K; ++k) {
        const float av = arow[k];
        if (av == 0.0f) continue;
        const float* brow = b + k * N;
        for (int64_t n = 0; n < N; ++n) orow[n] += av * brow[n];
      }
    }
  }

  std::deque<Node> nodes_;
  bool enable_grad_ = true;
  bool backward_done_ = false;
};

}  // namespace semcom
