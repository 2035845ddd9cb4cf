#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsr/numcore/graph.hpp"
#include "gsr/numcore/tensor.hpp"

// Primitive differentiable operations. Every op computes its value eagerly and
// registers a backward rule that accumulates into its inputs' gradient buffers.

namespace gsr {

class DegenerateVectorError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class EmptySequenceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Activation { Tanh, Sigmoid, Relu };

/// Norm below which l2_normalize refuses to divide.
inline constexpr double kNormFloor = 1e-12;

namespace detail {

template <class T>
void same_graph(Var<T> a, Var<T> b) {
  if (a.graph == nullptr || a.graph != b.graph)
    throw std::logic_error("operands belong to different graphs");
}

template <class T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

inline std::string shapes(const Shape& a, const Shape& b) { return a.str() + " and " + b.str(); }

template <class T>
void add_into(std::span<T> dst, std::span<const T> src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

/// W x for W [m x n], x [n].
template <class T>
Var<T> matvec(Var<T> W, Var<T> x) {
  detail::same_graph(W, x);
  const auto& w = W.value();
  const auto& xv = x.value();
  if (w.rank() != 2 || w.dim(1) != xv.size())
    throw DimensionError("matvec: incompatible shapes " + detail::shapes(w.shape(), xv.shape()));
  const std::size_t m = w.dim(0), n = w.dim(1);
  Tensor<T> out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    T acc = 0;
    const T* wr = &w[i * n];
    for (std::size_t j = 0; j < n; ++j) acc += wr[j] * xv[j];
    out[i] = acc;
  }
  const auto wid = W.id, xid = x.id;
  const bool wg = W.requires_grad(), xg = x.requires_grad();
  return W.graph->push(std::move(out), wg || xg,
                       [wid, xid, wg, xg, m, n](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                         const auto& w = gr.value(wid);
                         const auto& xv = gr.value(xid);
                         if (wg) {
                           auto gw = gr.grad_ref(wid);
                           for (std::size_t i = 0; i < m; ++i) {
                             const T gi = go[i];
                             if (gi == T(0)) continue;
                             T* row = &gw[i * n];
                             for (std::size_t j = 0; j < n; ++j) row[j] += gi * xv[j];
                           }
                         }
                         if (xg) {
                           auto gx = gr.grad_ref(xid);
                           for (std::size_t i = 0; i < m; ++i) {
                             const T gi = go[i];
                             const T* wr = &w[i * n];
                             for (std::size_t j = 0; j < n; ++j) gx[j] += wr[j] * gi;
                           }
                         }
                       });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::same_graph(a, b);
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const auto ai = a.id, bi = b.id;
  const bool ag = a.requires_grad(), bg = b.requires_grad();
  return a.graph->push(std::move(out), ag || bg,
                       [ai, bi, ag, bg](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                         if (ag) detail::add_into(gr.grad_ref(ai), go);
                         if (bg) detail::add_into(gr.grad_ref(bi), go);
                       });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::same_graph(a, b);
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const auto ai = a.id, bi = b.id;
  const bool ag = a.requires_grad(), bg = b.requires_grad();
  return a.graph->push(std::move(out), ag || bg,
                       [ai, bi, ag, bg](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                         if (ag) detail::add_into(gr.grad_ref(ai), go);
                         if (bg) {
                           auto gb = gr.grad_ref(bi);
                           for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
                         }
                       });
}

/// Elementwise product.
template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::same_graph(a, b);
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const auto ai = a.id, bi = b.id;
  const bool ag = a.requires_grad(), bg = b.requires_grad();
  return a.graph->push(std::move(out), ag || bg,
                       [ai, bi, ag, bg](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                         const auto& av = gr.value(ai);
                         const auto& bv = gr.value(bi);
                         if (ag) {
                           auto ga = gr.grad_ref(ai);
                           for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bv[i];
                         }
                         if (bg) {
                           auto gb = gr.grad_ref(bi);
                           for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
                         }
                       });
}

template <class T>
Var<T> scale(Var<T> a, T c) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v *= c;
  const auto ai = a.id;
  return a.graph->push(std::move(out), a.requires_grad(),
                       [ai, c](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                         auto ga = gr.grad_ref(ai);
                         for (std::size_t i = 0; i < go.size(); ++i) ga[i] += c * go[i];
                       });
}

/// W x + b.
template <class T>
Var<T> affine(Var<T> x, Var<T> W, Var<T> b) {
  const auto& w = W.value();
  if (w.rank() != 2 || w.dim(0) != b.size())
    throw DimensionError("affine: bias " + b.shape().str() + " does not match weight " +
                         w.shape().str());
  return add(matvec(W, x), b);
}

template <class T>
Var<T> pointwise(Var<T> x, Activation fn) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) {
    switch (fn) {
      case Activation::Tanh: v = std::tanh(v); break;
      case Activation::Sigmoid: v = detail::sigmoid(v); break;
      case Activation::Relu: v = v > T(0) ? v : T(0); break;
    }
  }
  const auto xi = x.id;
  return x.graph->push(std::move(out), x.requires_grad(),
                       [xi, fn](Graph<T>& gr, std::uint32_t self, std::span<const T> go) {
                         const auto& yv = gr.value(self);
                         const auto& xv = gr.value(xi);
                         auto gx = gr.grad_ref(xi);
                         for (std::size_t i = 0; i < go.size(); ++i) {
                           T d = 0;
                           switch (fn) {
                             case Activation::Tanh: d = T(1) - yv[i] * yv[i]; break;
                             case Activation::Sigmoid: d = yv[i] * (T(1) - yv[i]); break;
                             case Activation::Relu: d = xv[i] > T(0) ? T(1) : T(0); break;
                           }
                           gx[i] += d * go[i];
                         }
                       });
}

template <class T>
Var<T> tanh(Var<T> x) {
  return pointwise(x, Activation::Tanh);
}
template <class T>
Var<T> sigmoid(Var<T> x) {
  return pointwise(x, Activation::Sigmoid);
}
template <class T>
Var<T> relu(Var<T> x) {
  return pointwise(x, Activation::Relu);
}

/// x / ||x||_2. Throws DegenerateVectorError when ||x|| <= eps.
template <class T>
Var<T> l2_normalize(Var<T> x, double eps = kNormFloor) {
  Tensor<T> out = x.value();
  double sq = 0;
  for (auto v : out.data()) sq += double(v) * double(v);
  const double norm = std::sqrt(sq);
  if (!(norm > eps)) throw DegenerateVectorError("l2_normalize: vector norm " + std::to_string(norm) + " below floor");
  const T n = T(norm);
  for (auto& v : out.data()) v /= n;
  const auto xi = x.id;
  return x.graph->push(std::move(out), x.requires_grad(),
                       [xi, n](Graph<T>& gr, std::uint32_t self, std::span<const T> go) {
                         // d(x/n) = (g - y (y.g)) / n
                         const auto& y = gr.value(self);
                         T yg = 0;
                         for (std::size_t i = 0; i < go.size(); ++i) yg += y[i] * go[i];
                         auto gx = gr.grad_ref(xi);
                         for (std::size_t i = 0; i < go.size(); ++i) gx[i] += (go[i] - y[i] * yg) / n;
                       });
}

/// Inner product, returned as a [1] tensor.
template <class T>
Var<T> dot(Var<T> a, Var<T> b) {
  detail::same_graph(a, b);
  if (a.size() != b.size())
    throw DimensionError("dot: length mismatch " + detail::shapes(a.shape(), b.shape()));
  const auto& av = a.value();
  const auto& bv = b.value();
  T acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  const auto ai = a.id, bi = b.id;
  const bool ag = a.requires_grad(), bg = b.requires_grad();
  return a.graph->push(Tensor<T>::scalar(acc), ag || bg,
                       [ai, bi, ag, bg](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                         const auto& av = gr.value(ai);
                         const auto& bv = gr.value(bi);
                         if (ag) {
                           auto ga = gr.grad_ref(ai);
                           for (std::size_t i = 0; i < av.size(); ++i) ga[i] += go[0] * bv[i];
                         }
                         if (bg) {
                           auto gb = gr.grad_ref(bi);
                           for (std::size_t i = 0; i < av.size(); ++i) gb[i] += go[0] * av[i];
                         }
                       });
}

template <class T>
Var<T> sum(Var<T> x) {
  T acc = 0;
  for (auto v : x.value().data()) acc += v;
  const auto xi = x.id;
  return x.graph->push(Tensor<T>::scalar(acc), x.requires_grad(),
                       [xi](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                         auto gx = gr.grad_ref(xi);
                         for (auto& v : gx) v += go[0];
                       });
}

/// Flattens and concatenates the inputs into one vector.
template <class T>
Var<T> concat(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw EmptySequenceError("concat: no inputs");
  std::vector<T> data;
  std::vector<std::uint32_t> ids;
  bool rg = false;
  for (const auto& p : parts) {
    detail::same_graph(parts.front(), p);
    const auto& v = p.value();
    data.insert(data.end(), v.data().begin(), v.data().end());
    ids.push_back(p.id);
    rg = rg || p.requires_grad();
  }
  const std::size_t total = data.size();
  return parts.front().graph->push(Tensor<T>(Shape{total}, std::move(data)), rg,
                                   [ids](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                                     std::size_t off = 0;
                                     for (auto id : ids) {
                                       const std::size_t len = gr.value(id).size();
                                       if (gr.requires_grad(Var<T>{&gr, id}))
                                         detail::add_into(gr.grad_ref(id), go.subspan(off, len));
                                       off += len;
                                     }
                                   });
}

/// Stacks equal-length vectors into an [n x h] matrix.
template <class T>
Var<T> stack_rows(const std::vector<Var<T>>& rows) {
  if (rows.empty()) throw EmptySequenceError("stack_rows: no rows");
  const std::size_t h = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != h)
      throw DimensionError("stack_rows: ragged rows " + detail::shapes(rows.front().shape(), r.shape()));
  Var<T> flat = concat(rows);
  Tensor<T> out(Shape{rows.size(), h}, flat.value().storage());
  const auto fi = flat.id;
  return flat.graph->push(std::move(out), flat.requires_grad(),
                          [fi](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                            detail::add_into(gr.grad_ref(fi), go);
                          });
}

/// Row i of a matrix.
template <class T>
Var<T> row(Var<T> M, std::size_t i) {
  const auto& m = M.value();
  if (m.rank() != 2 || i >= m.dim(0))
    throw DimensionError("row: index " + std::to_string(i) + " outside " + m.shape().str());
  const std::size_t c = m.dim(1);
  Tensor<T> out(Shape{c}, std::vector<T>(m.data().begin() + i * c, m.data().begin() + (i + 1) * c));
  const auto mi = M.id;
  return M.graph->push(std::move(out), M.requires_grad(),
                       [mi, i, c](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                         detail::add_into(gr.grad_ref(mi).subspan(i * c, c), go);
                       });
}

/// Row `id` of an embedding table E [V x e]; the gradient scatters into that row only.
template <class T>
Var<T> gather_row(Var<T> E, std::size_t id) {
  return row(E, id);
}

/// Softmax over the positions with valid[t] == true; invalid positions are exactly 0.
/// An empty `valid` marks every position valid.
template <class T>
Var<T> masked_time_softmax(Var<T> logits, const std::vector<bool>& valid = {}) {
  const auto& z = logits.value();
  const std::size_t n = z.size();
  if (!valid.empty() && valid.size() != n)
    throw DimensionError("masked_time_softmax: mask of length " + std::to_string(valid.size()) +
                         " for " + std::to_string(n) + " logits");
  auto keep = [&](std::size_t t) { return valid.empty() || valid[t]; };
  T mx = -std::numeric_limits<T>::infinity();
  bool any = false;
  for (std::size_t t = 0; t < n; ++t)
    if (keep(t)) {
      mx = std::max(mx, z[t]);
      any = true;
    }
  if (!any) throw EmptySequenceError("masked_time_softmax: every position is masked");
  Tensor<T> out(Shape{n});
  T total = 0;
  for (std::size_t t = 0; t < n; ++t)
    if (keep(t)) {
      out[t] = std::exp(z[t] - mx);
      total += out[t];
    }
  for (auto& v : out.data()) v /= total;
  const auto zi = logits.id;
  return logits.graph->push(std::move(out), logits.requires_grad(),
                            [zi](Graph<T>& gr, std::uint32_t self, std::span<const T> go) {
                              // masked entries have y == 0 and receive no gradient
                              const auto& y = gr.value(self);
                              T yg = 0;
                              for (std::size_t t = 0; t < go.size(); ++t) yg += y[t] * go[t];
                              auto gz = gr.grad_ref(zi);
                              for (std::size_t t = 0; t < go.size(); ++t) gz[t] += y[t] * (go[t] - yg);
                            });
}

/// sum_t alpha[t] * rows[t].
template <class T>
Var<T> weighted_sum(const std::vector<Var<T>>& rows, Var<T> alpha) {
  if (rows.empty()) throw EmptySequenceError("weighted_sum: no rows");
  if (alpha.size() != rows.size())
    throw DimensionError("weighted_sum: " + std::to_string(alpha.size()) + " weights for " +
                         std::to_string(rows.size()) + " rows");
  const std::size_t h = rows.front().size();
  const auto& a = alpha.value();
  Tensor<T> out(Shape{h});
  std::vector<std::uint32_t> ids;
  bool rg = alpha.requires_grad();
  for (std::size_t t = 0; t < rows.size(); ++t) {
    detail::same_graph(alpha, rows[t]);
    const auto& r = rows[t].value();
    if (r.size() != h) throw DimensionError("weighted_sum: ragged rows");
    if (a[t] != T(0))
      for (std::size_t j = 0; j < h; ++j) out[j] += a[t] * r[j];
    ids.push_back(rows[t].id);
    rg = rg || rows[t].requires_grad();
  }
  const auto ai = alpha.id;
  return alpha.graph->push(std::move(out), rg,
                           [ids, ai](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                             const auto& a = gr.value(ai);
                             const bool ag = gr.requires_grad(Var<T>{&gr, ai});
                             for (std::size_t t = 0; t < ids.size(); ++t) {
                               const auto& r = gr.value(ids[t]);
                               if (ag) {
                                 T acc = 0;
                                 for (std::size_t j = 0; j < go.size(); ++j) acc += r[j] * go[j];
                                 gr.grad_ref(ai)[t] += acc;
                               }
                               if (gr.requires_grad(Var<T>{&gr, ids[t]}) && a[t] != T(0)) {
                                 auto gt = gr.grad_ref(ids[t]);
                                 for (std::size_t j = 0; j < go.size(); ++j) gt[j] += a[t] * go[j];
                               }
                             }
                           });
}

/// Highway interpolation h*t + s*(1-t).
template <class T>
Var<T> gate_mix(Var<T> h, Var<T> t, Var<T> s) {
  detail::same_graph(h, t);
  detail::same_graph(h, s);
  require_same_shape(h.shape(), t.shape(), "gate_mix");
  require_same_shape(h.shape(), s.shape(), "gate_mix");
  const auto& hv = h.value();
  const auto& tv = t.value();
  const auto& sv = s.value();
  Tensor<T> out(h.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = hv[i] * tv[i] + sv[i] * (T(1) - tv[i]);
  const auto hi = h.id, ti = t.id, si = s.id;
  const bool hg = h.requires_grad(), tg = t.requires_grad(), sg = s.requires_grad();
  return h.graph->push(std::move(out), hg || tg || sg,
                       [hi, ti, si, hg, tg, sg](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                         const auto& hv = gr.value(hi);
                         const auto& tv = gr.value(ti);
                         const auto& sv = gr.value(si);
                         if (hg) {
                           auto g = gr.grad_ref(hi);
                           for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * tv[i];
                         }
                         if (tg) {
                           auto g = gr.grad_ref(ti);
                           for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * (hv[i] - sv[i]);
                         }
                         if (sg) {
                           auto g = gr.grad_ref(si);
                           for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * (T(1) - tv[i]);
                         }
                       });
}

/// Number of output frames of a full-padding convolution of length `kernel` and
/// stride `stride` over `frames` input frames.
inline std::size_t conv_output_length(std::size_t frames, std::size_t kernel, std::size_t stride) {
  if (frames == 0) return 0;
  return (frames + kernel - 2) / stride + 1;
}

/// 1-D convolution over time with full border padding: X [T x D], K [s x D x d],
/// b [d]. The input is zero-padded with s-1 frames at both ends and windows start
/// at 0, z, 2z, ... Returns [T' x d] with T' = floor((T + s - 2) / z) + 1.
template <class T>
Var<T> conv1d_full(Var<T> X, Var<T> K, Var<T> b, std::size_t stride) {
  detail::same_graph(X, K);
  detail::same_graph(X, b);
  const auto& x = X.value();
  const auto& k = K.value();
  if (x.rank() != 2 || k.rank() != 3 || k.dim(1) != x.dim(1) || b.size() != k.dim(2))
    throw DimensionError("conv1d_full: input " + x.shape().str() + ", kernel " + k.shape().str() +
                         ", bias " + b.shape().str());
  if (stride == 0) throw std::invalid_argument("conv1d_full: stride must be positive");
  const std::size_t frames = x.dim(0), in = x.dim(1), len = k.dim(0), outc = k.dim(2);
  if (frames == 0) throw EmptySequenceError("conv1d_full: empty input");
  const std::size_t n_out = conv_output_length(frames, len, stride);
  const auto& bv = b.value();
  Tensor<T> out(Shape{n_out, outc});
  // padded index p maps to input frame p - (len - 1)
  for (std::size_t j = 0; j < n_out; ++j) {
    T* o = &out[j * outc];
    for (std::size_t c = 0; c < outc; ++c) o[c] = bv[c];
    for (std::size_t tap = 0; tap < len; ++tap) {
      const std::ptrdiff_t src = std::ptrdiff_t(j * stride + tap) - std::ptrdiff_t(len - 1);
      if (src < 0 || src >= std::ptrdiff_t(frames)) continue;
      const T* xr = &x[std::size_t(src) * in];
      const T* kt = &k[tap * in * outc];
      for (std::size_t i = 0; i < in; ++i) {
        const T xi = xr[i];
        if (xi == T(0)) continue;
        const T* kr = kt + i * outc;
        for (std::size_t c = 0; c < outc; ++c) o[c] += kr[c] * xi;
      }
    }
  }
  const auto xid = X.id, kid = K.id, bid = b.id;
  const bool xg = X.requires_grad(), kg = K.requires_grad(), bg = b.requires_grad();
  return X.graph->push(
      std::move(out), xg || kg || bg,
      [=](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
        const auto& x = gr.value(xid);
        const auto& k = gr.value(kid);
        if (bg) {
          auto gb = gr.grad_ref(bid);
          for (std::size_t j = 0; j < n_out; ++j)
            for (std::size_t c = 0; c < outc; ++c) gb[c] += go[j * outc + c];
        }
        std::span<T> gx, gk;
        if (xg) gx = gr.grad_ref(xid);
        if (kg) gk = gr.grad_ref(kid);
        for (std::size_t j = 0; j < n_out; ++j) {
          const T* g = &go[j * outc];
          for (std::size_t tap = 0; tap < len; ++tap) {
            const std::ptrdiff_t src = std::ptrdiff_t(j * stride + tap) - std::ptrdiff_t(len - 1);
            if (src < 0 || src >= std::ptrdiff_t(frames)) continue;
            const std::size_t s = std::size_t(src);
            for (std::size_t i = 0; i < in; ++i) {
              const std::size_t kbase = (tap * in + i) * outc;
              if (kg) {
                const T xi = x[s * in + i];
                for (std::size_t c = 0; c < outc; ++c) gk[kbase + c] += g[c] * xi;
              }
              if (xg) {
                T acc = 0;
                for (std::size_t c = 0; c < outc; ++c) acc += k[kbase + c] * g[c];
                gx[s * in + i] += acc;
              }
            }
          }
        }
      });
}

/// A B^T for A [n x h], B [m x h].
template <class T>
Var<T> matmul_abt(Var<T> A, Var<T> B) {
  detail::same_graph(A, B);
  const auto& a = A.value();
  const auto& b = B.value();
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw DimensionError("matmul_abt: incompatible shapes " + detail::shapes(a.shape(), b.shape()));
  const std::size_t n = a.dim(0), m = b.dim(0), h = a.dim(1);
  Tensor<T> out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      T acc = 0;
      for (std::size_t c = 0; c < h; ++c) acc += a[i * h + c] * b[j * h + c];
      out[i * m + j] = acc;
    }
  const auto ai = A.id, bi = B.id;
  const bool ag = A.requires_grad(), bg = B.requires_grad();
  return A.graph->push(std::move(out), ag || bg,
                       [=](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                         const auto& a = gr.value(ai);
                         const auto& b = gr.value(bi);
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < m; ++j) {
                             const T g = go[i * m + j];
                             if (g == T(0)) continue;
                             if (ag) {
                               auto ga = gr.grad_ref(ai);
                               for (std::size_t c = 0; c < h; ++c) ga[i * h + c] += g * b[j * h + c];
                             }
                             if (bg) {
                               auto gb = gr.grad_ref(bi);
                               for (std::size_t c = 0; c < h; ++c) gb[j * h + c] += g * a[i * h + c];
                             }
                           }
                       });
}

/// Bidirectional hinge over a similarity matrix S[u][i] = <utt_u, img_i> whose
/// diagonal holds the matched pairs. With cosine distance d = 1 - S:
///   sum_j sum_{k != j} max(0, m + d(j,j) - d(k,j)) + max(0, m + d(j,j) - d(j,k)).
template <class T>
Var<T> contrastive_hinge(Var<T> S, T margin) {
  const auto& s = S.value();
  if (s.rank() != 2 || s.dim(0) != s.dim(1))
    throw DimensionError("contrastive_hinge: similarity matrix must be square, got " + s.shape().str());
  const std::size_t n = s.dim(0);
  T total = 0;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      if (k == j) continue;
      total += std::max(T(0), margin + (s(k, j) - s(j, j)));
      total += std::max(T(0), margin + (s(j, k) - s(j, j)));
    }
  const auto si = S.id;
  return S.graph->push(Tensor<T>::scalar(total), S.requires_grad(),
                       [si, n, margin](Graph<T>& gr, std::uint32_t, std::span<const T> go) {
                         const auto& s = gr.value(si);
                         auto gs = gr.grad_ref(si);
                         for (std::size_t j = 0; j < n; ++j)
                           for (std::size_t k = 0; k < n; ++k) {
                             if (k == j) continue;
                             if (margin + (s(k, j) - s(j, j)) > T(0)) {
                               gs[j * n + j] -= go[0];
                               gs[k * n + j] += go[0];
                             }
                             if (margin + (s(j, k) - s(j, j)) > T(0)) {
                               gs[j * n + j] -= go[0];
                               gs[j * n + k] += go[0];
                             }
                           }
                       });
}

}  // namespace gsr
