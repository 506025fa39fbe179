// include/assertkit/nn/ops.hpp

// Copyright 2025  assertkit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Forward/backward primitives.  Values are stored in T (float for training,
// double for finite-difference checks); flat reductions (bias grads, means,
// statistics, losses) accumulate in double regardless of T.  Convolution
// accumulates into the output array in T with a fixed tap order.

#ifndef ASSERTKIT_NN_OPS_HPP_
#define ASSERTKIT_NN_OPS_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "assertkit/nn/tensor.hpp"

namespace assertkit::nn {

// ---------------------------------------------------------------------------
// elementwise and shape ops

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.shape() == b.shape(), "add: shape mismatch");
  std::vector<T> y(a.numel());
  const T* pa = a.data();
  const T* pb = b.data();
  parallel_chunks(y.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) y[i] = pa[i] + pb[i];
  });
  auto na = a.node();
  auto nb = b.node();
  return make_op<T>(a.shape(), std::move(y), {na, nb}, [na, nb](Node<T>& out) {
    const T* g = out.grad.data();
    parallel_chunks(out.grad.size(), [&](std::size_t lo, std::size_t hi) {
      if (na->requires_grad) {
        T* da = na->grad.data();
        for (std::size_t i = lo; i < hi; ++i) da[i] += g[i];
      }
      if (nb->requires_grad) {
        T* db = nb->grad.data();
        for (std::size_t i = lo; i < hi; ++i) db[i] += g[i];
      }
    });
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.shape() == b.shape(), "mul: shape mismatch");
  std::vector<T> y(a.numel());
  const T* pa = a.data();
  const T* pb = b.data();
  parallel_chunks(y.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) y[i] = pa[i] * pb[i];
  });
  auto na = a.node();
  auto nb = b.node();
  return make_op<T>(a.shape(), std::move(y), {na, nb}, [na, nb](Node<T>& out) {
    const T* g = out.grad.data();
    parallel_chunks(out.grad.size(), [&](std::size_t lo, std::size_t hi) {
      if (na->requires_grad) {
        T* da = na->grad.data();
        const T* pb = nb->value.data();
        for (std::size_t i = lo; i < hi; ++i) da[i] += g[i] * pb[i];
      }
      if (nb->requires_grad) {
        T* db = nb->grad.data();
        const T* pa = na->value.data();
        for (std::size_t i = lo; i < hi; ++i) db[i] += g[i] * pa[i];
      }
    });
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> y(a.numel());
  const T* pa = a.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = pa[i] * c;
  auto na = a.node();
  return make_op<T>(a.shape(), std::move(y), {na}, [na, c](Node<T>& out) {
    if (!na->requires_grad) return;
    const T* g = out.grad.data();
    T* da = na->grad.data();
    for (std::size_t i = 0; i < out.grad.size(); ++i) da[i] += g[i] * c;
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  double acc = 0.0;
  for (const T v : a.values()) acc += static_cast<double>(v);
  auto na = a.node();
  return make_op<T>({1}, {static_cast<T>(acc)}, {na}, [na](Node<T>& out) {
    if (!na->requires_grad) return;
    const T g = out.grad[0];
    for (T& d : na->grad) d += g;
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, std::vector<std::size_t> shape) {
  check(shape_numel(shape) == a.numel(), "reshape: element count mismatch");
  auto na = a.node();
  return make_op<T>(std::move(shape), a.values(), {na}, [na](Node<T>& out) {
    if (!na->requires_grad) return;
    const T* g = out.grad.data();
    T* da = na->grad.data();
    for (std::size_t i = 0; i < out.grad.size(); ++i) da[i] += g[i];
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> y(a.numel());
  const T* pa = a.data();
  parallel_chunks(y.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) y[i] = pa[i] > T(0) ? pa[i] : T(0);
  });
  auto na = a.node();
  return make_op<T>(a.shape(), std::move(y), {na}, [na](Node<T>& out) {
    if (!na->requires_grad) return;
    const T* g = out.grad.data();
    const T* x = na->value.data();
    T* da = na->grad.data();
    parallel_chunks(out.grad.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i)
        if (x[i] > T(0)) da[i] += g[i];
    });
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> y(a.numel());
  const T* pa = a.data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(pa[i]);
    y[i] = static_cast<T>(x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                 : std::exp(x) / (1.0 + std::exp(x)));
  }
  auto na = a.node();
  return make_op<T>(a.shape(), std::move(y), {na}, [na](Node<T>& out) {
    if (!na->requires_grad) return;
    const T* g = out.grad.data();
    const T* y = out.value.data();
    T* da = na->grad.data();
    for (std::size_t i = 0; i < out.grad.size(); ++i)
      da[i] += g[i] * y[i] * (T(1) - y[i]);
  });
}

// ---------------------------------------------------------------------------
// softmax / loss

// Row-wise log-softmax with max subtraction; input N x K.
template <typename T>
Tensor<T> log_softmax(const Tensor<T>& a) {
  check(a.ndim() == 2, "log_softmax: expected N x K input");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<T> y(a.numel());
  const T* pa = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = pa + r * cols;
    T m = xr[0];
    for (std::size_t k = 1; k < cols; ++k) m = std::max(m, xr[k]);
    double z = 0.0;
    for (std::size_t k = 0; k < cols; ++k) z += std::exp(static_cast<double>(xr[k] - m));
    const double logz = std::log(z);
    for (std::size_t k = 0; k < cols; ++k)
      y[r * cols + k] = static_cast<T>(static_cast<double>(xr[k] - m) - logz);
  }
  auto na = a.node();
  return make_op<T>(a.shape(), std::move(y), {na}, [na, rows, cols](Node<T>& out) {
    if (!na->requires_grad) return;
    const T* g = out.grad.data();
    const T* y = out.value.data();
    T* da = na->grad.data();
    for (std::size_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::size_t k = 0; k < cols; ++k) gsum += static_cast<double>(g[r * cols + k]);
      for (std::size_t k = 0; k < cols; ++k) {
        const std::size_t i = r * cols + k;
        da[i] += g[i] - static_cast<T>(std::exp(static_cast<double>(y[i])) * gsum);
      }
    }
  });
}

// Mean over the batch of -logp[n, label_n].
template <typename T>
Tensor<T> nll_mean(const Tensor<T>& logp, const std::vector<std::size_t>& labels) {
  check(logp.ndim() == 2, "nll_mean: expected N x K input");
  const std::size_t rows = logp.dim(0), cols = logp.dim(1);
  check(labels.size() == rows, "nll_mean: label count mismatch");
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    check(labels[r] < cols, "nll_mean: label ", labels[r], " out of range [0, ", cols, ")");
    acc -= static_cast<double>(logp.data()[r * cols + labels[r]]);
  }
  auto np = logp.node();
  const T loss = static_cast<T>(acc / static_cast<double>(rows));
  return make_op<T>({1}, {loss}, {np}, [np, labels, rows, cols](Node<T>& out) {
    if (!np->requires_grad) return;
    const T g = out.grad[0];
    for (std::size_t r = 0; r < rows; ++r)
      np->grad[r * cols + labels[r]] -= g / static_cast<T>(rows);
  });
}

// Mean cross-entropy from raw logits; the binary objective is the K=2 case.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::size_t>& labels) {
  return nll_mean(log_softmax(logits), labels);
}

// ---------------------------------------------------------------------------
// linear

// x: N x F, w: O x F, b: O (optional, pass undefined Tensor for none).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  check(x.ndim() == 2 && w.ndim() == 2, "linear: expected 2-D input and weight");
  const std::size_t n = x.dim(0), f = x.dim(1), o = w.dim(0);
  check(w.dim(1) == f, "linear: weight/input width mismatch");
  const bool has_bias = b.defined();
  if (has_bias) check(b.ndim() == 1 && b.dim(0) == o, "linear: bad bias shape");

  std::vector<T> y(n * o);
  const T* px = x.data();
  const T* pw = w.data();
  const T* pb = has_bias ? b.data() : nullptr;
  parallel_for(n, o * f, [&](std::size_t r) {
    const T* xr = px + r * f;
    for (std::size_t c = 0; c < o; ++c) {
      const T* wr = pw + c * f;
      double acc = pb ? static_cast<double>(pb[c]) : 0.0;
      for (std::size_t i = 0; i < f; ++i) acc += static_cast<double>(xr[i]) * wr[i];
      y[r * o + c] = static_cast<T>(acc);
    }
  });

  auto nx = x.node();
  auto nw = w.node();
  auto nb = has_bias ? b.node() : nullptr;
  std::vector<NodePtr<T>> inputs = {nx, nw};
  if (nb) inputs.push_back(nb);
  return make_op<T>({n, o}, std::move(y), std::move(inputs),
                    [nx, nw, nb, n, f, o](Node<T>& out) {
    const T* g = out.grad.data();
    if (nx->requires_grad) {
      T* dx = nx->grad.data();
      const T* pw = nw->value.data();
      parallel_for(n, o * f, [&](std::size_t r) {
        T* dxr = dx + r * f;
        for (std::size_t c = 0; c < o; ++c) {
          const T gv = g[r * o + c];
          const T* wr = pw + c * f;
          for (std::size_t i = 0; i < f; ++i) dxr[i] += gv * wr[i];
        }
      });
    }
    if (nw->requires_grad) {
      T* dw = nw->grad.data();
      const T* px = nx->value.data();
      parallel_for(o, n * f, [&](std::size_t c) {
        T* dwr = dw + c * f;
        for (std::size_t r = 0; r < n; ++r) {
          const T gv = g[r * o + c];
          const T* xr = px + r * f;
          for (std::size_t i = 0; i < f; ++i) dwr[i] += gv * xr[i];
        }
      });
    }
    if (nb && nb->requires_grad) {
      for (std::size_t c = 0; c < o; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += static_cast<double>(g[r * o + c]);
        nb->grad[c] += static_cast<T>(acc);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// conv2d

struct ConvGeom {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
};

// Contiguous dot product with four independent 64-bit accumulator lanes so
// the compiler can keep the loop in SIMD registers; the lane assignment is
// fixed, so results are deterministic.
template <typename T>
inline double dot_stripes(const T* a, const T* b, std::size_t n) {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += static_cast<double>(a[i]) * b[i];
    l1 += static_cast<double>(a[i + 1]) * b[i + 1];
    l2 += static_cast<double>(a[i + 2]) * b[i + 2];
    l3 += static_cast<double>(a[i + 3]) * b[i + 3];
  }
  double acc = (l0 + l1) + (l2 + l3);
  for (; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

template <typename T>
inline double sum_stripes(const T* a, std::size_t n) {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += a[i];
    l1 += a[i + 1];
    l2 += a[i + 2];
    l3 += a[i + 3];
  }
  double acc = (l0 + l1) + (l2 + l3);
  for (; i < n; ++i) acc += static_cast<double>(a[i]);
  return acc;
}

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, const ConvGeom& g) {
  const std::ptrdiff_t eff = static_cast<std::ptrdiff_t>(g.dilation) * (k - 1) + 1;
  const std::ptrdiff_t num =
      static_cast<std::ptrdiff_t>(in) + 2 * static_cast<std::ptrdiff_t>(g.padding) - eff;
  check(num >= 0, "conv2d: kernel does not fit input (", in, " with k=", k, ")");
  return static_cast<std::size_t>(num / static_cast<std::ptrdiff_t>(g.stride)) + 1;
}

// Dilated cross-correlation.  x: N x C x H x W, w: O x C x kh x kw, b: O or
// undefined.  The inner loops run over contiguous output rows so they
// vectorize; tap order is fixed, so results are thread-count independent.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, ConvGeom geom) {
  check(x.ndim() == 4 && w.ndim() == 4, "conv2d: expected 4-D input and weight");
  check(geom.stride >= 1 && geom.dilation >= 1, "conv2d: stride and dilation must be >= 1");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  check(w.dim(1) == c, "conv2d: channel mismatch (input ", c, ", weight ", w.dim(1), ")");
  const bool has_bias = b.defined();
  if (has_bias) check(b.ndim() == 1 && b.dim(0) == o, "conv2d: bad bias shape");
  const std::size_t ho = conv_out_extent(h, kh, geom);
  const std::size_t wo = conv_out_extent(wd, kw, geom);

  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(geom.stride);
  const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(geom.padding);
  const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(geom.dilation);

  // valid output range [lo, hi] for one tap offset t: index = out*s + t - p in [0, extent)
  auto tap_range = [s, p](std::ptrdiff_t t, std::size_t extent, std::size_t out_extent,
                          std::ptrdiff_t& lo, std::ptrdiff_t& hi) {
    const std::ptrdiff_t a = p - t;
    lo = a > 0 ? (a + s - 1) / s : 0;
    const std::ptrdiff_t bnd = static_cast<std::ptrdiff_t>(extent) - 1 - t + p;
    hi = bnd < 0 ? -1 : std::min<std::ptrdiff_t>(out_extent - 1, bnd / s);
  };

  std::vector<T> y(n * o * ho * wo);
  const T* px = x.data();
  const T* pw = w.data();
  const T* pb = has_bias ? b.data() : nullptr;

  parallel_for(n * o, c * kh * kw * ho * wo, [&](std::size_t no) {
    const std::size_t in = no / o, io = no % o;
    T* yp = y.data() + no * ho * wo;
    const T bias = pb ? pb[io] : T(0);
    for (std::size_t i = 0; i < ho * wo; ++i) yp[i] = bias;
    for (std::size_t ic = 0; ic < c; ++ic) {
      const T* xc = px + (in * c + ic) * h * wd;
      const T* wc = pw + (io * c + ic) * kh * kw;
      for (std::size_t i = 0; i < kh; ++i) {
        std::ptrdiff_t ho_lo, ho_hi;
        tap_range(static_cast<std::ptrdiff_t>(i) * d, h, ho, ho_lo, ho_hi);
        for (std::size_t j = 0; j < kw; ++j) {
          const T wv = wc[i * kw + j];
          std::ptrdiff_t wo_lo, wo_hi;
          tap_range(static_cast<std::ptrdiff_t>(j) * d, wd, wo, wo_lo, wo_hi);
          if (wo_hi < wo_lo) continue;
          for (std::ptrdiff_t r = ho_lo; r <= ho_hi; ++r) {
            const std::ptrdiff_t hi_idx = r * s + static_cast<std::ptrdiff_t>(i) * d - p;
            const T* xrow = xc + hi_idx * static_cast<std::ptrdiff_t>(wd) +
                            (wo_lo * s + static_cast<std::ptrdiff_t>(j) * d - p);
            T* yrow = yp + r * static_cast<std::ptrdiff_t>(wo) + wo_lo;
            const std::ptrdiff_t span = wo_hi - wo_lo;
            if (s == 1) {
              for (std::ptrdiff_t k = 0; k <= span; ++k) yrow[k] += wv * xrow[k];
            } else {
              for (std::ptrdiff_t k = 0; k <= span; ++k) yrow[k] += wv * xrow[k * s];
            }
          }
        }
      }
    }
  });

  auto nx = x.node();
  auto nw = w.node();
  auto nb = has_bias ? b.node() : nullptr;
  std::vector<NodePtr<T>> inputs = {nx, nw};
  if (nb) inputs.push_back(nb);
  return make_op<T>(
      {n, o, ho, wo}, std::move(y), std::move(inputs),
      [nx, nw, nb, n, c, h, wd, o, kh, kw, ho, wo, s, p, d, tap_range](Node<T>& out) {
        const T* g = out.grad.data();
        if (nb && nb->requires_grad) {
          for (std::size_t io = 0; io < o; ++io) {
            double acc = 0.0;
            for (std::size_t in = 0; in < n; ++in) {
              const T* gp = g + (in * o + io) * ho * wo;
              for (std::size_t i = 0; i < ho * wo; ++i) acc += static_cast<double>(gp[i]);
            }
            nb->grad[io] += static_cast<T>(acc);
          }
        }
        if (nw->requires_grad) {
          const T* px = nx->value.data();
          T* dw = nw->grad.data();
          parallel_for(o * c, kh * kw * n * ho * wo, [&](std::size_t oc) {
            const std::size_t io = oc / c, ic = oc % c;
            for (std::size_t i = 0; i < kh; ++i) {
              std::ptrdiff_t ho_lo, ho_hi;
              tap_range(static_cast<std::ptrdiff_t>(i) * d, h, ho, ho_lo, ho_hi);
              for (std::size_t j = 0; j < kw; ++j) {
                std::ptrdiff_t wo_lo, wo_hi;
                tap_range(static_cast<std::ptrdiff_t>(j) * d, wd, wo, wo_lo, wo_hi);
                double acc = 0.0;
                if (wo_hi >= wo_lo) {
                  for (std::size_t in = 0; in < n; ++in) {
                    const T* xc = px + (in * c + ic) * h * wd;
                    const T* gp = g + (in * o + io) * ho * wo;
                    for (std::ptrdiff_t r = ho_lo; r <= ho_hi; ++r) {
                      const std::ptrdiff_t hi_idx =
                          r * s + static_cast<std::ptrdiff_t>(i) * d - p;
                      const T* xrow = xc + hi_idx * static_cast<std::ptrdiff_t>(wd) +
                                      (wo_lo * s + static_cast<std::ptrdiff_t>(j) * d - p);
                      const T* grow = gp + r * static_cast<std::ptrdiff_t>(wo) + wo_lo;
                      const std::ptrdiff_t span = wo_hi - wo_lo;
                      if (s == 1) {
                        acc += dot_stripes(grow, xrow, static_cast<std::size_t>(span + 1));
                      } else {
                        for (std::ptrdiff_t k = 0; k <= span; ++k)
                          acc += static_cast<double>(grow[k]) * xrow[k * s];
                      }
                    }
                  }
                }
                dw[(io * c + ic) * kh * kw + i * kw + j] += static_cast<T>(acc);
              }
            }
          });
        }
        if (nx->requires_grad) {
          const T* pw = nw->value.data();
          T* dx = nx->grad.data();
          parallel_for(n, o * c * kh * kw * ho * wo, [&](std::size_t in) {
            for (std::size_t io = 0; io < o; ++io) {
              const T* gp = g + (in * o + io) * ho * wo;
              for (std::size_t ic = 0; ic < c; ++ic) {
                T* dxc = dx + (in * c + ic) * h * wd;
                const T* wc = pw + (io * c + ic) * kh * kw;
                for (std::size_t i = 0; i < kh; ++i) {
                  std::ptrdiff_t ho_lo, ho_hi;
                  tap_range(static_cast<std::ptrdiff_t>(i) * d, h, ho, ho_lo, ho_hi);
                  for (std::size_t j = 0; j < kw; ++j) {
                    const T wv = wc[i * kw + j];
                    std::ptrdiff_t wo_lo, wo_hi;
                    tap_range(static_cast<std::ptrdiff_t>(j) * d, wd, wo, wo_lo, wo_hi);
                    if (wo_hi < wo_lo) continue;
                    for (std::ptrdiff_t r = ho_lo; r <= ho_hi; ++r) {
                      const std::ptrdiff_t hi_idx =
                          r * s + static_cast<std::ptrdiff_t>(i) * d - p;
                      T* dxrow = dxc + hi_idx * static_cast<std::ptrdiff_t>(wd) +
                                 (wo_lo * s + static_cast<std::ptrdiff_t>(j) * d - p);
                      const T* grow = gp + r * static_cast<std::ptrdiff_t>(wo) + wo_lo;
                      const std::ptrdiff_t span = wo_hi - wo_lo;
                      if (s == 1) {
                        for (std::ptrdiff_t k = 0; k <= span; ++k) dxrow[k] += wv * grow[k];
                      } else {
                        for (std::ptrdiff_t k = 0; k <= span; ++k)
                          dxrow[k * s] += wv * grow[k];
                      }
                    }
                  }
                }
              }
            }
          });
        }
      });
}

// ---------------------------------------------------------------------------
// pooling

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, std::size_t k, std::size_t stride) {
  check(x.ndim() == 4, "maxpool2d: expected N x C x H x W");
  check(k >= 1 && stride >= 1, "maxpool2d: bad kernel/stride");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  check(h >= k && w >= k, "maxpool2d: window larger than input");
  const std::size_t ho = (h - k) / stride + 1;
  const std::size_t wo = (w - k) / stride + 1;

  std::vector<T> y(n * c * ho * wo);
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(y.size());
  const T* px = x.data();
  parallel_for(n * c, ho * wo * k * k, [&](std::size_t nc) {
    const T* xp = px + nc * h * w;
    T* yp = y.data() + nc * ho * wo;
    std::uint32_t* ap = argmax->data() + nc * ho * wo;
    for (std::size_t r = 0; r < ho; ++r) {
      for (std::size_t q = 0; q < wo; ++q) {
        std::size_t best = (r * stride) * w + q * stride;
        T bv = xp[best];
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t idx = (r * stride + i) * w + q * stride + j;
            if (xp[idx] > bv) {  // ties keep the first in scan order
              bv = xp[idx];
              best = idx;
            }
          }
        }
        yp[r * wo + q] = bv;
        ap[r * wo + q] = static_cast<std::uint32_t>(best);
      }
    }
  });

  auto nx = x.node();
  return make_op<T>({n, c, ho, wo}, std::move(y), {nx},
                    [nx, argmax, n, c, h, w, ho, wo](Node<T>& out) {
    if (!nx->requires_grad) return;
    const T* g = out.grad.data();
    T* dx = nx->grad.data();
    parallel_for(n * c, ho * wo, [&](std::size_t nc) {
      const std::uint32_t* ap = argmax->data() + nc * ho * wo;
      const T* gp = g + nc * ho * wo;
      T* dxp = dx + nc * h * w;
      for (std::size_t i = 0; i < ho * wo; ++i) dxp[ap[i]] += gp[i];
    });
  });
}

// N x C x H x W -> N x C channel means.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  check(x.ndim() == 4, "global_avg_pool: expected N x C x H x W");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<T> y(n * c);
  const T* px = x.data();
  parallel_for(n * c, hw, [&](std::size_t nc) {
    const T* xp = px + nc * hw;
    y[nc] = static_cast<T>(sum_stripes(xp, hw) / static_cast<double>(hw));
  });
  auto nx = x.node();
  return make_op<T>({n, c}, std::move(y), {nx}, [nx, n, c, hw](Node<T>& out) {
    if (!nx->requires_grad) return;
    const T* g = out.grad.data();
    T* dx = nx->grad.data();
    parallel_for(n * c, hw, [&](std::size_t nc) {
      const T gv = g[nc] / static_cast<T>(hw);
      T* dxp = dx + nc * hw;
      for (std::size_t i = 0; i < hw; ++i) dxp[i] += gv;
    });
  });
}

// Per-channel rescale: y[n,c,h,w] = x[n,c,h,w] * gate[n,c].
template <typename T>
Tensor<T> channel_scale(const Tensor<T>& x, const Tensor<T>& gate) {
  check(x.ndim() == 4 && gate.ndim() == 2, "channel_scale: expected NCHW and N x C gate");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  check(gate.dim(0) == n && gate.dim(1) == c, "channel_scale: gate shape mismatch");
  std::vector<T> y(x.numel());
  const T* px = x.data();
  const T* pg = gate.data();
  for (std::size_t nc = 0; nc < n * c; ++nc) {
    const T gv = pg[nc];
    const T* xp = px + nc * hw;
    T* yp = y.data() + nc * hw;
    for (std::size_t i = 0; i < hw; ++i) yp[i] = xp[i] * gv;
  }
  auto nx = x.node();
  auto ng = gate.node();
  return make_op<T>(x.shape(), std::move(y), {nx, ng}, [nx, ng, n, c, hw](Node<T>& out) {
    const T* g = out.grad.data();
    if (nx->requires_grad) {
      T* dx = nx->grad.data();
      const T* pg = ng->value.data();
      for (std::size_t nc = 0; nc < n * c; ++nc) {
        const T gv = pg[nc];
        const T* gp = g + nc * hw;
        T* dxp = dx + nc * hw;
        for (std::size_t i = 0; i < hw; ++i) dxp[i] += gp[i] * gv;
      }
    }
    if (ng->requires_grad) {
      const T* px = nx->value.data();
      for (std::size_t nc = 0; nc < n * c; ++nc) {
        double acc = 0.0;
        const T* gp = g + nc * hw;
        const T* xp = px + nc * hw;
        for (std::size_t i = 0; i < hw; ++i)
          acc += static_cast<double>(gp[i]) * xp[i];
        ng->grad[nc] += static_cast<T>(acc);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// resizing (AFN upsampling path)

// Bilinear interpolation to an arbitrary target size (half-pixel centers,
// clamped at the borders).
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, std::size_t ho, std::size_t wo) {
  check(x.ndim() == 4, "bilinear_resize: expected N x C x H x W");
  check(ho >= 1 && wo >= 1, "bilinear_resize: bad target size");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);

  struct Mix {
    std::size_t i0, i1;
    T w1;  // weight of i1; i0 gets 1-w1
  };
  auto axis_mix = [](std::size_t in, std::size_t out) {
    std::vector<Mix> m(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
      src = std::min(std::max(src, 0.0), static_cast<double>(in - 1));
      const std::size_t i0 = static_cast<std::size_t>(src);
      m[i].i0 = i0;
      m[i].i1 = std::min(i0 + 1, in - 1);
      m[i].w1 = static_cast<T>(src - static_cast<double>(i0));
    }
    return m;
  };
  const auto hmix = std::make_shared<std::vector<Mix>>(axis_mix(h, ho));
  const auto wmix = std::make_shared<std::vector<Mix>>(axis_mix(w, wo));

  std::vector<T> y(n * c * ho * wo);
  const T* px = x.data();
  parallel_for(n * c, 4 * ho * wo, [&](std::size_t nc) {
    const T* xp = px + nc * h * w;
    T* yp = y.data() + nc * ho * wo;
    for (std::size_t r = 0; r < ho; ++r) {
      const Mix& hm = (*hmix)[r];
      const T* row0 = xp + hm.i0 * w;
      const T* row1 = xp + hm.i1 * w;
      for (std::size_t q = 0; q < wo; ++q) {
        const Mix& wm = (*wmix)[q];
        const T top = row0[wm.i0] * (T(1) - wm.w1) + row0[wm.i1] * wm.w1;
        const T bot = row1[wm.i0] * (T(1) - wm.w1) + row1[wm.i1] * wm.w1;
        yp[r * wo + q] = top * (T(1) - hm.w1) + bot * hm.w1;
      }
    }
  });

  auto nx = x.node();
  return make_op<T>({n, c, ho, wo}, std::move(y), {nx},
                    [nx, hmix, wmix, n, c, h, w, ho, wo](Node<T>& out) {
    if (!nx->requires_grad) return;
    const T* g = out.grad.data();
    T* dx = nx->grad.data();
    parallel_for(n * c, 4 * ho * wo, [&](std::size_t nc) {
      const T* gp = g + nc * ho * wo;
      T* dxp = dx + nc * h * w;
      for (std::size_t r = 0; r < ho; ++r) {
        const Mix& hm = (*hmix)[r];
        for (std::size_t q = 0; q < wo; ++q) {
          const Mix& wm = (*wmix)[q];
          const T gv = gp[r * wo + q];
          dxp[hm.i0 * w + wm.i0] += gv * (T(1) - hm.w1) * (T(1) - wm.w1);
          dxp[hm.i0 * w + wm.i1] += gv * (T(1) - hm.w1) * wm.w1;
          dxp[hm.i1 * w + wm.i0] += gv * hm.w1 * (T(1) - wm.w1);
          dxp[hm.i1 * w + wm.i1] += gv * hm.w1 * wm.w1;
        }
      }
    });
  });
}

// ---------------------------------------------------------------------------
// variable-length (whole-utterance) ops

// Zeroes time columns at or beyond valid[n] along the W axis of N x C x H x W.
template <typename T>
Tensor<T> time_mask(const Tensor<T>& x, const std::vector<std::size_t>& valid) {
  check(x.ndim() == 4, "time_mask: expected N x C x H x W");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  check(valid.size() == n, "time_mask: valid length count mismatch");
  std::vector<T> y(x.values());
  for (std::size_t in = 0; in < n; ++in) {
    const std::size_t lim = std::min(valid[in], w);
    check(lim >= 1, "time_mask: zero valid length");
    if (lim == w) continue;
    for (std::size_t ch = 0; ch < c * h; ++ch) {
      T* row = y.data() + (in * c * h + ch) * w;
      for (std::size_t q = lim; q < w; ++q) row[q] = T(0);
    }
  }
  auto nx = x.node();
  return make_op<T>(x.shape(), std::move(y), {nx}, [nx, valid, n, c, h, w](Node<T>& out) {
    if (!nx->requires_grad) return;
    const T* g = out.grad.data();
    T* dx = nx->grad.data();
    for (std::size_t in = 0; in < n; ++in) {
      const std::size_t lim = std::min(valid[in], w);
      for (std::size_t ch = 0; ch < c * h; ++ch) {
        const std::size_t base = (in * c * h + ch) * w;
        for (std::size_t q = 0; q < lim; ++q) dx[base + q] += g[base + q];
      }
    }
  });
}

// N x C x H x W -> N x W x (C*H): one feature vector per time step.
template <typename T>
Tensor<T> flatten_time(const Tensor<T>& x) {
  check(x.ndim() == 4, "flatten_time: expected N x C x H x W");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t f = c * h;
  std::vector<T> y(x.numel());
  const T* px = x.data();
  for (std::size_t in = 0; in < n; ++in)
    for (std::size_t ch = 0; ch < f; ++ch) {
      const T* src = px + (in * f + ch) * w;
      T* dst = y.data() + in * w * f + ch;
      for (std::size_t q = 0; q < w; ++q) dst[q * f] = src[q];
    }
  auto nx = x.node();
  return make_op<T>({n, w, f}, std::move(y), {nx}, [nx, n, f, w](Node<T>& out) {
    if (!nx->requires_grad) return;
    const T* g = out.grad.data();
    T* dx = nx->grad.data();
    for (std::size_t in = 0; in < n; ++in)
      for (std::size_t ch = 0; ch < f; ++ch) {
        const T* src = g + in * w * f + ch;
        T* dst = dx + (in * f + ch) * w;
        for (std::size_t q = 0; q < w; ++q) dst[q] += src[q * f];
      }
  });
}

// Utterance-level statistics over the first valid[n] time steps of N x T x F:
// out[n] = [mean_f..., std_f...], std = sqrt(E[x^2] - E[x]^2 + eps_var).
// Padding rows beyond valid[n] never contribute.
template <typename T>
Tensor<T> mean_std_pool(const Tensor<T>& x, const std::vector<std::size_t>& valid, T eps_var) {
  check(x.ndim() == 3, "mean_std_pool: expected N x T x F");
  const std::size_t n = x.dim(0), t = x.dim(1), f = x.dim(2);
  check(valid.size() == n, "mean_std_pool: valid length count mismatch");
  check(eps_var > T(0), "mean_std_pool: eps_var must be positive");

  std::vector<T> y(n * 2 * f);
  const T* px = x.data();
  for (std::size_t in = 0; in < n; ++in) {
    const std::size_t len = valid[in];
    check(len >= 1 && len <= t, "mean_std_pool: bad valid length ", len);
    for (std::size_t k = 0; k < f; ++k) {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t r = 0; r < len; ++r) {
        const double v = static_cast<double>(px[(in * t + r) * f + k]);
        s1 += v;
        s2 += v * v;
      }
      const double mean = s1 / static_cast<double>(len);
      const double var = s2 / static_cast<double>(len) - mean * mean +
                         static_cast<double>(eps_var);
      y[in * 2 * f + k] = static_cast<T>(mean);
      y[in * 2 * f + f + k] = static_cast<T>(std::sqrt(var));
    }
  }

  auto nx = x.node();
  return make_op<T>({n, 2 * f}, std::move(y), {nx}, [nx, valid, n, t, f](Node<T>& out) {
    if (!nx->requires_grad) return;
    const T* g = out.grad.data();
    const T* y = out.value.data();
    const T* px = nx->value.data();
    T* dx = nx->grad.data();
    for (std::size_t in = 0; in < n; ++in) {
      const std::size_t len = valid[in];
      for (std::size_t k = 0; k < f; ++k) {
        const T mean = y[in * 2 * f + k];
        const T stdv = y[in * 2 * f + f + k];
        const T gm = g[in * 2 * f + k];
        const T gs = g[in * 2 * f + f + k];
        const T inv_len = T(1) / static_cast<T>(len);
        for (std::size_t r = 0; r < len; ++r) {
          const std::size_t idx = (in * t + r) * f + k;
          dx[idx] += gm * inv_len + gs * (px[idx] - mean) * inv_len / stdv;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// batchnorm

// 2-D batchnorm over N,H,W per channel.  Training mode normalizes with batch
// statistics (biased variance) and updates the running estimates in place;
// inference mode uses the running estimates.  Running variance is stored in
// the same biased form it is used in.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      std::vector<T>& running_mean, std::vector<T>& running_var,
                      T momentum, T eps, bool training) {
  check(x.ndim() == 4, "batchnorm2d: expected N x C x H x W");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  check(gamma.ndim() == 1 && gamma.dim(0) == c && beta.ndim() == 1 && beta.dim(0) == c,
        "batchnorm2d: bad affine parameter shape");
  check(running_mean.size() == c && running_var.size() == c,
        "batchnorm2d: bad running statistics size");

  auto mean = std::make_shared<std::vector<double>>(c);
  auto inv_std = std::make_shared<std::vector<double>>(c);
  const std::size_t m = n * hw;
  const T* px = x.data();

  if (training) {
    parallel_for(c, 2 * n * hw, [&](std::size_t ch) {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t in = 0; in < n; ++in) {
        const T* xp = px + (in * c + ch) * hw;
        s1 += sum_stripes(xp, hw);
        s2 += dot_stripes(xp, xp, hw);
      }
      const double mu = s1 / static_cast<double>(m);
      const double var = s2 / static_cast<double>(m) - mu * mu;
      (*mean)[ch] = mu;
      (*inv_std)[ch] = 1.0 / std::sqrt(var + static_cast<double>(eps));
      running_mean[ch] = static_cast<T>((1.0 - momentum) * running_mean[ch] + momentum * mu);
      running_var[ch] = static_cast<T>((1.0 - momentum) * running_var[ch] + momentum * var);
    });
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      (*mean)[ch] = static_cast<double>(running_mean[ch]);
      (*inv_std)[ch] = 1.0 / std::sqrt(static_cast<double>(running_var[ch]) +
                                       static_cast<double>(eps));
    }
  }

  std::vector<T> y(x.numel());
  const T* pg = gamma.data();
  const T* pbt = beta.data();
  parallel_for(n * c, hw, [&](std::size_t nc) {
    const std::size_t ch = nc % c;
    const T a = static_cast<T>(static_cast<double>(pg[ch]) * (*inv_std)[ch]);
    const T bshift = static_cast<T>(static_cast<double>(pbt[ch]) -
                                    static_cast<double>(pg[ch]) * (*inv_std)[ch] * (*mean)[ch]);
    const T* xp = px + nc * hw;
    T* yp = y.data() + nc * hw;
    for (std::size_t i = 0; i < hw; ++i) yp[i] = a * xp[i] + bshift;
  });

  auto nx = x.node();
  auto ng = gamma.node();
  auto nbt = beta.node();
  return make_op<T>(
      x.shape(), std::move(y), {nx, ng, nbt},
      [nx, ng, nbt, mean, inv_std, n, c, hw, m, training](Node<T>& out) {
        const T* g = out.grad.data();
        const T* px = nx->value.data();
        const T* pg = ng->value.data();
        // per-channel reductions of dy and dy*xhat
        std::vector<double> s_g(c, 0.0), s_gx(c, 0.0);
        parallel_for(c, 2 * n * hw, [&](std::size_t ch) {
          double sg = 0.0, sgx = 0.0;
          for (std::size_t in = 0; in < n; ++in) {
            const std::size_t base = (in * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              const double gv = static_cast<double>(g[base + i]);
              const double xhat =
                  (static_cast<double>(px[base + i]) - (*mean)[ch]) * (*inv_std)[ch];
              sg += gv;
              sgx += gv * xhat;
            }
          }
          s_g[ch] = sg;
          s_gx[ch] = sgx;
        });
        if (ng->requires_grad)
          for (std::size_t ch = 0; ch < c; ++ch) ng->grad[ch] += static_cast<T>(s_gx[ch]);
        if (nbt->requires_grad)
          for (std::size_t ch = 0; ch < c; ++ch) nbt->grad[ch] += static_cast<T>(s_g[ch]);
        if (nx->requires_grad) {
          T* dx = nx->grad.data();
          parallel_for(n * c, 2 * hw, [&](std::size_t nc) {
            const std::size_t ch = nc % c;
            const double gam_is = static_cast<double>(pg[ch]) * (*inv_std)[ch];
            const T* gp = g + nc * hw;
            const T* xp = px + nc * hw;
            T* dxp = dx + nc * hw;
            if (training) {
              const double inv_m = 1.0 / static_cast<double>(m);
              for (std::size_t i = 0; i < hw; ++i) {
                const double xhat =
                    (static_cast<double>(xp[i]) - (*mean)[ch]) * (*inv_std)[ch];
                dxp[i] += static_cast<T>(
                    gam_is * (static_cast<double>(gp[i]) -
                              inv_m * (s_g[ch] + xhat * s_gx[ch])));
              }
            } else {
              for (std::size_t i = 0; i < hw; ++i)
                dxp[i] += static_cast<T>(gam_is * static_cast<double>(gp[i]));
            }
          });
        }
      });
}

}  // namespace assertkit::nn

#endif  // ASSERTKIT_NN_OPS_HPP_
