// Copyright 2026 The jsdseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "jsdseg/ops.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "jsdseg/errors.h"

namespace jsd {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
void RequireSameShape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + ShapeString(a.shape()) +
                         " vs " + ShapeString(b.shape()));
  }
}

template <typename T>
void RequireRank4(const BasicTensor<T>& t, const char* what) {
  if (!t.defined() || t.rank() != 4) {
    throw DimensionError(std::string(what) + " must be 4-D (N, C, H, W), got " +
                         (t.defined() ? ShapeString(t.shape()) : "<undefined>"));
  }
}

template <typename T, typename Fwd, typename Bwd>
BasicTensor<T> Unary(const BasicTensor<T>& x, const char* op, Fwd fwd, Bwd dfdx) {
  auto in = x.data();
  std::vector<T> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return MakeResult<T>(x.shape(), std::move(out), {x}, op,
                       [x, dfdx](std::span<const T> g) {
                         auto sink = GradSink(x);
                         auto v = x.data();
                         for (size_t i = 0; i < sink.size(); ++i) sink[i] += g[i] * dfdx(v[i]);
                       });
}

// Sliding-window geometry of one convolution group.
struct Window {
  int64_t channels, h, w, kh, kw, stride, pad, dilation, out_h, out_w;
};

// Unfolds `channels` planes of N samples into a (channels*kh*kw) x (N*out_h*out_w)
// matrix. `sample_stride` is the element distance between samples in `src`.
template <typename T>
void Im2Col(const T* src, int64_t n_samples, int64_t sample_stride, const Window& win, T* col) {
  const int64_t out_plane = win.out_h * win.out_w;
  const int64_t cols = n_samples * out_plane;
  for (int64_t c = 0; c < win.channels; ++c) {
    for (int64_t ki = 0; ki < win.kh; ++ki) {
      for (int64_t kj = 0; kj < win.kw; ++kj) {
        T* dst = col + ((c * win.kh + ki) * win.kw + kj) * cols;
        for (int64_t n = 0; n < n_samples; ++n) {
          const T* plane = src + n * sample_stride + c * win.h * win.w;
          for (int64_t oy = 0; oy < win.out_h; ++oy) {
            T* d = dst + n * out_plane + oy * win.out_w;
            const int64_t iy = oy * win.stride - win.pad + ki * win.dilation;
            if (iy < 0 || iy >= win.h) {
              std::fill(d, d + win.out_w, T(0));
              continue;
            }
            const T* row = plane + iy * win.w;
            for (int64_t ox = 0; ox < win.out_w; ++ox) {
              const int64_t ix = ox * win.stride - win.pad + kj * win.dilation;
              d[ox] = (ix >= 0 && ix < win.w) ? row[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

// Adjoint of Im2Col: accumulates the column matrix back into the planes.
template <typename T>
void Col2Im(const T* col, int64_t n_samples, int64_t sample_stride, const Window& win, T* dst) {
  const int64_t out_plane = win.out_h * win.out_w;
  const int64_t cols = n_samples * out_plane;
  for (int64_t c = 0; c < win.channels; ++c) {
    for (int64_t ki = 0; ki < win.kh; ++ki) {
      for (int64_t kj = 0; kj < win.kw; ++kj) {
        const T* src = col + ((c * win.kh + ki) * win.kw + kj) * cols;
        for (int64_t n = 0; n < n_samples; ++n) {
          T* plane = dst + n * sample_stride + c * win.h * win.w;
          for (int64_t oy = 0; oy < win.out_h; ++oy) {
            const int64_t iy = oy * win.stride - win.pad + ki * win.dilation;
            if (iy < 0 || iy >= win.h) continue;
            const T* s = src + n * out_plane + oy * win.out_w;
            T* row = plane + iy * win.w;
            for (int64_t ox = 0; ox < win.out_w; ++ox) {
              const int64_t ix = ox * win.stride - win.pad + kj * win.dilation;
              if (ix >= 0 && ix < win.w) row[ix] += s[ox];
            }
          }
        }
      }
    }
  }
}

// Copies channels [c0, c0 + count) of an N x C x plane tensor into a
// count x (N * plane) matrix, and the reverse (accumulating) scatter.
template <typename T>
void GatherChannels(const T* src, int64_t n_samples, int64_t channels, int64_t c0,
                    int64_t count, int64_t plane, T* dst) {
  for (int64_t c = 0; c < count; ++c) {
    for (int64_t n = 0; n < n_samples; ++n) {
      const T* s = src + (n * channels + c0 + c) * plane;
      std::copy(s, s + plane, dst + (c * n_samples + n) * plane);
    }
  }
}

template <typename T>
void ScatterAddChannels(const T* src, int64_t n_samples, int64_t channels, int64_t c0,
                        int64_t count, int64_t plane, T* dst) {
  for (int64_t c = 0; c < count; ++c) {
    for (int64_t n = 0; n < n_samples; ++n) {
      const T* s = src + (c * n_samples + n) * plane;
      T* d = dst + (n * channels + c0 + c) * plane;
      for (int64_t i = 0; i < plane; ++i) d[i] += s[i];
    }
  }
}

}  // namespace

ConvGeometry Conv2dOutputSize(int64_t h, int64_t w, int64_t kh, int64_t kw,
                              const Conv2dOptions& o) {
  if (o.stride < 1 || o.dilation < 1 || o.groups < 1) {
    throw ConfigError("conv2d: stride, dilation and groups must be positive");
  }
  const int64_t ph = o.padding < 0 ? o.dilation * (kh - 1) / 2 : o.padding;
  const int64_t pw = o.padding < 0 ? o.dilation * (kw - 1) / 2 : o.padding;
  ConvGeometry g;
  g.out_h = (h + 2 * ph - o.dilation * (kh - 1) - 1) / o.stride + 1;
  g.out_w = (w + 2 * pw - o.dilation * (kw - 1) - 1) / o.stride + 1;
  if (g.out_h <= 0 || g.out_w <= 0) {
    throw DimensionError("conv2d: input " + std::to_string(h) + "x" + std::to_string(w) +
                         " too small for the kernel");
  }
  return g;
}

ConvGeometry ConvTranspose2dOutputSize(int64_t h, int64_t w, int64_t kh, int64_t kw,
                                       const ConvTranspose2dOptions& o) {
  if (o.stride < 1 || o.dilation < 1 || o.groups < 1) {
    throw ConfigError("conv_transpose2d: stride, dilation and groups must be positive");
  }
  const int64_t ph = o.padding < 0 ? o.dilation * (kh - 1) / 2 : o.padding;
  const int64_t pw = o.padding < 0 ? o.dilation * (kw - 1) / 2 : o.padding;
  const int64_t op = o.output_padding < 0 ? o.stride - 1 : o.output_padding;
  if (op >= o.stride) throw ConfigError("conv_transpose2d: output_padding must be < stride");
  ConvGeometry g;
  g.out_h = (h - 1) * o.stride - 2 * ph + o.dilation * (kh - 1) + op + 1;
  g.out_w = (w - 1) * o.stride - 2 * pw + o.dilation * (kw - 1) + op + 1;
  if (g.out_h <= 0 || g.out_w <= 0) throw DimensionError("conv_transpose2d: empty output");
  return g;
}

template <typename T>
BasicTensor<T> Add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  RequireSameShape(a, b, "add");
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, "add",
                       [a, b](std::span<const T> g) {
                         for (const auto* t : {&a, &b}) {
                           auto sink = GradSink(*t);
                           for (size_t i = 0; i < sink.size(); ++i) sink[i] += g[i];
                         }
                       });
}

template <typename T>
BasicTensor<T> Sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  RequireSameShape(a, b, "sub");
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, "sub",
                       [a, b](std::span<const T> g) {
                         auto sa = GradSink(a);
                         for (size_t i = 0; i < sa.size(); ++i) sa[i] += g[i];
                         auto sb = GradSink(b);
                         for (size_t i = 0; i < sb.size(); ++i) sb[i] -= g[i];
                       });
}

template <typename T>
BasicTensor<T> Mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  RequireSameShape(a, b, "mul");
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, "mul",
                       [a, b](std::span<const T> g) {
                         auto sa = GradSink(a);
                         auto vb = b.data();
                         for (size_t i = 0; i < sa.size(); ++i) sa[i] += g[i] * vb[i];
                         auto sb = GradSink(b);
                         auto va = a.data();
                         for (size_t i = 0; i < sb.size(); ++i) sb[i] += g[i] * va[i];
                       });
}

template <typename T>
BasicTensor<T> Scale(const BasicTensor<T>& a, T factor) {
  return Unary(a, "scale", [factor](T v) { return v * factor; },
               [factor](T) { return factor; });
}

template <typename T>
BasicTensor<T> AddScalar(const BasicTensor<T>& a, T value) {
  return Unary(a, "add_scalar", [value](T v) { return v + value; }, [](T) { return T(1); });
}

template <typename T>
BasicTensor<T> Relu(const BasicTensor<T>& x) {
  return Unary(x, "relu", [](T v) { return v > T(0) ? v : T(0); },
               [](T v) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
BasicTensor<T> Abs(const BasicTensor<T>& x) {
  return Unary(x, "abs", [](T v) { return std::abs(v); },
               [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
BasicTensor<T> Softplus(const BasicTensor<T>& x) {
  return Unary(
      x, "softplus",
      [](T v) { return v > T(20) ? v : std::log1p(std::exp(v)); },
      [](T v) { return T(1) / (T(1) + std::exp(-v)); });
}

template <typename T>
BasicTensor<T> Log(const BasicTensor<T>& x) {
  for (T v : x.data()) {
    if (!(v > T(0))) throw NumericError("log of non-positive value");
  }
  return Unary(x, "log", [](T v) { return std::log(v); }, [](T v) { return T(1) / v; });
}

template <typename T>
BasicTensor<T> LowerBound(const BasicTensor<T>& x, T bound) {
  auto in = x.data();
  std::vector<T> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) out[i] = std::max(in[i], bound);
  return MakeResult<T>(x.shape(), std::move(out), {x}, "lower_bound",
                       [x, bound](std::span<const T> g) {
                         auto sink = GradSink(x);
                         auto v = x.data();
                         for (size_t i = 0; i < sink.size(); ++i) {
                           if (v[i] >= bound || g[i] < T(0)) sink[i] += g[i];
                         }
                       });
}

template <typename T>
BasicTensor<T> RoundStraightThrough(const BasicTensor<T>& x) {
  return Unary(x, "round_ste", [](T v) { return std::round(v); }, [](T) { return T(1); });
}

template <typename T>
BasicTensor<T> Sum(const BasicTensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  return MakeResult<T>({}, {total}, {x}, "sum", [x](std::span<const T> g) {
    auto sink = GradSink(x);
    for (auto& s : sink) s += g[0];
  });
}

template <typename T>
BasicTensor<T> Mean(const BasicTensor<T>& x) {
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  return Scale(Sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
BasicTensor<T> Conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, const Conv2dOptions& o) {
  RequireRank4(input, "conv2d input");
  RequireRank4(weight, "conv2d weight");
  const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int64_t f = weight.dim(0), cg = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  const int64_t groups = o.groups;
  if (groups < 1 || c % groups != 0 || f % groups != 0) {
    throw ConfigError("conv2d: groups=" + std::to_string(groups) + " must divide C_in=" +
                      std::to_string(c) + " and F=" + std::to_string(f));
  }
  if (cg != c / groups) {
    throw DimensionError("conv2d: weight " + ShapeString(weight.shape()) +
                         " incompatible with input " + ShapeString(input.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != f)) {
    throw DimensionError("conv2d: bias must have F entries");
  }
  const ConvGeometry geo = Conv2dOutputSize(h, w, kh, kw, o);
  const int64_t ph = o.padding < 0 ? o.dilation * (kh - 1) / 2 : o.padding;
  const Window win{cg, h, w, kh, kw, o.stride, ph, o.dilation, geo.out_h, geo.out_w};
  // Square kernels only carry a single padding value; rectangular kernels
  // with "same" padding are not used anywhere.
  if (kh != kw && o.padding < 0) throw ConfigError("conv2d: same padding needs square kernels");

  const int64_t fg = f / groups;
  const int64_t k = cg * kh * kw;
  const int64_t out_plane = geo.out_h * geo.out_w;
  const int64_t p = n * out_plane;
  std::vector<T> out(static_cast<size_t>(n * f * out_plane));
  std::vector<T> col(static_cast<size_t>(k * p));
  std::vector<T> tmp(static_cast<size_t>(fg * p));
  auto x = input.data();
  auto wt = weight.data();
  for (int64_t g = 0; g < groups; ++g) {
    Im2Col(x.data() + g * cg * h * w, n, c * h * w, win, col.data());
    ConstMatrixMap<T> wg(wt.data() + g * fg * k, fg, k);
    ConstMatrixMap<T> colm(col.data(), k, p);
    MatrixMap<T> res(tmp.data(), fg, p);
    res.noalias() = wg * colm;
    for (int64_t fi = 0; fi < fg; ++fi) {
      const T b = bias.defined() ? bias.data()[g * fg + fi] : T(0);
      for (int64_t ni = 0; ni < n; ++ni) {
        const T* s = tmp.data() + fi * p + ni * out_plane;
        T* d = out.data() + (ni * f + g * fg + fi) * out_plane;
        for (int64_t i = 0; i < out_plane; ++i) d[i] = s[i] + b;
      }
    }
  }

  std::vector<BasicTensor<T>> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return MakeResult<T>(
      {n, f, geo.out_h, geo.out_w}, std::move(out), inputs, "conv2d",
      [=](std::span<const T> grad_out) {
        auto dx = GradSink(input);
        auto dw = GradSink(weight);
        auto db = GradSink(bias);
        std::vector<T> dtmp(static_cast<size_t>(fg * p));
        std::vector<T> colb;
        for (int64_t g = 0; g < groups; ++g) {
          for (int64_t fi = 0; fi < fg; ++fi) {
            for (int64_t ni = 0; ni < n; ++ni) {
              const T* s = grad_out.data() + (ni * f + g * fg + fi) * out_plane;
              std::copy(s, s + out_plane, dtmp.data() + fi * p + ni * out_plane);
            }
          }
          ConstMatrixMap<T> dres(dtmp.data(), fg, p);
          if (!db.empty()) {
            // Plain loop: Eigen's vectorized sum splits by address alignment,
            // which would make the result depend on where dtmp was allocated.
            for (int64_t fi = 0; fi < fg; ++fi) {
              T acc = 0;
              for (int64_t j = 0; j < p; ++j) acc += dtmp[static_cast<size_t>(fi * p + j)];
              db[g * fg + fi] += acc;
            }
          }
          if (!dw.empty()) {
            colb.resize(static_cast<size_t>(k * p));
            Im2Col(input.data().data() + g * cg * h * w, n, c * h * w, win, colb.data());
            ConstMatrixMap<T> colm(colb.data(), k, p);
            MatrixMap<T> dwg(dw.data() + g * fg * k, fg, k);
            dwg.noalias() += dres * colm.transpose();
          }
          if (!dx.empty()) {
            colb.resize(static_cast<size_t>(k * p));
            ConstMatrixMap<T> wg(weight.data().data() + g * fg * k, fg, k);
            MatrixMap<T> dcol(colb.data(), k, p);
            dcol.noalias() = wg.transpose() * dres;
            Col2Im(colb.data(), n, c * h * w, win, dx.data() + g * cg * h * w);
          }
        }
      });
}

template <typename T>
BasicTensor<T> ConvTranspose2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& bias, const ConvTranspose2dOptions& o) {
  RequireRank4(input, "conv_transpose2d input");
  RequireRank4(weight, "conv_transpose2d weight");
  const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int64_t groups = o.groups;
  if (groups < 1 || c % groups != 0) {
    throw ConfigError("conv_transpose2d: groups=" + std::to_string(groups) +
                      " must divide C_in=" + std::to_string(c));
  }
  if (weight.dim(0) != c) {
    throw DimensionError("conv_transpose2d: weight " + ShapeString(weight.shape()) +
                         " incompatible with input " + ShapeString(input.shape()));
  }
  const int64_t fg = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  if (kh != kw) throw ConfigError("conv_transpose2d: square kernels only");
  const int64_t f = fg * groups;
  const int64_t cg = c / groups;
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != f)) {
    throw DimensionError("conv_transpose2d: bias must have F entries");
  }
  const ConvGeometry geo = ConvTranspose2dOutputSize(h, w, kh, kw, o);
  const int64_t pad = o.padding < 0 ? o.dilation * (kh - 1) / 2 : o.padding;
  // Geometry of the adjoint convolution, which maps the output back to the input.
  const Window win{fg, geo.out_h, geo.out_w, kh, kw, o.stride, pad, o.dilation, h, w};
  const int64_t k = fg * kh * kw;
  const int64_t in_plane = h * w;
  const int64_t out_plane = geo.out_h * geo.out_w;
  const int64_t p = n * in_plane;

  std::vector<T> out(static_cast<size_t>(n * f * out_plane), T(0));
  std::vector<T> xg(static_cast<size_t>(cg * p));
  std::vector<T> col(static_cast<size_t>(k * p));
  for (int64_t g = 0; g < groups; ++g) {
    GatherChannels(input.data().data(), n, c, g * cg, cg, in_plane, xg.data());
    ConstMatrixMap<T> wg(weight.data().data() + g * cg * k, cg, k);
    ConstMatrixMap<T> xm(xg.data(), cg, p);
    MatrixMap<T> colm(col.data(), k, p);
    colm.noalias() = wg.transpose() * xm;
    Col2Im(col.data(), n, f * out_plane, win, out.data() + g * fg * out_plane);
  }
  if (bias.defined()) {
    for (int64_t ni = 0; ni < n; ++ni) {
      for (int64_t fi = 0; fi < f; ++fi) {
        T* d = out.data() + (ni * f + fi) * out_plane;
        const T b = bias.data()[fi];
        for (int64_t i = 0; i < out_plane; ++i) d[i] += b;
      }
    }
  }

  std::vector<BasicTensor<T>> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return MakeResult<T>(
      {n, f, geo.out_h, geo.out_w}, std::move(out), inputs, "conv_transpose2d",
      [=](std::span<const T> grad_out) {
        auto dx = GradSink(input);
        auto dw = GradSink(weight);
        auto db = GradSink(bias);
        if (!db.empty()) {
          for (int64_t ni = 0; ni < n; ++ni) {
            for (int64_t fi = 0; fi < f; ++fi) {
              const T* s = grad_out.data() + (ni * f + fi) * out_plane;
              T acc = 0;
              for (int64_t i = 0; i < out_plane; ++i) acc += s[i];
              db[fi] += acc;
            }
          }
        }
        if (dx.empty() && dw.empty()) return;
        std::vector<T> dcol(static_cast<size_t>(k * p));
        std::vector<T> buf(static_cast<size_t>(cg * p));
        for (int64_t g = 0; g < groups; ++g) {
          Im2Col(grad_out.data() + g * fg * out_plane, n, f * out_plane, win, dcol.data());
          ConstMatrixMap<T> dcolm(dcol.data(), k, p);
          if (!dx.empty()) {
            ConstMatrixMap<T> wg(weight.data().data() + g * cg * k, cg, k);
            MatrixMap<T> dxm(buf.data(), cg, p);
            dxm.noalias() = wg * dcolm;
            ScatterAddChannels(buf.data(), n, c, g * cg, cg, in_plane, dx.data());
          }
          if (!dw.empty()) {
            GatherChannels(input.data().data(), n, c, g * cg, cg, in_plane, buf.data());
            ConstMatrixMap<T> xm(buf.data(), cg, p);
            MatrixMap<T> dwg(dw.data() + g * cg * k, cg, k);
            dwg.noalias() += xm * dcolm.transpose();
          }
        }
      });
}

template <typename T>
BasicTensor<T> BatchNorm2d(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                           const BasicTensor<T>& beta, BasicTensor<T>& running_mean,
                           BasicTensor<T>& running_var, T eps, T momentum, bool training) {
  RequireRank4(input, "batchnorm input");
  const int64_t n = input.dim(0), c = input.dim(1), plane = input.dim(2) * input.dim(3);
  for (const BasicTensor<T>* t : {&gamma, &beta, static_cast<const BasicTensor<T>*>(&running_mean),
                                 static_cast<const BasicTensor<T>*>(&running_var)}) {
    if (!t->defined() || t->numel() != c) {
      throw DimensionError("batchnorm: per-channel parameters must have " +
                           std::to_string(c) + " entries");
    }
  }
  const int64_t m = n * plane;
  auto x = input.data();
  std::vector<T> mean(c), invstd(c);
  if (training) {
    if (m < 2) throw DimensionError("batchnorm: training needs more than one value per channel");
    auto rm = running_mean.mutable_data();
    auto rv = running_var.mutable_data();
    for (int64_t ch = 0; ch < c; ++ch) {
      double s = 0;
      for (int64_t ni = 0; ni < n; ++ni) {
        const T* p = x.data() + (ni * c + ch) * plane;
        for (int64_t i = 0; i < plane; ++i) s += p[i];
      }
      const double mu = s / static_cast<double>(m);
      double ss = 0;
      for (int64_t ni = 0; ni < n; ++ni) {
        const T* p = x.data() + (ni * c + ch) * plane;
        for (int64_t i = 0; i < plane; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      const double var = ss / static_cast<double>(m);
      mean[ch] = static_cast<T>(mu);
      invstd[ch] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      rm[ch] = (T(1) - momentum) * rm[ch] + momentum * static_cast<T>(mu);
      rv[ch] = (T(1) - momentum) * rv[ch] +
               momentum * static_cast<T>(var * static_cast<double>(m) / static_cast<double>(m - 1));
    }
  } else {
    for (int64_t ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean.data()[ch];
      invstd[ch] = T(1) / std::sqrt(running_var.data()[ch] + eps);
    }
  }
  std::vector<T> xhat(x.size());
  std::vector<T> out(x.size());
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const int64_t base = (ni * c + ch) * plane;
      const T gm = gamma.data()[ch], bt = beta.data()[ch];
      for (int64_t i = 0; i < plane; ++i) {
        const T v = (x[base + i] - mean[ch]) * invstd[ch];
        xhat[base + i] = v;
        out[base + i] = gm * v + bt;
      }
    }
  }
  return MakeResult<T>(
      input.shape(), std::move(out), {input, gamma, beta}, "batchnorm2d",
      [=, xhat = std::move(xhat), invstd = std::move(invstd)](std::span<const T> g) {
        auto dx = GradSink(input);
        auto dg = GradSink(gamma);
        auto dbt = GradSink(beta);
        for (int64_t ch = 0; ch < c; ++ch) {
          T sum_g = 0, sum_gx = 0;
          for (int64_t ni = 0; ni < n; ++ni) {
            const int64_t base = (ni * c + ch) * plane;
            for (int64_t i = 0; i < plane; ++i) {
              sum_g += g[base + i];
              sum_gx += g[base + i] * xhat[base + i];
            }
          }
          if (!dg.empty()) dg[ch] += sum_gx;
          if (!dbt.empty()) dbt[ch] += sum_g;
          if (dx.empty()) continue;
          const T scale = gamma.data()[ch] * invstd[ch];
          const T mg = sum_g / static_cast<T>(m), mgx = sum_gx / static_cast<T>(m);
          for (int64_t ni = 0; ni < n; ++ni) {
            const int64_t base = (ni * c + ch) * plane;
            for (int64_t i = 0; i < plane; ++i) {
              dx[base + i] += training ? scale * (g[base + i] - mg - xhat[base + i] * mgx)
                                       : scale * g[base + i];
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> GlobalAvgPool(const BasicTensor<T>& x) {
  RequireRank4(x, "avg_pool input");
  const int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<T> out(static_cast<size_t>(n * c));
  auto in = x.data();
  for (int64_t i = 0; i < n * c; ++i) {
    T s = 0;
    for (int64_t j = 0; j < plane; ++j) s += in[i * plane + j];
    out[i] = s / static_cast<T>(plane);
  }
  return MakeResult<T>({n, c, 1, 1}, std::move(out), {x}, "global_avg_pool",
                       [x, n, c, plane](std::span<const T> g) {
                         auto sink = GradSink(x);
                         for (int64_t i = 0; i < n * c; ++i) {
                           const T v = g[i] / static_cast<T>(plane);
                           for (int64_t j = 0; j < plane; ++j) sink[i * plane + j] += v;
                         }
                       });
}

namespace {

struct LinearTaps {
  std::vector<int64_t> lo, hi;
  std::vector<double> frac;
};

LinearTaps HalfPixelTaps(int64_t in, int64_t out) {
  LinearTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int64_t lo = static_cast<int64_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    t.lo[o] = lo;
    t.hi[o] = std::min(lo + 1, in - 1);
    t.frac[o] = src - static_cast<double>(lo);
  }
  return t;
}

}  // namespace

template <typename T>
BasicTensor<T> UpsampleBilinear(const BasicTensor<T>& x, int64_t out_h, int64_t out_w) {
  RequireRank4(x, "upsample input");
  if (out_h <= 0 || out_w <= 0) throw DimensionError("upsample: empty target size");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  auto ty = std::make_shared<LinearTaps>(HalfPixelTaps(h, out_h));
  auto tx = std::make_shared<LinearTaps>(HalfPixelTaps(w, out_w));
  std::vector<T> out(static_cast<size_t>(n * c * out_h * out_w));
  auto in = x.data();
  for (int64_t p = 0; p < n * c; ++p) {
    const T* src = in.data() + p * h * w;
    T* dst = out.data() + p * out_h * out_w;
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const T fy = static_cast<T>(ty->frac[oy]);
      const T* r0 = src + ty->lo[oy] * w;
      const T* r1 = src + ty->hi[oy] * w;
      for (int64_t ox = 0; ox < out_w; ++ox) {
        const T fx = static_cast<T>(tx->frac[ox]);
        const int64_t x0 = tx->lo[ox], x1 = tx->hi[ox];
        const T top = r0[x0] + (r0[x1] - r0[x0]) * fx;
        const T bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
        dst[oy * out_w + ox] = top + (bot - top) * fy;
      }
    }
  }
  return MakeResult<T>(
      {n, c, out_h, out_w}, std::move(out), {x}, "upsample_bilinear",
      [x, ty, tx, n, c, h, w, out_h, out_w](std::span<const T> g) {
        auto sink = GradSink(x);
        for (int64_t p = 0; p < n * c; ++p) {
          T* dst = sink.data() + p * h * w;
          const T* src = g.data() + p * out_h * out_w;
          for (int64_t oy = 0; oy < out_h; ++oy) {
            const T fy = static_cast<T>(ty->frac[oy]);
            T* r0 = dst + ty->lo[oy] * w;
            T* r1 = dst + ty->hi[oy] * w;
            for (int64_t ox = 0; ox < out_w; ++ox) {
              const T fx = static_cast<T>(tx->frac[ox]);
              const int64_t x0 = tx->lo[ox], x1 = tx->hi[ox];
              const T v = src[oy * out_w + ox];
              r0[x0] += v * (T(1) - fy) * (T(1) - fx);
              r0[x1] += v * (T(1) - fy) * fx;
              r1[x0] += v * fy * (T(1) - fx);
              r1[x1] += v * fy * fx;
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> ConcatChannels(const std::vector<BasicTensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  for (const auto& t : parts) RequireRank4(t, "concat input");
  const int64_t n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
  int64_t c_total = 0;
  for (const auto& t : parts) {
    if (t.dim(0) != n || t.dim(2) != h || t.dim(3) != w) {
      throw DimensionError("concat: non-channel extents differ: " + ShapeString(parts[0].shape()) +
                           " vs " + ShapeString(t.shape()));
    }
    c_total += t.dim(1);
  }
  const int64_t plane = h * w;
  std::vector<T> out(static_cast<size_t>(n * c_total * plane));
  int64_t c0 = 0;
  std::vector<int64_t> offsets;
  for (const auto& t : parts) {
    offsets.push_back(c0);
    const int64_t ct = t.dim(1);
    for (int64_t ni = 0; ni < n; ++ni) {
      const T* s = t.data().data() + ni * ct * plane;
      std::copy(s, s + ct * plane, out.data() + (ni * c_total + c0) * plane);
    }
    c0 += ct;
  }
  return MakeResult<T>({n, c_total, h, w}, std::move(out), parts, "concat",
                       [parts, offsets, n, c_total, plane](std::span<const T> g) {
                         for (size_t k = 0; k < parts.size(); ++k) {
                           auto sink = GradSink(parts[k]);
                           if (sink.empty()) continue;
                           const int64_t ct = parts[k].dim(1);
                           for (int64_t ni = 0; ni < n; ++ni) {
                             const T* s = g.data() + (ni * c_total + offsets[k]) * plane;
                             T* d = sink.data() + ni * ct * plane;
                             for (int64_t i = 0; i < ct * plane; ++i) d[i] += s[i];
                           }
                         }
                       });
}

template <typename T>
BasicTensor<T> SoftmaxChannels(const BasicTensor<T>& logits) {
  RequireRank4(logits, "softmax input");
  const int64_t n = logits.dim(0), c = logits.dim(1), plane = logits.dim(2) * logits.dim(3);
  auto in = logits.data();
  std::vector<T> out(in.size());
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t i = 0; i < plane; ++i) {
      const int64_t base = ni * c * plane + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (int64_t ch = 0; ch < c; ++ch) mx = std::max(mx, in[base + ch * plane]);
      T s = 0;
      for (int64_t ch = 0; ch < c; ++ch) {
        const T e = std::exp(in[base + ch * plane] - mx);
        out[base + ch * plane] = e;
        s += e;
      }
      for (int64_t ch = 0; ch < c; ++ch) out[base + ch * plane] /= s;
    }
  }
  auto y = std::make_shared<std::vector<T>>(out);
  return MakeResult<T>(logits.shape(), std::move(out), {logits}, "softmax",
                       [logits, y, n, c, plane](std::span<const T> g) {
                         auto sink = GradSink(logits);
                         for (int64_t ni = 0; ni < n; ++ni) {
                           for (int64_t i = 0; i < plane; ++i) {
                             const int64_t base = ni * c * plane + i;
                             T dot = 0;
                             for (int64_t ch = 0; ch < c; ++ch) {
                               dot += g[base + ch * plane] * (*y)[base + ch * plane];
                             }
                             for (int64_t ch = 0; ch < c; ++ch) {
                               const int64_t j = base + ch * plane;
                               sink[j] += (*y)[j] * (g[j] - dot);
                             }
                           }
                         }
                       });
}

template <typename T>
std::vector<int32_t> ArgmaxChannels(const BasicTensor<T>& logits) {
  RequireRank4(logits, "argmax input");
  const int64_t n = logits.dim(0), c = logits.dim(1), plane = logits.dim(2) * logits.dim(3);
  auto in = logits.data();
  std::vector<int32_t> out(static_cast<size_t>(n * plane));
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t i = 0; i < plane; ++i) {
      const int64_t base = ni * c * plane + i;
      int32_t best = 0;
      T best_v = in[base];
      for (int64_t ch = 1; ch < c; ++ch) {
        if (in[base + ch * plane] > best_v) {
          best_v = in[base + ch * plane];
          best = static_cast<int32_t>(ch);
        }
      }
      out[ni * plane + i] = best;
    }
  }
  return out;
}

namespace {

// Shared core of both cross-entropy forms: `target(n, i, ch)` gives the
// target probability of class ch at pixel i of image n; `valid(n, i)` says
// whether the pixel counts.
template <typename T, typename Target, typename Valid>
BasicTensor<T> CrossEntropyImpl(const BasicTensor<T>& logits, Target target, Valid valid) {
  RequireRank4(logits, "cross_entropy logits");
  const int64_t n = logits.dim(0), c = logits.dim(1), plane = logits.dim(2) * logits.dim(3);
  auto in = logits.data();
  std::vector<T> softmax(in.size());
  std::vector<T> weight(static_cast<size_t>(n * plane), T(0));
  std::vector<int64_t> counts(n, 0);
  int64_t images = 0;
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t i = 0; i < plane; ++i) counts[ni] += valid(ni, i) ? 1 : 0;
    images += counts[ni] > 0 ? 1 : 0;
  }
  double total = 0;
  for (int64_t ni = 0; ni < n; ++ni) {
    if (counts[ni] == 0) continue;
    double image_sum = 0;
    for (int64_t i = 0; i < plane; ++i) {
      const int64_t base = ni * c * plane + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (int64_t ch = 0; ch < c; ++ch) mx = std::max(mx, in[base + ch * plane]);
      T s = 0;
      for (int64_t ch = 0; ch < c; ++ch) {
        const T e = std::exp(in[base + ch * plane] - mx);
        softmax[base + ch * plane] = e;
        s += e;
      }
      const T lse = mx + std::log(s);
      for (int64_t ch = 0; ch < c; ++ch) softmax[base + ch * plane] /= s;
      if (!valid(ni, i)) continue;
      weight[ni * plane + i] = T(1) / static_cast<T>(counts[ni] * images);
      for (int64_t ch = 0; ch < c; ++ch) {
        const T t = target(ni, i, ch);
        if (t != T(0)) image_sum -= static_cast<double>(t * (in[base + ch * plane] - lse));
      }
    }
    total += image_sum / static_cast<double>(counts[ni]);
  }
  const T loss = images > 0 ? static_cast<T>(total / static_cast<double>(images)) : T(0);
  return MakeResult<T>(
      {}, {loss}, {logits}, "cross_entropy",
      [logits, softmax = std::move(softmax), weight = std::move(weight), target, n, c,
       plane](std::span<const T> g) {
        auto sink = GradSink(logits);
        for (int64_t ni = 0; ni < n; ++ni) {
          for (int64_t i = 0; i < plane; ++i) {
            const T wgt = weight[ni * plane + i];
            if (wgt == T(0)) continue;
            T tsum = 0;
            for (int64_t ch = 0; ch < c; ++ch) tsum += target(ni, i, ch);
            const int64_t base = ni * c * plane + i;
            for (int64_t ch = 0; ch < c; ++ch) {
              const int64_t j = base + ch * plane;
              sink[j] += g[0] * wgt * (tsum * softmax[j] - target(ni, i, ch));
            }
          }
        }
      });
}

}  // namespace

template <typename T>
BasicTensor<T> CrossEntropyOneHot(const BasicTensor<T>& logits, const BasicTensor<T>& one_hot) {
  RequireSameShape(logits, one_hot, "cross_entropy");
  const int64_t n = logits.dim(0), c = logits.dim(1), plane = logits.dim(2) * logits.dim(3);
  auto t = one_hot.data();
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t i = 0; i < plane; ++i) {
      int ones = 0;
      for (int64_t ch = 0; ch < c; ++ch) {
        const T v = t[(ni * c + ch) * plane + i];
        if (v == T(1)) {
          ++ones;
        } else if (v != T(0)) {
          throw ValidationError("cross_entropy: target is not one-hot");
        }
      }
      if (ones != 1) throw ValidationError("cross_entropy: target is not one-hot");
    }
  }
  std::vector<T> target(t.begin(), t.end());
  auto shared = std::make_shared<std::vector<T>>(std::move(target));
  return CrossEntropyImpl(
      logits,
      [shared, c, plane](int64_t ni, int64_t i, int64_t ch) {
        return (*shared)[(ni * c + ch) * plane + i];
      },
      [](int64_t, int64_t) { return true; });
}

template <typename T>
BasicTensor<T> CrossEntropyLabels(const BasicTensor<T>& logits, std::span<const int32_t> labels) {
  RequireRank4(logits, "cross_entropy logits");
  const int64_t n = logits.dim(0), c = logits.dim(1), plane = logits.dim(2) * logits.dim(3);
  if (static_cast<int64_t>(labels.size()) != n * plane) {
    throw DimensionError("cross_entropy: label count does not match logits");
  }
  for (int32_t l : labels) {
    if (l < 0 || l > c) throw ValidationError("cross_entropy: label out of range");
  }
  auto shared = std::make_shared<std::vector<int32_t>>(labels.begin(), labels.end());
  return CrossEntropyImpl(
      logits,
      [shared, plane](int64_t ni, int64_t i, int64_t ch) {
        return (*shared)[ni * plane + i] == ch + 1 ? T(1) : T(0);
      },
      [shared, plane](int64_t ni, int64_t i) { return (*shared)[ni * plane + i] != 0; });
}

#define JSDSEG_INSTANTIATE_OPS(T)                                                              \
  template BasicTensor<T> Add(const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> Sub(const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> Mul(const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> Scale(const BasicTensor<T>&, T);                                     \
  template BasicTensor<T> AddScalar(const BasicTensor<T>&, T);                                 \
  template BasicTensor<T> Relu(const BasicTensor<T>&);                                         \
  template BasicTensor<T> Abs(const BasicTensor<T>&);                                          \
  template BasicTensor<T> Softplus(const BasicTensor<T>&);                                     \
  template BasicTensor<T> Log(const BasicTensor<T>&);                                          \
  template BasicTensor<T> LowerBound(const BasicTensor<T>&, T);                                \
  template BasicTensor<T> RoundStraightThrough(const BasicTensor<T>&);                         \
  template BasicTensor<T> Sum(const BasicTensor<T>&);                                          \
  template BasicTensor<T> Mean(const BasicTensor<T>&);                                         \
  template BasicTensor<T> Conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                 const BasicTensor<T>&, const Conv2dOptions&);                 \
  template BasicTensor<T> ConvTranspose2d(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                          const BasicTensor<T>&,                               \
                                          const ConvTranspose2dOptions&);                      \
  template BasicTensor<T> BatchNorm2d(const BasicTensor<T>&, const BasicTensor<T>&,            \
                                      const BasicTensor<T>&, BasicTensor<T>&, BasicTensor<T>&, \
                                      T, T, bool);                                             \
  template BasicTensor<T> GlobalAvgPool(const BasicTensor<T>&);                                \
  template BasicTensor<T> UpsampleBilinear(const BasicTensor<T>&, int64_t, int64_t);           \
  template BasicTensor<T> ConcatChannels(const std::vector<BasicTensor<T>>&);                  \
  template BasicTensor<T> SoftmaxChannels(const BasicTensor<T>&);                              \
  template std::vector<int32_t> ArgmaxChannels(const BasicTensor<T>&);                         \
  template BasicTensor<T> CrossEntropyOneHot(const BasicTensor<T>&, const BasicTensor<T>&);    \
  template BasicTensor<T> CrossEntropyLabels(const BasicTensor<T>&, std::span<const int32_t>);

JSDSEG_INSTANTIATE_OPS(float)
JSDSEG_INSTANTIATE_OPS(double)

#undef JSDSEG_INSTANTIATE_OPS

}  // namespace jsd
