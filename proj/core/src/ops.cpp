#include "ganscope/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace ganscope::ad {
namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::logic_error("operands recorded on different tapes");
}

// Range of output positions o with 0 <= o*s + off < extent.
struct Span1 {
  int lo;
  int hi;  // exclusive
};
Span1 valid_range(int out_extent, int stride, int off, int in_extent) {
  int lo = 0;
  if (off < 0) lo = (-off + stride - 1) / stride;
  int hi = 0;
  if (in_extent - 1 - off >= 0) hi = (in_extent - 1 - off) / stride + 1;
  hi = std::min(hi, out_extent);
  return {lo, std::max(lo, hi)};
}

void check_conv_operands(const Shape& in, const Shape& w, ConvGeometry g, const char* op,
                         int in_channels_axis_of_kernel) {
  require(in.size() == 4, std::string(op) + ": input must be [N,C,H,W], got " + to_string(in));
  require(w.size() == 4, std::string(op) + ": kernel must be rank 4, got " + to_string(w));
  require(g.stride >= 1, std::string(op) + ": stride must be >= 1");
  require(g.padding >= 0, std::string(op) + ": padding must be >= 0");
  require(in[1] == w[in_channels_axis_of_kernel],
          std::string(op) + ": channel mismatch between input " + to_string(in) +
              " and kernel " + to_string(w));
}

}  // namespace

namespace kernels {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

struct Geometry {
  int C, H, W, K, KH, KW, HO, WO, s, p;
  int rows() const { return C * KH * KW; }
  int cols() const { return HO * WO; }
};

Geometry geometry(const Shape& is, const Shape& ws, const Shape& os, ConvGeometry g) {
  return {is[1], is[2], is[3], ws[0], ws[2], ws[3], os[2], os[3], g.stride, g.padding};
}

// cols[(c*KH + i)*KW + j][oy*WO + ox] = x[c][oy*s + i - p][ox*s + j - p], zero outside.
void im2col(const float* x, const Geometry& g, float* cols) {
  std::fill(cols, cols + static_cast<std::size_t>(g.rows()) * g.cols(), 0.0f);
  for (int c = 0; c < g.C; ++c) {
    const float* xc = x + static_cast<std::size_t>(c) * g.H * g.W;
    for (int i = 0; i < g.KH; ++i) {
      const Span1 ry = valid_range(g.HO, g.s, i - g.p, g.H);
      for (int j = 0; j < g.KW; ++j) {
        const Span1 rx = valid_range(g.WO, g.s, j - g.p, g.W);
        float* row = cols + static_cast<std::size_t>((c * g.KH + i) * g.KW + j) * g.cols();
        for (int oy = ry.lo; oy < ry.hi; ++oy) {
          const float* src = xc + static_cast<std::size_t>(oy * g.s + i - g.p) * g.W + (j - g.p);
          float* dst = row + static_cast<std::size_t>(oy) * g.WO;
          for (int ox = rx.lo; ox < rx.hi; ++ox) dst[ox] = src[ox * g.s];
        }
      }
    }
  }
}

// Scatter-adds cols back into x; the adjoint of im2col.
void col2im(const float* cols, const Geometry& g, float* x) {
  for (int c = 0; c < g.C; ++c) {
    float* xc = x + static_cast<std::size_t>(c) * g.H * g.W;
    for (int i = 0; i < g.KH; ++i) {
      const Span1 ry = valid_range(g.HO, g.s, i - g.p, g.H);
      for (int j = 0; j < g.KW; ++j) {
        const Span1 rx = valid_range(g.WO, g.s, j - g.p, g.W);
        const float* row = cols + static_cast<std::size_t>((c * g.KH + i) * g.KW + j) * g.cols();
        for (int oy = ry.lo; oy < ry.hi; ++oy) {
          float* dst = xc + static_cast<std::size_t>(oy * g.s + i - g.p) * g.W + (j - g.p);
          const float* src = row + static_cast<std::size_t>(oy) * g.WO;
          for (int ox = rx.lo; ox < rx.hi; ++ox) dst[ox * g.s] += src[ox];
        }
      }
    }
  }
}

}  // namespace

// All three kernels work one sample at a time, so a sample's result never
// depends on what else is in the batch.
void correlate(std::span<const float> in, const Shape& is, std::span<const float> w,
               const Shape& ws, ConvGeometry cg, std::span<float> out, const Shape& os) {
  const Geometry g = geometry(is, ws, os, cg);
  const std::size_t in_stride = static_cast<std::size_t>(g.C) * g.H * g.W;
  const std::size_t out_stride = static_cast<std::size_t>(g.K) * g.cols();
  std::vector<float> cols(static_cast<std::size_t>(g.rows()) * g.cols());
  const MapC wm(w.data(), g.K, g.rows());
  for (int n = 0; n < is[0]; ++n) {
    im2col(in.data() + n * in_stride, g, cols.data());
    Map(out.data() + n * out_stride, g.K, g.cols()).noalias() +=
        wm * MapC(cols.data(), g.rows(), g.cols());
  }
}

void correlate_adjoint(std::span<const float> gout, const Shape& os, std::span<const float> w,
                       const Shape& ws, ConvGeometry cg, std::span<float> gin,
                       const Shape& is) {
  const Geometry g = geometry(is, ws, os, cg);
  const std::size_t in_stride = static_cast<std::size_t>(g.C) * g.H * g.W;
  const std::size_t out_stride = static_cast<std::size_t>(g.K) * g.cols();
  RowMat cols(g.rows(), g.cols());
  const MapC wm(w.data(), g.K, g.rows());
  for (int n = 0; n < is[0]; ++n) {
    cols.noalias() = wm.transpose() * MapC(gout.data() + n * out_stride, g.K, g.cols());
    col2im(cols.data(), g, gin.data() + n * in_stride);
  }
}

void correlate_weight_grad(std::span<const float> in, const Shape& is,
                           std::span<const float> gout, const Shape& os, ConvGeometry cg,
                           std::span<float> gw, const Shape& ws) {
  const Geometry g = geometry(is, ws, os, cg);
  const std::size_t in_stride = static_cast<std::size_t>(g.C) * g.H * g.W;
  const std::size_t out_stride = static_cast<std::size_t>(g.K) * g.cols();
  std::vector<float> cols(static_cast<std::size_t>(g.rows()) * g.cols());
  Map gm(gw.data(), g.K, g.rows());
  for (int n = 0; n < is[0]; ++n) {
    im2col(in.data() + n * in_stride, g, cols.data());
    gm.noalias() += MapC(gout.data() + n * out_stride, g.K, g.cols()) *
                    MapC(cols.data(), g.rows(), g.cols()).transpose();
  }
}

}  // namespace kernels

Var conv2d(Var input, Var kernel, ConvGeometry g) {
  require_same_tape(input, kernel);
  const Shape is = input.shape();
  const Shape ws = kernel.shape();
  check_conv_operands(is, ws, g, "conv2d", 1);
  require(ws[2] <= is[2] + 2 * g.padding && ws[3] <= is[3] + 2 * g.padding,
          "conv2d: kernel " + to_string(ws) + " larger than padded input " + to_string(is));
  const Shape os{is[0], ws[0], (is[2] + 2 * g.padding - ws[2]) / g.stride + 1,
                 (is[3] + 2 * g.padding - ws[3]) / g.stride + 1};
  Tensor out(os);
  kernels::correlate(input.value().data(), is, kernel.value().data(), ws, g, out.data(), os);
  const std::size_t in_id = input.id, w_id = kernel.id;
  return input.tape->record(
      std::move(out), {in_id, w_id},
      [is, ws, os, g, in_id, w_id](const Tape& t, std::span<const float> gout, GradSinks gin) {
        if (!gin[0].empty())
          kernels::correlate_adjoint(gout, os, t.value(w_id).data(), ws, g, gin[0], is);
        if (!gin[1].empty())
          kernels::correlate_weight_grad(t.value(in_id).data(), is, gout, os, g, gin[1], ws);
      });
}

Var conv_transpose2d(Var input, Var kernel, ConvGeometry g) {
  require_same_tape(input, kernel);
  const Shape ys = input.shape();
  const Shape ws = kernel.shape();
  check_conv_operands(ys, ws, g, "conv_transpose2d", 0);
  const int ho = (ys[2] - 1) * g.stride - 2 * g.padding + ws[2];
  const int wo = (ys[3] - 1) * g.stride - 2 * g.padding + ws[3];
  require(ho >= 1 && wo >= 1, "conv_transpose2d: padding too large for input " + to_string(ys));
  const Shape os{ys[0], ws[1], ho, wo};
  // The transposed output plays the role of the correlation's input.
  require((os[2] + 2 * g.padding - ws[2]) / g.stride + 1 == ys[2] &&
              (os[3] + 2 * g.padding - ws[3]) / g.stride + 1 == ys[3],
          "conv_transpose2d: inconsistent geometry");
  Tensor out(os);
  kernels::correlate_adjoint(input.value().data(), ys, kernel.value().data(), ws, g, out.data(),
                             os);
  const std::size_t y_id = input.id, w_id = kernel.id;
  return input.tape->record(
      std::move(out), {y_id, w_id},
      [ys, ws, os, g, y_id, w_id](const Tape& t, std::span<const float> gout, GradSinks gin) {
        if (!gin[0].empty())
          kernels::correlate(gout, os, t.value(w_id).data(), ws, g, gin[0], ys);
        if (!gin[1].empty())
          kernels::correlate_weight_grad(gout, os, t.value(y_id).data(), ys, g, gin[1], ws);
      });
}

Var linear(Var input, Var weight, Var bias) {
  require_same_tape(input, weight);
  require_same_tape(input, bias);
  const Shape is = input.shape(), ws = weight.shape(), bs = bias.shape();
  require(is.size() == 2 && ws.size() == 2, "linear: expected [N,D] input and [D,M] weight, got " +
                                                to_string(is) + " and " + to_string(ws));
  require(is[1] == ws[0], "linear: inner dimension mismatch " + to_string(is) + " x " + to_string(ws));
  require(bs.size() == 1 && bs[0] == ws[1], "linear: bias " + to_string(bs) +
                                                " does not match weight " + to_string(ws));
  const int N = is[0], D = is[1], M = ws[1];
  Tensor out(Shape{N, M});
  auto x = input.value().data();
  auto w = weight.value().data();
  auto b = bias.value().data();
  auto o = out.data();
  for (int n = 0; n < N; ++n) {
    float* orow = o.data() + static_cast<std::size_t>(n) * M;
    std::copy(b.begin(), b.end(), orow);
    for (int d = 0; d < D; ++d) {
      const float a = x[static_cast<std::size_t>(n) * D + d];
      const float* wrow = w.data() + static_cast<std::size_t>(d) * M;
      for (int m = 0; m < M; ++m) orow[m] += a * wrow[m];
    }
  }
  const std::size_t x_id = input.id, w_id = weight.id;
  return input.tape->record(
      std::move(out), {input.id, weight.id, bias.id},
      [N, D, M, x_id, w_id](const Tape& t, std::span<const float> g, GradSinks gin) {
        auto x = t.value(x_id).data();
        auto w = t.value(w_id).data();
        if (!gin[0].empty()) {
          for (int n = 0; n < N; ++n) {
            const float* grow = g.data() + static_cast<std::size_t>(n) * M;
            for (int d = 0; d < D; ++d) {
              const float* wrow = w.data() + static_cast<std::size_t>(d) * M;
              float acc = 0.0f;
              for (int m = 0; m < M; ++m) acc += grow[m] * wrow[m];
              gin[0][static_cast<std::size_t>(n) * D + d] += acc;
            }
          }
        }
        if (!gin[1].empty()) {
          for (int n = 0; n < N; ++n) {
            const float* grow = g.data() + static_cast<std::size_t>(n) * M;
            for (int d = 0; d < D; ++d) {
              const float a = x[static_cast<std::size_t>(n) * D + d];
              float* gw = gin[1].data() + static_cast<std::size_t>(d) * M;
              for (int m = 0; m < M; ++m) gw[m] += a * grow[m];
            }
          }
        }
        if (!gin[2].empty()) {
          for (int n = 0; n < N; ++n)
            for (int m = 0; m < M; ++m) gin[2][m] += g[static_cast<std::size_t>(n) * M + m];
        }
      });
}

Var add_channel_bias(Var x, Var bias) {
  require_same_tape(x, bias);
  const Shape xs = x.shape(), bs = bias.shape();
  require(xs.size() == 4 && bs.size() == 1 && bs[0] == xs[1],
          "add_channel_bias: bias " + to_string(bs) + " incompatible with " + to_string(xs));
  const int N = xs[0], C = xs[1];
  const std::size_t hw = static_cast<std::size_t>(xs[2]) * xs[3];
  Tensor out = x.value();
  out.drop_grad();
  auto b = bias.value().data();
  auto o = out.data();
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      float* p = o.data() + (static_cast<std::size_t>(n) * C + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) p[i] += b[c];
    }
  return x.tape->record(std::move(out), {x.id, bias.id},
                        [N, C, hw](const Tape&, std::span<const float> g, GradSinks gin) {
                          if (!gin[0].empty())
                            for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                          if (!gin[1].empty())
                            for (int n = 0; n < N; ++n)
                              for (int c = 0; c < C; ++c) {
                                const float* p = g.data() + (static_cast<std::size_t>(n) * C + c) * hw;
                                float acc = 0.0f;
                                for (std::size_t i = 0; i < hw; ++i) acc += p[i];
                                gin[1][c] += acc;
                              }
                        });
}

namespace {

template <class Fwd, class Deriv>
Var elementwise(Var x, Fwd fwd, Deriv deriv) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  auto in = xv.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = fwd(in[i]);
  const std::size_t x_id = x.id;
  return x.tape->record(std::move(out), {x_id},
                        [x_id, deriv](const Tape& t, std::span<const float> g, GradSinks gin) {
                          auto in = t.value(x_id).data();
                          for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * deriv(in[i]);
                        });
}

}  // namespace

Var leaky_relu(Var x, float slope) {
  return elementwise(
      x, [slope](float v) { return v > 0.0f ? v : slope * v; },
      [slope](float v) { return v > 0.0f ? 1.0f : slope; });
}

Var tanh(Var x) {
  return elementwise(
      x, [](float v) { return std::tanh(v); },
      [](float v) {
        const float t = std::tanh(v);
        return 1.0f - t * t;
      });
}

Var softplus(Var x) {
  return elementwise(
      x, [](float v) { return v > 0.0f ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](float v) { return 1.0f / (1.0f + std::exp(-v)); });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require(a.shape() == b.shape(),
          "add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor out = a.value();
  out.drop_grad();
  auto bv = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return a.tape->record(std::move(out), {a.id, b.id},
                        [](const Tape&, std::span<const float> g, GradSinks gin) {
                          for (int k = 0; k < 2; ++k)
                            if (!gin[k].empty())
                              for (std::size_t i = 0; i < g.size(); ++i) gin[k][i] += g[i];
                        });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require(a.shape() == b.shape(),
          "sub: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor out = a.value();
  out.drop_grad();
  auto bv = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return a.tape->record(std::move(out), {a.id, b.id},
                        [](const Tape&, std::span<const float> g, GradSinks gin) {
                          if (!gin[0].empty())
                            for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                          if (!gin[1].empty())
                            for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] -= g[i];
                        });
}

Var scale(Var x, float factor) {
  Tensor out = x.value();
  out.drop_grad();
  for (float& v : out.data()) v *= factor;
  return x.tape->record(std::move(out), {x.id},
                        [factor](const Tape&, std::span<const float> g, GradSinks gin) {
                          for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += factor * g[i];
                        });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  out.drop_grad();
  return x.tape->record(std::move(out), {x.id},
                        [](const Tape&, std::span<const float> g, GradSinks gin) {
                          for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                        });
}

Var sum(Var x) {
  double acc = 0.0;
  for (float v : x.value().data()) acc += v;
  return x.tape->record(Tensor::scalar(static_cast<float>(acc)), {x.id},
                        [](const Tape&, std::span<const float> g, GradSinks gin) {
                          for (float& v : gin[0]) v += g[0];
                        });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  double acc = 0.0;
  for (float v : x.value().data()) acc += v;
  const float inv = 1.0f / static_cast<float>(n);
  return x.tape->record(Tensor::scalar(static_cast<float>(acc / static_cast<double>(n))), {x.id},
                        [inv](const Tape&, std::span<const float> g, GradSinks gin) {
                          for (float& v : gin[0]) v += g[0] * inv;
                        });
}

Var l1(Var a, Var b) {
  require_same_tape(a, b);
  require(a.shape() == b.shape(),
          "l1: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  auto av = a.value().data();
  auto bv = b.value().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::fabs(av[i] - bv[i]);
  const float inv = 1.0f / static_cast<float>(av.size());
  const std::size_t a_id = a.id, b_id = b.id;
  return a.tape->record(
      Tensor::scalar(static_cast<float>(acc / static_cast<double>(av.size()))), {a_id, b_id},
      [a_id, b_id, inv](const Tape& t, std::span<const float> g, GradSinks gin) {
        auto av = t.value(a_id).data();
        auto bv = t.value(b_id).data();
        const float s = g[0] * inv;
        for (std::size_t i = 0; i < av.size(); ++i) {
          const float d = av[i] - bv[i];
          const float sg = d > 0.0f ? s : (d < 0.0f ? -s : 0.0f);
          if (!gin[0].empty()) gin[0][i] += sg;
          if (!gin[1].empty()) gin[1][i] -= sg;
        }
      });
}

Var l2(Var x) {
  double acc = 0.0;
  for (float v : x.value().data()) acc += static_cast<double>(v) * v;
  const std::size_t x_id = x.id;
  return x.tape->record(Tensor::scalar(static_cast<float>(acc)), {x_id},
                        [x_id](const Tape& t, std::span<const float> g, GradSinks gin) {
                          auto xv = t.value(x_id).data();
                          for (std::size_t i = 0; i < xv.size(); ++i) gin[0][i] += 2.0f * g[0] * xv[i];
                        });
}

Var sq_dist(Var a, Var b) {
  require_same_tape(a, b);
  require(a.shape() == b.shape(),
          "sq_dist: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  auto av = a.value().data();
  auto bv = b.value().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - bv[i];
    acc += d * d;
  }
  const std::size_t a_id = a.id, b_id = b.id;
  return a.tape->record(Tensor::scalar(static_cast<float>(acc)), {a_id, b_id},
                        [a_id, b_id](const Tape& t, std::span<const float> g, GradSinks gin) {
                          auto av = t.value(a_id).data();
                          auto bv = t.value(b_id).data();
                          for (std::size_t i = 0; i < av.size(); ++i) {
                            const float d = 2.0f * g[0] * (av[i] - bv[i]);
                            if (!gin[0].empty()) gin[0][i] += d;
                            if (!gin[1].empty()) gin[1][i] -= d;
                          }
                        });
}

namespace {

std::size_t per_sample(const Shape& s, const char* op) {
  require(s.size() >= 1 && s[0] >= 1, std::string(op) + ": needs a leading batch axis");
  return element_count(s) / static_cast<std::size_t>(s[0]);
}

}  // namespace

Var l1_per_sample(Var a, Var b) {
  require_same_tape(a, b);
  require(a.shape() == b.shape(), "l1_per_sample: shape mismatch " + to_string(a.shape()) + " vs " +
                                      to_string(b.shape()));
  const int N = a.shape()[0];
  const std::size_t m = per_sample(a.shape(), "l1_per_sample");
  auto av = a.value().data();
  auto bv = b.value().data();
  Tensor out(Shape{N});
  for (int n = 0; n < N; ++n) {
    double acc = 0.0;
    for (std::size_t i = n * m; i < (n + 1) * m; ++i) acc += std::fabs(av[i] - bv[i]);
    out[n] = static_cast<float>(acc / static_cast<double>(m));
  }
  const std::size_t a_id = a.id, b_id = b.id;
  const float inv = 1.0f / static_cast<float>(m);
  return a.tape->record(std::move(out), {a_id, b_id},
                        [a_id, b_id, m, inv](const Tape& t, std::span<const float> g, GradSinks gin) {
                          auto av = t.value(a_id).data();
                          auto bv = t.value(b_id).data();
                          for (std::size_t i = 0; i < av.size(); ++i) {
                            const float s = g[i / m] * inv;
                            const float d = av[i] - bv[i];
                            const float sg = d > 0.0f ? s : (d < 0.0f ? -s : 0.0f);
                            if (!gin[0].empty()) gin[0][i] += sg;
                            if (!gin[1].empty()) gin[1][i] -= sg;
                          }
                        });
}

Var sq_dist_per_sample(Var a, Var b) {
  require_same_tape(a, b);
  require(a.shape() == b.shape(), "sq_dist_per_sample: shape mismatch " + to_string(a.shape()) +
                                      " vs " + to_string(b.shape()));
  const int N = a.shape()[0];
  const std::size_t m = per_sample(a.shape(), "sq_dist_per_sample");
  auto av = a.value().data();
  auto bv = b.value().data();
  Tensor out(Shape{N});
  for (int n = 0; n < N; ++n) {
    double acc = 0.0;
    for (std::size_t i = n * m; i < (n + 1) * m; ++i) {
      const double d = static_cast<double>(av[i]) - bv[i];
      acc += d * d;
    }
    out[n] = static_cast<float>(acc);
  }
  const std::size_t a_id = a.id, b_id = b.id;
  return a.tape->record(std::move(out), {a_id, b_id},
                        [a_id, b_id, m](const Tape& t, std::span<const float> g, GradSinks gin) {
                          auto av = t.value(a_id).data();
                          auto bv = t.value(b_id).data();
                          for (std::size_t i = 0; i < av.size(); ++i) {
                            const float d = 2.0f * g[i / m] * (av[i] - bv[i]);
                            if (!gin[0].empty()) gin[0][i] += d;
                            if (!gin[1].empty()) gin[1][i] -= d;
                          }
                        });
}

Var l2_per_sample(Var x) {
  const int N = x.shape().at(0);
  const std::size_t m = per_sample(x.shape(), "l2_per_sample");
  auto xv = x.value().data();
  Tensor out(Shape{N});
  for (int n = 0; n < N; ++n) {
    double acc = 0.0;
    for (std::size_t i = n * m; i < (n + 1) * m; ++i) acc += static_cast<double>(xv[i]) * xv[i];
    out[n] = static_cast<float>(acc);
  }
  const std::size_t x_id = x.id;
  return x.tape->record(std::move(out), {x_id},
                        [x_id, m](const Tape& t, std::span<const float> g, GradSinks gin) {
                          auto xv = t.value(x_id).data();
                          for (std::size_t i = 0; i < xv.size(); ++i) gin[0][i] += 2.0f * g[i / m] * xv[i];
                        });
}

}  // namespace ganscope::ad
