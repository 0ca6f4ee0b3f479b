#pragma once

#include "ganscope/tape.hpp"

namespace ganscope::ad {

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
};

/// Cross-correlation. input [N,C,H,W], kernel [K,C,kh,kw] -> [N,K,H',W'] with
/// H' = (H + 2p - kh) / s + 1.
Var conv2d(Var input, Var kernel, ConvGeometry geom = {});

/// Adjoint of conv2d with the same kernel layout. input [N,K,H,W], kernel
/// [K,C,kh,kw] -> [N,C,(H-1)s - 2p + kh, ...].
Var conv_transpose2d(Var input, Var kernel, ConvGeometry geom = {});

/// input [N,D] x weight [D,M] + bias [M] -> [N,M].
Var linear(Var input, Var weight, Var bias);

/// Adds bias [C] to every spatial position of x [N,C,H,W].
Var add_channel_bias(Var x, Var bias);

Var leaky_relu(Var x, float slope);
Var tanh(Var x);
/// log(1 + exp(x)), numerically stable.
Var softplus(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, float factor);
Var reshape(Var x, Shape shape);

/// Scalar reductions; each returns a [1] tensor.
Var sum(Var x);
Var mean(Var x);
/// Mean absolute difference.
Var l1(Var a, Var b);
/// Sum of squares.
Var l2(Var x);
/// Sum of squared differences.
Var sq_dist(Var a, Var b);

/// Per-sample reductions over every axis but the first; each returns [N].
Var l1_per_sample(Var a, Var b);
Var sq_dist_per_sample(Var a, Var b);
Var l2_per_sample(Var x);

namespace kernels {
// Raw loops shared by the tape ops; exposed for benchmarks and oracles.
void correlate(std::span<const float> in, const Shape& in_shape, std::span<const float> w,
               const Shape& w_shape, ConvGeometry g, std::span<float> out,
               const Shape& out_shape);
void correlate_adjoint(std::span<const float> gout, const Shape& out_shape,
                       std::span<const float> w, const Shape& w_shape, ConvGeometry g,
                       std::span<float> gin, const Shape& in_shape);
void correlate_weight_grad(std::span<const float> in, const Shape& in_shape,
                           std::span<const float> gout, const Shape& out_shape,
                           ConvGeometry g, std::span<float> gw, const Shape& w_shape);
}  // namespace kernels

}  // namespace ganscope::ad
