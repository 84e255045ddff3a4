#pragma once

#include <vector>

#include "lgtd/autograd.hpp"

// Differentiable operators on single-sample feature maps [C, H, W].
namespace lgtd::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// x[c, y, x] * s[c, 0, 0]
Var mul_channel(const Var& x, const Var& s);

Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var sigmoid(const Var& x);
/// Gradient passes only where lo < x < hi.
Var clamp(const Var& x, double lo, double hi);

/// Stride-1 2-D convolution. weight [Cout, Cin, K, K], bias [Cout], zero padding `pad`.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int pad);

/// Deformable convolution (offsets only, no modulation). offsets has 2*K*K
/// channels laid out as (dy, dx) per kernel tap in row-major tap order; tap
/// (i, j) of output pixel (y, x) samples x at (y - pad + i + dy, x - pad + j + dx)
/// bilinearly with zeros outside the image.
Var deform_conv2d(const Var& x, const Var& offsets, const Var& weight, const Var& bias, int pad);

/// 2x2 average pooling, stride 2. H and W must be even.
Var avg_pool2(const Var& x);
/// x2 bilinear upsampling with half-pixel centres (align_corners = false).
Var upsample_bilinear2(const Var& x);
/// Mean over H and W, result [C, 1, 1].
Var global_avg_pool(const Var& x);

Var concat_channels(const std::vector<Var>& parts);
Var slice_channels(const Var& x, int begin, int end);

/// Per-pixel normalization across channels with affine gamma/beta of shape [C].
Var layer_norm_channels(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

/// Scaled dot-product attention inside non-overlapping windows. q, k, v are
/// [C, H, W]; channels split into `heads` groups of C / heads.
Var window_attention(const Var& q, const Var& k, const Var& v, int heads, int window);

/// [C*r*r, H, W] -> [C, H*r, W*r]; output (c, y*r+i, x*r+j) = input (c*r*r + i*r + j, y, x).
Var pixel_shuffle(const Var& x, int r);

/// Mean absolute difference; result has shape [1].
Var l1_loss(const Var& pred, const Var& target);
/// sum(x * w) for a constant w; used as a scalar probe by gradient checks.
Var weighted_sum(const Var& x, const Tensor& w);
Var sum_all(const Var& x);

}  // namespace lgtd::ops

namespace lgtd {

// Plain tensor helpers shared by the ops and by tests.
Tensor pixel_unshuffle(const Tensor& x, int r);
Tensor pixel_shuffle_tensor(const Tensor& x, int r);
/// Row-stochastic attention weights of one window/head, [n, n] with n = window^2.
Tensor attention_weights(const Tensor& q, const Tensor& k, int heads, int window, int head, int wy, int wx);

}  // namespace lgtd
