#pragma once

#include <vector>

#include "hsr/tensor.hpp"

namespace hsr {

enum class PoolMode { kMax, kMean };

// 2-D convolution over a [C_in, H, W] tensor with an odd square kernel
// [C_out, C_in, k, k], zero padding (k-1)/2, stride 1 and a [C_out] bias.
// Output is [C_out, H, W].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias);

Tensor relu(const Tensor& x);

// Numerically stable logistic; outputs stay strictly inside (0, 1) in
// float32 even for saturating inputs.
Tensor sigmoid(const Tensor& x);

// Reduces a [C, H, W] tensor over its spatial extent to [C, 1, 1]. Max ties
// resolve to the first occurrence in row-major order.
Tensor global_pool(const Tensor& x, PoolMode mode);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);

// Multiplies each channel plane of a [C, H, W] tensor by the matching entry
// of a C-element weight vector.
Tensor channel_scale(const Tensor& x, const Tensor& weights);

// Multiplies the whole tensor by a single-element tensor (a learnable
// scalar gate).
Tensor scalar_scale(const Tensor& x, const Tensor& s);

// Stacks [C_i, H, W] tensors along the channel axis.
Tensor concat_channels(const std::vector<Tensor>& parts);

// Reorders channels: output channel i is input channel order[i]. The order
// must be a permutation of 0..C-1.
Tensor permute_channels(const Tensor& x, const std::vector<int>& order);

// Same storage, new shape with identical element count.
Tensor reshape(const Tensor& x, std::vector<int> new_shape);

// Sum of all elements, as a single-element tensor.
Tensor sum(const Tensor& x);

}  // namespace hsr
