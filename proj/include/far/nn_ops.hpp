#pragma once

#include <span>
#include <utility>
#include <vector>

#include "far/tensor.hpp"

namespace far {

// Cross-correlation with stride 1 and zero padding of half the kernel size,
// so spatial extents are preserved. Kernels are laid out in x out x kh x kw
// with odd kh, kw; bias holds one value per output channel.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels,
                      std::span<const double> bias);

struct ConvGrads {
  Tensor input;
  Tensor kernels;
  std::vector<double> bias;
};

// Exact gradients of sum(grad_output * conv2d_forward(input, kernels, bias)).
ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernels,
                          const Tensor& grad_output);

// Saved statistics from an instance-norm forward pass, one entry per
// (batch, channel) slice.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> var;
  double epsilon = 0.0;
};

// Affine-free normalization: each (batch, channel) slice is centered and
// scaled by 1/sqrt(var + epsilon). Variance is the biased (1/S) estimate.
std::pair<Tensor, NormStats> instance_norm_forward(const Tensor& input,
                                                   double epsilon);

// Full gradient through the normalization, treating mean and variance as
// functions of the input.
Tensor instance_norm_backward(const NormStats& stats, const Tensor& input,
                              const Tensor& grad_output);

Tensor relu(const Tensor& input);
// Cotangent masked by the forward activation pattern; subgradient at 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

enum class ResampleMode {
  Down2,  // 2x2 mean pooling; requires even spatial extents
  Up2,    // bilinear x2, align-corners-false
};

Tensor resample(const Tensor& input, ResampleMode mode);
// Transpose of the corresponding linear map. `input_shape` is the shape the
// forward pass consumed.
Tensor resample_backward(const Tensor& grad_output, ResampleMode mode,
                         Shape input_shape);

struct MseResult {
  double loss;
  Tensor grad_prediction;
};

// Mean squared error over all elements plus its gradient w.r.t. prediction.
MseResult mse_loss(const Tensor& prediction, const Tensor& target);

}  // namespace far
