#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "far/adam.hpp"
#include "far/dct.hpp"
#include "far/nn_ops.hpp"
#include "far/tensor.hpp"

namespace far {

enum class Parameterization { Far, Vanilla };

const char* to_string(Parameterization p);
Parameterization parameterization_from_string(const std::string& s);

// Fixed restoration architecture: a shared three-layer bulk
// (conv -> IN -> ReLU -> conv -> IN -> ReLU -> conv) applied to the decoded
// image at `scales` dyadic scales; per-scale outputs are upsampled back and
// averaged into a residual that is added to the decoded image and clamped.
struct ModelConfig {
  int channels = 16;
  int kernel_size = 3;
  int scales = 3;
  Parameterization parameterization = Parameterization::Far;
  int input_channels = 3;
  int output_channels = 3;
  // The long-run single-scale mode fits the image directly without
  // normalization; defaults reproduce the restoration setup.
  bool instance_norm = true;
  bool predict_residual = true;
  // All-zero weights instead of the fan-in uniform draw; the residual net is
  // then exactly the identity map (degenerate pipeline checks).
  bool zero_init = false;
  double norm_epsilon = 1e-5;
  // Numeric range of the image tensors this model consumes; forward clamps
  // to [0, value_range]. The training recipe runs on the 8-bit range (255)
  // so the fixed L1 weight and learning rate behave as published; evaluation
  // through restore_image stays in [0, 1].
  double value_range = 1.0;

  void validate() const;
};

struct LayerState {
  // Frequency weights V for FAR, spatial kernels K for vanilla;
  // shape in x out x k x k either way.
  Tensor weights;
  Tensor bias;  // 1 x out x 1 x 1
  AdamState weights_opt;
  AdamState bias_opt;
};

struct ModelState {
  ModelConfig config;
  std::vector<LayerState> layers;
  std::shared_ptr<const DctBank> bank;  // shared read-only across jobs

  std::int64_t parameter_count() const;
  // Spatial kernels per layer; synthesized from V when parameterization=FAR.
  std::vector<Tensor> spatial_kernels() const;
};

// Deterministic initialization: spatial kernels uniform in
// +-sqrt(1/(in_channels*k*k)), biases zero. FAR states hold the projection of
// the identical sampled kernels, so both parameterizations start from the
// same function.
ModelState init_model(const ModelConfig& config, std::uint64_t seed);

struct ForwardCache {
  struct ScaleCache {
    Tensor input;                 // image at this scale
    std::vector<Tensor> conv_in;  // input to each conv layer
    std::vector<Tensor> norm_in;  // conv outputs fed to instance norm
    std::vector<NormStats> norm_stats;
    std::vector<Tensor> relu_in;  // values fed to ReLU
  };
  std::vector<ScaleCache> scales;
  std::vector<Tensor> kernels;  // spatial kernels used by this pass
  Tensor pre_clamp;
  Shape input_shape;
};

// Restored image in [0, value_range]; same shape as `decoded` (which must
// already be on the model's value range). Spatial extents must be divisible
// by 2^(scales-1). Fills `cache` for backward when non-null.
Tensor forward(const ModelState& state, const Tensor& decoded,
               ForwardCache* cache = nullptr);

// Evaluation wrapper for [0, 1] images: rescales onto the model's value
// range, runs forward, and maps the result back to [0, 1].
Tensor restore_image(const ModelState& state, const Tensor& decoded01);

struct LayerGrads {
  Tensor weights;  // gradient for V (FAR) or K (vanilla)
  Tensor bias;
};

// Exact gradients for all trainable parameters; per-scale kernel gradients
// are summed (the bulk is shared) and clamped pixels pass no gradient.
std::vector<LayerGrads> backward(const ModelState& state,
                                 const ForwardCache& cache,
                                 const Tensor& grad_restored);

}  // namespace far
