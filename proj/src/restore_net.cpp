#include "far/restore_net.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace far {

const char* to_string(Parameterization p) {
  return p == Parameterization::Far ? "far" : "vanilla";
}

Parameterization parameterization_from_string(const std::string& s) {
  if (s == "far") return Parameterization::Far;
  if (s == "vanilla") return Parameterization::Vanilla;
  throw ConfigError("unknown parameterization '" + s +
                    "' (expected far or vanilla)");
}

void ModelConfig::validate() const {
  if (channels < 1) throw ConfigError("model: channels must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("model: kernel size must be odd and positive, got " +
                      std::to_string(kernel_size));
  }
  if (scales < 1) throw ConfigError("model: scales must be >= 1");
  if (input_channels < 1 || output_channels < 1) {
    throw ConfigError("model: channel counts must be >= 1");
  }
}

std::int64_t ModelState::parameter_count() const {
  std::int64_t total = 0;
  for (const LayerState& l : layers) {
    total += l.weights.size() + l.bias.size();
  }
  return total;
}

std::vector<Tensor> ModelState::spatial_kernels() const {
  std::vector<Tensor> ks;
  ks.reserve(layers.size());
  for (const LayerState& l : layers) {
    if (config.parameterization == Parameterization::Far) {
      ks.push_back(reparameterize(l.weights, *bank));
    } else {
      ks.push_back(l.weights);
    }
  }
  return ks;
}

ModelState init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();

  ModelState state;
  state.config = config;
  state.bank = std::make_shared<DctBank>(config.kernel_size,
                                         config.kernel_size);

  const int k = config.kernel_size;
  const int n = config.channels;
  const std::array<std::pair<int, int>, 3> dims = {{
      {config.input_channels, n},
      {n, n},
      {n, config.output_channels},
  }};

  Rng rng(seed);
  for (const auto& [in_ch, out_ch] : dims) {
    LayerState layer;
    Tensor kernels({in_ch, out_ch, k, k});
    const double bound =
        config.zero_init ? 0.0 : std::sqrt(1.0 / (double(in_ch) * k * k));
    double* kp = kernels.data();
    for (std::int64_t i = 0, sz = kernels.size(); i < sz; ++i) {
      kp[i] = rng.uniform(-bound, bound);
    }
    if (config.parameterization == Parameterization::Far) {
      layer.weights = project_to_frequency(kernels, *state.bank);
    } else {
      layer.weights = std::move(kernels);
    }
    layer.bias = Tensor({1, out_ch, 1, 1});
    layer.weights_opt = AdamState(layer.weights.shape());
    layer.bias_opt = AdamState(layer.bias.shape());
    state.layers.push_back(std::move(layer));
  }
  return state;
}

namespace {

void check_input_divisibility(const Tensor& decoded, int scales) {
  const int div = 1 << (scales - 1);
  if (decoded.h() % div != 0 || decoded.w() % div != 0) {
    throw ShapeError(
        "forward: spatial size " + std::to_string(decoded.h()) + "x" +
        std::to_string(decoded.w()) + " not divisible by " +
        std::to_string(div) +
        "; reflect-pad the image to the next multiple before training");
  }
}

// conv -> [IN] -> ReLU -> conv -> [IN] -> ReLU -> conv
Tensor run_bulk(const ModelState& state, const std::vector<Tensor>& kernels,
                const Tensor& input, ForwardCache::ScaleCache* sc) {
  const ModelConfig& cfg = state.config;
  Tensor x = input;
  if (sc) sc->input = input;
  for (std::size_t li = 0; li < state.layers.size(); ++li) {
    const LayerState& layer = state.layers[li];
    if (sc) sc->conv_in.push_back(x);
    std::span<const double> bias(layer.bias.data(),
                                 static_cast<std::size_t>(layer.bias.size()));
    Tensor y = conv2d_forward(x, kernels[li], bias);
    const bool last = li + 1 == state.layers.size();
    if (!last) {
      if (cfg.instance_norm) {
        if (sc) sc->norm_in.push_back(y);
        auto [normed, stats] = instance_norm_forward(y, cfg.norm_epsilon);
        if (sc) sc->norm_stats.push_back(std::move(stats));
        y = std::move(normed);
      }
      if (sc) sc->relu_in.push_back(y);
      y = relu(y);
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

Tensor forward(const ModelState& state, const Tensor& decoded,
               ForwardCache* cache) {
  const ModelConfig& cfg = state.config;
  if (decoded.c() != cfg.input_channels) {
    throw ShapeError("forward: expected " +
                     std::to_string(cfg.input_channels) + " channels, got " +
                     decoded.shape().str());
  }
  check_input_divisibility(decoded, cfg.scales);

  std::vector<Tensor> kernels = state.spatial_kernels();
  if (cache) {
    *cache = ForwardCache{};
    cache->kernels = kernels;
    cache->input_shape = decoded.shape();
  }

  Tensor sum;
  Tensor scaled = decoded;
  for (int s = 0; s < cfg.scales; ++s) {
    if (s > 0) scaled = resample(scaled, ResampleMode::Down2);
    ForwardCache::ScaleCache* sc = nullptr;
    if (cache) {
      cache->scales.emplace_back();
      sc = &cache->scales.back();
    }
    Tensor out = run_bulk(state, kernels, scaled, sc);
    for (int u = 0; u < s; ++u) out = resample(out, ResampleMode::Up2);
    if (s == 0) {
      sum = std::move(out);
    } else {
      double* a = sum.data();
      const double* b = out.data();
      for (std::int64_t i = 0, sz = sum.size(); i < sz; ++i) a[i] += b[i];
    }
  }

  if (cfg.predict_residual && !(sum.shape() == decoded.shape())) {
    throw ShapeError("forward: residual shape " + sum.shape().str() +
                     " does not match decoded " + decoded.shape().str());
  }
  const double inv_scales = 1.0 / double(cfg.scales);
  Tensor pre(sum.shape());
  {
    double* p = pre.data();
    const double* r = sum.data();
    const double* d = decoded.data();
    for (std::int64_t i = 0, sz = pre.size(); i < sz; ++i) {
      p[i] = inv_scales * r[i] + (cfg.predict_residual ? d[i] : 0.0);
    }
  }
  if (cache) cache->pre_clamp = pre;

  Tensor restored(pre.shape());
  double* out = restored.data();
  const double* p = pre.data();
  const double hi = cfg.value_range;
  for (std::int64_t i = 0, sz = restored.size(); i < sz; ++i) {
    out[i] = std::clamp(p[i], 0.0, hi);
  }
  return restored;
}

Tensor restore_image(const ModelState& state, const Tensor& decoded01) {
  const double range = state.config.value_range;
  if (range == 1.0) return forward(state, decoded01);
  Tensor scaled(decoded01.shape());
  const double* ip = decoded01.data();
  double* sp = scaled.data();
  for (std::int64_t i = 0, sz = scaled.size(); i < sz; ++i) {
    sp[i] = range * ip[i];
  }
  Tensor out = forward(state, scaled);
  double* op = out.data();
  for (std::int64_t i = 0, sz = out.size(); i < sz; ++i) op[i] /= range;
  return out;
}

std::vector<LayerGrads> backward(const ModelState& state,
                                 const ForwardCache& cache,
                                 const Tensor& grad_restored) {
  const ModelConfig& cfg = state.config;
  if (!grad_restored.same_shape(cache.pre_clamp)) {
    throw ShapeError("backward: grad shape " + grad_restored.shape().str() +
                     " does not match forward output " +
                     cache.pre_clamp.shape().str());
  }

  const std::size_t num_layers = state.layers.size();
  std::vector<Tensor> kernel_grads(num_layers);
  std::vector<Tensor> bias_grads(num_layers);
  for (std::size_t li = 0; li < num_layers; ++li) {
    kernel_grads[li] = Tensor(cache.kernels[li].shape());
    bias_grads[li] = Tensor(state.layers[li].bias.shape());
  }

  // Clamp passes gradient only where the pre-clamp value stayed in [0, 1];
  // the averaging then sends 1/scales of it into each branch.
  Tensor grad_branch(cache.pre_clamp.shape());
  {
    const double inv_scales = 1.0 / double(cfg.scales);
    const double hi = cfg.value_range;
    const double* g = grad_restored.data();
    const double* p = cache.pre_clamp.data();
    double* o = grad_branch.data();
    for (std::int64_t i = 0, sz = grad_branch.size(); i < sz; ++i) {
      o[i] = (p[i] >= 0.0 && p[i] <= hi) ? g[i] * inv_scales : 0.0;
    }
  }

  for (int s = 0; s < cfg.scales; ++s) {
    const ForwardCache::ScaleCache& sc = cache.scales[s];
    Tensor g = grad_branch;
    // Walk the up2 chain backwards.
    for (int u = s - 1; u >= 0; --u) {
      Shape before{g.n(), g.c(), sc.input.h() << u, sc.input.w() << u};
      g = resample_backward(g, ResampleMode::Up2, before);
    }
    // Bulk, last layer to first.
    std::size_t norm_idx = sc.norm_stats.size();
    std::size_t relu_idx = sc.relu_in.size();
    for (std::size_t li = num_layers; li-- > 0;) {
      const bool last = li + 1 == num_layers;
      if (!last) {
        g = relu_backward(sc.relu_in[--relu_idx], g);
        if (cfg.instance_norm) {
          --norm_idx;
          g = instance_norm_backward(sc.norm_stats[norm_idx],
                                     sc.norm_in[norm_idx], g);
        }
      }
      ConvGrads cg = conv2d_backward(sc.conv_in[li], cache.kernels[li], g);
      {
        double* acc = kernel_grads[li].data();
        const double* add = cg.kernels.data();
        for (std::int64_t i = 0, sz = cg.kernels.size(); i < sz; ++i) {
          acc[i] += add[i];
        }
        double* ba = bias_grads[li].data();
        for (std::size_t bi = 0; bi < cg.bias.size(); ++bi) {
          ba[bi] += cg.bias[bi];
        }
      }
      g = std::move(cg.input);
    }
    // The chain below the bulk is down2 resamples of the network input, which
    // is not a parameter; nothing further to propagate.
  }

  std::vector<LayerGrads> grads(num_layers);
  for (std::size_t li = 0; li < num_layers; ++li) {
    if (cfg.parameterization == Parameterization::Far) {
      grads[li].weights = far_gradient(kernel_grads[li], *state.bank);
    } else {
      grads[li].weights = std::move(kernel_grads[li]);
    }
    grads[li].bias = std::move(bias_grads[li]);
  }
  return grads;
}

}  // namespace far
