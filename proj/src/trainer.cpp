#include "far/trainer.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "far/spectral.hpp"

namespace far {

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("train: iterations must be >= 1");
  if (initial_lr <= 0.0) throw ConfigError("train: initial-lr must be > 0");
  if (l1_lambda < 0.0) throw ConfigError("train: l1-lambda must be >= 0");
  if (trace_every < 0) throw ConfigError("train: trace-every must be >= 0");
  if (subband_block < 1) throw ConfigError("train: subband block must be >= 1");
}

double lr_schedule(const TrainConfig& config, int iteration) {
  config.validate();
  if (iteration < 0 || iteration >= config.iterations) {
    throw ConfigError("lr_schedule: iteration " + std::to_string(iteration) +
                      " outside [0, " + std::to_string(config.iterations) +
                      ")");
  }
  if (config.decay == TrainConfig::LrDecay::Constant) return config.initial_lr;
  return config.initial_lr *
         (1.0 - double(iteration) / double(config.iterations));
}

namespace {

// BT.601 luma of an RGB tensor already on the 0..255 training range.
Plane luma_of(const Tensor& t) {
  Plane p(t.h(), t.w());
  if (t.c() >= 3) {
    const double* r = t.plane(0, 0);
    const double* g = t.plane(0, 1);
    const double* b = t.plane(0, 2);
    for (std::int64_t i = 0, sz = std::int64_t(t.h()) * t.w(); i < sz; ++i) {
      p.v[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    }
  } else {
    const double* r = t.plane(0, 0);
    for (std::int64_t i = 0, sz = std::int64_t(t.h()) * t.w(); i < sz; ++i) {
      p.v[i] = r[i];
    }
  }
  return p;
}

}  // namespace

namespace {

constexpr double kTrainRange = 255.0;

Tensor scale_tensor(const Tensor& t, double factor) {
  Tensor out(t.shape());
  const double* ip = t.data();
  double* op = out.data();
  for (std::int64_t i = 0, sz = t.size(); i < sz; ++i) op[i] = factor * ip[i];
  return out;
}

}  // namespace

TrainResult train_overfit(const Tensor& raw, const Tensor& decoded,
                          const ModelConfig& model_config,
                          const TrainConfig& train_config) {
  require_same_shape(raw, decoded, "train_overfit raw/decoded");
  train_config.validate();

  // The recipe operates on the 8-bit dynamic range; loss values are MSE on
  // that scale and PSNR is 10*log10(255^2 / loss).
  ModelConfig mc = model_config;
  mc.value_range = kTrainRange;
  const Tensor raw_s = scale_tensor(raw, kTrainRange);
  const Tensor decoded_s = scale_tensor(decoded, kTrainRange);

  TrainResult result;
  result.state = init_model(mc, train_config.seed);
  ModelState& state = result.state;
  const bool is_far =
      model_config.parameterization == Parameterization::Far;

  for (int t = 0; t < train_config.iterations; ++t) {
    ForwardCache cache;
    Tensor restored = forward(state, decoded_s, &cache);
    MseResult mse = mse_loss(restored, raw_s);
    if (!std::isfinite(mse.loss)) {
      throw Error("train_overfit: non-finite loss at iteration " +
                  std::to_string(t));
    }
    std::vector<LayerGrads> grads = backward(state, cache, mse.grad_prediction);

    const bool trace_now =
        train_config.trace_every > 0 &&
        (t % train_config.trace_every == 0 || t + 1 == train_config.iterations);

    std::vector<Tensor> weights_before;
    if (trace_now && train_config.trace_subbands) {
      weights_before.reserve(state.layers.size());
      for (const LayerState& l : state.layers) weights_before.push_back(l.weights);
    }

    const double lr = lr_schedule(train_config, t);
    for (std::size_t li = 0; li < state.layers.size(); ++li) {
      LayerState& layer = state.layers[li];
      Tensor gw = std::move(grads[li].weights);
      if (train_config.l1_lambda > 0.0) {
        Tensor sub = l1_subgradient(layer.weights, train_config.l1_lambda);
        double* a = gw.data();
        const double* b = sub.data();
        for (std::int64_t i = 0, sz = gw.size(); i < sz; ++i) a[i] += b[i];
      }
      adam_step(layer.weights, gw, layer.weights_opt, lr);
      adam_step(layer.bias, grads[li].bias, layer.bias_opt, lr);
    }

    if (trace_now) {
      TraceRecord rec;
      rec.iteration = t;
      rec.loss = mse.loss;
      rec.psnr = mse.loss > 0.0
                     ? 10.0 * std::log10(kTrainRange * kTrainRange / mse.loss)
                     : std::numeric_limits<double>::infinity();
      if (train_config.trace_subbands) {
        SubbandGrid img =
            mean_abs_subbands(luma_of(restored), train_config.subband_block);
        rec.image_subbands = std::move(img.stat);

        std::vector<std::pair<const Tensor*, const Tensor*>> pairs;
        for (std::size_t li = 0; li < state.layers.size(); ++li) {
          pairs.emplace_back(&weights_before[li], &state.layers[li].weights);
        }
        SubbandGrid upd =
            weight_update_subbands(pairs, *state.bank, is_far);
        rec.weight_update_subbands = std::move(upd.stat);
      }
      result.trace.push_back(std::move(rec));
    }
  }
  return result;
}

void write_trace_csv(std::ostream& os,
                     const std::vector<TraceRecord>& trace) {
  if (trace.empty()) return;
  os << "iteration,loss,psnr";
  const std::size_t img = trace.front().image_subbands.size();
  const std::size_t upd = trace.front().weight_update_subbands.size();
  const int img_b = img ? int(std::lround(std::sqrt(double(img)))) : 0;
  const int upd_b = upd ? int(std::lround(std::sqrt(double(upd)))) : 0;
  for (int i = 0; i < img_b; ++i)
    for (int j = 0; j < img_b; ++j) os << ",img_" << i << "_" << j;
  for (int i = 0; i < upd_b; ++i)
    for (int j = 0; j < upd_b; ++j) os << ",upd_" << i << "_" << j;
  os << "\n";
  for (const TraceRecord& r : trace) {
    os << r.iteration << "," << r.loss << "," << r.psnr;
    for (double v : r.image_subbands) os << "," << v;
    for (double v : r.weight_update_subbands) os << "," << v;
    os << "\n";
  }
}

}  // namespace far
