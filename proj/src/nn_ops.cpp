#include "far/nn_ops.hpp"

#include <algorithm>
#include <cmath>

namespace far {

namespace {

void check_conv_args(const Tensor& input, const Tensor& kernels,
                     std::size_t bias_count) {
  const Shape& ks = kernels.shape();
  if (ks.h % 2 == 0 || ks.w % 2 == 0) {
    throw ShapeError("conv2d: kernel size must be odd, got " + ks.str());
  }
  if (input.c() != ks.n) {
    throw ShapeError("conv2d: input has " + std::to_string(input.c()) +
                     " channels but kernels expect " + std::to_string(ks.n) +
                     " (kernels " + ks.str() + ", input " +
                     input.shape().str() + ")");
  }
  if (bias_count != static_cast<std::size_t>(ks.c)) {
    throw ShapeError("conv2d: bias count " + std::to_string(bias_count) +
                     " != output channels " + std::to_string(ks.c));
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels,
                      std::span<const double> bias) {
  check_conv_args(input, kernels, bias.size());
  const int in_ch = kernels.n();
  const int out_ch = kernels.c();
  const int kh = kernels.h();
  const int kw = kernels.w();
  const int py = (kh - 1) / 2;
  const int px = (kw - 1) / 2;
  const int h = input.h();
  const int w = input.w();

  Tensor out({input.n(), out_ch, h, w});
  for (int b = 0; b < input.n(); ++b) {
    for (int n = 0; n < out_ch; ++n) {
      double* op = out.plane(b, n);
      const double bv = bias[n];
      for (std::int64_t i = 0, sz = std::int64_t(h) * w; i < sz; ++i) op[i] = bv;
    }
    // Accumulate one kernel tap at a time: each (m, n, ky, kx) adds a shifted
    // copy of an input plane, which keeps the inner loops contiguous.
    for (int m = 0; m < in_ch; ++m) {
      const double* ip = input.plane(b, m);
      for (int n = 0; n < out_ch; ++n) {
        double* op = out.plane(b, n);
        for (int ky = 0; ky < kh; ++ky) {
          const int dy = ky - py;
          const int y0 = std::max(0, -dy);
          const int y1 = std::min(h, h - dy);
          for (int kx = 0; kx < kw; ++kx) {
            const double wv = kernels(m, n, ky, kx);
            if (wv == 0.0) continue;
            const int dx = kx - px;
            const int x0 = std::max(0, -dx);
            const int x1 = std::min(w, w - dx);
            for (int y = y0; y < y1; ++y) {
              const double* src = ip + std::int64_t(y + dy) * w + dx;
              double* dst = op + std::int64_t(y) * w;
#pragma omp simd
              for (int x = x0; x < x1; ++x) dst[x] += wv * src[x];
            }
          }
        }
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernels,
                          const Tensor& grad_output) {
  check_conv_args(input, kernels, static_cast<std::size_t>(kernels.c()));
  const Shape& gs = grad_output.shape();
  if (gs.n != input.n() || gs.c != kernels.c() || gs.h != input.h() ||
      gs.w != input.w()) {
    throw ShapeError("conv2d_backward: grad_output shape " + gs.str() +
                     " inconsistent with input " + input.shape().str() +
                     " and kernels " + kernels.shape().str());
  }
  const int in_ch = kernels.n();
  const int out_ch = kernels.c();
  const int kh = kernels.h();
  const int kw = kernels.w();
  const int py = (kh - 1) / 2;
  const int px = (kw - 1) / 2;
  const int h = input.h();
  const int w = input.w();

  ConvGrads g;
  g.input = Tensor(input.shape());
  g.kernels = Tensor(kernels.shape());
  g.bias.assign(out_ch, 0.0);

  for (int b = 0; b < input.n(); ++b) {
    for (int n = 0; n < out_ch; ++n) {
      const double* gp = grad_output.plane(b, n);
      double acc = 0.0;
      for (std::int64_t i = 0, sz = std::int64_t(h) * w; i < sz; ++i)
        acc += gp[i];
      g.bias[n] += acc;
    }
    for (int m = 0; m < in_ch; ++m) {
      const double* ip = input.plane(b, m);
      double* gip = g.input.plane(b, m);
      for (int n = 0; n < out_ch; ++n) {
        const double* gp = grad_output.plane(b, n);
        for (int ky = 0; ky < kh; ++ky) {
          const int dy = ky - py;
          const int y0 = std::max(0, -dy);
          const int y1 = std::min(h, h - dy);
          for (int kx = 0; kx < kw; ++kx) {
            const int dx = kx - px;
            const int x0 = std::max(0, -dx);
            const int x1 = std::min(w, w - dx);
            // d/dK: dot of grad_output with the shifted input window.
            double acc = 0.0;
            for (int y = y0; y < y1; ++y) {
              const double* src = ip + std::int64_t(y + dy) * w + dx;
              const double* go = gp + std::int64_t(y) * w;
              double row = 0.0;
#pragma omp simd reduction(+ : row)
              for (int x = x0; x < x1; ++x) row += go[x] * src[x];
              acc += row;
            }
            g.kernels(m, n, ky, kx) += acc;
            // d/dinput: scatter grad_output back through the same tap.
            const double wv = kernels(m, n, ky, kx);
            if (wv != 0.0) {
              for (int y = y0; y < y1; ++y) {
                double* dst = gip + std::int64_t(y + dy) * w + dx;
                const double* go = gp + std::int64_t(y) * w;
#pragma omp simd
                for (int x = x0; x < x1; ++x) dst[x] += wv * go[x];
              }
            }
          }
        }
      }
    }
  }
  return g;
}

std::pair<Tensor, NormStats> instance_norm_forward(const Tensor& input,
                                                   double epsilon) {
  const int slices = input.n() * input.c();
  const std::int64_t sz = std::int64_t(input.h()) * input.w();
  if (sz < 1) throw ShapeError("instance_norm: empty spatial extent");

  Tensor out(input.shape());
  NormStats stats;
  stats.mean.resize(slices);
  stats.var.resize(slices);
  stats.epsilon = epsilon;

  for (int s = 0; s < slices; ++s) {
    const double* ip = input.data() + s * sz;
    double* op = out.data() + s * sz;
    double mean = 0.0;
    for (std::int64_t i = 0; i < sz; ++i) mean += ip[i];
    mean /= double(sz);
    double var = 0.0;
    for (std::int64_t i = 0; i < sz; ++i) {
      const double d = ip[i] - mean;
      var += d * d;
    }
    var /= double(sz);
    const double inv = 1.0 / std::sqrt(var + epsilon);
    for (std::int64_t i = 0; i < sz; ++i) op[i] = (ip[i] - mean) * inv;
    stats.mean[s] = mean;
    stats.var[s] = var;
  }
  return {std::move(out), std::move(stats)};
}

Tensor instance_norm_backward(const NormStats& stats, const Tensor& input,
                              const Tensor& grad_output) {
  require_same_shape(input, grad_output, "instance_norm_backward");
  const int slices = input.n() * input.c();
  if (stats.mean.size() != static_cast<std::size_t>(slices)) {
    throw ShapeError("instance_norm_backward: saved stats cover " +
                     std::to_string(stats.mean.size()) + " slices, input has " +
                     std::to_string(slices));
  }
  const std::int64_t sz = std::int64_t(input.h()) * input.w();
  Tensor out(input.shape());

  for (int s = 0; s < slices; ++s) {
    const double* ip = input.data() + s * sz;
    const double* gp = grad_output.data() + s * sz;
    double* op = out.data() + s * sz;
    const double mean = stats.mean[s];
    const double inv = 1.0 / std::sqrt(stats.var[s] + stats.epsilon);

    // grad = inv * (g - mean(g) - xhat * mean(g .* xhat))
    double gsum = 0.0;
    double gxsum = 0.0;
    for (std::int64_t i = 0; i < sz; ++i) {
      const double xhat = (ip[i] - mean) * inv;
      gsum += gp[i];
      gxsum += gp[i] * xhat;
    }
    const double gmean = gsum / double(sz);
    const double gxmean = gxsum / double(sz);
    for (std::int64_t i = 0; i < sz; ++i) {
      const double xhat = (ip[i] - mean) * inv;
      op[i] = inv * (gp[i] - gmean - xhat * gxmean);
    }
  }
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  const double* ip = input.data();
  double* op = out.data();
  for (std::int64_t i = 0, sz = input.size(); i < sz; ++i) {
    op[i] = ip[i] > 0.0 ? ip[i] : 0.0;
  }
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
  require_same_shape(input, grad_output, "relu_backward");
  Tensor out(input.shape());
  const double* ip = input.data();
  const double* gp = grad_output.data();
  double* op = out.data();
  for (std::int64_t i = 0, sz = input.size(); i < sz; ++i) {
    op[i] = ip[i] > 0.0 ? gp[i] : 0.0;
  }
  return out;
}

namespace {

// Source taps for bilinear x2 upsampling (align-corners-false): output o
// samples input coordinate (o + 0.5)/2 - 0.5, clamped to the valid range.
struct Tap {
  int i0;
  int i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

Tap up2_tap(int o, int extent) {
  const double s = 0.5 * (o + 0.5) - 0.5;
  double fl = std::floor(s);
  int i0 = static_cast<int>(fl);
  double frac = s - fl;
  int i1 = i0 + 1;
  if (i0 < 0) {
    i0 = 0;
    if (i1 < 0) i1 = 0;
  }
  if (i1 > extent - 1) i1 = extent - 1;
  if (i0 > extent - 1) i0 = extent - 1;
  return {i0, i1, frac};
}

}  // namespace

Tensor resample(const Tensor& input, ResampleMode mode) {
  const int h = input.h();
  const int w = input.w();
  if (mode == ResampleMode::Down2) {
    if (h % 2 != 0 || w % 2 != 0) {
      throw ShapeError("resample down2: spatial extents must be even, got " +
                       input.shape().str());
    }
    Tensor out({input.n(), input.c(), h / 2, w / 2});
    for (int b = 0; b < input.n(); ++b) {
      for (int c = 0; c < input.c(); ++c) {
        const double* ip = input.plane(b, c);
        double* op = out.plane(b, c);
        for (int y = 0; y < h / 2; ++y) {
          const double* r0 = ip + std::int64_t(2 * y) * w;
          const double* r1 = r0 + w;
          for (int x = 0; x < w / 2; ++x) {
            op[std::int64_t(y) * (w / 2) + x] =
                0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
          }
        }
      }
    }
    return out;
  }

  const int oh = 2 * h;
  const int ow = 2 * w;
  std::vector<Tap> ty(oh), tx(ow);
  for (int y = 0; y < oh; ++y) ty[y] = up2_tap(y, h);
  for (int x = 0; x < ow; ++x) tx[x] = up2_tap(x, w);

  Tensor out({input.n(), input.c(), oh, ow});
  for (int b = 0; b < input.n(); ++b) {
    for (int c = 0; c < input.c(); ++c) {
      const double* ip = input.plane(b, c);
      double* op = out.plane(b, c);
      for (int y = 0; y < oh; ++y) {
        const double* r0 = ip + std::int64_t(ty[y].i0) * w;
        const double* r1 = ip + std::int64_t(ty[y].i1) * w;
        const double wy1 = ty[y].w1;
        const double wy0 = 1.0 - wy1;
        double* dst = op + std::int64_t(y) * ow;
        for (int x = 0; x < ow; ++x) {
          const Tap& t = tx[x];
          const double v0 = wy0 * r0[t.i0] + wy1 * r1[t.i0];
          const double v1 = wy0 * r0[t.i1] + wy1 * r1[t.i1];
          dst[x] = (1.0 - t.w1) * v0 + t.w1 * v1;
        }
      }
    }
  }
  return out;
}

Tensor resample_backward(const Tensor& grad_output, ResampleMode mode,
                         Shape input_shape) {
  if (grad_output.n() != input_shape.n || grad_output.c() != input_shape.c) {
    throw ShapeError("resample_backward: channel mismatch");
  }
  const int h = input_shape.h;
  const int w = input_shape.w;
  Tensor out(input_shape);

  if (mode == ResampleMode::Down2) {
    if (grad_output.h() != h / 2 || grad_output.w() != w / 2) {
      throw ShapeError("resample_backward down2: grad shape " +
                       grad_output.shape().str() + " does not match input " +
                       input_shape.str());
    }
    for (int b = 0; b < input_shape.n; ++b) {
      for (int c = 0; c < input_shape.c; ++c) {
        const double* gp = grad_output.plane(b, c);
        double* op = out.plane(b, c);
        for (int y = 0; y < h / 2; ++y) {
          for (int x = 0; x < w / 2; ++x) {
            const double v = 0.25 * gp[std::int64_t(y) * (w / 2) + x];
            double* r0 = op + std::int64_t(2 * y) * w + 2 * x;
            double* r1 = r0 + w;
            r0[0] += v;
            r0[1] += v;
            r1[0] += v;
            r1[1] += v;
          }
        }
      }
    }
    return out;
  }

  if (grad_output.h() != 2 * h || grad_output.w() != 2 * w) {
    throw ShapeError("resample_backward up2: grad shape " +
                     grad_output.shape().str() + " does not match input " +
                     input_shape.str());
  }
  const int oh = 2 * h;
  const int ow = 2 * w;
  std::vector<Tap> ty(oh), tx(ow);
  for (int y = 0; y < oh; ++y) ty[y] = up2_tap(y, h);
  for (int x = 0; x < ow; ++x) tx[x] = up2_tap(x, w);

  for (int b = 0; b < input_shape.n; ++b) {
    for (int c = 0; c < input_shape.c; ++c) {
      const double* gp = grad_output.plane(b, c);
      double* op = out.plane(b, c);
      for (int y = 0; y < oh; ++y) {
        const double wy1 = ty[y].w1;
        const double wy0 = 1.0 - wy1;
        double* r0 = op + std::int64_t(ty[y].i0) * w;
        double* r1 = op + std::int64_t(ty[y].i1) * w;
        const double* src = gp + std::int64_t(y) * ow;
        for (int x = 0; x < ow; ++x) {
          const Tap& t = tx[x];
          const double g = src[x];
          r0[t.i0] += wy0 * (1.0 - t.w1) * g;
          r0[t.i1] += wy0 * t.w1 * g;
          r1[t.i0] += wy1 * (1.0 - t.w1) * g;
          r1[t.i1] += wy1 * t.w1 * g;
        }
      }
    }
  }
  return out;
}

MseResult mse_loss(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "mse_loss");
  const std::int64_t sz = prediction.size();
  if (sz == 0) throw ShapeError("mse_loss: empty tensors");

  MseResult r;
  r.grad_prediction = Tensor(prediction.shape());
  const double* pp = prediction.data();
  const double* tp = target.data();
  double* gp = r.grad_prediction.data();
  double acc = 0.0;
  const double scale = 2.0 / double(sz);
  for (std::int64_t i = 0; i < sz; ++i) {
    const double d = pp[i] - tp[i];
    acc += d * d;
    gp[i] = scale * d;
  }
  r.loss = acc / double(sz);
  return r;
}

}  // namespace far
