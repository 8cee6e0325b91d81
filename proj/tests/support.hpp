// Shared test utilities: deterministic random tensors, central finite
// differences, and synthetic raw images for codec/e2e tests.
#pragma once

#include <cmath>
#include <functional>

#include "far/common.hpp"
#include "far/image.hpp"
#include "far/tensor.hpp"

namespace far::test {

inline Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(s);
  double* p = t.data();
  for (std::int64_t i = 0; i < t.size(); ++i) p[i] = rng.uniform(lo, hi);
  return t;
}

// Central finite difference of a scalar function w.r.t. one tensor entry.
inline double central_diff(const std::function<double(const Tensor&)>& f,
                           const Tensor& at, std::int64_t index,
                           double step = 1e-5) {
  Tensor plus = at;
  Tensor minus = at;
  plus.data()[index] += step;
  minus.data()[index] -= step;
  return (f(plus) - f(minus)) / (2.0 * step);
}

// Relative error with an absolute floor. The floor must sit above central
// finite-difference cancellation noise (~1e-11 at step 1e-5) so exact-zero
// gradients compare clean.
inline double rel_err(double got, double want, double floor = 1e-6) {
  const double denom = std::max({std::fabs(got), std::fabs(want), floor});
  return std::fabs(got - want) / denom;
}

// Deterministic synthetic "photograph": smooth gradients, a few geometric
// shapes with hard edges and oriented texture patches. Grayscale replicated
// to RGB so JPEG and the nets see identical channels.
inline ImageU8 synthetic_image(int size, std::uint64_t seed) {
  Rng rng(seed);
  Plane p(size, size);

  const double cx = rng.uniform(0.3, 0.7) * size;
  const double cy = rng.uniform(0.3, 0.7) * size;
  const double gx = rng.uniform(-1.0, 1.0);
  const double gy = rng.uniform(-1.0, 1.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      p.at(y, x) = 120 + 50 * (gx * (x - cx) + gy * (y - cy)) / size;
    }
  }
  // Texture patches: oriented sinusoids of mixed frequency.
  const int patches = 6;
  for (int i = 0; i < patches; ++i) {
    const int px = int(rng.below(std::uint64_t(size)));
    const int py = int(rng.below(std::uint64_t(size)));
    const int pw = size / 4 + int(rng.below(std::uint64_t(size / 4)));
    const double freq = rng.uniform(0.2, 1.6);
    const double angle = rng.uniform(0.0, 3.14159);
    const double amp = rng.uniform(18.0, 45.0);
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int y = std::max(0, py - pw); y < std::min(size, py + pw); ++y) {
      for (int x = std::max(0, px - pw); x < std::min(size, px + pw); ++x) {
        p.at(y, x) += amp * std::sin(freq * (ca * x + sa * y));
      }
    }
  }
  // Hard-edged discs and bars.
  for (int i = 0; i < 5; ++i) {
    const double ox = rng.uniform(0.1, 0.9) * size;
    const double oy = rng.uniform(0.1, 0.9) * size;
    const double r = rng.uniform(0.05, 0.18) * size;
    const double v = rng.uniform(-70.0, 70.0);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double d = std::hypot(x - ox, y - oy);
        if (d < r) p.at(y, x) += v;
      }
    }
  }
  for (int i = 0; i < 3; ++i) {
    const int bx = int(rng.below(std::uint64_t(size)));
    const int bwidth = 2 + int(rng.below(6));
    const double v = rng.uniform(-60.0, 60.0);
    for (int y = 0; y < size; ++y) {
      for (int x = bx; x < std::min(size, bx + bwidth); ++x) {
        p.at(y, x) += v;
      }
    }
  }

  ImageU8 img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double v = std::clamp(p.at(y, x), 0.0, 255.0);
      const auto b = std::uint8_t(std::lround(v));
      img.at(y, x, 0) = b;
      img.at(y, x, 1) = b;
      img.at(y, x, 2) = b;
    }
  }
  return img;
}

}  // namespace far::test
