#include "far/dct.hpp"

#include <cmath>

namespace far {

namespace {

void check_kernel_shape(const Tensor& t, const DctBank& bank,
                        const char* what) {
  if (t.h() != bank.kh() || t.w() != bank.kw()) {
    throw ShapeError(std::string(what) + ": tensor spatial size " +
                     std::to_string(t.h()) + "x" + std::to_string(t.w()) +
                     " does not match bank " + std::to_string(bank.kh()) +
                     "x" + std::to_string(bank.kw()));
  }
}

}  // namespace

DctBank::DctBank(int kh, int kw) : kh_(kh), kw_(kw) {
  if (kh < 1 || kw < 1) {
    throw ShapeError("DctBank: kernel size must be positive, got " +
                     std::to_string(kh) + "x" + std::to_string(kw));
  }
  const double pi = std::acos(-1.0);
  const double norm = 1.0 / std::sqrt(double(kh) * kw);
  kernels_.resize(std::size_t(kh) * kw * kh * kw);
  for (int i = 0; i < kh; ++i) {
    const double ci = i == 0 ? 1.0 : std::sqrt(2.0);
    for (int j = 0; j < kw; ++j) {
      const double cj = j == 0 ? 1.0 : std::sqrt(2.0);
      double* k = kernels_.data() + (std::size_t(i) * kw + j) * kh * kw;
      for (int h = 0; h < kh; ++h) {
        const double ch = std::cos((2.0 * h + 1.0) / (2.0 * kh) * i * pi);
        for (int w = 0; w < kw; ++w) {
          const double cw = std::cos((2.0 * w + 1.0) / (2.0 * kw) * j * pi);
          k[std::size_t(h) * kw + w] = ci * cj * norm * ch * cw;
        }
      }
    }
  }
}

Tensor reparameterize(const Tensor& v, const DctBank& bank) {
  check_kernel_shape(v, bank, "reparameterize");
  const int kh = bank.kh();
  const int kw = bank.kw();
  const int taps = kh * kw;
  Tensor k(v.shape());
  for (int m = 0; m < v.n(); ++m) {
    for (int n = 0; n < v.c(); ++n) {
      const double* vp = v.plane(m, n);
      double* kp = k.plane(m, n);
      for (int i = 0; i < kh; ++i) {
        for (int j = 0; j < kw; ++j) {
          const double coeff = vp[std::size_t(i) * kw + j];
          if (coeff == 0.0) continue;
          const double* basis = bank.basis(i, j);
          for (int t = 0; t < taps; ++t) kp[t] += coeff * basis[t];
        }
      }
    }
  }
  return k;
}

Tensor project_to_frequency(const Tensor& kernels, const DctBank& bank) {
  check_kernel_shape(kernels, bank, "project_to_frequency");
  const int kh = bank.kh();
  const int kw = bank.kw();
  const int taps = kh * kw;
  Tensor v(kernels.shape());
  for (int m = 0; m < kernels.n(); ++m) {
    for (int n = 0; n < kernels.c(); ++n) {
      const double* kp = kernels.plane(m, n);
      double* vp = v.plane(m, n);
      for (int i = 0; i < kh; ++i) {
        for (int j = 0; j < kw; ++j) {
          const double* basis = bank.basis(i, j);
          double acc = 0.0;
          for (int t = 0; t < taps; ++t) acc += kp[t] * basis[t];
          vp[std::size_t(i) * kw + j] = acc;
        }
      }
    }
  }
  return v;
}

Tensor far_gradient(const Tensor& grad_kernels, const DctBank& bank) {
  // K is linear in V with an orthonormal basis, so the gradient map is the
  // same projection.
  return project_to_frequency(grad_kernels, bank);
}

}  // namespace far
