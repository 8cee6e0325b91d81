#pragma once

#include <vector>

#include "far/tensor.hpp"

namespace far {

// Orthonormal 2-D DCT-II kernel bank for a kh x kw kernel:
//   D_ij(h, w) = c_i*c_j/sqrt(kh*kw) * cos((2h+1)*i*pi/(2*kh))
//                                    * cos((2w+1)*j*pi/(2*kw)),
// with c_0 = 1 and c_k = sqrt(2) otherwise. The kh*kw kernels are pairwise
// orthonormal; subband (0,0) is the constant 1/sqrt(kh*kw). Immutable after
// construction and safe to share across jobs.
class DctBank {
 public:
  DctBank(int kh, int kw);

  int kh() const { return kh_; }
  int kw() const { return kw_; }

  // Basis kernel for subband (i, j), row-major kh x kw.
  const double* basis(int i, int j) const {
    return kernels_.data() + (std::size_t(i) * kw_ + j) * kh_ * kw_;
  }
  double value(int i, int j, int h, int w) const {
    return basis(i, j)[std::size_t(h) * kw_ + w];
  }

 private:
  int kh_;
  int kw_;
  std::vector<double> kernels_;
};

// Synthesizes spatial kernels from frequency-domain weights:
//   K_mn(h, w) = sum_ij V_mn(i, j) * D_ij(h, w).
Tensor reparameterize(const Tensor& v, const DctBank& bank);

// Projects spatial kernels onto the bank: V_mn(i, j) = <K_mn, D_ij>.
// Exact inverse of reparameterize by orthonormality.
Tensor project_to_frequency(const Tensor& kernels, const DctBank& bank);

// Gradient w.r.t. the frequency weights of any loss whose kernel gradient is
// grad_kernels; identical to projection since synthesis is linear.
Tensor far_gradient(const Tensor& grad_kernels, const DctBank& bank);

}  // namespace far
