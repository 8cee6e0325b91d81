#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "far/dct.hpp"
#include "far/tensor.hpp"

namespace far {

// One real statistic per DCT subband of a BxB block transform.
struct SubbandGrid {
  int block = 4;
  std::vector<double> stat;  // block*block, row-major (i, j)

  SubbandGrid() = default;
  explicit SubbandGrid(int b) : block(b), stat(std::size_t(b) * b, 0.0) {}

  double& at(int i, int j) { return stat[std::size_t(i) * block + j]; }
  double at(int i, int j) const { return stat[std::size_t(i) * block + j]; }
  double total() const;
  // Sum over the `count` subbands with the largest i^2 + j^2 (ties resolved
  // toward larger i); used for high-frequency share diagnostics.
  double high_frequency_sum(int count) const;
};

// Non-overlapping BxB block DCT coefficients of a 2-D channel. Rows/columns
// beyond the last full block are cropped.
struct BlockDctResult {
  int block = 0;
  int blocks_y = 0;
  int blocks_x = 0;
  std::vector<double> coeff;  // [by][bx][i][j]

  double at(int by, int bx, int i, int j) const {
    return coeff[((std::size_t(by) * blocks_x + bx) * block + i) * block + j];
  }
};

BlockDctResult block_dct(const Plane& channel, int block);

// Synthesis back to the (cropped) pixel domain.
Plane block_idct(const BlockDctResult& coeffs);

// Grid entry (i, j) = mean over blocks of |coefficient(i, j)|.
SubbandGrid mean_abs_subbands(const Plane& channel, int block);

// Projects both kernel stacks onto the bank and reports the mean absolute
// per-subband change over all (input, output) channel pairs.
SubbandGrid weight_update_subbands(const Tensor& kernels_before,
                                   const Tensor& kernels_after,
                                   const DctBank& bank);

// Same statistic pooled across several layers (all pairs of all layers
// weighted equally). When the tensors already hold frequency weights (FAR
// states store V directly), pass inputs_are_frequency to skip the projection.
SubbandGrid weight_update_subbands(
    std::span<const std::pair<const Tensor*, const Tensor*>> layer_pairs,
    const DctBank& bank, bool inputs_are_frequency = false);

// CSV emission: a single grid as `block` rows x `block` columns.
void write_grid_csv(std::ostream& os, const SubbandGrid& grid);
// Time series: header `iteration,s_0_0,...`, one row per record.
void write_grid_series_csv(
    std::ostream& os,
    std::span<const std::pair<int, SubbandGrid>> series);

}  // namespace far
