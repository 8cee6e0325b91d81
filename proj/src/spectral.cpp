#include "far/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace far {

double SubbandGrid::total() const {
  return std::accumulate(stat.begin(), stat.end(), 0.0);
}

double SubbandGrid::high_frequency_sum(int count) const {
  std::vector<std::pair<int, int>> order;  // (-(i^2+j^2), -i) ascending
  for (int i = 0; i < block; ++i) {
    for (int j = 0; j < block; ++j) {
      order.emplace_back(-(i * i + j * j), -(i * block + j));
    }
  }
  std::sort(order.begin(), order.end());
  double sum = 0.0;
  const int take = std::min<int>(count, int(order.size()));
  for (int k = 0; k < take; ++k) {
    sum += stat[std::size_t(-order[k].second)];
  }
  return sum;
}

BlockDctResult block_dct(const Plane& channel, int block) {
  if (block < 1) throw ShapeError("block_dct: block size must be >= 1");
  BlockDctResult r;
  r.block = block;
  r.blocks_y = channel.h / block;
  r.blocks_x = channel.w / block;
  r.coeff.assign(std::size_t(r.blocks_y) * r.blocks_x * block * block, 0.0);

  const DctBank bank(block, block);
  for (int by = 0; by < r.blocks_y; ++by) {
    for (int bx = 0; bx < r.blocks_x; ++bx) {
      double* out =
          r.coeff.data() +
          (std::size_t(by) * r.blocks_x + bx) * block * block;
      for (int i = 0; i < block; ++i) {
        for (int j = 0; j < block; ++j) {
          const double* basis = bank.basis(i, j);
          double acc = 0.0;
          for (int y = 0; y < block; ++y) {
            for (int x = 0; x < block; ++x) {
              acc += channel.at(by * block + y, bx * block + x) *
                     basis[std::size_t(y) * block + x];
            }
          }
          out[std::size_t(i) * block + j] = acc;
        }
      }
    }
  }
  return r;
}

Plane block_idct(const BlockDctResult& coeffs) {
  const int block = coeffs.block;
  Plane out(coeffs.blocks_y * block, coeffs.blocks_x * block);
  const DctBank bank(block, block);
  for (int by = 0; by < coeffs.blocks_y; ++by) {
    for (int bx = 0; bx < coeffs.blocks_x; ++bx) {
      for (int i = 0; i < block; ++i) {
        for (int j = 0; j < block; ++j) {
          const double c = coeffs.at(by, bx, i, j);
          if (c == 0.0) continue;
          const double* basis = bank.basis(i, j);
          for (int y = 0; y < block; ++y) {
            for (int x = 0; x < block; ++x) {
              out.at(by * block + y, bx * block + x) +=
                  c * basis[std::size_t(y) * block + x];
            }
          }
        }
      }
    }
  }
  return out;
}

SubbandGrid mean_abs_subbands(const Plane& channel, int block) {
  BlockDctResult coeffs = block_dct(channel, block);
  SubbandGrid grid(block);
  const std::int64_t blocks =
      std::int64_t(coeffs.blocks_y) * coeffs.blocks_x;
  if (blocks == 0) return grid;
  for (std::int64_t b = 0; b < blocks; ++b) {
    const double* c = coeffs.coeff.data() + b * block * block;
    for (int s = 0; s < block * block; ++s) {
      grid.stat[s] += std::fabs(c[s]);
    }
  }
  for (double& s : grid.stat) s /= double(blocks);
  return grid;
}

SubbandGrid weight_update_subbands(const Tensor& kernels_before,
                                   const Tensor& kernels_after,
                                   const DctBank& bank) {
  const std::pair<const Tensor*, const Tensor*> one{&kernels_before,
                                                    &kernels_after};
  return weight_update_subbands(std::span(&one, 1), bank);
}

SubbandGrid weight_update_subbands(
    std::span<const std::pair<const Tensor*, const Tensor*>> layer_pairs,
    const DctBank& bank, bool inputs_are_frequency) {
  if (bank.kh() != bank.kw()) {
    throw ShapeError("weight_update_subbands: bank must be square");
  }
  const int k = bank.kh();
  SubbandGrid grid(k);
  std::int64_t pairs = 0;
  for (const auto& [before, after] : layer_pairs) {
    require_same_shape(*before, *after, "weight_update_subbands");
    Tensor vb = inputs_are_frequency ? *before
                                     : project_to_frequency(*before, bank);
    Tensor va =
        inputs_are_frequency ? *after : project_to_frequency(*after, bank);
    for (int m = 0; m < vb.n(); ++m) {
      for (int n = 0; n < vb.c(); ++n) {
        const double* pb = vb.plane(m, n);
        const double* pa = va.plane(m, n);
        for (int s = 0; s < k * k; ++s) {
          grid.stat[s] += std::fabs(pa[s] - pb[s]);
        }
        ++pairs;
      }
    }
  }
  if (pairs > 0) {
    for (double& s : grid.stat) s /= double(pairs);
  }
  return grid;
}

void write_grid_csv(std::ostream& os, const SubbandGrid& grid) {
  for (int i = 0; i < grid.block; ++i) {
    for (int j = 0; j < grid.block; ++j) {
      os << (j ? "," : "") << grid.at(i, j);
    }
    os << "\n";
  }
}

void write_grid_series_csv(
    std::ostream& os,
    std::span<const std::pair<int, SubbandGrid>> series) {
  if (series.empty()) return;
  const int b = series.front().second.block;
  os << "iteration";
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) os << ",s_" << i << "_" << j;
  }
  os << "\n";
  for (const auto& [iter, grid] : series) {
    os << iter;
    for (double v : grid.stat) os << "," << v;
    os << "\n";
  }
}

}  // namespace far
