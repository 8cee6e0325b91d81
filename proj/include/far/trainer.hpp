#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "far/restore_net.hpp"
#include "far/tensor.hpp"

namespace far {

struct TrainConfig {
  int iterations = 200;
  double initial_lr = 0.05;
  double l1_lambda = 1e-3;
  std::uint64_t seed = 0;
  // 0 disables tracing; otherwise records every N iterations plus the last.
  int trace_every = 0;
  // Fill per-subband statistics at trace points (image block DCT on luma and
  // per-step weight-update magnitudes).
  bool trace_subbands = false;
  int subband_block = 4;
  enum class LrDecay { Linear, Constant };
  LrDecay decay = LrDecay::Linear;

  void validate() const;
};

struct TraceRecord {
  int iteration = 0;
  double loss = 0.0;
  double psnr = 0.0;  // restored vs raw, unit dynamic range
  // Empty unless trace_subbands was set.
  std::vector<double> image_subbands;          // block^2, mean |coeff| of luma
  std::vector<double> weight_update_subbands;  // k^2, mean |dV| of this step
};

// initial_lr * (1 - iteration/iterations); strictly positive and strictly
// decreasing over the valid range. Constant decay returns initial_lr.
double lr_schedule(const TrainConfig& config, int iteration);

struct TrainResult {
  ModelState state;
  std::vector<TraceRecord> trace;
};

// Per-image over-fitting: `iterations` full-image steps of
// forward -> MSE -> backward -> (+ L1 subgradient on V/K) -> Adam with the
// decayed schedule. Deterministic given the seed. Raw and decoded must share
// shape with values in [0, 1]. Throws if the loss turns non-finite, naming
// the iteration.
TrainResult train_overfit(const Tensor& raw, const Tensor& decoded,
                          const ModelConfig& model_config,
                          const TrainConfig& train_config);

// CSV rows: iteration, loss, psnr, then optional img_i_j / upd_i_j columns.
void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace);

}  // namespace far
