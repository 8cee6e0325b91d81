#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "far/restore_net.hpp"
#include "far/tensor.hpp"

namespace far {

// Quantized integer levels for one named parameter tensor.
struct QuantizedTensor {
  std::string name;
  Shape shape;
  std::vector<std::int32_t> levels;
};

// Uniform scalar quantization of a whole model: one global step
// max|w| / L over all trainable tensors, levels in [-L, L].
struct QuantizedModel {
  std::vector<QuantizedTensor> tensors;
  double step = 1.0;
  int level_bound = 127;  // L
  Parameterization parameterization = Parameterization::Far;

  std::int64_t level_count() const;
};

// step = max|w|/L (1 if all weights are zero); levels round half away from
// zero, so the extremal weight maps to exactly +-L.
QuantizedModel quantize(const ModelState& state, int level_bound = 127);

// Reconstructs w = level * step into an existing state whose layout must
// match the quantized tensors (names and shapes).
void apply_dequantized(const QuantizedModel& q, ModelState& state);

// Reconstructed weight tensors in stream order, w = level * step.
std::vector<Tensor> dequantize(const QuantizedModel& q);

// Serialized weight artifact. Little-endian layout: magic "FARW", version u8,
// parameterization u8, tensor-count u16, per tensor (u8 name length, name
// bytes, 4x u32 shape), step f64, payload-bit-count u64, payload bytes.
struct WeightBitstream {
  std::vector<std::uint8_t> bytes;

  std::uint64_t total_bits() const { return std::uint64_t(bytes.size()) * 8; }
};

std::uint64_t weight_bits(const WeightBitstream& stream);

// Binarization of one level, exposed for tests: significance flag, then sign,
// then |level|-1 as truncated unary (cap 4) with an order-0 Exp-Golomb escape.
enum class BinClass : std::uint8_t { Significance, Sign, Unary, Golomb };
struct Bin {
  BinClass cls;
  std::uint8_t ctx;  // unary position (0..3); 0 for other classes
  bool value;
};
std::vector<Bin> binarize_level(std::int32_t level);

// Context-adaptive binary range coding of the levels. Each bin class keeps
// its own adaptive probability model, updated after every coded bin.
WeightBitstream entropy_encode(const QuantizedModel& q);

// Exact inverse of entropy_encode. Throws DecodeError on bad magic/version,
// truncation, or any decoded level outside [-level_bound, level_bound].
QuantizedModel entropy_decode(std::span<const std::uint8_t> bytes,
                              int level_bound = 127);

void save_bitstream(const std::filesystem::path& path,
                    const WeightBitstream& stream);
WeightBitstream load_bitstream(const std::filesystem::path& path);

}  // namespace far
