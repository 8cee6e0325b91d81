#include "far/weight_codec.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace far {

namespace {

constexpr char kMagic[4] = {'F', 'A', 'R', 'W'};
constexpr std::uint8_t kVersion = 1;
constexpr int kUnaryCap = 4;
constexpr int kMaxGolombPrefix = 24;

// ---- adaptive binary model + range coder (LZMA-style bit coder) ----

constexpr int kProbBits = 11;
constexpr std::uint16_t kProbInit = 1 << (kProbBits - 1);
constexpr int kProbShift = 5;
constexpr std::uint32_t kTopValue = 1u << 24;

struct BitModel {
  std::uint16_t p0 = kProbInit;  // probability of bit == 0, 11-bit scale
};

class RangeEncoder {
 public:
  explicit RangeEncoder(std::vector<std::uint8_t>& out) : out_(out) {}

  void encode(BitModel& m, bool bit) {
    const std::uint32_t bound = (range_ >> kProbBits) * m.p0;
    if (!bit) {
      range_ = bound;
      m.p0 += ((1 << kProbBits) - m.p0) >> kProbShift;
    } else {
      low_ += bound;
      range_ -= bound;
      m.p0 -= m.p0 >> kProbShift;
    }
    while (range_ < kTopValue) {
      shift_low();
      range_ <<= 8;
    }
  }

  void flush() {
    for (int i = 0; i < 5; ++i) shift_low();
  }

 private:
  void shift_low() {
    if (std::uint32_t(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      const std::uint8_t carry = std::uint8_t(low_ >> 32);
      do {
        out_.push_back(std::uint8_t(cache_ + carry));
        cache_ = 0xFF;
      } while (--cache_size_ != 0);
      cache_ = std::uint8_t(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ & 0x00FFFFFFu) << 8;
  }

  std::vector<std::uint8_t>& out_;
  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
};

class RangeDecoder {
 public:
  RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
    next_byte();  // leading zero emitted by the encoder cache
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  bool decode(BitModel& m) {
    const std::uint32_t bound = (range_ >> kProbBits) * m.p0;
    bool bit;
    if (code_ < bound) {
      range_ = bound;
      m.p0 += ((1 << kProbBits) - m.p0) >> kProbShift;
      bit = false;
    } else {
      code_ -= bound;
      range_ -= bound;
      m.p0 -= m.p0 >> kProbShift;
      bit = true;
    }
    while (range_ < kTopValue) {
      range_ <<= 8;
      code_ = (code_ << 8) | next_byte();
    }
    return bit;
  }

 private:
  std::uint8_t next_byte() {
    if (pos_ >= bytes_.size()) {
      throw DecodeError("payload", "truncated entropy-coded data");
    }
    return bytes_[pos_++];
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

// One adaptive model per bin class; unary bins get one model per position.
struct LevelModels {
  BitModel significance;
  BitModel sign;
  BitModel unary[kUnaryCap];
  BitModel golomb;
};

void encode_level(RangeEncoder& rc, LevelModels& m, std::int32_t level) {
  rc.encode(m.significance, level != 0);
  if (level == 0) return;
  rc.encode(m.sign, level < 0);
  std::uint32_t r = std::uint32_t(level < 0 ? -level : level) - 1;
  const std::uint32_t unary = r < kUnaryCap ? r : kUnaryCap;
  for (std::uint32_t i = 0; i < unary; ++i) rc.encode(m.unary[i], true);
  if (r < kUnaryCap) {
    rc.encode(m.unary[r], false);
    return;
  }
  // Order-0 Exp-Golomb of the remainder.
  std::uint32_t v = r - kUnaryCap + 1;  // >= 1
  int nbits = 0;
  while ((v >> (nbits + 1)) != 0) ++nbits;
  for (int i = 0; i < nbits; ++i) rc.encode(m.golomb, false);
  rc.encode(m.golomb, true);
  for (int i = nbits - 1; i >= 0; --i) {
    rc.encode(m.golomb, (v >> i) & 1);
  }
}

std::int32_t decode_level(RangeDecoder& rc, LevelModels& m, int level_bound) {
  if (!rc.decode(m.significance)) return 0;
  const bool negative = rc.decode(m.sign);
  std::uint32_t r = 0;
  while (r < kUnaryCap && rc.decode(m.unary[r])) ++r;
  if (r == kUnaryCap) {
    int nbits = 0;
    while (!rc.decode(m.golomb)) {
      if (++nbits > kMaxGolombPrefix) {
        throw DecodeError("payload", "level magnitude out of range");
      }
    }
    std::uint32_t v = 1;
    for (int i = 0; i < nbits; ++i) {
      v = (v << 1) | std::uint32_t(rc.decode(m.golomb));
    }
    r = v - 1 + kUnaryCap;
  }
  const std::int64_t magnitude = std::int64_t(r) + 1;
  if (magnitude > level_bound) {
    throw DecodeError("payload",
                      "decoded level " + std::to_string(magnitude) +
                          " exceeds bound " + std::to_string(level_bound));
  }
  return negative ? std::int32_t(-magnitude) : std::int32_t(magnitude);
}

// ---- little-endian primitives ----

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(std::uint8_t(v));
    out_.push_back(std::uint8_t(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8(const char* field) { return take(1, field)[0]; }
  std::uint16_t u16(const char* field) {
    const auto* p = take(2, field);
    return std::uint16_t(p[0]) | (std::uint16_t(p[1]) << 8);
  }
  std::uint32_t u32(const char* field) {
    const auto* p = take(4, field);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }
  std::uint64_t u64(const char* field) {
    const auto* p = take(8, field);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }
  double f64(const char* field) {
    const std::uint64_t bits = u64(field);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n, const char* field) {
    const auto* p = take(n, field);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  std::span<const std::uint8_t> rest() { return bytes_.subspan(pos_); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::uint8_t* take(std::size_t n, const char* field) {
    if (bytes_.size() - pos_ < n) {
      throw DecodeError(field, "stream truncated");
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::int64_t QuantizedModel::level_count() const {
  std::int64_t n = 0;
  for (const QuantizedTensor& t : tensors) n += std::int64_t(t.levels.size());
  return n;
}

QuantizedModel quantize(const ModelState& state, int level_bound) {
  if (level_bound < 1) throw ConfigError("quantize: L must be >= 1");

  QuantizedModel q;
  q.level_bound = level_bound;
  q.parameterization = state.config.parameterization;

  double max_abs = 0.0;
  for (const LayerState& l : state.layers) {
    max_abs = std::max(max_abs, l.weights.max_abs());
    max_abs = std::max(max_abs, l.bias.max_abs());
  }
  q.step = max_abs > 0.0 ? max_abs / double(level_bound) : 1.0;

  auto push = [&](const std::string& name, const Tensor& t) {
    QuantizedTensor qt;
    qt.name = name;
    qt.shape = t.shape();
    qt.levels.resize(std::size_t(t.size()));
    const double* p = t.data();
    for (std::int64_t i = 0, sz = t.size(); i < sz; ++i) {
      // Round half away from zero; the extremal weight lands exactly on L.
      const double scaled = p[i] / q.step;
      qt.levels[std::size_t(i)] =
          std::int32_t(scaled >= 0.0 ? std::floor(scaled + 0.5)
                                     : std::ceil(scaled - 0.5));
    }
    q.tensors.push_back(std::move(qt));
  };

  for (std::size_t li = 0; li < state.layers.size(); ++li) {
    const std::string prefix = "layer" + std::to_string(li);
    push(prefix + ".weight", state.layers[li].weights);
    push(prefix + ".bias", state.layers[li].bias);
  }
  return q;
}

std::vector<Tensor> dequantize(const QuantizedModel& q) {
  std::vector<Tensor> out;
  out.reserve(q.tensors.size());
  for (const QuantizedTensor& qt : q.tensors) {
    Tensor t(qt.shape);
    if (std::size_t(t.size()) != qt.levels.size()) {
      throw ShapeError("dequantize: tensor '" + qt.name + "' has " +
                       std::to_string(qt.levels.size()) + " levels for shape " +
                       qt.shape.str());
    }
    double* p = t.data();
    for (std::size_t i = 0; i < qt.levels.size(); ++i) {
      p[i] = double(qt.levels[i]) * q.step;
    }
    out.push_back(std::move(t));
  }
  return out;
}

void apply_dequantized(const QuantizedModel& q, ModelState& state) {
  if (q.tensors.size() != state.layers.size() * 2) {
    throw ShapeError("apply_dequantized: stream has " +
                     std::to_string(q.tensors.size()) + " tensors, model has " +
                     std::to_string(state.layers.size() * 2));
  }
  std::vector<Tensor> values = dequantize(q);
  for (std::size_t li = 0; li < state.layers.size(); ++li) {
    const QuantizedTensor& qw = q.tensors[2 * li];
    const QuantizedTensor& qb = q.tensors[2 * li + 1];
    const std::string prefix = "layer" + std::to_string(li);
    if (qw.name != prefix + ".weight" || qb.name != prefix + ".bias") {
      throw ShapeError("apply_dequantized: unexpected tensor order at " +
                       prefix);
    }
    require_same_shape(state.layers[li].weights, values[2 * li],
                       "apply_dequantized weights");
    require_same_shape(state.layers[li].bias, values[2 * li + 1],
                       "apply_dequantized bias");
    state.layers[li].weights = std::move(values[2 * li]);
    state.layers[li].bias = std::move(values[2 * li + 1]);
  }
}

std::vector<Bin> binarize_level(std::int32_t level) {
  std::vector<Bin> bins;
  bins.push_back({BinClass::Significance, 0, level != 0});
  if (level == 0) return bins;
  bins.push_back({BinClass::Sign, 0, level < 0});
  std::uint32_t r = std::uint32_t(level < 0 ? -level : level) - 1;
  const std::uint32_t unary = r < kUnaryCap ? r : kUnaryCap;
  for (std::uint32_t i = 0; i < unary; ++i) {
    bins.push_back({BinClass::Unary, std::uint8_t(i), true});
  }
  if (r < kUnaryCap) {
    bins.push_back({BinClass::Unary, std::uint8_t(r), false});
    return bins;
  }
  std::uint32_t v = r - kUnaryCap + 1;
  int nbits = 0;
  while ((v >> (nbits + 1)) != 0) ++nbits;
  for (int i = 0; i < nbits; ++i) bins.push_back({BinClass::Golomb, 0, false});
  bins.push_back({BinClass::Golomb, 0, true});
  for (int i = nbits - 1; i >= 0; --i) {
    bins.push_back({BinClass::Golomb, 0, bool((v >> i) & 1)});
  }
  return bins;
}

WeightBitstream entropy_encode(const QuantizedModel& q) {
  WeightBitstream stream;
  ByteWriter w(stream.bytes);
  w.raw(kMagic, 4);
  w.u8(kVersion);
  w.u8(q.parameterization == Parameterization::Far ? 1 : 0);
  if (q.tensors.size() > 0xFFFF) {
    throw ConfigError("entropy_encode: too many tensors");
  }
  w.u16(std::uint16_t(q.tensors.size()));
  for (const QuantizedTensor& t : q.tensors) {
    if (t.name.size() > 0xFF) {
      throw ConfigError("entropy_encode: tensor name too long: " + t.name);
    }
    w.u8(std::uint8_t(t.name.size()));
    w.raw(t.name.data(), t.name.size());
    w.u32(std::uint32_t(t.shape.n));
    w.u32(std::uint32_t(t.shape.c));
    w.u32(std::uint32_t(t.shape.h));
    w.u32(std::uint32_t(t.shape.w));
  }
  w.f64(q.step);

  std::vector<std::uint8_t> payload;
  {
    RangeEncoder rc(payload);
    LevelModels models;
    for (const QuantizedTensor& t : q.tensors) {
      for (std::int32_t level : t.levels) {
        if (std::abs(level) > q.level_bound) {
          throw ConfigError("entropy_encode: level " + std::to_string(level) +
                            " exceeds bound " +
                            std::to_string(q.level_bound));
        }
        encode_level(rc, models, level);
      }
    }
    rc.flush();
  }
  w.u64(std::uint64_t(payload.size()) * 8);
  w.raw(payload.data(), payload.size());
  return stream;
}

QuantizedModel entropy_decode(std::span<const std::uint8_t> bytes,
                              int level_bound) {
  ByteReader r(bytes);
  const std::string magic = r.str(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw DecodeError("magic", "expected FARW, got '" + magic + "'");
  }
  const std::uint8_t version = r.u8("version");
  if (version != kVersion) {
    throw DecodeError("version",
                      "unsupported version " + std::to_string(version));
  }
  const std::uint8_t param_flag = r.u8("parameterization");
  if (param_flag > 1) {
    throw DecodeError("parameterization",
                      "invalid flag " + std::to_string(param_flag));
  }

  QuantizedModel q;
  q.level_bound = level_bound;
  q.parameterization =
      param_flag ? Parameterization::Far : Parameterization::Vanilla;

  const std::uint16_t count = r.u16("tensor-count");
  for (std::uint16_t i = 0; i < count; ++i) {
    QuantizedTensor t;
    const std::uint8_t name_len = r.u8("tensor-name-length");
    t.name = r.str(name_len, "tensor-name");
    t.shape.n = int(r.u32("shape"));
    t.shape.c = int(r.u32("shape"));
    t.shape.h = int(r.u32("shape"));
    t.shape.w = int(r.u32("shape"));
    const std::int64_t n = t.shape.count();
    if (n < 0 || n > (std::int64_t(1) << 32)) {
      throw DecodeError("shape", "implausible tensor extent " + t.shape.str());
    }
    t.levels.reserve(std::size_t(n));
    q.tensors.push_back(std::move(t));
  }

  q.step = r.f64("step");
  if (!(q.step > 0.0) || !std::isfinite(q.step)) {
    throw DecodeError("step", "non-positive or non-finite step");
  }

  const std::uint64_t payload_bits = r.u64("payload-bit-count");
  if (payload_bits % 8 != 0) {
    throw DecodeError("payload-bit-count", "not byte aligned");
  }
  if (payload_bits / 8 > r.remaining()) {
    throw DecodeError("payload", "payload shorter than declared bit count");
  }
  std::span<const std::uint8_t> payload = r.rest().subspan(0, payload_bits / 8);

  RangeDecoder rc(payload);
  LevelModels models;
  for (QuantizedTensor& t : q.tensors) {
    const std::int64_t n = t.shape.count();
    for (std::int64_t i = 0; i < n; ++i) {
      t.levels.push_back(decode_level(rc, models, level_bound));
    }
  }
  return q;
}

std::uint64_t weight_bits(const WeightBitstream& stream) {
  return stream.total_bits();
}

void save_bitstream(const std::filesystem::path& path,
                    const WeightBitstream& stream) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(stream.bytes.data()),
          std::streamsize(stream.bytes.size()));
  if (!f) throw ConfigError("write failed: " + path.string());
}

WeightBitstream load_bitstream(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw ConfigError("cannot open: " + path.string());
  const std::streamsize n = f.tellg();
  f.seekg(0);
  WeightBitstream s;
  s.bytes.resize(std::size_t(n));
  f.read(reinterpret_cast<char*>(s.bytes.data()), n);
  if (!f) throw ConfigError("read failed: " + path.string());
  return s;
}

}  // namespace far
