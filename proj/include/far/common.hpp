#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace far {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape/dimension mismatches between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid user-supplied configuration (bad templates, ranges, files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated bitstreams. `field` names the header/payload item
// that failed to parse.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& field, const std::string& what)
      : Error("decode error at '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Failed external codec invocation; carries the command line and whatever the
// process wrote so the caller can report it.
class SubprocessError : public Error {
 public:
  SubprocessError(const std::string& command, int exit_code,
                  const std::string& output)
      : Error("command failed (exit " + std::to_string(exit_code) +
              "): " + command + (output.empty() ? "" : "\n" + output)),
        command_(command),
        exit_code_(exit_code),
        output_(output) {}
  const std::string& command() const { return command_; }
  int exit_code() const { return exit_code_; }
  const std::string& output() const { return output_; }

 private:
  std::string command_;
  int exit_code_;
  std::string output_;
};

// Deterministic RNG. Draws are derived from the mt19937_64 bit stream with
// explicit arithmetic so sequences do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return n == 0 ? 0 : gen_() % n;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace far
