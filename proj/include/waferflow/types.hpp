#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace waferflow {

// A wavelet payload: one 32-bit word on the fabric or in a host stream.
using Word = std::uint32_t;

// Sentinel words. Both exceed any legal column index, so range tests on
// real indices stay valid, and they are distinguishable from each other.
inline constexpr Word kNullWord = 0xFFFFFFFFu;
inline constexpr Word kEndRowWord = 0xFFFFFFFEu;
// Worker-facing row-completion token, a 16-bit word.
inline constexpr Word kDoneToken = 0xFFFFu;

inline float word_to_float(Word w) {
  float f;
  std::memcpy(&f, &w, sizeof(f));
  return f;
}

inline Word float_to_word(float f) {
  Word w;
  std::memcpy(&w, &f, sizeof(w));
  return w;
}

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when input data violates a format contract (bad sentinel
// sequences, tile overflow, malformed files).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Raised when a kernel cannot be placed on the grid (memory budget,
// grid-size caps, channel mismatches).
class PlacementError : public Error {
 public:
  using Error::Error;
};

// Raised by the simulator for deadlocks and invariant violations.
class SimError : public Error {
 public:
  using Error::Error;
};

}  // namespace waferflow
