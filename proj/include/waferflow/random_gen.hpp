#pragma once

#include <cstdint>
#include <vector>

#include "waferflow/csr.hpp"

namespace waferflow {

// SplitMix64 step. Integer-only, so sequences are identical on every
// platform for a fixed seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Per-row stream derived from (seed, row), so rows are independent and the
// whole matrix is a pure function of its parameters.
inline std::uint64_t row_stream_state(std::uint64_t seed, std::uint64_t row) {
  std::uint64_t s = seed ^ (0xD1B54A32D192ED03ull * (row + 1));
  splitmix64(s);
  return s;
}

// Uniform float in (0, 1], 24 bits of resolution. The arithmetic is a
// single exact integer-to-float conversion and one multiply, identical on
// all IEEE-754 platforms.
inline float u64_to_unit_float(std::uint64_t bits) {
  return float((bits >> 40) + 1) * (1.0f / 16777216.0f);
}

inline double u64_to_unit_double(std::uint64_t bits) {
  return double((bits >> 11) + 1) * (1.0 / 9007199254740992.0);  // (0, 1]
}

// Geometric skip sampler for a Bernoulli(p) process, used to draw sparse
// patterns in O(nnz) instead of O(n^2). The survival powers q^(2^j) are
// built by repeated IEEE squaring, so results do not depend on libm.
class GeometricSkip {
 public:
  explicit GeometricSkip(double p) {
    double q = 1.0 - p;
    double acc = q;
    for (int j = 0; j < kBits; ++j) {
      pow2_[j] = acc;
      acc = acc * acc;
    }
  }

  // Number of failures before the next success, given v in (0, 1].
  // Returns the largest m with q^m > v (capped at 2^kBits).
  std::uint64_t skip(double v) const {
    std::uint64_t m = 0;
    double acc = 1.0;
    for (int j = kBits - 1; j >= 0; --j) {
      double cand = acc * pow2_[j];
      if (cand > v) {
        acc = cand;
        m += std::uint64_t(1) << j;
      }
    }
    return m;
  }

 private:
  static constexpr int kBits = 44;
  double pow2_[kBits];
};

// Random n x n sparse matrix: every cell is nonzero independently with
// probability `density`; values are uniform in (0, 1]. Deterministic for a
// fixed (n, density, seed) triple.
inline CsrMatrix random_sparse(std::uint32_t n, double density,
                               std::uint64_t seed) {
  if (!(density > 0.0) || density > 1.0)
    throw Error("random_sparse: density must be in (0, 1]");
  CsrMatrix a(n, n);
  if (density >= 1.0) {
    a.col_idx.reserve(std::size_t(n) * n);
    a.values.reserve(std::size_t(n) * n);
    for (std::uint32_t r = 0; r < n; ++r) {
      std::uint64_t s = row_stream_state(seed, r);
      for (std::uint32_t c = 0; c < n; ++c) {
        a.col_idx.push_back(c);
        a.values.push_back(u64_to_unit_float(splitmix64(s)));
      }
      a.row_ptr[r + 1] = a.col_idx.size();
    }
    return a;
  }
  GeometricSkip geo(density);
  for (std::uint32_t r = 0; r < n; ++r) {
    std::uint64_t s = row_stream_state(seed, r);
    std::uint64_t col = geo.skip(u64_to_unit_double(splitmix64(s)));
    while (col < n) {
      a.col_idx.push_back(std::uint32_t(col));
      a.values.push_back(u64_to_unit_float(splitmix64(s)));
      col += 1 + geo.skip(u64_to_unit_double(splitmix64(s)));
    }
    a.row_ptr[r + 1] = a.col_idx.size();
  }
  return a;
}

// Random dense matrix with values uniform in (0, 1].
inline DenseMatrix random_dense(std::uint32_t rows, std::uint32_t cols,
                                std::uint64_t seed) {
  DenseMatrix m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    std::uint64_t s = row_stream_state(seed, r);
    for (std::uint32_t c = 0; c < cols; ++c)
      m.at(r, c) = u64_to_unit_float(splitmix64(s));
  }
  return m;
}

}  // namespace waferflow
