#pragma once

#include <cstdint>

#include "waferflow/types.hpp"

namespace waferflow {

inline constexpr double kBytesPerGiB = 1073741824.0;  // 2^30
inline constexpr double kBytesPerMiB = 1048576.0;     // 2^20

// Dense n x n matrix of 32-bit floats: 4 * n^2 bytes.
inline std::uint64_t dense_footprint_bytes(std::uint64_t n) {
  if (n == 0) throw Error("dense_footprint_bytes: n must be >= 1");
  if (n > 0xFFFFFFFFull || 4ull * n > UINT64_MAX / n)
    throw Error("dense_footprint_bytes: byte count overflows 64 bits");
  return 4ull * n * n;
}

// CSR holding a binary adjacency matrix: row pointers plus column indices,
// 4 bytes each, no value array.
inline std::uint64_t csr_footprint_bytes(std::uint64_t n, std::uint64_t nnz) {
  if (n > 0 && nnz > n * n && n <= 0xFFFFFFFFull)
    throw Error("csr_footprint_bytes: nnz exceeds n^2");
  return 4ull * (n + 1) + 4ull * nnz;
}

// CSR with an explicit 32-bit value array, the layout the streaming kernels
// consume (index/value pairs).
inline std::uint64_t csr_footprint_bytes_with_values(std::uint64_t n,
                                                     std::uint64_t nnz) {
  return 4ull * (n + 1) + 8ull * nnz;
}

}  // namespace waferflow
