#pragma once

#include <cstdint>

#include "waferflow/types.hpp"

namespace waferflow {

// The hardware places a hard cap on how many consecutive H rows (= A
// columns) one kernel instance can hold on the grid.
inline constexpr std::uint32_t kMaxRowsCap = 65536;

inline bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

// Parameter bundle shared by the kernels and the stream encoders.
struct KernelConfig {
  std::uint32_t n = 0;              // matrix dimension N (A is N x N)
  std::uint32_t d = 0;              // dense feature width
  std::uint32_t max_y_chunk = 512;  // A rows per chunk; power of two
  std::uint32_t max_v_per_pe = 64;  // column-index window per worker row
  std::uint32_t max_col_per_pe = 1; // Y columns per worker
  std::uint32_t max_nonzeros = 512; // per-tile COO capacity (SDDMM)
  std::uint32_t local_width = 64;   // SDDMM tile columns
  std::uint32_t local_height = 64;  // SDDMM tile rows
  std::uint32_t io_channels = 16;   // host lanes per edge direction

  // min(n, 65536): column span of one kernel pass.
  std::uint32_t max_rows() const {
    return n < kMaxRowsCap ? n : kMaxRowsCap;
  }

  // Worker rows needed to cover one pass worth of column windows.
  std::uint32_t worker_rows() const {
    return (max_rows() + max_v_per_pe - 1) / max_v_per_pe;
  }

  std::uint32_t worker_cols() const { return d / max_col_per_pe; }

  std::uint32_t column_panels() const {
    return (n + max_rows() - 1) / max_rows();
  }

  std::uint32_t chunk_count() const {
    return (n + max_y_chunk - 1) / max_y_chunk;
  }

  // Rows in chunk c; the final chunk may be partial.
  std::uint32_t rows_in_chunk(std::uint32_t c) const {
    std::uint64_t base = std::uint64_t(c) * max_y_chunk;
    std::uint64_t rem = n - base;
    return std::uint32_t(rem < max_y_chunk ? rem : max_y_chunk);
  }

  // Shared structural checks. Kernel builders apply their own placement
  // and memory constraints on top.
  void validate_spmm() const;
  void validate_sddmm() const;
};

// Simulator knobs. The cost model is deliberately simple: one cycle per
// hop, one cycle per FMAC, one word per cycle per host lane. It supports
// relative comparisons between kernel designs, not absolute timings.
struct FabricParams {
  std::uint32_t fifo_capacity = 4;   // words per link FIFO
  std::uint32_t io_channels = 16;    // host lanes per edge direction
  std::uint32_t pe_memory_bytes = 46 * 1024;
  std::uint32_t max_grid_rows = 1172;
  std::uint32_t max_grid_cols = 762;
  bool check_invariants = true;      // per-cycle capacity/conservation checks
  std::uint64_t max_cycles = 0;      // 0 = unlimited
};

}  // namespace waferflow
