#pragma once

#include <cstdint>

#include "waferflow/csr.hpp"

namespace waferflow {

// Y = A * H with 32-bit accumulation in CSR row order (ascending column
// index), the same per-row FMAC order the streamed kernels use.
DenseMatrix spmm_ref(const CsrMatrix& a, const DenseMatrix& h);

// Y = A .* (B * C) evaluated only at A's nonzero positions. The inner
// products accumulate over t in ascending order, then scale by A's stored
// value. Output shares A's sparsity pattern.
CsrMatrix sddmm_ref(const CsrMatrix& a, const DenseMatrix& b,
                    const DenseMatrix& c);

struct ComparisonReport {
  float max_abs_err = 0.0f;
  float max_rel_err = 0.0f;
  std::uint64_t mismatch_count = 0;
  bool pass = true;
};

// Element passes when |x - y| <= abs_tol + rel_tol * |y|.
ComparisonReport compare(const DenseMatrix& x, const DenseMatrix& y,
                         float rel_tol, float abs_tol);

}  // namespace waferflow
