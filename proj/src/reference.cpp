#include "waferflow/reference.hpp"

#include <cmath>

namespace waferflow {

DenseMatrix spmm_ref(const CsrMatrix& a, const DenseMatrix& h) {
  if (a.n_cols != h.n_rows)
    throw Error("spmm_ref: a.n_cols != h.n_rows");
  DenseMatrix y(a.n_rows, h.n_cols);
  for (std::uint32_t i = 0; i < a.n_rows; ++i) {
    float* yi = &y.data[std::size_t(i) * y.n_cols];
    for (std::uint64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const float av = a.values[k];
      const float* hk = &h.data[std::size_t(a.col_idx[k]) * h.n_cols];
      for (std::uint32_t j = 0; j < h.n_cols; ++j) yi[j] += av * hk[j];
    }
  }
  return y;
}

CsrMatrix sddmm_ref(const CsrMatrix& a, const DenseMatrix& b,
                    const DenseMatrix& c) {
  if (b.n_rows != a.n_rows || c.n_cols != a.n_cols || b.n_cols != c.n_rows)
    throw Error("sddmm_ref: dimension mismatch");
  CsrMatrix y = a;
  for (std::uint32_t i = 0; i < a.n_rows; ++i) {
    for (std::uint64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const std::uint32_t j = a.col_idx[k];
      float acc = 0.0f;
      for (std::uint32_t t = 0; t < b.n_cols; ++t)
        acc += b.at(i, t) * c.at(t, j);
      y.values[k] = a.values[k] * acc;
    }
  }
  return y;
}

ComparisonReport compare(const DenseMatrix& x, const DenseMatrix& y,
                         float rel_tol, float abs_tol) {
  if (x.n_rows != y.n_rows || x.n_cols != y.n_cols)
    throw Error("compare: shape mismatch");
  ComparisonReport rep;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const float diff = std::fabs(x.data[i] - y.data[i]);
    const float mag = std::fabs(y.data[i]);
    if (diff > rep.max_abs_err) rep.max_abs_err = diff;
    if (mag > 0.0f && diff / mag > rep.max_rel_err)
      rep.max_rel_err = diff / mag;
    if (diff > abs_tol + rel_tol * mag) ++rep.mismatch_count;
  }
  rep.pass = rep.mismatch_count == 0;
  return rep;
}

}  // namespace waferflow
