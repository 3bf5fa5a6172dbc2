#include "waferflow/csr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace waferflow {

void CsrMatrix::validate() const {
  if (row_ptr.size() != std::size_t(n_rows) + 1)
    throw FormatError("csr: row_ptr length != n_rows + 1");
  if (row_ptr.front() != 0) throw FormatError("csr: row_ptr[0] != 0");
  if (col_idx.size() != values.size())
    throw FormatError("csr: col_idx/values length mismatch");
  if (row_ptr.back() != col_idx.size())
    throw FormatError("csr: row_ptr[n_rows] != nnz");
  for (std::uint32_t r = 0; r < n_rows; ++r) {
    if (row_ptr[r] > row_ptr[r + 1])
      throw FormatError("csr: row_ptr not non-decreasing at row " +
                        std::to_string(r));
    for (std::uint64_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      if (col_idx[k] >= n_cols)
        throw FormatError("csr: column index out of range at row " +
                          std::to_string(r));
      if (k > row_ptr[r] && col_idx[k - 1] >= col_idx[k])
        throw FormatError("csr: columns not strictly increasing in row " +
                          std::to_string(r));
    }
  }
}

CsrMatrix csr_from_dense(const DenseMatrix& m, float eps) {
  if (eps < 0.0f) throw Error("csr_from_dense: eps must be >= 0");
  CsrMatrix a(m.n_rows, m.n_cols);
  for (std::uint32_t r = 0; r < m.n_rows; ++r) {
    for (std::uint32_t c = 0; c < m.n_cols; ++c) {
      float v = m.at(r, c);
      if (std::fabs(v) > eps) {
        a.col_idx.push_back(c);
        a.values.push_back(v);
      }
    }
    a.row_ptr[r + 1] = a.col_idx.size();
  }
  return a;
}

DenseMatrix dense_from_csr(const CsrMatrix& a) {
  DenseMatrix m(a.n_rows, a.n_cols);
  for (std::uint32_t r = 0; r < a.n_rows; ++r)
    for (std::uint64_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
      m.at(r, a.col_idx[k]) = a.values[k];
  return m;
}

CsrMatrix csr_from_triples(std::uint32_t n_rows, std::uint32_t n_cols,
                           std::vector<std::uint64_t> rows,
                           std::vector<std::uint32_t> cols,
                           std::vector<float> vals) {
  if (rows.size() != cols.size() || rows.size() != vals.size())
    throw FormatError("csr_from_triples: array length mismatch");
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (rows[i] != rows[j]) return rows[i] < rows[j];
    return cols[i] < cols[j];
  });

  CsrMatrix a(n_rows, n_cols);
  a.col_idx.reserve(rows.size());
  a.values.reserve(rows.size());
  for (std::size_t t = 0; t < order.size(); ++t) {
    std::size_t i = order[t];
    if (rows[i] >= n_rows || cols[i] >= n_cols)
      throw FormatError("csr_from_triples: coordinate out of range");
    if (t > 0) {
      std::size_t p = order[t - 1];
      if (rows[p] == rows[i] && cols[p] == cols[i])
        throw FormatError("csr_from_triples: duplicate coordinate");
    }
    a.col_idx.push_back(cols[i]);
    a.values.push_back(vals[i]);
  }
  std::size_t t = 0;
  for (std::uint32_t r = 0; r < n_rows; ++r) {
    while (t < order.size() && rows[order[t]] == r) ++t;
    a.row_ptr[r + 1] = t;
  }
  return a;
}

CsrMatrix csr_slice_columns(const CsrMatrix& a, std::uint32_t col_begin,
                            std::uint32_t col_end) {
  if (col_begin > col_end || col_end > a.n_cols)
    throw Error("csr_slice_columns: bad column range");
  CsrMatrix s(a.n_rows, col_end - col_begin);
  for (std::uint32_t r = 0; r < a.n_rows; ++r) {
    auto first = a.col_idx.begin() + static_cast<std::ptrdiff_t>(a.row_ptr[r]);
    auto last = a.col_idx.begin() + static_cast<std::ptrdiff_t>(a.row_ptr[r + 1]);
    auto lo = std::lower_bound(first, last, col_begin);
    auto hi = std::lower_bound(first, last, col_end);
    for (auto it = lo; it != hi; ++it) {
      std::uint64_t k = std::uint64_t(it - a.col_idx.begin());
      s.col_idx.push_back(*it - col_begin);
      s.values.push_back(a.values[k]);
    }
    s.row_ptr[r + 1] = s.col_idx.size();
  }
  return s;
}

}  // namespace waferflow
