#pragma once

#include <cstdint>
#include <vector>

#include "waferflow/types.hpp"

namespace waferflow {

// Dense row-major matrix of 32-bit floats.
struct DenseMatrix {
  std::uint32_t n_rows = 0;
  std::uint32_t n_cols = 0;
  std::vector<float> data;  // length n_rows * n_cols

  DenseMatrix() = default;
  DenseMatrix(std::uint32_t rows, std::uint32_t cols)
      : n_rows(rows), n_cols(cols), data(std::size_t(rows) * cols, 0.0f) {}

  float& at(std::uint32_t r, std::uint32_t c) {
    return data[std::size_t(r) * n_cols + c];
  }
  float at(std::uint32_t r, std::uint32_t c) const {
    return data[std::size_t(r) * n_cols + c];
  }
};

// Compressed sparse row matrix. Within each row, column indices are
// strictly increasing. row_ptr has length n_rows + 1 with row_ptr[0] == 0.
struct CsrMatrix {
  std::uint32_t n_rows = 0;
  std::uint32_t n_cols = 0;
  std::vector<std::uint64_t> row_ptr;
  std::vector<std::uint32_t> col_idx;
  std::vector<float> values;

  CsrMatrix() : row_ptr(1, 0) {}
  CsrMatrix(std::uint32_t rows, std::uint32_t cols)
      : n_rows(rows), n_cols(cols), row_ptr(std::size_t(rows) + 1, 0) {}

  std::uint64_t nnz() const { return col_idx.size(); }

  // Throws FormatError if the structural invariants do not hold.
  void validate() const;

  bool operator==(const CsrMatrix& o) const {
    return n_rows == o.n_rows && n_cols == o.n_cols && row_ptr == o.row_ptr &&
           col_idx == o.col_idx && values == o.values;
  }
};

// Entries with |value| > eps become nonzeros.
CsrMatrix csr_from_dense(const DenseMatrix& m, float eps = 0.0f);

DenseMatrix dense_from_csr(const CsrMatrix& a);

// Builds a CSR matrix from unsorted (row, col, value) triples.
// Duplicate coordinates are rejected.
CsrMatrix csr_from_triples(std::uint32_t n_rows, std::uint32_t n_cols,
                           std::vector<std::uint64_t> rows,
                           std::vector<std::uint32_t> cols,
                           std::vector<float> vals);

// Column slice [col_begin, col_end) with indices rebased to zero.
// Used to split matrices wider than the on-grid column capacity into
// panels.
CsrMatrix csr_slice_columns(const CsrMatrix& a, std::uint32_t col_begin,
                            std::uint32_t col_end);

}  // namespace waferflow
