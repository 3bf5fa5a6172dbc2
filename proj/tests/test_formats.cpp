#include <doctest.h>

#include <cmath>
#include <sstream>

#include "waferflow/coo_tiles.hpp"
#include "waferflow/csr.hpp"
#include "waferflow/footprint.hpp"
#include "waferflow/mmio.hpp"
#include "waferflow/random_gen.hpp"
#include "waferflow/sellpack.hpp"

using namespace waferflow;

namespace {

KernelConfig stream_cfg(std::uint32_t n, std::uint32_t myc,
                        std::uint32_t mvpp) {
  KernelConfig cfg;
  cfg.n = n;
  cfg.d = 1;
  cfg.max_y_chunk = myc;
  cfg.max_v_per_pe = mvpp;
  return cfg;
}

std::vector<std::pair<Word, Word>> stream_pairs(const SellpackImage& img,
                                                std::uint32_t chunk,
                                                std::uint32_t w) {
  std::vector<std::pair<Word, Word>> out;
  const std::uint64_t off = img.stream_offset(chunk, w);
  for (std::uint32_t p = 0; p < img.stream_len[chunk]; ++p)
    out.emplace_back(img.data[off + 2 * p], img.data[off + 2 * p + 1]);
  return out;
}

}  // namespace

TEST_CASE("csr_from_dense zero matrix") {
  DenseMatrix m(4, 4);
  CsrMatrix a = csr_from_dense(m);
  CHECK(a.nnz() == 0);
  CHECK(a.row_ptr == std::vector<std::uint64_t>{0, 0, 0, 0, 0});
}

TEST_CASE("csr_from_dense identity") {
  DenseMatrix m(3, 3);
  for (int i = 0; i < 3; ++i) m.at(i, i) = 1.0f;
  CsrMatrix a = csr_from_dense(m);
  CHECK(a.row_ptr == std::vector<std::uint64_t>{0, 1, 2, 3});
  CHECK(a.col_idx == std::vector<std::uint32_t>{0, 1, 2});
  CHECK(a.values == std::vector<float>{1.0f, 1.0f, 1.0f});
}

TEST_CASE("csr/dense round trip on a seeded matrix") {
  CsrMatrix a = random_sparse(16, 0.25, 11);
  a.validate();
  DenseMatrix m = dense_from_csr(a);
  CsrMatrix back = csr_from_dense(m);
  CHECK(back == a);
}

TEST_CASE("csr_from_dense respects eps") {
  DenseMatrix m(1, 3);
  m.at(0, 0) = 0.5f;
  m.at(0, 1) = -1e-6f;
  m.at(0, 2) = -0.5f;
  CsrMatrix a = csr_from_dense(m, 1e-5f);
  CHECK(a.nnz() == 2);
  CHECK(a.col_idx == std::vector<std::uint32_t>{0, 2});
}

TEST_CASE("dense footprint formula") {
  CHECK(dense_footprint_bytes(2710) == 29376400ull);
  CHECK(dense_footprint_bytes(2710) / kBytesPerGiB ==
        doctest::Approx(2.73e-2).epsilon(0.02));
  CHECK(dense_footprint_bytes(100000) / kBytesPerGiB ==
        doctest::Approx(37.2529).epsilon(0.001));
  CHECK(dense_footprint_bytes(1) == 4);
  CHECK_THROWS_AS((void)dense_footprint_bytes(0), Error);
  CHECK_THROWS_AS((void)dense_footprint_bytes(1ull << 33), Error);
}

TEST_CASE("csr footprint formula") {
  CHECK(csr_footprint_bytes(19700, 108000) == 510804ull);
  CHECK(csr_footprint_bytes(19700, 108000) / kBytesPerGiB ==
        doctest::Approx(4.77e-4).epsilon(0.01));
  CHECK(csr_footprint_bytes(2710, 10900) == 54444ull);
  CHECK(csr_footprint_bytes(2710, 10900) / kBytesPerGiB ==
        doctest::Approx(5.05e-5).epsilon(0.02));
  CHECK(csr_footprint_bytes(4, 0) == 20);
  CHECK(csr_footprint_bytes_with_values(4, 2) == 36);
}

TEST_CASE("table 1 rows within 2 percent") {
  struct Row {
    double n, nnz, dense_gb, csr_gb;
  };
  const Row rows[] = {
      {2.71e3, 1.09e4, 2.73e-2, 5.05e-5},
      {1.97e4, 1.08e5, 1.45e0, 4.77e-4},
      {1.69e5, 1.17e6, 1.07e2, 4.98e-3},
      {2.45e6, 6.19e7, 2.23e4, 2.40e-1},
  };
  for (const Row& r : rows) {
    const double dense =
        dense_footprint_bytes(std::uint64_t(r.n)) / kBytesPerGiB;
    const double csr =
        csr_footprint_bytes(std::uint64_t(r.n), std::uint64_t(r.nnz)) /
        kBytesPerGiB;
    CHECK(std::fabs(dense / r.dense_gb - 1.0) < 0.02);
    CHECK(std::fabs(csr / r.csr_gb - 1.0) < 0.02);
  }
}

TEST_CASE("sellpack encodes the all-zero matrix as one run per stream") {
  CsrMatrix a(8, 8);
  SellpackImage img = sellpack_encode(a, stream_cfg(8, 4, 4));
  CHECK(img.chunk_count() == 2);
  CHECK(img.worker_rows == 2);
  for (std::uint32_t c = 0; c < 2; ++c) {
    CHECK(img.stream_len[c] == 1);
    for (std::uint32_t w = 0; w < 2; ++w) {
      auto pairs = stream_pairs(img, c, w);
      REQUIRE(pairs.size() == 1);
      CHECK(pairs[0].first == kEndRowWord);
      CHECK(pairs[0].second == 4);
    }
  }
  CHECK(sellpack_decode(img) == a);
}

TEST_CASE("sellpack encodes the 4x4 identity as derived by hand") {
  DenseMatrix m(4, 4);
  for (int i = 0; i < 4; ++i) m.at(i, i) = 1.0f;
  CsrMatrix a = csr_from_dense(m);
  SellpackImage img = sellpack_encode(a, stream_cfg(4, 4, 2));
  REQUIRE(img.chunk_count() == 1);
  REQUIRE(img.worker_rows == 2);
  CHECK(img.stream_len[0] == 5);

  const Word one = float_to_word(1.0f);
  auto w0 = stream_pairs(img, 0, 0);
  const std::vector<std::pair<Word, Word>> expect0 = {
      {0, one}, {kEndRowWord, 1}, {1, one}, {kEndRowWord, 3},
      {kNullWord, kNullWord}};
  CHECK(w0 == expect0);

  auto w1 = stream_pairs(img, 0, 1);
  const std::vector<std::pair<Word, Word>> expect1 = {
      {kEndRowWord, 2}, {2, one}, {kEndRowWord, 1}, {3, one},
      {kEndRowWord, 1}};
  CHECK(w1 == expect1);

  CHECK(sellpack_decode(img) == a);
}

TEST_CASE("sellpack round trip over random matrices and configs") {
  for (std::uint32_t n : {17u, 64u, 100u, 256u}) {
    for (std::uint32_t myc : {4u, 16u, 64u}) {
      for (std::uint32_t mvpp : {3u, 16u, 64u}) {
        for (double density : {0.01, 0.1, 0.5}) {
          CsrMatrix a = random_sparse(n, density, 7 * n + myc + mvpp);
          SellpackImage img = sellpack_encode(a, stream_cfg(n, myc, mvpp));
          CHECK(sellpack_decode(img) == a);
        }
      }
    }
  }
}

TEST_CASE("sellpack round trip on the spec-sized instance") {
  CsrMatrix a = random_sparse(256, 0.05, 99);
  SellpackImage img = sellpack_encode(a, stream_cfg(256, 64, 16));
  CHECK(sellpack_decode(img) == a);
}

TEST_CASE("sellpack decode flags corrupted termination counts") {
  CsrMatrix a = random_sparse(32, 0.1, 5);
  SellpackImage img = sellpack_encode(a, stream_cfg(32, 8, 8));
  // Shrink the final END_ROW run of the first stream by one.
  const std::uint64_t off = img.stream_offset(0, 0);
  for (std::uint32_t p = img.stream_len[0]; p-- > 0;) {
    if (img.data[off + 2 * p] == kEndRowWord) {
      img.data[off + 2 * p + 1] -= 1;
      break;
    }
  }
  CHECK_THROWS_AS((void)sellpack_decode(img), FormatError);
}

TEST_CASE("sellpack empty matrix") {
  CsrMatrix a(0, 0);
  SellpackImage img = sellpack_encode(a, stream_cfg(0, 4, 4));
  CHECK(img.chunk_count() == 0);
  CsrMatrix back = sellpack_decode(img);
  CHECK(back.n_rows == 0);
  CHECK(back.nnz() == 0);
}

TEST_CASE("sellpack encode rejects non power-of-two chunks") {
  CsrMatrix a(8, 8);
  CHECK_THROWS_AS((void)sellpack_encode(a, stream_cfg(8, 3, 4)), Error);
}

TEST_CASE("stream stats: census identity and dual-route equality") {
  for (double density : {0.002, 0.05, 0.3}) {
    CsrMatrix a = random_sparse(128, density, 21);
    KernelConfig cfg = stream_cfg(128, 16, 8);
    SellpackImage img = sellpack_encode(a, cfg);
    StreamStats from_img = sellpack_stream_stats(img);
    StreamStats counted = sellpack_stream_stats(a, cfg);
    CHECK(from_img.total_pairs ==
          from_img.nnz_pairs + from_img.endrow_pairs + from_img.null_pairs);
    CHECK(from_img.nnz_pairs == a.nnz());
    CHECK(counted.total_pairs == from_img.total_pairs);
    CHECK(counted.nnz_pairs == from_img.nnz_pairs);
    CHECK(counted.endrow_pairs == from_img.endrow_pairs);
    CHECK(counted.null_pairs == from_img.null_pairs);
    CHECK(counted.transfer_pairs(1) == counted.total_pairs);
    CHECK(counted.transfer_pairs(128) >= counted.total_pairs);
  }
}

TEST_CASE("stream stats: all-zero matrix has no nonzero pairs") {
  CsrMatrix a(64, 64);
  StreamStats st = sellpack_stream_stats(a, stream_cfg(64, 16, 16));
  CHECK(st.nnz_pairs == 0);
  CHECK(st.total_pairs == st.endrow_pairs + st.null_pairs);
}

TEST_CASE("footprint monotonicity in max_y_chunk") {
  CsrMatrix a = random_sparse(256, 0.02, 3);
  std::uint64_t prev = 0;
  bool first = true;
  for (std::uint32_t myc : {256u, 128u, 64u, 32u, 16u, 8u}) {
    StreamStats st = sellpack_stream_stats(a, stream_cfg(256, myc, 16));
    if (!first) CHECK(st.total_pairs >= prev);
    prev = st.total_pairs;
    first = false;
  }
}

TEST_CASE("footprint ratio floor and density trend") {
  double prev_ratio = 0.0;
  bool first = true;
  for (double density : {1e-3, 1e-2, 0.05, 0.1, 0.3}) {
    CsrMatrix a = random_sparse(1024, density, 17);
    StreamStats st = sellpack_stream_stats(a, stream_cfg(1024, 64, 16));
    const double ratio = double(st.total_pairs) / double(a.nnz());
    CHECK(ratio >= 1.0);
    if (!first)
      CHECK(ratio <= prev_ratio + 1.0 / double(a.nnz()));  // single-pair noise
    prev_ratio = ratio;
    first = false;
  }
}

TEST_CASE("coo tiles of the identity") {
  DenseMatrix m(128, 128);
  for (int i = 0; i < 128; ++i) m.at(i, i) = 1.0f;
  CsrMatrix a = csr_from_dense(m);
  KernelConfig cfg;
  cfg.n = 128;
  cfg.d = 1;
  cfg.local_width = 64;
  cfg.local_height = 64;
  cfg.max_nonzeros = 512;
  CooTileSet ts = coo_tiles(a, cfg);
  REQUIRE(ts.tile_rows == 2);
  REQUIRE(ts.tile_cols == 2);
  CHECK(ts.at(0, 0).count == 64);
  CHECK(ts.at(1, 1).count == 64);
  CHECK(ts.at(0, 1).count == 0);
  CHECK(ts.at(1, 0).count == 0);
  for (std::uint32_t k = 64; k < 512; ++k) {
    CHECK(ts.at(0, 0).row_idx[k] == kNullWord);
    CHECK(ts.at(0, 0).values[k] == kNullWord);
  }
  CHECK(coo_tiles_reassemble(ts) == a);
}

TEST_CASE("coo tiles reassemble a seeded matrix") {
  CsrMatrix a = random_sparse(256, 0.02, 31);
  KernelConfig cfg;
  cfg.n = 256;
  cfg.d = 1;
  cfg.local_width = 64;
  cfg.local_height = 64;
  cfg.max_nonzeros = 512;
  CooTileSet ts = coo_tiles(a, cfg);
  CHECK(coo_tiles_reassemble(ts) == a);

  // Tiles partition the nonzero set: disjoint and exhaustive.
  std::uint64_t total = 0;
  for (const auto& t : ts.tiles) total += t.count;
  CHECK(total == a.nnz());
}

TEST_CASE("coo tile overflow is a hard error naming the tile") {
  DenseMatrix m(64, 64);
  for (auto& v : m.data) v = 1.0f;
  CsrMatrix a = csr_from_dense(m);
  KernelConfig cfg;
  cfg.n = 64;
  cfg.d = 1;
  cfg.local_width = 64;
  cfg.local_height = 64;
  cfg.max_nonzeros = 1024;
  try {
    coo_tiles(a, cfg);
    FAIL("expected overflow");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("(0, 0)") != std::string::npos);
    CHECK(std::string(e.what()).find("1024") != std::string::npos);
  }
}

TEST_CASE("matrix market round trip") {
  CsrMatrix a = random_sparse(40, 0.1, 13);
  std::stringstream ss;
  write_matrix_market(ss, a);
  CsrMatrix back = read_matrix_market(ss);
  CHECK(back.n_rows == a.n_rows);
  CHECK(back.n_cols == a.n_cols);
  CHECK(back.col_idx == a.col_idx);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(back.values[i] == doctest::Approx(a.values[i]).epsilon(1e-6));
}

TEST_CASE("matrix market rejects foreign headers") {
  std::stringstream ss("%%MatrixMarket matrix array real general\n2 2\n");
  CHECK_THROWS_AS((void)read_matrix_market(ss), FormatError);
  std::stringstream ss2("not a matrix\n");
  CHECK_THROWS_AS((void)read_matrix_market(ss2), FormatError);
}
