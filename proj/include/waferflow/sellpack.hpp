#pragma once

#include <cstdint>
#include <vector>

#include "waferflow/config.hpp"
#include "waferflow/csr.hpp"

namespace waferflow {

// Chunked per-worker-row stream encoding of a sparse matrix.
//
// The matrix is cut into chunks of max_y_chunk consecutive rows. Within a
// chunk, worker row w owns the column window
// [w*max_v_per_pe, (w+1)*max_v_per_pe) and its stream carries that window's
// nonzeros in row order as (column index, value) pairs. A row's nonzeros
// are followed by an END_ROW pair whose value word holds, as a raw unsigned
// pattern, the run length of consecutive row terminations (empty rows
// coalesce into the run). All streams of a chunk are right-padded with
// (NULL, NULL) pairs to the chunk's longest stream.
struct SellpackImage {
  std::uint32_t n_rows = 0;
  std::uint32_t n_cols = 0;
  std::uint32_t max_y_chunk = 0;
  std::uint32_t max_v_per_pe = 0;
  std::uint32_t worker_rows = 0;          // streams per chunk
  std::vector<std::uint32_t> stream_len;  // per chunk, in pairs
  // Pairs flattened chunk-major then worker-row-major:
  // data[((c * worker_rows + w) * stream_len[c] + k) * 2 + {0,1}]
  // (stream offsets are cumulative since stream_len varies per chunk).
  std::vector<Word> data;

  std::uint32_t chunk_count() const {
    return std::uint32_t(stream_len.size());
  }

  // Offset (in words) of stream (chunk, worker_row).
  std::uint64_t stream_offset(std::uint32_t chunk, std::uint32_t w) const;

  std::uint32_t rows_in_chunk(std::uint32_t chunk) const {
    std::uint64_t base = std::uint64_t(chunk) * max_y_chunk;
    std::uint64_t rem = n_rows - base;
    return std::uint32_t(rem < max_y_chunk ? rem : max_y_chunk);
  }
};

// Encodes `a` using cfg.max_y_chunk / cfg.max_v_per_pe. The matrix may be
// rectangular (a column panel of a wider matrix); its column count must not
// exceed one pass worth of windows.
SellpackImage sellpack_encode(const CsrMatrix& a, const KernelConfig& cfg);

// Exact inverse of sellpack_encode. Throws FormatError when a stream's
// termination run lengths do not sum to the chunk's row count.
CsrMatrix sellpack_decode(const SellpackImage& img);

struct StreamStats {
  std::uint64_t total_pairs = 0;
  std::uint64_t nnz_pairs = 0;
  std::uint64_t endrow_pairs = 0;
  std::uint64_t null_pairs = 0;
  std::uint32_t streams_per_chunk = 0;
  std::vector<std::uint32_t> chunk_stream_len;  // padded length per group
  std::vector<std::uint32_t> chunk_streams;     // stream count per group

  std::uint64_t total_bytes() const { return total_pairs * 8; }

  // Pairs actually moved by streaming copies when every stream is padded
  // to a multiple of `granule` pairs (host transfers are granular; 1 means
  // no extra padding beyond the chunk max).
  std::uint64_t transfer_pairs(std::uint32_t granule) const;
  std::uint64_t transfer_bytes(std::uint32_t granule) const {
    return transfer_pairs(granule) * 8;
  }
};

// Pair census of an encoded image.
StreamStats sellpack_stream_stats(const SellpackImage& img);

// Same census computed straight from the CSR matrix without materializing
// the image. Panel splitting for matrices wider than one pass is applied
// internally; counts are summed over panels.
StreamStats sellpack_stream_stats(const CsrMatrix& a, const KernelConfig& cfg);

}  // namespace waferflow
