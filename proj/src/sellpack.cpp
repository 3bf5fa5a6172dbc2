#include "waferflow/sellpack.hpp"

#include <algorithm>
#include <string>

namespace waferflow {

namespace {

void check_encode_cfg(const KernelConfig& cfg) {
  if (!is_pow2(cfg.max_y_chunk))
    throw Error("sellpack: max_y_chunk (" + std::to_string(cfg.max_y_chunk) +
                ") must be a power of two");
  if (cfg.max_v_per_pe == 0 || cfg.max_v_per_pe > 65535)
    throw Error("sellpack: max_v_per_pe must be in [1, 65535]");
}

}  // namespace

std::uint64_t SellpackImage::stream_offset(std::uint32_t chunk,
                                           std::uint32_t w) const {
  std::uint64_t off = 0;
  for (std::uint32_t c = 0; c < chunk; ++c)
    off += std::uint64_t(stream_len[c]) * worker_rows * 2;
  return off + std::uint64_t(w) * stream_len[chunk] * 2;
}

SellpackImage sellpack_encode(const CsrMatrix& a, const KernelConfig& cfg) {
  check_encode_cfg(cfg);
  a.validate();

  const std::uint32_t myc = cfg.max_y_chunk;
  const std::uint32_t mvpp = cfg.max_v_per_pe;
  const std::uint32_t worker_rows =
      a.n_cols == 0 ? 0 : (a.n_cols + mvpp - 1) / mvpp;

  SellpackImage img;
  img.n_rows = a.n_rows;
  img.n_cols = a.n_cols;
  img.max_y_chunk = myc;
  img.max_v_per_pe = mvpp;
  img.worker_rows = worker_rows;

  const std::uint32_t chunks = a.n_rows == 0 ? 0 : (a.n_rows + myc - 1) / myc;
  std::vector<std::vector<Word>> streams(worker_rows);

  for (std::uint32_t c = 0; c < chunks; ++c) {
    const std::uint32_t row0 = c * myc;
    const std::uint32_t rows =
        std::min<std::uint32_t>(myc, a.n_rows - row0);
    for (auto& s : streams) s.clear();
    // Rows terminated so far per stream; the gap to the current row is the
    // pending END_ROW run.
    std::vector<std::uint32_t> flushed(worker_rows, 0);

    for (std::uint32_t r = 0; r < rows; ++r) {
      std::uint64_t k = a.row_ptr[row0 + r];
      const std::uint64_t k_end = a.row_ptr[row0 + r + 1];
      while (k < k_end) {
        const std::uint32_t w = a.col_idx[k] / mvpp;
        auto& s = streams[w];
        if (flushed[w] < r) {
          s.push_back(kEndRowWord);
          s.push_back(r - flushed[w]);
        }
        flushed[w] = r;
        while (k < k_end && a.col_idx[k] / mvpp == w) {
          s.push_back(a.col_idx[k]);
          s.push_back(float_to_word(a.values[k]));
          ++k;
        }
      }
    }
    std::uint32_t max_pairs = 0;
    for (std::uint32_t w = 0; w < worker_rows; ++w) {
      auto& s = streams[w];
      // Close out the chunk: every stream terminates all `rows` rows.
      s.push_back(kEndRowWord);
      s.push_back(rows - flushed[w]);
      max_pairs = std::max(max_pairs, std::uint32_t(s.size() / 2));
    }
    img.stream_len.push_back(max_pairs);
    for (std::uint32_t w = 0; w < worker_rows; ++w) {
      auto& s = streams[w];
      img.data.insert(img.data.end(), s.begin(), s.end());
      for (std::uint32_t p = std::uint32_t(s.size() / 2); p < max_pairs; ++p) {
        img.data.push_back(kNullWord);
        img.data.push_back(kNullWord);
      }
    }
  }
  return img;
}

CsrMatrix sellpack_decode(const SellpackImage& img) {
  std::vector<std::uint64_t> rows;
  std::vector<std::uint32_t> cols;
  std::vector<float> vals;

  std::uint64_t off = 0;
  for (std::uint32_t c = 0; c < img.chunk_count(); ++c) {
    const std::uint32_t chunk_rows = img.rows_in_chunk(c);
    const std::uint64_t base = std::uint64_t(c) * img.max_y_chunk;
    for (std::uint32_t w = 0; w < img.worker_rows; ++w) {
      std::uint64_t terms = 0;
      std::uint64_t cursor = base;
      for (std::uint32_t p = 0; p < img.stream_len[c]; ++p) {
        const Word idx = img.data[off + 2 * p];
        const Word val = img.data[off + 2 * p + 1];
        if (idx == kNullWord) continue;
        if (idx == kEndRowWord) {
          if (val == 0 || terms + val > chunk_rows)
            throw FormatError("sellpack: bad END_ROW run in chunk " +
                              std::to_string(c) + " stream " +
                              std::to_string(w));
          terms += val;
          cursor = base + terms;
          continue;
        }
        if (idx / img.max_v_per_pe != w)
          throw FormatError("sellpack: index outside stream window");
        if (terms >= chunk_rows)
          throw FormatError("sellpack: nonzero after final termination");
        rows.push_back(cursor);
        cols.push_back(idx);
        vals.push_back(word_to_float(val));
      }
      if (terms != chunk_rows)
        throw FormatError(
            "sellpack: termination count " + std::to_string(terms) +
            " != chunk rows " + std::to_string(chunk_rows) + " in chunk " +
            std::to_string(c) + " stream " + std::to_string(w));
      off += std::uint64_t(img.stream_len[c]) * 2;
    }
  }
  return csr_from_triples(img.n_rows, img.n_cols, std::move(rows),
                          std::move(cols), std::move(vals));
}

std::uint64_t StreamStats::transfer_pairs(std::uint32_t granule) const {
  if (granule == 0) throw Error("transfer_pairs: granule must be >= 1");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < chunk_stream_len.size(); ++i) {
    std::uint64_t len = chunk_stream_len[i];
    std::uint64_t padded = (len + granule - 1) / granule * granule;
    total += padded * chunk_streams[i];
  }
  return total;
}

StreamStats sellpack_stream_stats(const SellpackImage& img) {
  StreamStats st;
  st.streams_per_chunk = img.worker_rows;
  st.chunk_stream_len = img.stream_len;
  st.chunk_streams.assign(img.stream_len.size(), img.worker_rows);
  std::uint64_t off = 0;
  for (std::uint32_t c = 0; c < img.chunk_count(); ++c) {
    const std::uint64_t pairs =
        std::uint64_t(img.stream_len[c]) * img.worker_rows;
    for (std::uint64_t p = 0; p < pairs; ++p) {
      const Word idx = img.data[off + 2 * p];
      if (idx == kNullWord)
        ++st.null_pairs;
      else if (idx == kEndRowWord)
        ++st.endrow_pairs;
      else
        ++st.nnz_pairs;
    }
    off += pairs * 2;
  }
  st.total_pairs = st.nnz_pairs + st.endrow_pairs + st.null_pairs;
  return st;
}

StreamStats sellpack_stream_stats(const CsrMatrix& a,
                                  const KernelConfig& cfg) {
  check_encode_cfg(cfg);
  const std::uint32_t myc = cfg.max_y_chunk;
  const std::uint32_t mvpp = cfg.max_v_per_pe;
  const std::uint32_t cap = kMaxRowsCap;
  const std::uint32_t windows_per_panel = cap / mvpp;

  const std::uint32_t total_windows =
      a.n_cols == 0 ? 0 : (a.n_cols + mvpp - 1) / mvpp;
  const std::uint32_t panels =
      total_windows == 0
          ? 0
          : (total_windows + windows_per_panel - 1) / windows_per_panel;

  StreamStats st;
  // Uniform only when a single panel is in play; multi-panel totals keep
  // the per-panel stream count here.
  st.streams_per_chunk =
      panels <= 1 ? total_windows
                  : std::min(total_windows, windows_per_panel);

  const std::uint32_t chunks = a.n_rows == 0 ? 0 : (a.n_rows + myc - 1) / myc;
  std::vector<std::uint32_t> pairs(total_windows);
  std::vector<std::uint32_t> flushed(total_windows);

  for (std::uint32_t c = 0; c < chunks; ++c) {
    const std::uint32_t row0 = c * myc;
    const std::uint32_t rows = std::min<std::uint32_t>(myc, a.n_rows - row0);
    std::fill(pairs.begin(), pairs.end(), 0u);
    std::fill(flushed.begin(), flushed.end(), 0u);

    for (std::uint32_t r = 0; r < rows; ++r) {
      std::uint64_t k = a.row_ptr[row0 + r];
      const std::uint64_t k_end = a.row_ptr[row0 + r + 1];
      while (k < k_end) {
        const std::uint32_t w = a.col_idx[k] / mvpp;
        if (flushed[w] < r) {
          ++pairs[w];
          ++st.endrow_pairs;
        }
        flushed[w] = r;
        while (k < k_end && a.col_idx[k] / mvpp == w) {
          ++pairs[w];
          ++st.nnz_pairs;
          ++k;
        }
      }
    }
    for (std::uint32_t p = 0; p < panels; ++p) {
      const std::uint32_t w0 = p * windows_per_panel;
      const std::uint32_t w1 =
          std::min(total_windows, w0 + windows_per_panel);
      std::uint32_t max_pairs = 0;
      for (std::uint32_t w = w0; w < w1; ++w) {
        ++pairs[w];  // final END_ROW run
        ++st.endrow_pairs;
        max_pairs = std::max(max_pairs, pairs[w]);
      }
      for (std::uint32_t w = w0; w < w1; ++w)
        st.null_pairs += max_pairs - pairs[w];
      st.chunk_stream_len.push_back(max_pairs);
      st.chunk_streams.push_back(w1 - w0);
    }
  }
  st.total_pairs = st.nnz_pairs + st.endrow_pairs + st.null_pairs;
  return st;
}

}  // namespace waferflow
