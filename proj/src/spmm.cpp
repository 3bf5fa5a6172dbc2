#include "waferflow/spmm.hpp"

#include <algorithm>
#include <cstring>

namespace waferflow {

namespace {

// Pre-filters the single host stream: in-window pairs go east to the
// worker row as (localized 16-bit index, value); everything past the
// window, END_ROW included, goes south to the next router. The first
// past-window index of each source row emits one DONE east.
class RouterV1 final : public Program {
 public:
  RouterV1(std::uint32_t first, std::uint32_t last, bool from_host,
           bool has_south)
      : first_(first), last_(last), has_south_(has_south) {
    port_mask = std::uint8_t(1u << (from_host ? kWest : kNorth));
  }

  const char* name() const override { return "recv_a_router"; }
  std::uint64_t memory_bytes() const override { return 16; }

  void on_frame(PeContext& ctx, Port, const Word* w, int) override {
    const Word col = w[0];
    if (col > last_) {
      if (!row_end_) {
        ctx.emit(kEast, kDoneToken, WaveletTag::Sentinel);
        row_end_ = true;
      }
      if (col == kEndRowWord) row_end_ = false;
      if (has_south_) ctx.emit_pair(kSouth, col, w[1]);
    } else if (col >= first_) {
      ctx.emit_pair(kEast, col - first_, w[1]);
    } else {
      throw SimError("spmm router: column index below its window");
    }
  }

 private:
  std::uint32_t first_, last_;
  bool has_south_;
  bool row_end_ = false;
};

// Consumes one pre-encoded stream: NULL pads are dropped, END_ROW becomes
// a (DONE, run-length) pair east, in-window pairs are localized east.
class RouterV2 final : public Program {
 public:
  RouterV2(std::uint32_t first, std::uint32_t last)
      : first_(first), last_(last) {
    port_mask = 1u << kWest;
  }

  const char* name() const override { return "recv_stream_router"; }
  std::uint64_t memory_bytes() const override { return 16; }

  void on_frame(PeContext& ctx, Port, const Word* w, int) override {
    const Word col = w[0];
    if (col == kNullWord) return;
    if (col == kEndRowWord) {
      // DONE rides with the termination run length.
      ctx.emit_pair(kEast, kDoneToken, w[1], WaveletTag::Sentinel);
      return;
    }
    if (col < first_ || col > last_)
      throw SimError("spmm router: stream index outside its window");
    ctx.emit_pair(kEast, col - first_, w[1]);
  }

 private:
  std::uint32_t first_, last_;
};

// Multiply-accumulate worker. Holds a slice of H and a chunk-sized partial
// output buffer; forwards the incoming stream along the row; reduces the
// buffer north-to-south at every chunk boundary.
class SpmmWorker final : public Program {
 public:
  SpmmWorker(std::uint32_t mvpp, std::uint32_t mcpp, bool top_row,
             bool last_in_row, std::vector<std::uint32_t> rows,
             std::vector<float> x, std::uint32_t myc)
      : mvpp_(mvpp),
        mcpp_(mcpp),
        top_row_(top_row),
        last_in_row_(last_in_row),
        chunk_rows_(std::move(rows)),
        x_(std::move(x)),
        y_acc_(std::size_t(myc) * mcpp, 0.0f) {
    port_mask = 1u << kWest;
  }

  const char* name() const override { return "recv_a_worker"; }
  std::uint64_t memory_bytes() const override {
    return 4ull * (x_.size() + y_acc_.size());
  }

  void on_frame(PeContext& ctx, Port port, const Word* w, int len) override {
    if (port == kNorth) {
      // Reduce: add the incoming partial to ours and pass it south.
      const float sum = word_to_float(w[0]) + y_acc_[reduce_pos_];
      ctx.emit(kSouth, float_to_word(sum), WaveletTag::Value);
      if (++reduce_pos_ == reduce_total_) finish_chunk();
      return;
    }
    if (w[0] == kDoneToken) {
      if (!last_in_row_) {
        if (len == 2)
          ctx.emit_pair(kEast, w[0], w[1], WaveletTag::Sentinel);
        else
          ctx.emit(kEast, w[0], WaveletTag::Sentinel);
      }
      const std::uint32_t run = len == 2 ? w[1] : 1;
      done_count_ += run;
      const std::uint32_t rows = chunk_rows_[chunk_];
      if (done_count_ > rows || run == 0)
        throw SimError("spmm worker: termination run overflows the chunk");
      if (done_count_ == rows) {
        if (top_row_) {
          // Head of the reduction: stream the whole buffer south.
          for (std::uint32_t i = 0; i < rows * mcpp_; ++i)
            ctx.emit(kSouth, float_to_word(y_acc_[i]), WaveletTag::Value);
          finish_chunk();
        } else {
          reduce_total_ = rows * mcpp_;
          reduce_pos_ = 0;
          port_mask = 1u << kNorth;  // chunk k+1 waits for the reduction
        }
      }
      return;
    }
    const std::uint32_t idx = w[0];
    if (idx >= mvpp_)
      throw SimError("spmm worker: localized index out of range");
    if (!last_in_row_) ctx.emit_pair(kEast, w[0], w[1]);
    const float val = word_to_float(w[1]);
    float* y = &y_acc_[std::size_t(done_count_) * mcpp_];
    const float* x = &x_[std::size_t(idx) * mcpp_];
    for (std::uint32_t c = 0; c < mcpp_; ++c) y[c] += val * x[c];
    ctx.count_fmacs(mcpp_);
  }

 private:
  void finish_chunk() {
    std::fill(y_acc_.begin(), y_acc_.end(), 0.0f);
    ++chunk_;
    done_count_ = 0;
    reduce_pos_ = reduce_total_ = 0;
    port_mask = 1u << kWest;
  }

  std::uint32_t mvpp_, mcpp_;
  bool top_row_, last_in_row_;
  std::vector<std::uint32_t> chunk_rows_;
  std::vector<float> x_;
  std::vector<float> y_acc_;
  std::uint32_t done_count_ = 0;
  std::uint32_t chunk_ = 0;
  std::uint32_t reduce_pos_ = 0;
  std::uint32_t reduce_total_ = 0;
};

// Buffers one chunk of reduced output and streams it east toward the host,
// passing along whatever the accumulators to its west drain.
class SpmmAccumulator final : public Program {
 public:
  SpmmAccumulator(std::vector<std::uint32_t> chunk_words,
                  std::uint32_t capacity)
      : chunk_words_(std::move(chunk_words)), buf_(capacity) {
    // West stays closed until our own chunk buffer has been sent, so the
    // host always sees whole buffers in east-to-west order no matter how
    // the columns' reductions are skewed in time.
    port_mask = 1u << kNorth;
  }

  const char* name() const override { return "accumulate_stream"; }
  std::uint64_t memory_bytes() const override { return 4ull * buf_.size(); }

  void on_frame(PeContext& ctx, Port port, const Word* w, int) override {
    if (port == kWest) {
      ctx.emit(kEast, w[0], WaveletTag::Value);
      return;
    }
    buf_[fill_++] = w[0];
    if (fill_ == 1) port_mask = 1u << kNorth;  // next chunk begins
    if (fill_ == chunk_words_[chunk_]) {
      ctx.emit_slab(kEast, buf_.data(), fill_, WaveletTag::Value);
      fill_ = 0;
      ++chunk_;
      port_mask = (1u << kWest) | (1u << kNorth);
    }
  }

 private:
  std::vector<std::uint32_t> chunk_words_;
  std::vector<Word> buf_;
  std::uint32_t fill_ = 0;
  std::uint32_t chunk_ = 0;
};

// One accumulator in a V3 row: captures the first reduction stream that
// reaches it (its chunk), then passes every later stream south.
class SpmmAccumulatorV3 final : public Program {
 public:
  explicit SpmmAccumulatorV3(std::uint32_t expect) : buf_(expect) {
    port_mask = 1u << kNorth;  // west opens once our chunk has drained
  }

  const char* name() const override { return "accumulate_chunk"; }
  std::uint64_t memory_bytes() const override { return 4ull * buf_.size(); }

  void on_frame(PeContext& ctx, Port port, const Word* w, int) override {
    if (port == kWest) {
      ctx.emit(kEast, w[0], WaveletTag::Value);
      return;
    }
    if (!full_) {
      buf_[fill_++] = w[0];
      if (fill_ == buf_.size()) {
        ctx.emit_slab(kEast, buf_.data(), fill_, WaveletTag::Value);
        full_ = true;
        port_mask = (1u << kWest) | (1u << kNorth);
      }
    } else {
      ctx.emit(kSouth, w[0], WaveletTag::Value);
    }
  }

 private:
  std::vector<Word> buf_;
  std::uint32_t fill_ = 0;
  bool full_ = false;
};

std::vector<std::uint32_t> chunk_rows_schedule(const KernelConfig& cfg) {
  std::vector<std::uint32_t> rows(cfg.chunk_count());
  for (std::uint32_t c = 0; c < rows.size(); ++c)
    rows[c] = cfg.rows_in_chunk(c);
  return rows;
}

}  // namespace

const char* to_string(SpmmVariant v) {
  switch (v) {
    case SpmmVariant::kV1:
      return "v1";
    case SpmmVariant::kV2:
      return "v2";
    case SpmmVariant::kV3:
      return "v3";
  }
  return "?";
}

SpmmVariant spmm_variant_from_string(const std::string& s) {
  if (s == "v1" || s == "V1") return SpmmVariant::kV1;
  if (s == "v2" || s == "V2") return SpmmVariant::kV2;
  if (s == "v3" || s == "V3") return SpmmVariant::kV3;
  throw Error("unknown spmm variant '" + s + "' (want v1, v2 or v3)");
}

SpmmGeometry spmm_geometry(SpmmVariant v, const KernelConfig& cfg,
                           std::uint32_t panel_cols) {
  SpmmGeometry g;
  g.worker_rows = (panel_cols + cfg.max_v_per_pe - 1) / cfg.max_v_per_pe;
  g.worker_cols = cfg.worker_cols();
  g.acc_rows = v == SpmmVariant::kV3 ? cfg.chunk_count() : 1;
  g.grid_rows = g.worker_rows + g.acc_rows;
  g.grid_cols = 1 + g.worker_cols;
  return g;
}

Placement build_spmm_placement(SpmmVariant v, const KernelConfig& cfg,
                               const CsrMatrix& a_panel, const DenseMatrix& h,
                               std::uint32_t h_row_offset) {
  cfg.validate_spmm();
  const SpmmGeometry g = spmm_geometry(v, cfg, a_panel.n_cols);
  const std::uint32_t mvpp = cfg.max_v_per_pe;
  const std::uint32_t mcpp = cfg.max_col_per_pe;

  Placement p;
  p.rows = g.grid_rows;
  p.cols = g.grid_cols;

  for (std::uint32_t r = 0; r < g.worker_rows; ++r) {
    const std::uint32_t first = r * mvpp;
    const std::uint32_t last = first + mvpp - 1;
    if (v == SpmmVariant::kV1)
      p.place(r, 0,
              std::make_unique<RouterV1>(first, last, r == 0,
                                         r + 1 < g.worker_rows));
    else
      p.place(r, 0, std::make_unique<RouterV2>(first, last));
  }

  const auto schedule = chunk_rows_schedule(cfg);
  for (std::uint32_t r = 0; r < g.worker_rows; ++r) {
    for (std::uint32_t c = 0; c < g.worker_cols; ++c) {
      std::vector<float> x(std::size_t(mvpp) * mcpp, 0.0f);
      for (std::uint32_t li = 0; li < mvpp; ++li) {
        const std::uint64_t hr =
            std::uint64_t(h_row_offset) + std::uint64_t(r) * mvpp + li;
        if (hr >= h_row_offset + a_panel.n_cols || hr >= h.n_rows) break;
        for (std::uint32_t cc = 0; cc < mcpp; ++cc)
          x[std::size_t(li) * mcpp + cc] =
              h.at(std::uint32_t(hr), c * mcpp + cc);
      }
      p.place(r, 1 + c,
              std::make_unique<SpmmWorker>(
                  mvpp, mcpp, r == 0, c + 1 == g.worker_cols, schedule,
                  std::move(x), cfg.max_y_chunk));
    }
  }

  if (v == SpmmVariant::kV3) {
    for (std::uint32_t k = 0; k < g.acc_rows; ++k)
      for (std::uint32_t c = 0; c < g.worker_cols; ++c)
        p.place(g.worker_rows + k, 1 + c,
                std::make_unique<SpmmAccumulatorV3>(schedule[k] * mcpp));
  } else {
    std::vector<std::uint32_t> words(schedule.size());
    for (std::size_t i = 0; i < schedule.size(); ++i)
      words[i] = schedule[i] * mcpp;
    for (std::uint32_t c = 0; c < g.worker_cols; ++c)
      p.place(g.worker_rows, 1 + c,
              std::make_unique<SpmmAccumulator>(words,
                                                cfg.max_y_chunk * mcpp));
  }
  return p;
}

HostScript build_spmm_script(SpmmVariant v, const KernelConfig& cfg,
                             const CsrMatrix& a_panel) {
  const SpmmGeometry g = spmm_geometry(v, cfg, a_panel.n_cols);
  const std::uint32_t chunks = cfg.chunk_count();
  HostScript script;

  SellpackImage img;
  if (v != SpmmVariant::kV1) img = sellpack_encode(a_panel, cfg);
  std::uint64_t img_off = 0;

  for (std::uint32_t c = 0; c < chunks; ++c) {
    const std::uint32_t rows = cfg.rows_in_chunk(c);
    const std::uint32_t row0 = c * cfg.max_y_chunk;
    if (v == SpmmVariant::kV1) {
      // Raw CSR pairs with an END_ROW pair closing every source row.
      CopyOp::Stream st;
      st.row = 0;
      st.pair_framed = true;
      for (std::uint32_t r = row0; r < row0 + rows; ++r) {
        for (std::uint64_t k = a_panel.row_ptr[r]; k < a_panel.row_ptr[r + 1];
             ++k) {
          st.words.push_back(a_panel.col_idx[k]);
          st.words.push_back(float_to_word(a_panel.values[k]));
        }
        st.words.push_back(kEndRowWord);
        st.words.push_back(kEndRowWord);
      }
      script.push_back(CopyOp::h2d({std::move(st)}, true));
    } else {
      std::vector<CopyOp::Stream> streams(g.worker_rows);
      const std::uint64_t len = img.stream_len[c];
      for (std::uint32_t w = 0; w < g.worker_rows; ++w) {
        streams[w].row = w;
        streams[w].pair_framed = true;
        streams[w].words.assign(img.data.begin() + img_off,
                                img.data.begin() + img_off + len * 2);
        img_off += len * 2;
      }
      script.push_back(CopyOp::h2d(std::move(streams), true));
    }
    if (v != SpmmVariant::kV3) {
      script.push_back(CopyOp::d2h(
          {CopyOp::Drain{g.worker_rows, std::uint64_t(rows) * cfg.d}}, true));
    }
  }
  if (v == SpmmVariant::kV3) {
    std::vector<CopyOp::Drain> drains(chunks);
    for (std::uint32_t k = 0; k < chunks; ++k)
      drains[k] = CopyOp::Drain{g.worker_rows + k,
                                std::uint64_t(cfg.rows_in_chunk(k)) * cfg.d};
    script.push_back(CopyOp::d2h(std::move(drains), true));
  }
  return script;
}

namespace {

// Unscrambles one drained accumulator row: buffers arrive east-most
// worker column first, each in row-major (row, mcpp-column) order.
void decode_drain(const std::vector<Word>& words, std::uint32_t chunk_row0,
                  std::uint32_t rows, const KernelConfig& cfg,
                  DenseMatrix& y) {
  const std::uint32_t mcpp = cfg.max_col_per_pe;
  const std::uint32_t wc = cfg.worker_cols();
  const std::uint64_t per_acc = std::uint64_t(rows) * mcpp;
  if (words.size() != per_acc * wc)
    throw SimError("spmm: drained word count mismatch");
  std::uint64_t pos = 0;
  for (std::uint32_t b = 0; b < wc; ++b) {
    const std::uint32_t worker_col = wc - 1 - b;
    for (std::uint64_t s = 0; s < per_acc; ++s, ++pos) {
      const std::uint32_t r = std::uint32_t(s / mcpp);
      const std::uint32_t cc = std::uint32_t(s % mcpp);
      y.at(chunk_row0 + r, worker_col * mcpp + cc) +=
          word_to_float(words[pos]);
    }
  }
}

void merge_report(SimReport& total, const SimReport& part) {
  total.total_cycles += part.total_cycles;
  total.h2d_words += part.h2d_words;
  total.d2h_words += part.d2h_words;
  total.signal_words += part.signal_words;
  total.stream_in_cycles += part.stream_in_cycles;
  total.compute_drain_cycles += part.compute_drain_cycles;
  total.stream_out_cycles += part.stream_out_cycles;
  total.fmacs += part.fmacs;
  total.words_enqueued += part.words_enqueued;
  total.words_dequeued += part.words_dequeued;
  total.peak_pe_memory_bytes =
      std::max(total.peak_pe_memory_bytes, part.peak_pe_memory_bytes);
}

}  // namespace

SpmmRun spmm(SpmmVariant v, const CsrMatrix& a, const DenseMatrix& h,
             const KernelConfig& cfg, const FabricParams& fparams,
             const TraceFn& trace) {
  cfg.validate_spmm();
  if (a.n_rows != cfg.n || a.n_cols != cfg.n)
    throw Error("spmm: A must be n x n with n = cfg.n");
  if (h.n_rows != cfg.n || h.n_cols != cfg.d)
    throw Error("spmm: H must be n x d");

  FabricParams fp = fparams;
  fp.io_channels = cfg.io_channels;

  SpmmRun run;
  run.y = DenseMatrix(cfg.n, cfg.d);
  run.panels = cfg.column_panels();

  for (std::uint32_t pnl = 0; pnl < run.panels; ++pnl) {
    const std::uint32_t col0 = pnl * cfg.max_rows();
    const std::uint32_t col1 =
        std::min<std::uint32_t>(cfg.n, col0 + cfg.max_rows());
    CsrMatrix sliced;
    const CsrMatrix* panel = &a;
    if (run.panels > 1) {
      sliced = csr_slice_columns(a, col0, col1);
      panel = &sliced;
    }

    const SpmmGeometry g = spmm_geometry(v, cfg, panel->n_cols);
    if (v == SpmmVariant::kV3 && g.grid_rows > fp.max_grid_rows)
      throw PlacementError(
          "spmm v3: " + std::to_string(g.acc_rows) +
          " accumulator rows push the grid to " +
          std::to_string(g.grid_rows) + " rows (cap " +
          std::to_string(fp.max_grid_rows) + "); raise max_y_chunk");

    Placement placement = build_spmm_placement(v, cfg, *panel, h, col0);
    HostScript script = build_spmm_script(v, cfg, *panel);
    Fabric fabric(placement.rows, placement.cols, fp);
    fabric.load_program(std::move(placement));
    if (trace) fabric.set_trace(trace);
    SimReport rep = fabric.run(script);

    if (v == SpmmVariant::kV3) {
      const CopyOp& op = script.back();
      for (std::uint32_t k = 0; k < cfg.chunk_count(); ++k)
        decode_drain(op.received[k], k * cfg.max_y_chunk,
                     cfg.rows_in_chunk(k), cfg, run.y);
    } else {
      for (std::uint32_t c = 0; c < cfg.chunk_count(); ++c) {
        const CopyOp& op = script[2 * c + 1];
        decode_drain(op.received[0], c * cfg.max_y_chunk,
                     cfg.rows_in_chunk(c), cfg, run.y);
      }
    }
    merge_report(run.report, rep);
    run.panel_reports.push_back(std::move(rep));
  }
  return run;
}

}  // namespace waferflow
