#include "waferflow/sddmm.hpp"

#include <algorithm>

namespace waferflow {

namespace {

// West routers and the corner: pass every host word east along the row.
class ForwardEast final : public Program {
 public:
  ForwardEast() { port_mask = 1u << kWest; }
  const char* name() const override { return "forward_east"; }
  void on_frame(PeContext& ctx, Port, const Word* w, int) override {
    ctx.emit(kEast, w[0], WaveletTag::Value);
  }
};

// North fringe: takes the first local_width words it sees each step as its
// worker column's C slice and sends them south; later words travel east to
// the routers beyond.
class SddmmNorthRouter final : public Program {
 public:
  SddmmNorthRouter(std::uint32_t capture, std::uint32_t words_per_step)
      : capture_(capture), words_per_step_(words_per_step) {
    port_mask = 1u << kWest;
  }
  const char* name() const override { return "c_router"; }
  std::uint64_t memory_bytes() const override { return 16; }

  void on_frame(PeContext& ctx, Port, const Word* w, int) override {
    if (seen_ < capture_)
      ctx.emit(kSouth, w[0], WaveletTag::Value);
    else
      ctx.emit(kEast, w[0], WaveletTag::Value);
    if (++seen_ == words_per_step_) seen_ = 0;
  }

 private:
  std::uint32_t capture_, words_per_step_;
  std::uint32_t seen_ = 0;
};

// Holds one COO tile of A. Each step it captures a B-column slice from the
// west and a C-row slice from the north (propagating both onward), then
// accumulates b[i]*c[j] into the output slot of every real tile entry.
// After the last step the buffer is scaled by A's values and streamed east,
// NULL padding included.
class SddmmWorker final : public Program {
 public:
  SddmmWorker(const CooTile& tile, std::uint32_t lh, std::uint32_t lw,
              std::uint32_t mnz, std::uint32_t d, bool last_in_row,
              bool last_in_col, bool emits_signal)
      : tile_(&tile),
        d_(d),
        last_in_row_(last_in_row),
        last_in_col_(last_in_col),
        emits_signal_(emits_signal),
        b_slab_(lh, 0.0f),
        c_slab_(lw, 0.0f),
        y_(mnz, 0.0f) {
    port_mask = (1u << kWest) | (1u << kNorth);
  }

  const char* name() const override { return "sddmm_worker"; }
  std::uint64_t memory_bytes() const override {
    // row/col/value arrays of the tile, the output buffer, both slabs
    return 4ull * (4ull * y_.size() + b_slab_.size() + c_slab_.size());
  }

  void on_frame(PeContext& ctx, Port port, const Word* w, int) override {
    if (port == kWest) {
      if (drained_) {
        // Everything from the west is now output on its way to the host.
        ctx.emit(kEast, w[0], WaveletTag::Value);
        return;
      }
      if (!last_in_row_) ctx.emit(kEast, w[0], WaveletTag::Value);
      b_slab_[b_fill_++] = word_to_float(w[0]);
      if (b_fill_ == b_slab_.size()) port_mask &= std::uint8_t(~(1u << kWest));
    } else {
      if (!last_in_col_) ctx.emit(kSouth, w[0], WaveletTag::Value);
      c_slab_[c_fill_++] = word_to_float(w[0]);
      if (c_fill_ == c_slab_.size())
        port_mask &= std::uint8_t(~(1u << kNorth));
    }
    if (b_fill_ == b_slab_.size() && c_fill_ == c_slab_.size()) step(ctx);
  }

 private:
  void step(PeContext& ctx) {
    const CooTile& t = *tile_;
    for (std::uint32_t k = 0; k < t.count; ++k)
      y_[k] += b_slab_[t.row_idx[k]] * c_slab_[t.col_idx[k]];
    ctx.count_fmacs(t.count);
    b_fill_ = c_fill_ = 0;
    port_mask = (1u << kWest) | (1u << kNorth);
    if (++step_count_ < d_) {
      if (emits_signal_) ctx.emit(kEast, 1u, WaveletTag::Sentinel);
      return;
    }
    // Hadamard with A's stored values, then the padded drain.
    for (std::uint32_t k = 0; k < t.count; ++k)
      y_[k] *= word_to_float(t.values[k]);
    ctx.charge_compute(t.count);
    if (emits_signal_) ctx.emit(kEast, 1u, WaveletTag::Sentinel);
    for (std::size_t k = 0; k < y_.size(); ++k)
      ctx.emit(kEast, k < t.count ? float_to_word(y_[k]) : kNullWord,
               WaveletTag::Value);
    drained_ = true;
    port_mask = 1u << kWest;  // afterwards only forward drains from the west
  }

  const CooTile* tile_;
  std::uint32_t d_;
  bool last_in_row_, last_in_col_, emits_signal_;
  std::vector<float> b_slab_, c_slab_;
  std::vector<float> y_;
  std::uint32_t b_fill_ = 0, c_fill_ = 0;
  std::uint32_t step_count_ = 0;
  bool drained_ = false;
};

}  // namespace

SddmmGeometry sddmm_geometry(const KernelConfig& cfg) {
  SddmmGeometry g;
  g.tile_rows = cfg.n / cfg.local_height;
  g.tile_cols = cfg.n / cfg.local_width;
  g.grid_rows = g.tile_rows + 1;
  g.grid_cols = g.tile_cols + 1;
  return g;
}

Placement build_sddmm_placement(const KernelConfig& cfg,
                                const CooTileSet& tiles) {
  cfg.validate_sddmm();
  const SddmmGeometry g = sddmm_geometry(cfg);
  Placement p;
  p.rows = g.grid_rows;
  p.cols = g.grid_cols;

  p.place(0, 0, std::make_unique<ForwardEast>());
  for (std::uint32_t c = 1; c <= g.tile_cols; ++c)
    p.place(0, c,
            std::make_unique<SddmmNorthRouter>(
                cfg.local_width, cfg.n - (c - 1) * cfg.local_width));
  for (std::uint32_t r = 1; r <= g.tile_rows; ++r)
    p.place(r, 0, std::make_unique<ForwardEast>());

  for (std::uint32_t r = 1; r <= g.tile_rows; ++r)
    for (std::uint32_t c = 1; c <= g.tile_cols; ++c)
      p.place(r, c,
              std::make_unique<SddmmWorker>(
                  tiles.at(r - 1, c - 1), cfg.local_height, cfg.local_width,
                  cfg.max_nonzeros, cfg.d, c == g.tile_cols,
                  r == g.tile_rows,
                  r == g.tile_rows && c == g.tile_cols));
  return p;
}

HostScript build_sddmm_script(const KernelConfig& cfg, const DenseMatrix& b,
                              const DenseMatrix& c) {
  const SddmmGeometry g = sddmm_geometry(cfg);
  HostScript script;
  for (std::uint32_t t = 0; t < cfg.d; ++t) {
    std::vector<CopyOp::Stream> bcol(g.tile_rows);
    for (std::uint32_t r = 0; r < g.tile_rows; ++r) {
      bcol[r].row = r + 1;
      bcol[r].words.reserve(cfg.local_height);
      for (std::uint32_t i = 0; i < cfg.local_height; ++i)
        bcol[r].words.push_back(
            float_to_word(b.at(r * cfg.local_height + i, t)));
    }
    script.push_back(CopyOp::h2d(std::move(bcol), true));

    CopyOp::Stream crow;
    crow.row = 0;
    crow.words.reserve(cfg.n);
    for (std::uint32_t j = 0; j < cfg.n; ++j)
      crow.words.push_back(float_to_word(c.at(t, j)));
    script.push_back(CopyOp::h2d({std::move(crow)}, true));

    script.push_back(CopyOp::wait_signal(g.tile_rows));
  }

  std::vector<CopyOp::Drain> drains(g.tile_rows);
  for (std::uint32_t r = 0; r < g.tile_rows; ++r)
    drains[r] = CopyOp::Drain{
        r + 1, std::uint64_t(g.tile_cols) * cfg.max_nonzeros};
  script.push_back(CopyOp::d2h(std::move(drains), false));
  return script;
}

SddmmRun sddmm(const CsrMatrix& a, const DenseMatrix& b, const DenseMatrix& c,
               const KernelConfig& cfg, const FabricParams& fparams,
               const TraceFn& trace) {
  cfg.validate_sddmm();
  if (a.n_rows != cfg.n || a.n_cols != cfg.n)
    throw Error("sddmm: A must be n x n with n = cfg.n");
  if (b.n_rows != cfg.n || b.n_cols != cfg.d)
    throw Error("sddmm: B must be n x d");
  if (c.n_rows != cfg.d || c.n_cols != cfg.n)
    throw Error("sddmm: C must be d x n");

  const CooTileSet tiles = coo_tiles(a, cfg);
  const SddmmGeometry g = sddmm_geometry(cfg);

  FabricParams fp = fparams;
  fp.io_channels = cfg.io_channels;

  Placement placement = build_sddmm_placement(cfg, tiles);
  HostScript script = build_sddmm_script(cfg, b, c);
  Fabric fabric(placement.rows, placement.cols, fp);
  fabric.load_program(std::move(placement));
  if (trace) fabric.set_trace(trace);

  SddmmRun run;
  run.report = fabric.run(script);

  // Drained buffers arrive east-most worker first; real slots carry float
  // bits, pad slots the NULL pattern.
  std::vector<std::uint64_t> rows;
  std::vector<std::uint32_t> cols;
  std::vector<float> vals;
  const CopyOp& drain = script.back();
  for (std::uint32_t r = 0; r < g.tile_rows; ++r) {
    const std::vector<Word>& words = drain.received[r];
    if (words.size() != std::uint64_t(g.tile_cols) * cfg.max_nonzeros)
      throw SimError("sddmm: drained word count mismatch");
    for (std::uint32_t bidx = 0; bidx < g.tile_cols; ++bidx) {
      const std::uint32_t tc = g.tile_cols - 1 - bidx;
      const CooTile& tile = tiles.at(r, tc);
      const Word* buf = words.data() + std::size_t(bidx) * cfg.max_nonzeros;
      for (std::uint32_t k = 0; k < cfg.max_nonzeros; ++k) {
        if (k < tile.count) {
          rows.push_back(std::uint64_t(r) * cfg.local_height +
                         tile.row_idx[k]);
          cols.push_back(tc * cfg.local_width + tile.col_idx[k]);
          vals.push_back(word_to_float(buf[k]));
        } else if (buf[k] != kNullWord) {
          throw SimError("sddmm: pad slot carries a non-NULL word");
        }
      }
    }
  }
  run.y = csr_from_triples(cfg.n, cfg.n, std::move(rows), std::move(cols),
                           std::move(vals));
  return run;
}

}  // namespace waferflow
