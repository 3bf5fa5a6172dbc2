#include "waferflow/coo_tiles.hpp"

#include <string>

namespace waferflow {

CooTileSet coo_tiles(const CsrMatrix& a, const KernelConfig& cfg) {
  if (a.n_rows != a.n_cols || a.n_rows != cfg.n)
    throw Error("coo_tiles: matrix must be n x n with n = cfg.n");
  cfg.validate_sddmm();

  CooTileSet ts;
  ts.n = cfg.n;
  ts.local_height = cfg.local_height;
  ts.local_width = cfg.local_width;
  ts.max_nonzeros = cfg.max_nonzeros;
  ts.tile_rows = cfg.n / cfg.local_height;
  ts.tile_cols = cfg.n / cfg.local_width;
  ts.tiles.resize(std::size_t(ts.tile_rows) * ts.tile_cols);

  for (auto& t : ts.tiles) {
    t.row_idx.assign(cfg.max_nonzeros, kNullWord);
    t.col_idx.assign(cfg.max_nonzeros, kNullWord);
    t.values.assign(cfg.max_nonzeros, kNullWord);
  }

  for (std::uint32_t r = 0; r < a.n_rows; ++r) {
    const std::uint32_t tr = r / cfg.local_height;
    for (std::uint64_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      const std::uint32_t c = a.col_idx[k];
      const std::uint32_t tc = c / cfg.local_width;
      CooTile& t = ts.tiles[std::size_t(tr) * ts.tile_cols + tc];
      if (t.count >= cfg.max_nonzeros)
        throw FormatError("coo_tiles: tile (" + std::to_string(tr) + ", " +
                          std::to_string(tc) + ") exceeds max_nonzeros = " +
                          std::to_string(cfg.max_nonzeros));
      t.row_idx[t.count] = r % cfg.local_height;
      t.col_idx[t.count] = c % cfg.local_width;
      t.values[t.count] = float_to_word(a.values[k]);
      ++t.count;
    }
  }
  return ts;
}

CsrMatrix coo_tiles_reassemble(const CooTileSet& ts) {
  std::vector<std::uint64_t> rows;
  std::vector<std::uint32_t> cols;
  std::vector<float> vals;
  for (std::uint32_t tr = 0; tr < ts.tile_rows; ++tr) {
    for (std::uint32_t tc = 0; tc < ts.tile_cols; ++tc) {
      const CooTile& t = ts.at(tr, tc);
      for (std::uint32_t k = 0; k < t.count; ++k) {
        if (t.row_idx[k] >= ts.local_height || t.col_idx[k] >= ts.local_width)
          throw FormatError("coo_tiles: local index out of tile bounds");
        rows.push_back(std::uint64_t(tr) * ts.local_height + t.row_idx[k]);
        cols.push_back(tc * ts.local_width + t.col_idx[k]);
        vals.push_back(word_to_float(t.values[k]));
      }
    }
  }
  return csr_from_triples(ts.n, ts.n, std::move(rows), std::move(cols),
                          std::move(vals));
}

}  // namespace waferflow
