#pragma once

#include <cstdint>
#include <vector>

#include "waferflow/config.hpp"
#include "waferflow/csr.hpp"

namespace waferflow {

// One worker's COO tile. Indices are local to the tile; all three arrays
// are padded to max_nonzeros with NULL entries past `count`.
struct CooTile {
  std::uint32_t count = 0;  // real nonzeros
  std::vector<std::uint32_t> row_idx;
  std::vector<std::uint32_t> col_idx;
  std::vector<Word> values;  // float bits; NULL pattern in pad slots
};

struct CooTileSet {
  std::uint32_t n = 0;
  std::uint32_t local_height = 0;
  std::uint32_t local_width = 0;
  std::uint32_t max_nonzeros = 0;
  std::uint32_t tile_rows = 0;
  std::uint32_t tile_cols = 0;
  std::vector<CooTile> tiles;  // row-major

  const CooTile& at(std::uint32_t tr, std::uint32_t tc) const {
    return tiles[std::size_t(tr) * tile_cols + tc];
  }
};

// Partitions `a` into (n/local_height) x (n/local_width) tiles. A tile
// holding more than max_nonzeros entries is a hard error naming the tile.
CooTileSet coo_tiles(const CsrMatrix& a, const KernelConfig& cfg);

// Reassembles the global matrix from tiles (verification path).
CsrMatrix coo_tiles_reassemble(const CooTileSet& ts);

}  // namespace waferflow
