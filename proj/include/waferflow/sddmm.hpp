#pragma once

#include <cstdint>
#include <vector>

#include "waferflow/config.hpp"
#include "waferflow/coo_tiles.hpp"
#include "waferflow/csr.hpp"
#include "waferflow/fabric.hpp"

namespace waferflow {

struct SddmmRun {
  CsrMatrix y;  // same sparsity pattern as the input
  SimReport report;
};

struct SddmmGeometry {
  std::uint32_t tile_rows = 0;
  std::uint32_t tile_cols = 0;
  std::uint32_t grid_rows = 0;  // tile_rows + 1 (north router fringe)
  std::uint32_t grid_cols = 0;  // tile_cols + 1 (west router fringe)
};

SddmmGeometry sddmm_geometry(const KernelConfig& cfg);

// Builds the router fringes and the worker grid holding `tiles`.
Placement build_sddmm_placement(const KernelConfig& cfg,
                                const CooTileSet& tiles);

// Per feature step: one B-column copy across the west lanes, one C-row copy
// on the north lane, and a completion signal from the south-east worker;
// then a single drain of all padded output buffers.
HostScript build_sddmm_script(const KernelConfig& cfg, const DenseMatrix& b,
                              const DenseMatrix& c);

// Runs Y = A .* (B C) on the fabric. b is n x d, c is d x n.
SddmmRun sddmm(const CsrMatrix& a, const DenseMatrix& b, const DenseMatrix& c,
               const KernelConfig& cfg, const FabricParams& fparams = {},
               const TraceFn& trace = nullptr);

}  // namespace waferflow
