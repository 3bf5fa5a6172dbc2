#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "waferflow/config.hpp"
#include "waferflow/csr.hpp"
#include "waferflow/fabric.hpp"
#include "waferflow/sellpack.hpp"

namespace waferflow {

// The three streamed SpMM designs:
//  kV1 - all of A enters through the top-left router; the router column
//        forwards out-of-window pairs south; one output drain per chunk.
//  kV2 - A is pre-encoded so each router row receives its own host stream;
//        no router-to-router traffic; one output drain per chunk.
//  kV3 - V2 plus one accumulator row per chunk, so a single device-to-host
//        copy drains the whole output after all input copies are issued.
enum class SpmmVariant { kV1, kV2, kV3 };

const char* to_string(SpmmVariant v);
SpmmVariant spmm_variant_from_string(const std::string& s);

struct SpmmRun {
  DenseMatrix y;
  SimReport report;                  // totals summed over panels
  std::vector<SimReport> panel_reports;
  std::uint32_t panels = 0;
};

// Geometry of one panel pass.
struct SpmmGeometry {
  std::uint32_t worker_rows = 0;
  std::uint32_t worker_cols = 0;
  std::uint32_t acc_rows = 0;
  std::uint32_t grid_rows = 0;
  std::uint32_t grid_cols = 0;
};

SpmmGeometry spmm_geometry(SpmmVariant v, const KernelConfig& cfg,
                           std::uint32_t panel_cols);

// Builds the PE programs for one panel pass. `a_panel` holds the panel's
// columns rebased to zero; worker H slices are taken from h rows
// [h_row_offset, h_row_offset + panel_cols). Throws PlacementError when
// the grid or a PE memory budget is exceeded.
Placement build_spmm_placement(SpmmVariant v, const KernelConfig& cfg,
                               const CsrMatrix& a_panel, const DenseMatrix& h,
                               std::uint32_t h_row_offset);

// Host copy schedule for one panel pass.
HostScript build_spmm_script(SpmmVariant v, const KernelConfig& cfg,
                             const CsrMatrix& a_panel);

// Runs Y = A * H on the simulated fabric. A must be n x n with n = cfg.n
// and h must be n x d. Matrices wider than one pass (n > 65536) are
// processed as column panels with host-side partial-sum accumulation.
SpmmRun spmm(SpmmVariant v, const CsrMatrix& a, const DenseMatrix& h,
             const KernelConfig& cfg, const FabricParams& fparams = {},
             const TraceFn& trace = nullptr);

}  // namespace waferflow
