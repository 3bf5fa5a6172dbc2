#include "waferflow/config.hpp"

#include <string>

namespace waferflow {

void KernelConfig::validate_spmm() const {
  if (n == 0) throw Error("config: n must be >= 1");
  if (d == 0) throw Error("config: d must be >= 1");
  if (!is_pow2(max_y_chunk))
    throw Error("config: max_y_chunk (" + std::to_string(max_y_chunk) +
                ") must be a power of two");
  if (max_v_per_pe == 0 || max_v_per_pe > 65535)
    throw Error("config: max_v_per_pe must be in [1, 65535]");
  if (max_col_per_pe == 0 || d % max_col_per_pe != 0)
    throw Error("config: max_col_per_pe must divide d evenly");
  if (io_channels == 0) throw Error("config: io_channels must be >= 1");
}

void KernelConfig::validate_sddmm() const {
  if (n == 0) throw Error("config: n must be >= 1");
  if (d == 0) throw Error("config: d must be >= 1");
  if (local_height == 0 || n % local_height != 0)
    throw Error("config: local_height must divide n");
  if (local_width == 0 || n % local_width != 0)
    throw Error("config: local_width must divide n");
  if (max_nonzeros == 0) throw Error("config: max_nonzeros must be >= 1");
  if (io_channels == 0) throw Error("config: io_channels must be >= 1");
}

}  // namespace waferflow
