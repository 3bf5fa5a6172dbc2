#pragma once

#include <iosfwd>
#include <string>

#include "waferflow/csr.hpp"

namespace waferflow {

// MatrixMarket coordinate format, real general, 1-based indices.
CsrMatrix read_matrix_market(std::istream& in);
CsrMatrix read_matrix_market_file(const std::string& path);

void write_matrix_market(std::ostream& out, const CsrMatrix& a);
void write_matrix_market_file(const std::string& path, const CsrMatrix& a);

}  // namespace waferflow
