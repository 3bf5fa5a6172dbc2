#include "waferflow/mmio.hpp"

#include <fstream>
#include <limits>
#include <sstream>

namespace waferflow {

CsrMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("matrix market: empty input");

  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || object != "matrix")
    throw FormatError("matrix market: bad banner");
  if (format != "coordinate")
    throw FormatError("matrix market: only coordinate format is supported");
  if (field != "real" && field != "integer")
    throw FormatError("matrix market: only real matrices are supported");
  if (symmetry != "general")
    throw FormatError("matrix market: only general symmetry is supported");

  do {
    if (!std::getline(in, line))
      throw FormatError("matrix market: missing size line");
  } while (!line.empty() && line[0] == '%');

  std::uint64_t n_rows = 0, n_cols = 0, nnz = 0;
  {
    std::istringstream sizes(line);
    if (!(sizes >> n_rows >> n_cols >> nnz))
      throw FormatError("matrix market: bad size line");
  }
  if (n_rows > std::numeric_limits<std::uint32_t>::max() ||
      n_cols > std::numeric_limits<std::uint32_t>::max())
    throw FormatError("matrix market: dimensions too large");

  std::vector<std::uint64_t> rows;
  std::vector<std::uint32_t> cols;
  std::vector<float> vals;
  rows.reserve(nnz);
  cols.reserve(nnz);
  vals.reserve(nnz);

  for (std::uint64_t k = 0; k < nnz; ++k) {
    std::uint64_t r = 0, c = 0;
    double v = 0.0;
    if (!(in >> r >> c >> v))
      throw FormatError("matrix market: truncated entry list");
    if (r < 1 || c < 1 || r > n_rows || c > n_cols)
      throw FormatError("matrix market: coordinate out of range");
    rows.push_back(r - 1);
    cols.push_back(std::uint32_t(c - 1));
    vals.push_back(float(v));
  }
  return csr_from_triples(std::uint32_t(n_rows), std::uint32_t(n_cols),
                          std::move(rows), std::move(cols), std::move(vals));
}

CsrMatrix read_matrix_market_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  return read_matrix_market(f);
}

void write_matrix_market(std::ostream& out, const CsrMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.n_rows << " " << a.n_cols << " " << a.nnz() << "\n";
  out.precision(9);
  for (std::uint32_t r = 0; r < a.n_rows; ++r)
    for (std::uint64_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
      out << (r + 1) << " " << (a.col_idx[k] + 1) << " " << a.values[k]
          << "\n";
}

void write_matrix_market_file(const std::string& path, const CsrMatrix& a) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path + " for writing");
  write_matrix_market(f, a);
  if (!f) throw Error("write failed: " + path);
}

}  // namespace waferflow
