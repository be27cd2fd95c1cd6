#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "nlh/kernel.hpp"

namespace nlh {

/// Reads a tabulated kernel from CSV. The first line must be the header
/// `x_index,y_index,value`; every further line sets one entry of a
/// `nodes` x `nodes` table indexed by ambient node. Unlisted entries are 0.
template <typename Scalar>
Kernel<Scalar> load_tabulated_kernel(const std::string& path, Index nodes, int dim, KernelLabel label,
                                     NormMode mode = NormMode::domain) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open kernel table " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty kernel table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x_index,y_index,value") throw ConfigError(path + ": expected header x_index,y_index,value");
  Matrix<Scalar> table = Matrix<Scalar>::Zero(nodes, nodes);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    long long i = -1, j = -1;
    double v = 0;
    char c1 = 0, c2 = 0;
    if (!(row >> i >> c1 >> j >> c2 >> v) || c1 != ',' || c2 != ',')
      throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed row");
    if (i < 0 || j < 0 || i >= nodes || j >= nodes)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": node index outside the grid");
    table(i, j) = Scalar(v);
  }
  return Kernel<Scalar>::tabulated(std::move(table), dim, label, mode);
}

/// Writes the full table of `k` over the ambient nodes of `g` in the same layout.
template <typename Scalar>
void save_tabulated_kernel(const std::string& path, const Kernel<Scalar>& k, const Grid<Scalar>& g) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.precision(17);
  out << "x_index,y_index,value\n";
  for (Index a = 0; a < g.size(); ++a)
    for (Index b = 0; b < g.size(); ++b) out << a << ',' << b << ',' << static_cast<double>(k(g, a, b)) << '\n';
}

}  // namespace nlh
