#include "cwnet/complex.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

namespace cwnet {

namespace {

std::string cell_ref(int k, int row, int col) {
  std::ostringstream os;
  os << "B_" << k << "(" << row << "," << col << ")";
  return os.str();
}

} // namespace

ValidationReport validate(const CWComplex& cx) {
  ValidationReport report;
  auto flag = [&](std::string rule, std::string loc, std::string msg) {
    report.violations.push_back({std::move(rule), std::move(loc), std::move(msg)});
  };

  if (cx.dimension < 0) {
    flag("size-domain", "dimension", "dimension must be nonnegative");
    return report;
  }
  size_t n1 = static_cast<size_t>(cx.dimension) + 1;
  if (cx.sizes.size() != n1 || cx.real_counts.size() != n1 ||
      cx.incidence.size() != n1 - 1) {
    flag("size-domain", "skeleta",
         "expected sizes/real_counts of length n+1 and n incidence matrices");
    return report;
  }
  for (int k = 0; k <= cx.dimension; ++k) {
    if (cx.size(k) < 0)
      flag("size-domain", "N_" + std::to_string(k), "negative skeleton size");
    if (cx.real(k) < 0 || cx.real(k) > cx.size(k))
      flag("size-domain", "real_" + std::to_string(k),
           "real count outside [0, N_k]");
  }
  if (cx.size(0) < 1 || cx.real(0) < 1)
    flag("size-domain", "N_0", "a complex has at least one 0-cell");
  if (!report.ok()) return report;

  for (int k = 1; k <= cx.dimension; ++k) {
    const IMat& b = cx.boundary(k);
    if (b.rows() != cx.size(k - 1) || b.cols() != cx.size(k)) {
      flag("shape-mismatch", "B_" + std::to_string(k),
           "expected " + std::to_string(cx.size(k - 1)) + "x" +
               std::to_string(cx.size(k)));
      continue;
    }
    for (int i = 0; i < b.rows(); ++i)
      for (int j = 0; j < b.cols(); ++j) {
        int v = b(i, j);
        if (v < -1 || v > 1)
          flag("entry-range", cell_ref(k, i, j),
               "incidence entries lie in {-1, 0, 1}");
        else if (v != 0 && (i >= cx.real(k - 1) || j >= cx.real(k)))
          flag("padding-violation", cell_ref(k, i, j),
               "padded rows and columns must be zero");
      }
    for (int j = 0; j < cx.real(k); ++j)
      if (b.col(j).cwiseAbs().sum() == 0)
        flag("dangling-cell", "B_" + std::to_string(k) + " column " + std::to_string(j),
             "real k-cell with empty boundary for k >= 1");
  }
  if (!report.ok()) return report;

  // exact integer test of the chain-complex identity
  for (int k = 1; k < cx.dimension; ++k) {
    IMat prod = cx.boundary(k) * cx.boundary(k + 1);
    if (prod.size() > 0 && prod.cwiseAbs().maxCoeff() != 0)
      flag("boundary-composition",
           "B_" + std::to_string(k) + " * B_" + std::to_string(k + 1),
           "composition of consecutive boundaries must vanish");
  }
  return report;
}

CWComplex build_complex(int dimension, std::vector<int> sizes,
                        std::vector<IMat> incidence,
                        std::vector<int> real_counts) {
  CWComplex cx;
  cx.dimension = dimension;
  cx.sizes = std::move(sizes);
  cx.incidence = std::move(incidence);
  cx.real_counts = real_counts.empty() ? cx.sizes : std::move(real_counts);
  ValidationReport report = validate(cx);
  if (!report.ok()) {
    std::ostringstream os;
    os << "invalid complex:";
    size_t shown = std::min<size_t>(report.violations.size(), 4);
    for (size_t i = 0; i < shown; ++i)
      os << " [" << report.violations[i].rule << " at "
         << report.violations[i].location << ": " << report.violations[i].message
         << "]";
    if (report.violations.size() > shown)
      os << " (+" << report.violations.size() - shown << " more)";
    throw std::invalid_argument(os.str());
  }
  return cx;
}

CWComplex from_graph(int num_vertices,
                     const std::vector<std::pair<int, int>>& edges) {
  if (num_vertices < 1)
    throw std::invalid_argument("from_graph: need at least one vertex");
  std::set<std::pair<int, int>> seen;
  IMat b1 = IMat::Zero(num_vertices, static_cast<int>(edges.size()));
  for (size_t e = 0; e < edges.size(); ++e) {
    auto [u, v] = edges[e];
    if (u < 0 || u >= num_vertices || v < 0 || v >= num_vertices)
      throw std::invalid_argument("from_graph: edge endpoint out of range");
    if (u == v)
      throw std::invalid_argument("from_graph: self-loop not allowed");
    auto key = std::minmax(u, v);
    if (!seen.insert({key.first, key.second}).second)
      throw std::invalid_argument("from_graph: duplicate edge");
    b1(u, static_cast<int>(e)) = -1;
    b1(v, static_cast<int>(e)) = 1;
  }
  return build_complex(1, {num_vertices, static_cast<int>(edges.size())}, {b1});
}

Mat incidence_matrix(const CWComplex& cx, int k) {
  if (k < 1 || k > cx.dimension) return Mat();
  return cx.boundary(k).cast<double>();
}

long total_cells(const CWComplex& cx) {
  long total = 0;
  for (int k = 0; k <= cx.dimension; ++k) total += cx.real(k);
  return total;
}

bool operator==(const CWComplex& a, const CWComplex& b) {
  if (a.dimension != b.dimension || a.sizes != b.sizes ||
      a.real_counts != b.real_counts)
    return false;
  for (size_t i = 0; i < a.incidence.size(); ++i)
    if (a.incidence[i] != b.incidence[i]) return false;
  return true;
}

CWComplex triangle_complex() {
  IMat b1(3, 3);
  // edges: e0 = v0->v1, e1 = v1->v2, e2 = v0->v2
  b1 << -1, 0, -1,
         1, -1, 0,
         0, 1, 1;
  IMat b2(3, 1);
  // face traverses e0, e1 forward and e2 backward
  b2 << 1, 1, -1;
  return build_complex(2, {3, 3, 1}, {b1, b2});
}

CWComplex path_complex() {
  return from_graph(3, {{0, 1}, {1, 2}});
}

} // namespace cwnet
