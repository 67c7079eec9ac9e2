#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cwnet/types.hpp"

namespace cwnet {

// Finite CW-complex described by its signed incidence matrices.
// B_k has shape N_{k-1} x N_k; column j lists the (k-1)-cells on the boundary
// of k-cell j with orientation signs in {-1, 0, 1}.
// Storage may be padded: real cells occupy the leading indices of every
// dimension, padded rows/columns are identically zero.
struct CWComplex {
  int dimension = 0;               // n
  std::vector<int> sizes;          // N_0..N_n, storage sizes incl. padding
  std::vector<int> real_counts;    // real (non-padding) cells per dimension
  std::vector<IMat> incidence;     // incidence[k-1] is B_k, k = 1..n
  std::vector<std::string> labels; // optional per-cell names, diagnostics only

  int size(int k) const { return sizes[static_cast<size_t>(k)]; }
  int real(int k) const { return real_counts[static_cast<size_t>(k)]; }
  const IMat& boundary(int k) const { return incidence[static_cast<size_t>(k) - 1]; }
  bool is_padded() const {
    for (int k = 0; k <= dimension; ++k)
      if (real(k) != size(k)) return true;
    return false;
  }
};

struct Violation {
  std::string rule;     // stable identifier, e.g. "entry-range"
  std::string location; // e.g. "B_2(0,1)"
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const CWComplex& cx);

// Constructs and validates; throws std::invalid_argument listing the first
// violations when the data is not a CW-complex.
CWComplex build_complex(int dimension, std::vector<int> sizes,
                        std::vector<IMat> incidence,
                        std::vector<int> real_counts = {});

// 1-dimensional complex from an oriented simple graph; vertices are 0-based.
// Edge (u, v) contributes a column with -1 at the tail u and +1 at the head v.
CWComplex from_graph(int num_vertices,
                     const std::vector<std::pair<int, int>>& edges);

// Copy of B_k as double; k = 0 and k = n+1 give empty matrices.
Mat incidence_matrix(const CWComplex& cx, int k);

long total_cells(const CWComplex& cx); // real cells across all dimensions

bool operator==(const CWComplex& a, const CWComplex& b);

// shared 3-vertex fixtures
CWComplex triangle_complex(); // filled oriented triangle, one 2-cell
CWComplex path_complex();     // P3: v0 - v1 - v2

} // namespace cwnet
