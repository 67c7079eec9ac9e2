#pragma once

#include "cwnet/complex.hpp"
#include "cwnet/types.hpp"

namespace cwnet {

struct Chain {
  int degree = 0;
  IVec coefficients; // length N_degree
};

struct Cochain {
  int degree = 0;
  Vec values; // length N_degree
};

// per-dimension diagonal cell weights; w[k] has length N_k, padding entries 0
struct WeightStack {
  std::vector<Vec> w;
};

WeightStack identity_weights(const CWComplex& cx); // 1 on real cells, 0 on padding

// degree k -> k-1; k = 0 has no boundary and throws
Chain boundary_apply(const CWComplex& cx, int k, const Chain& c);

// degree k -> k+1 via B_{k+1}^T; at k = n the result is the zero cochain of
// the trivial degree-(n+1) space
Cochain coboundary_apply(const CWComplex& cx, int k, const Cochain& f);

// weighted l2 pairing sum_i w_i f_i g_i
double inner_product(const Cochain& f, const Cochain& g, const Vec& weights);

// reciprocal where |w_i| > 1e-12, zero elsewhere (Moore-Penrose on a diagonal)
Vec diag_pseudo_inverse(const Vec& w);

// Delta_k = B_k^T W_{k-1}^+ B_k W_k + W_k^+ B_{k+1} W_{k+1} B_{k+1}^T,
// dropping the down term at k = 0 and the up term at k = n
Mat hodge_laplacian(const CWComplex& cx, int k, const WeightStack& ws);

// B_1 B_1^T of the 1-skeleton: degree matrix minus adjacency
Mat graph_laplacian(const CWComplex& cx);

} // namespace cwnet
