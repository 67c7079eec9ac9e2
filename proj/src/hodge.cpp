#include "cwnet/hodge.hpp"

#include <stdexcept>

namespace cwnet {

WeightStack identity_weights(const CWComplex& cx) {
  WeightStack ws;
  ws.w.resize(static_cast<size_t>(cx.dimension) + 1);
  for (int k = 0; k <= cx.dimension; ++k) {
    Vec w = Vec::Zero(cx.size(k));
    w.head(cx.real(k)).setOnes();
    ws.w[static_cast<size_t>(k)] = w;
  }
  return ws;
}

Chain boundary_apply(const CWComplex& cx, int k, const Chain& c) {
  if (k < 1 || k > cx.dimension)
    throw std::invalid_argument("boundary_apply: degree must be in [1, n]");
  if (c.degree != k || c.coefficients.size() != cx.size(k))
    throw std::invalid_argument("boundary_apply: chain degree/length mismatch");
  Chain out;
  out.degree = k - 1;
  out.coefficients = cx.boundary(k) * c.coefficients;
  return out;
}

Cochain coboundary_apply(const CWComplex& cx, int k, const Cochain& f) {
  if (k < 0 || k > cx.dimension)
    throw std::invalid_argument("coboundary_apply: degree must be in [0, n]");
  if (f.degree != k || f.values.size() != cx.size(k))
    throw std::invalid_argument("coboundary_apply: cochain degree/length mismatch");
  Cochain out;
  out.degree = k + 1;
  if (k == cx.dimension) {
    out.values = Vec();
    return out;
  }
  out.values = cx.boundary(k + 1).cast<double>().transpose() * f.values;
  return out;
}

double inner_product(const Cochain& f, const Cochain& g, const Vec& weights) {
  if (f.degree != g.degree || f.values.size() != g.values.size() ||
      weights.size() != f.values.size())
    throw std::invalid_argument("inner_product: dimension mismatch");
  return (f.values.array() * g.values.array() * weights.array()).sum();
}

Vec diag_pseudo_inverse(const Vec& w) {
  Vec out = Vec::Zero(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (std::abs(w[i]) > 1e-12) out[i] = 1.0 / w[i];
  return out;
}

Mat hodge_laplacian(const CWComplex& cx, int k, const WeightStack& ws) {
  if (k < 0 || k > cx.dimension)
    throw std::invalid_argument("hodge_laplacian: degree must be in [0, n]");
  if (ws.w.size() != static_cast<size_t>(cx.dimension) + 1)
    throw std::invalid_argument("hodge_laplacian: weight stack length mismatch");
  const Vec& wk = ws.w[static_cast<size_t>(k)];
  if (wk.size() != cx.size(k))
    throw std::invalid_argument("hodge_laplacian: weight length mismatch");
  Mat delta = Mat::Zero(cx.size(k), cx.size(k));
  if (k >= 1) {
    Mat bk = cx.boundary(k).cast<double>();
    Vec winv = diag_pseudo_inverse(ws.w[static_cast<size_t>(k) - 1]);
    delta += bk.transpose() * winv.asDiagonal() * bk * wk.asDiagonal();
  }
  if (k <= cx.dimension - 1) {
    Mat bk1 = cx.boundary(k + 1).cast<double>();
    Vec wkinv = diag_pseudo_inverse(wk);
    delta += wkinv.asDiagonal() * bk1 * ws.w[static_cast<size_t>(k) + 1].asDiagonal() *
             bk1.transpose();
  }
  return delta;
}

Mat graph_laplacian(const CWComplex& cx) {
  if (cx.dimension < 1) return Mat::Zero(cx.size(0), cx.size(0));
  Mat b1 = cx.boundary(1).cast<double>();
  return b1 * b1.transpose();
}

} // namespace cwnet
