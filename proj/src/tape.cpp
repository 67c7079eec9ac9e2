#include "cwnet/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace cwnet {

namespace {

using Arr = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kSeluAlpha = 1.6732632423543772;
constexpr double kSeluLambda = 1.0507009873554805;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_tensor(const Tensor& a, const char* op) {
  if (!a.valid())
    throw std::invalid_argument(std::string(op) + ": tensor has no tape");
}

void check_same_tape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape())
    throw std::invalid_argument(std::string(op) + ": tensors must share one tape");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

} // namespace

Tensor Tape::record(Mat value, bool tracked, Pull pull) {
  Node n;
  n.value = std::move(value);
  n.tracked = tracked;
  n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor Tape::leaf(Mat value) { return record(std::move(value), true, nullptr); }

Tensor Tape::constant(Mat value) { return record(std::move(value), false, nullptr); }

void Tape::clear() { nodes_.clear(); }

void Tape::backward(const Tensor& loss, double seed) {
  if (!loss.valid() || loss.tape() != this)
    throw std::invalid_argument("backward: loss does not live on this tape");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward: loss must be 1x1");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  Node& root = nodes_[loss.id()];
  if (!root.tracked) return; // loss independent of every tracked input
  root.grad = Mat::Constant(1, 1, seed);
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.tracked || n.grad.size() == 0 || !n.pull) continue;
    n.pull(*this, n.grad);
  }
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "gelu") return Activation::Gelu;
  if (name == "selu") return Activation::Selu;
  if (name == "exp") return Activation::Exp;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Gelu: return "gelu";
    case Activation::Selu: return "selu";
    case Activation::Exp: return "exp";
  }
  return "identity";
}

Mat apply_activation(const Mat& x, Activation a) {
  switch (a) {
    case Activation::Identity:
      return x;
    case Activation::LeakyRelu:
      return x.unaryExpr([](double v) { return v < 0.0 ? 0.01 * v : v; });
    case Activation::Gelu:
      return x.unaryExpr([](double v) {
        return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
      });
    case Activation::Selu:
      return x.unaryExpr([](double v) {
        return v > 0.0 ? kSeluLambda * v
                       : kSeluLambda * kSeluAlpha * (std::exp(v) - 1.0);
      });
    case Activation::Exp:
      return x.unaryExpr([](double v) { return std::exp(v); });
  }
  return x;
}

Mat activation_derivative(const Mat& x, Activation a) {
  switch (a) {
    case Activation::Identity:
      return Mat::Ones(x.rows(), x.cols());
    case Activation::LeakyRelu:
      return x.unaryExpr([](double v) { return v < 0.0 ? 0.01 : 1.0; });
    case Activation::Gelu:
      return x.unaryExpr([](double v) {
        double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        return cdf + v * pdf;
      });
    case Activation::Selu:
      return x.unaryExpr([](double v) {
        return v > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(v);
      });
    case Activation::Exp:
      return x.unaryExpr([](double v) { return std::exp(v); });
  }
  return Mat::Ones(x.rows(), x.cols());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "matmul");
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions differ");
  Tape& t = *a.tape();
  Mat v = a.value() * b.value();
  if (!a.tracked() && !b.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id(), bi = b.id();
  return t.record(std::move(v), true, [ai, bi](Tape& t, const Mat& g) {
    t.accumulate(ai, g * t.node_value(bi).transpose());
    t.accumulate(bi, t.node_value(ai).transpose() * g);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "add");
  check_same_shape(a, b, "add");
  Tape& t = *a.tape();
  Mat v = a.value() + b.value();
  if (!a.tracked() && !b.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id(), bi = b.id();
  return t.record(std::move(v), true, [ai, bi](Tape& t, const Mat& g) {
    t.accumulate(ai, g);
    t.accumulate(bi, g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "sub");
  check_same_shape(a, b, "sub");
  Tape& t = *a.tape();
  Mat v = a.value() - b.value();
  if (!a.tracked() && !b.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id(), bi = b.id();
  return t.record(std::move(v), true, [ai, bi](Tape& t, const Mat& g) {
    t.accumulate(ai, g);
    t.accumulate(bi, -g);
  });
}

Tensor transpose(const Tensor& a) {
  check_tensor(a, "transpose");
  Tape& t = *a.tape();
  Mat v = a.value().transpose();
  if (!a.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id();
  return t.record(std::move(v), true, [ai](Tape& t, const Mat& g) {
    t.accumulate(ai, g.transpose());
  });
}

Tensor scale(const Tensor& a, double s) {
  check_tensor(a, "scale");
  Tape& t = *a.tape();
  Mat v = s * a.value();
  if (!a.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id();
  return t.record(std::move(v), true, [ai, s](Tape& t, const Mat& g) {
    t.accumulate(ai, s * g);
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "hadamard");
  check_same_shape(a, b, "hadamard");
  Tape& t = *a.tape();
  Mat v = a.value().cwiseProduct(b.value());
  if (!a.tracked() && !b.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id(), bi = b.id();
  return t.record(std::move(v), true, [ai, bi](Tape& t, const Mat& g) {
    t.accumulate(ai, g.cwiseProduct(t.node_value(bi)));
    t.accumulate(bi, g.cwiseProduct(t.node_value(ai)));
  });
}

Tensor cdivide(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "cdivide");
  check_same_shape(a, b, "cdivide");
  if (b.value().size() > 0 && b.value().cwiseAbs().minCoeff() < 1e-300)
    throw std::domain_error("cdivide: denominator magnitude below 1e-300");
  Tape& t = *a.tape();
  Mat v = a.value().cwiseQuotient(b.value());
  if (!a.tracked() && !b.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id(), bi = b.id();
  std::uint32_t oi = static_cast<std::uint32_t>(t.size());
  return t.record(std::move(v), true, [ai, bi, oi](Tape& t, const Mat& g) {
    const Mat& den = t.node_value(bi);
    t.accumulate(ai, g.cwiseQuotient(den));
    t.accumulate(bi, -g.cwiseProduct(t.node_value(oi)).cwiseQuotient(den));
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "concat_cols");
  if (a.rows() != b.rows())
    throw std::invalid_argument("concat_cols: row counts differ");
  Tape& t = *a.tape();
  int ca = a.cols(), cb = b.cols();
  Mat v(a.rows(), ca + cb);
  v.leftCols(ca) = a.value();
  v.rightCols(cb) = b.value();
  if (!a.tracked() && !b.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id(), bi = b.id();
  return t.record(std::move(v), true, [ai, bi, ca, cb](Tape& t, const Mat& g) {
    t.accumulate(ai, g.leftCols(ca));
    t.accumulate(bi, g.rightCols(cb));
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty())
    throw std::invalid_argument("concat_cols: empty part list");
  if (parts.size() == 1) return parts[0];
  if (parts.size() == 2) return concat_cols(parts[0], parts[1]);
  Tape& t = *parts[0].tape();
  int rows = parts[0].rows(), total = 0;
  bool tracked = false;
  for (const Tensor& p : parts) {
    check_same_tape(parts[0], p, "concat_cols");
    if (p.rows() != rows)
      throw std::invalid_argument("concat_cols: row counts differ");
    total += p.cols();
    tracked = tracked || p.tracked();
  }
  Mat v(rows, total);
  std::vector<std::pair<std::uint32_t, int>> spans;
  spans.reserve(parts.size());
  int at = 0;
  for (const Tensor& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.id(), p.cols());
    at += p.cols();
  }
  if (!tracked) return t.constant(std::move(v));
  return t.record(std::move(v), true,
                  [spans = std::move(spans)](Tape& t, const Mat& g) {
                    int at = 0;
                    for (auto [id, w] : spans) {
                      t.accumulate(id, g.middleCols(at, w));
                      at += w;
                    }
                  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty())
    throw std::invalid_argument("concat_rows: empty part list");
  if (parts.size() == 1) return parts[0];
  Tape& t = *parts[0].tape();
  int cols = parts[0].cols(), total = 0;
  bool tracked = false;
  for (const Tensor& p : parts) {
    check_same_tape(parts[0], p, "concat_rows");
    if (p.cols() != cols)
      throw std::invalid_argument("concat_rows: column counts differ");
    total += p.rows();
    tracked = tracked || p.tracked();
  }
  Mat v(total, cols);
  std::vector<std::pair<std::uint32_t, int>> spans;
  spans.reserve(parts.size());
  int at = 0;
  for (const Tensor& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    spans.emplace_back(p.id(), p.rows());
    at += p.rows();
  }
  if (!tracked) return t.constant(std::move(v));
  return t.record(std::move(v), true,
                  [spans = std::move(spans)](Tape& t, const Mat& g) {
                    int at = 0;
                    for (auto [id, h] : spans) {
                      t.accumulate(id, g.middleRows(at, h));
                      at += h;
                    }
                  });
}

Tensor slice_rows(const Tensor& a, int start, int rows) {
  check_tensor(a, "slice_rows");
  if (start < 0 || rows < 1 || start + rows > a.rows())
    throw std::invalid_argument("slice_rows: range outside matrix");
  Tape& t = *a.tape();
  Mat v = a.value().middleRows(start, rows);
  if (!a.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id();
  return t.record(std::move(v), true, [ai, start](Tape& t, const Mat& g) {
    t.accumulate_block(ai, start, 0, g);
  });
}

Tensor row_mean(const Tensor& a) {
  check_tensor(a, "row_mean");
  Tape& t = *a.tape();
  if (a.cols() < 1) throw std::invalid_argument("row_mean: empty matrix");
  Mat v = a.value().rowwise().mean();
  if (!a.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id();
  int cols = a.cols();
  return t.record(std::move(v), true, [ai, cols](Tape& t, const Mat& g) {
    t.accumulate(ai, (g / static_cast<double>(cols)).replicate(1, cols));
  });
}

Tensor sum_all(const Tensor& a) {
  check_tensor(a, "sum_all");
  Tape& t = *a.tape();
  Mat v = Mat::Constant(1, 1, a.value().sum());
  if (!a.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id();
  int r = a.rows(), c = a.cols();
  return t.record(std::move(v), true, [ai, r, c](Tape& t, const Mat& g) {
    t.accumulate(ai, Mat::Constant(r, c, g(0, 0)));
  });
}

Tensor activation(const Tensor& a, Activation kind) {
  check_tensor(a, "activation");
  Tape& t = *a.tape();
  if (kind == Activation::Gelu && a.tracked()) {
    // share the erf pass between value and derivative
    Mat cdf = a.value().unaryExpr(
        [](double v) { return 0.5 * (1.0 + std::erf(v * kInvSqrt2)); });
    Mat v = a.value().cwiseProduct(cdf);
    std::uint32_t ai = a.id();
    return t.record(std::move(v), true,
                    [ai, cdf = std::move(cdf)](Tape& t, const Mat& g) {
                      const Mat& x = t.node_value(ai);
                      t.accumulate(
                          ai, g.cwiseProduct(
                                  cdf + x.cwiseProduct(x.unaryExpr([](double v) {
                                          return kInvSqrt2Pi *
                                                 std::exp(-0.5 * v * v);
                                        }))));
                    });
  }
  Mat v = apply_activation(a.value(), kind);
  if (!a.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id();
  std::uint32_t oi = static_cast<std::uint32_t>(t.size());
  return t.record(std::move(v), true, [ai, oi, kind](Tape& t, const Mat& g) {
    if (kind == Activation::Exp)
      t.accumulate(ai, g.cwiseProduct(t.node_value(oi)));
    else
      t.accumulate(ai,
                   g.cwiseProduct(activation_derivative(t.node_value(ai), kind)));
  });
}

Tensor diag_pinv(const Tensor& a) {
  check_tensor(a, "diag_pinv");
  Tape& t = *a.tape();
  Mat v = a.value().unaryExpr(
      [](double x) { return std::abs(x) > 1e-12 ? 1.0 / x : 0.0; });
  if (!a.tracked()) return t.constant(std::move(v));
  std::uint32_t ai = a.id();
  std::uint32_t oi = static_cast<std::uint32_t>(t.size());
  return t.record(std::move(v), true, [ai, oi](Tape& t, const Mat& g) {
    const Mat& o = t.node_value(oi);
    t.accumulate(ai, -g.cwiseProduct(o).cwiseProduct(o));
  });
}

Tensor scale_rows(const Tensor& m, const Tensor& w) {
  check_same_tape(m, w, "scale_rows");
  if (w.cols() != 1 || w.rows() != m.rows())
    throw std::invalid_argument("scale_rows: weight must be rows(m) x 1");
  Tape& t = *m.tape();
  Mat v = (m.value().array().colwise() * w.value().col(0).array()).matrix();
  if (!m.tracked() && !w.tracked()) return t.constant(std::move(v));
  std::uint32_t mi = m.id(), wi = w.id();
  return t.record(std::move(v), true, [mi, wi](Tape& t, const Mat& g) {
    const Mat& mv = t.node_value(mi);
    const Mat& wv = t.node_value(wi);
    t.accumulate(mi, (g.array().colwise() * wv.col(0).array()).matrix());
    t.accumulate(wi, g.cwiseProduct(mv).rowwise().sum());
  });
}

Tensor scale_cols(const Tensor& m, const Tensor& w) {
  check_same_tape(m, w, "scale_cols");
  if (w.cols() != 1 || w.rows() != m.cols())
    throw std::invalid_argument("scale_cols: weight must be cols(m) x 1");
  Tape& t = *m.tape();
  Mat v =
      (m.value().array().rowwise() * w.value().col(0).transpose().array()).matrix();
  if (!m.tracked() && !w.tracked()) return t.constant(std::move(v));
  std::uint32_t mi = m.id(), wi = w.id();
  return t.record(std::move(v), true, [mi, wi](Tape& t, const Mat& g) {
    const Mat& mv = t.node_value(mi);
    const Mat& wv = t.node_value(wi);
    t.accumulate(mi, (g.array().rowwise() * wv.col(0).transpose().array()).matrix());
    t.accumulate(wi, g.cwiseProduct(mv).colwise().sum().transpose());
  });
}

Tensor conjugate(const Tensor& m, const Tensor& basis) {
  check_same_tape(m, basis, "conjugate");
  if (basis.tracked())
    throw std::invalid_argument("conjugate: basis must be untracked");
  if (m.rows() != m.cols() || m.cols() != basis.rows())
    throw std::invalid_argument("conjugate: need square m matching basis rows");
  Tape& t = *m.tape();
  Mat v = basis.value().transpose() * m.value() * basis.value();
  if (!m.tracked()) return t.constant(std::move(v));
  std::uint32_t mi = m.id(), bi = basis.id();
  return t.record(std::move(v), true, [mi, bi](Tape& t, const Mat& g) {
    const Mat& b = t.node_value(bi);
    t.accumulate(mi, b * g * b.transpose());
  });
}

Tensor layer_norm(const Tensor& m, const Tensor& gain, const Tensor& bias,
                  double eps) {
  check_same_tape(m, gain, "layer_norm");
  check_same_tape(m, bias, "layer_norm");
  if (gain.rows() != 1 || bias.rows() != 1 || gain.cols() != m.cols() ||
      bias.cols() != m.cols())
    throw std::invalid_argument("layer_norm: gain/bias must be 1 x cols(m)");
  if (m.cols() < 1) throw std::invalid_argument("layer_norm: empty rows");
  Tape& t = *m.tape();
  const double d = static_cast<double>(m.cols());

  auto normalize = [eps](const Mat& x) {
    Eigen::ArrayXd mu = x.rowwise().mean().array();
    Arr centered = x.array();
    centered.colwise() -= mu;
    Eigen::ArrayXd s =
        ((centered.square().rowwise().sum() / x.cols()) + eps).rsqrt();
    Arr xhat = centered.colwise() * s;
    return std::make_pair(std::move(xhat), std::move(s));
  };

  auto [xhat, s] = normalize(m.value());
  Mat v = ((xhat.rowwise() * gain.value().row(0).array()).rowwise() +
           bias.value().row(0).array())
              .matrix();
  if (!m.tracked() && !gain.tracked() && !bias.tracked())
    return t.constant(std::move(v));
  std::uint32_t mi = m.id(), gi = gain.id(), bi = bias.id();
  return t.record(
      std::move(v), true, [mi, gi, bi, eps, d, normalize](Tape& t, const Mat& g) {
        auto [xhat, s] = normalize(t.node_value(mi));
        Arr dxh = g.array().rowwise() * t.node_value(gi).row(0).array();
        Eigen::ArrayXd r1 = dxh.rowwise().sum() / d;
        Eigen::ArrayXd r2 = (dxh * xhat).rowwise().sum() / d;
        Arr dx = dxh;
        dx.colwise() -= r1;
        dx -= xhat.colwise() * r2;
        dx.colwise() *= s;
        t.accumulate(mi, dx.matrix());
        t.accumulate(gi, (g.array() * xhat).matrix().colwise().sum());
        t.accumulate(bi, g.colwise().sum());
      });
}

} // namespace cwnet
