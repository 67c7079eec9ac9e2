#include <cmath>
#include <vector>

#include "cwnet/gradcheck.hpp"
#include "cwnet/rng.hpp"
#include "cwnet/tape.hpp"
#include "doctest.h"

using namespace cwnet;

namespace {

Mat random_mat(Rng& rng, int r, int c, double lo = -2.0, double hi = 2.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform_real(lo, hi);
  return m;
}

// weights every output entry differently so flat spots cannot hide
Tensor weighted_sum(Tape& t, const Tensor& x) {
  Rng rng(99);
  Mat w = random_mat(rng, x.rows(), x.cols(), 0.3, 1.7);
  return sum_all(hadamard(x, t.constant(std::move(w))));
}

double check_op(const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& op,
                const std::vector<Mat>& inputs) {
  LossFn f = [&](Tape& t, const std::vector<Tensor>& leaves) {
    return weighted_sum(t, op(t, leaves));
  };
  return grad_check(f, inputs, 1e-5).max_rel_err;
}

constexpr double kTol = 1e-7; // smooth ops sit far below the 1e-4 model gate

} // namespace

TEST_CASE("binary op forwards") {
  Tape t;
  Mat a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  Tensor ta = t.leaf(a), tb = t.leaf(b);
  CHECK((matmul(ta, tb).value() - a * b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((add(ta, tb).value() - (a + b)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sub(ta, tb).value() - (a - b)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((hadamard(ta, tb).value() - a.cwiseProduct(b)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cdivide(ta, tb).value() - a.cwiseQuotient(b)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((transpose(ta).value() - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((scale(ta, -2.5).value() + 2.5 * a).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matmul gradients") {
  Rng rng(1);
  std::vector<Mat> in{random_mat(rng, 3, 4), random_mat(rng, 4, 2)};
  double err = check_op(
      [](Tape&, const std::vector<Tensor>& v) { return matmul(v[0], v[1]); }, in);
  CHECK(err <= kTol);
}

TEST_CASE("add sub transpose scale gradients") {
  Rng rng(2);
  std::vector<Mat> in{random_mat(rng, 3, 3), random_mat(rng, 3, 3)};
  CHECK(check_op([](Tape&, const std::vector<Tensor>& v) { return add(v[0], v[1]); },
                 in) <= kTol);
  CHECK(check_op([](Tape&, const std::vector<Tensor>& v) { return sub(v[0], v[1]); },
                 in) <= kTol);
  CHECK(check_op([](Tape&, const std::vector<Tensor>& v) {
          return scale(transpose(v[0]), 1.7);
        }, in) <= kTol);
}

TEST_CASE("hadamard and cdivide gradients") {
  Rng rng(3);
  std::vector<Mat> in{random_mat(rng, 2, 5), random_mat(rng, 2, 5, 0.5, 2.0)};
  CHECK(check_op([](Tape&, const std::vector<Tensor>& v) {
          return hadamard(v[0], v[1]);
        }, in) <= kTol);
  CHECK(check_op([](Tape&, const std::vector<Tensor>& v) {
          return cdivide(v[0], v[1]);
        }, in) <= kTol);
}

TEST_CASE("cdivide rejects vanishing denominators") {
  Tape t;
  Mat a = Mat::Ones(1, 2), b = Mat::Ones(1, 2);
  b(0, 1) = 1e-301;
  CHECK_THROWS_AS(cdivide(t.leaf(a), t.leaf(b)), std::domain_error);
}

TEST_CASE("concat and slice gradients and layout") {
  Rng rng(4);
  Mat a = random_mat(rng, 3, 2), b = random_mat(rng, 3, 4), c = random_mat(rng, 2, 6);
  {
    Tape t;
    Tensor cc = concat_cols({t.leaf(a), t.leaf(b)});
    CHECK(cc.cols() == 6);
    CHECK((cc.value().leftCols(2) - a).cwiseAbs().maxCoeff() == 0.0);
    Tensor cr = concat_rows({t.leaf(a), t.leaf(Mat(c.leftCols(2)))});
    CHECK(cr.rows() == 5);
    Tensor sl = slice_rows(cr, 3, 2);
    CHECK((sl.value() - c.leftCols(2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(slice_rows(cr, 4, 2), std::invalid_argument);
  }
  std::vector<Mat> in{a, b};
  CHECK(check_op([](Tape&, const std::vector<Tensor>& v) {
          return concat_cols(std::vector<Tensor>{v[0], v[1]});
        }, in) <= kTol);
  std::vector<Mat> in2{a, Mat(c.leftCols(2))};
  CHECK(check_op([](Tape&, const std::vector<Tensor>& v) {
          return slice_rows(concat_rows(std::vector<Tensor>{v[0], v[1]}), 2, 2);
        }, in2) <= kTol);
}

TEST_CASE("row_mean and sum_all") {
  Rng rng(5);
  Mat a = random_mat(rng, 3, 4);
  {
    Tape t;
    Tensor m = row_mean(t.leaf(a));
    CHECK(m.cols() == 1);
    CHECK(m.value()(1, 0) == doctest::Approx(a.row(1).mean()));
    Tensor s = sum_all(t.leaf(a));
    CHECK(s.value()(0, 0) == doctest::Approx(a.sum()));
  }
  std::vector<Mat> in{a};
  CHECK(check_op([](Tape&, const std::vector<Tensor>& v) {
          return row_mean(v[0]);
        }, in) <= kTol);
}

TEST_CASE("activation forwards match their formulas") {
  Mat x(1, 4);
  x << -2.0, -0.3, 0.4, 3.0;
  Mat lr = apply_activation(x, Activation::LeakyRelu);
  CHECK(lr(0, 0) == doctest::Approx(-0.02));
  CHECK(lr(0, 3) == doctest::Approx(3.0));
  Mat ge = apply_activation(x, Activation::Gelu);
  CHECK(ge(0, 2) ==
        doctest::Approx(0.4 * 0.5 * (1.0 + std::erf(0.4 / std::sqrt(2.0)))));
  Mat se = apply_activation(x, Activation::Selu);
  CHECK(se(0, 3) == doctest::Approx(1.0507009873554805 * 3.0));
  CHECK(se(0, 0) == doctest::Approx(1.0507009873554805 * 1.6732632423543772 *
                                    (std::exp(-2.0) - 1.0)));
  CHECK((apply_activation(x, Activation::Identity) - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(apply_activation(x, Activation::Exp)(0, 1) == doctest::Approx(std::exp(-0.3)));
}

TEST_CASE("activation gradients, inputs held away from kinks") {
  Rng rng(6);
  Mat pos = random_mat(rng, 2, 3, 0.2, 1.5);
  Mat neg = random_mat(rng, 2, 3, -1.5, -0.2);
  Mat both(2, 6);
  both << pos, neg;
  for (Activation a : {Activation::Identity, Activation::LeakyRelu,
                       Activation::Gelu, Activation::Selu, Activation::Exp}) {
    std::vector<Mat> in{both};
    double err = check_op([a](Tape&, const std::vector<Tensor>& v) {
      return activation(v[0], a);
    }, in);
    CHECK_MESSAGE(err <= kTol, activation_name(a));
  }
}

TEST_CASE("tracked gelu node agrees with the plain formula") {
  Rng rng(7);
  Mat x = random_mat(rng, 3, 3);
  Tape t;
  Tensor v = activation(t.leaf(x), Activation::Gelu);
  CHECK((v.value() - apply_activation(x, Activation::Gelu)).cwiseAbs().maxCoeff() <=
        1e-15);
}

TEST_CASE("activation names round-trip") {
  for (Activation a : {Activation::Identity, Activation::LeakyRelu,
                       Activation::Gelu, Activation::Selu, Activation::Exp})
    CHECK(activation_from_name(activation_name(a)) == a);
  CHECK_THROWS_AS(activation_from_name("tanh"), std::invalid_argument);
}

TEST_CASE("diag_pinv value and gradient away from the cutoff") {
  Tape t;
  Mat w(3, 1);
  w << 2.0, 0.0, -0.5;
  Tensor p = diag_pinv(t.leaf(w));
  CHECK(p.value()(0, 0) == doctest::Approx(0.5));
  CHECK(p.value()(1, 0) == 0.0);
  CHECK(p.value()(2, 0) == doctest::Approx(-2.0));
  Rng rng(8);
  std::vector<Mat> in{random_mat(rng, 4, 1, 0.5, 2.0)};
  CHECK(check_op([](Tape&, const std::vector<Tensor>& v) {
          return diag_pinv(v[0]);
        }, in) <= kTol);
}

TEST_CASE("scale_rows and scale_cols gradients") {
  Rng rng(9);
  std::vector<Mat> in{random_mat(rng, 3, 4), random_mat(rng, 3, 1),
                      random_mat(rng, 4, 1)};
  CHECK(check_op([](Tape&, const std::vector<Tensor>& v) {
          return scale_rows(v[0], v[1]);
        }, in) <= kTol);
  CHECK(check_op([](Tape&, const std::vector<Tensor>& v) {
          return scale_cols(v[0], v[2]);
        }, in) <= kTol);
  Tape t;
  Mat m = in[0];
  CHECK((scale_rows(t.leaf(m), t.leaf(in[1])).value() -
         in[1].col(0).asDiagonal() * m).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((scale_cols(t.leaf(m), t.leaf(in[2])).value() -
         m * in[2].col(0).asDiagonal()).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("conjugate equals basis^T m basis and needs a constant basis") {
  Rng rng(10);
  Mat m = random_mat(rng, 4, 4), basis = random_mat(rng, 4, 3);
  {
    Tape t;
    Tensor c = conjugate(t.leaf(m), t.constant(basis));
    CHECK((c.value() - basis.transpose() * m * basis).cwiseAbs().maxCoeff() <=
          1e-12);
    CHECK_THROWS_AS(conjugate(t.leaf(m), t.leaf(basis)), std::invalid_argument);
  }
  std::vector<Mat> in{m};
  CHECK(check_op([&basis](Tape& t, const std::vector<Tensor>& v) {
          return conjugate(v[0], t.constant(basis));
        }, in) <= kTol);
}

TEST_CASE("layer_norm normalizes rows and backpropagates") {
  Rng rng(11);
  Mat m = random_mat(rng, 3, 5);
  Mat gain = random_mat(rng, 1, 5, 0.5, 1.5);
  Mat bias = random_mat(rng, 1, 5, -0.3, 0.3);
  {
    Tape t;
    Tensor out = layer_norm(t.leaf(m), t.constant(gain), t.constant(bias), 0.0);
    for (int i = 0; i < 3; ++i) {
      Mat row = (out.value().row(i) - bias.row(0)).cwiseQuotient(gain.row(0));
      CHECK(row.mean() == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(row.array().square().mean() == doctest::Approx(1.0));
    }
  }
  std::vector<Mat> in{m, gain, bias};
  CHECK(check_op([](Tape&, const std::vector<Tensor>& v) {
          return layer_norm(v[0], v[1], v[2], 1e-5);
        }, in) <= 1e-6);
}

TEST_CASE("gradients accumulate across fan-out") {
  Tape t;
  Mat a(2, 2);
  a << 1, -2, 3, 4;
  Tensor x = t.leaf(a);
  Tensor loss = sum_all(hadamard(x, x));
  t.backward(loss);
  CHECK((x.grad() - 2.0 * a).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("backward seeds scale the sweep and reset between calls") {
  Tape t;
  Mat a = Mat::Ones(2, 2);
  Tensor x = t.leaf(a);
  Tensor loss = sum_all(x);
  t.backward(loss, 3.0);
  CHECK(x.grad()(0, 0) == doctest::Approx(3.0));
  t.backward(loss);
  CHECK(x.grad()(0, 0) == doctest::Approx(1.0)); // not 4.0
}

TEST_CASE("constants stay untracked through compositions") {
  Tape t;
  Tensor c = t.constant(Mat::Ones(2, 2));
  Tensor d = add(scale(c, 2.0), c);
  CHECK(!d.tracked());
  Tensor x = t.leaf(Mat::Ones(2, 2));
  CHECK(add(x, c).tracked());
}

TEST_CASE("clear drops nodes and the tape is reusable") {
  Tape t;
  Tensor x = t.leaf(Mat::Ones(1, 1));
  sum_all(x);
  CHECK(t.size() == 2);
  t.clear();
  CHECK(t.size() == 0);
  Tensor y = t.leaf(Mat::Constant(1, 1, 5.0));
  Tensor loss = sum_all(hadamard(y, y));
  t.backward(loss);
  CHECK(y.grad()(0, 0) == doctest::Approx(10.0));
}

TEST_CASE("ops reject tensors from different tapes and bad shapes") {
  Tape t1, t2;
  Tensor a = t1.leaf(Mat::Ones(2, 2));
  Tensor b = t2.leaf(Mat::Ones(2, 2));
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
  Tensor c = t1.leaf(Mat::Ones(3, 2));
  CHECK_THROWS_AS(add(a, c), std::invalid_argument);
  CHECK_THROWS_AS(matmul(c, c), std::invalid_argument);
  CHECK_THROWS_AS(add(Tensor(), a), std::invalid_argument);
}

TEST_CASE("backward validates its loss node") {
  Tape t;
  Tensor x = t.leaf(Mat::Ones(2, 2));
  CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
}
