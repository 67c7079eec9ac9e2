#include <utility>
#include <vector>

#include "cwnet/complex.hpp"
#include "doctest.h"

using namespace cwnet;

namespace {

bool has_rule(const ValidationReport& rep, const std::string& rule) {
  for (const Violation& v : rep.violations)
    if (v.rule == rule) return true;
  return false;
}

} // namespace

TEST_CASE("triangle fixture is a valid filled triangle") {
  CWComplex cx = triangle_complex();
  CHECK(cx.dimension == 2);
  CHECK(cx.size(0) == 3);
  CHECK(cx.size(1) == 3);
  CHECK(cx.size(2) == 1);
  CHECK(!cx.is_padded());
  CHECK(validate(cx).ok());
  CHECK(total_cells(cx) == 7);
  // the face's boundary chain uses every edge exactly once
  CHECK(cx.boundary(2).cwiseAbs().colwise().sum()(0) == 3);
  IMat prod = cx.boundary(1) * cx.boundary(2);
  CHECK(prod.cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("path fixture has two edges and no faces") {
  CWComplex cx = path_complex();
  CHECK(cx.dimension == 1);
  CHECK(cx.size(0) == 3);
  CHECK(cx.size(1) == 2);
  CHECK(validate(cx).ok());
  CHECK(total_cells(cx) == 5);
  // every edge column carries one -1 and one +1
  for (int j = 0; j < 2; ++j) {
    CHECK(cx.boundary(1).col(j).sum() == 0);
    CHECK(cx.boundary(1).col(j).cwiseAbs().sum() == 2);
  }
}

TEST_CASE("from_graph orients each edge tail to head") {
  CWComplex cx = from_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  CHECK(cx.dimension == 1);
  CHECK(cx.size(0) == 4);
  CHECK(cx.size(1) == 4);
  CHECK(validate(cx).ok());
  const IMat& b = cx.boundary(1);
  CHECK(b(0, 0) == -1);
  CHECK(b(1, 0) == 1);
  CHECK(b(3, 3) == -1);
  CHECK(b(0, 3) == 1);
}

TEST_CASE("from_graph rejects loops and out-of-range endpoints") {
  CHECK_THROWS_AS(from_graph(3, {{0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(from_graph(3, {{0, 3}}), std::invalid_argument);
  CHECK_THROWS_AS(from_graph(0, {}), std::invalid_argument);
}

TEST_CASE("build_complex accepts padded storage with zeroed padding") {
  IMat b1 = IMat::Zero(4, 4);
  b1(0, 0) = -1; b1(1, 0) = 1;
  b1(1, 1) = -1; b1(2, 1) = 1;
  b1(0, 2) = -1; b1(2, 2) = 1;
  IMat b2 = IMat::Zero(4, 2);
  b2(0, 0) = 1; b2(1, 0) = 1; b2(2, 0) = -1;
  CWComplex cx = build_complex(2, {4, 4, 2}, {b1, b2}, {3, 3, 1});
  CHECK(cx.is_padded());
  CHECK(cx.real(0) == 3);
  CHECK(cx.size(0) == 4);
  CHECK(total_cells(cx) == 7);
  CHECK(validate(cx).ok());
}

TEST_CASE("validate flags nonzero entries in the padding block") {
  IMat b1 = IMat::Zero(3, 3);
  b1(0, 0) = -1; b1(1, 0) = 1;
  b1(1, 1) = -1; b1(2, 1) = 1;
  b1(2, 2) = -1; // padded column touches a real row
  CWComplex cx;
  cx.dimension = 1;
  cx.sizes = {3, 3};
  cx.real_counts = {3, 2};
  cx.incidence = {b1};
  CHECK(has_rule(validate(cx), "padding-violation"));
}

TEST_CASE("validate flags entries outside {-1,0,1}") {
  IMat b1 = IMat::Zero(2, 1);
  b1(0, 0) = -2; b1(1, 0) = 1;
  CWComplex cx;
  cx.dimension = 1;
  cx.sizes = {2, 1};
  cx.real_counts = {2, 1};
  cx.incidence = {b1};
  CHECK(has_rule(validate(cx), "entry-range"));
}

TEST_CASE("validate flags a broken chain-complex identity") {
  // two edges sharing vertex 1, a fake face using both with equal signs at
  // the shared vertex so B_1 B_2 != 0
  IMat b1 = IMat::Zero(3, 2);
  b1(0, 0) = -1; b1(1, 0) = 1;
  b1(1, 1) = 1;  b1(2, 1) = -1;
  IMat b2 = IMat::Zero(2, 1);
  b2(0, 0) = 1; b2(1, 0) = 1;
  CWComplex cx;
  cx.dimension = 2;
  cx.sizes = {3, 2, 1};
  cx.real_counts = {3, 2, 1};
  cx.incidence = {b1, b2};
  CHECK(has_rule(validate(cx), "boundary-composition"));
}

TEST_CASE("validate flags real cells with empty boundaries") {
  IMat b1 = IMat::Zero(2, 1);
  CWComplex cx;
  cx.dimension = 1;
  cx.sizes = {2, 1};
  cx.real_counts = {2, 1};
  cx.incidence = {b1};
  CHECK(has_rule(validate(cx), "dangling-cell"));
}

TEST_CASE("validate flags shape and size-domain problems") {
  CWComplex cx;
  cx.dimension = 1;
  cx.sizes = {2, 1};
  cx.real_counts = {2, 1};
  cx.incidence = {IMat::Zero(3, 1)};
  CHECK(has_rule(validate(cx), "shape-mismatch"));

  CWComplex empty;
  empty.dimension = 0;
  empty.sizes = {0};
  empty.real_counts = {0};
  CHECK(has_rule(validate(empty), "size-domain"));

  CWComplex bad_real;
  bad_real.dimension = 0;
  bad_real.sizes = {2};
  bad_real.real_counts = {3};
  CHECK(has_rule(validate(bad_real), "size-domain"));
}

TEST_CASE("build_complex throws on invalid data") {
  CHECK_THROWS_AS(build_complex(1, {2, 1}, {IMat::Zero(1, 1)}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_complex(0, {0}, {}), std::invalid_argument);
}

TEST_CASE("build_complex defaults real counts to the full sizes") {
  CWComplex cx = build_complex(0, {5}, {});
  CHECK(cx.real(0) == 5);
  CHECK(!cx.is_padded());
  CHECK(validate(cx).ok());
}

TEST_CASE("incidence_matrix casts and handles the degree extremes") {
  CWComplex cx = triangle_complex();
  Mat b1 = incidence_matrix(cx, 1);
  CHECK(b1.rows() == 3);
  CHECK(b1.cols() == 3);
  CHECK(b1(0, 0) == doctest::Approx(cx.boundary(1)(0, 0)));
  CHECK(incidence_matrix(cx, 0).size() == 0);
  CHECK(incidence_matrix(cx, 3).size() == 0);
}

TEST_CASE("complex equality is structural") {
  CHECK(triangle_complex() == triangle_complex());
  CWComplex a = triangle_complex();
  CWComplex b = triangle_complex();
  b.incidence[0](0, 0) *= -1;
  CHECK(!(a == b));
}
