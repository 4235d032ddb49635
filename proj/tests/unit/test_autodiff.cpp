#include <cmath>
#include <limits>

#include "doctest.h"
#include "edarp/autodiff.hpp"
#include "edarp/error.hpp"
#include "grad_suites.hpp"

using namespace edarp;
using namespace edarp::ad;
using edarp::testing::random_matrix;

namespace {
constexpr double kTol = 1e-4;
}  // namespace

TEST_CASE("matrix basics") {
  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix b(3, 2, {1, 0, 0, 1, 1, 1});
  Matrix c(2, 2);
  gemm(a, false, b, false, c, false);
  CHECK(c == Matrix(2, 2, {4, 5, 10, 11}));
  gemm(a, false, a, true, c, false);
  CHECK(c == Matrix(2, 2, {14, 32, 32, 77}));
  gemm(b, true, b, false, c, true);
  CHECK(c == Matrix(2, 2, {16, 33, 33, 79}));
  CHECK_THROWS(Matrix(2, 2, {1, 2, 3}));
}

TEST_CASE("forward values") {
  Tape t;
  Var a = t.constant(Matrix(1, 3, {1, 2, 3}));
  CHECK(sum(a).value()[0] == 6.0);
  Var s = softmax(a);
  double z = std::exp(1) + std::exp(2) + std::exp(3);
  CHECK(s.value()[2] == doctest::Approx(std::exp(3) / z));
  Matrix m(1, 3, 0.0);
  m[1] = -std::numeric_limits<double>::infinity();
  Var ms = masked_softmax(a, m);
  CHECK(ms.value()[1] == 0.0);
  CHECK(ms.value()[0] + ms.value()[2] == doctest::Approx(1.0));
  Var ln = layernorm(a);
  CHECK(ln.value()[0] + ln.value()[1] + ln.value()[2] == doctest::Approx(0.0));
  Matrix all(1, 3, -std::numeric_limits<double>::infinity());
  CHECK_THROWS(masked_softmax(a, all));
  CHECK(transpose(t.constant(Matrix(2, 1, {1, 2}))).value() == Matrix(1, 2, {1, 2}));
}

TEST_CASE("non-finite values are reported") {
  Tape t;
  Var a = t.constant(Matrix(1, 2, {0.0, 1.0}));
  CHECK_THROWS_AS(log(a), NumericalError);
  Var big = t.constant(Matrix(1, 1, 1000.0));
  CHECK_THROWS_AS(exp(big), NumericalError);
}

TEST_CASE("gradient checks for every primitive") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto results = edarp::testing::primitive_gradient_errors(seed);
    CHECK(results.size() == 28);
    for (const auto& r : results) {
      CAPTURE(seed);
      CAPTURE(r.name);
      CHECK(r.error < kTol);
    }
  }
}

TEST_CASE("block products agree with per-block products") {
  Rng rng(4);
  const Matrix a = random_matrix(6, 3, rng), b = random_matrix(9, 2, rng);
  Tape t;
  const Matrix out = block_matmul(t.constant(a), t.constant(b), 3).value();
  for (int blk = 0; blk < 3; ++blk) {
    Var ab = slice_rows(t.constant(a), 2 * blk, 2);
    Var bb = slice_rows(t.constant(b), 3 * blk, 3);
    const Matrix ref = matmul(ab, bb).value();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(out(2 * blk + i, j) == doctest::Approx(ref(i, j)));
  }
}

TEST_CASE("parameters accumulate gradients, inference keeps none") {
  ParameterStore store;
  store.add("w", Matrix(2, 2, {1, 2, 3, 4}));
  store.add("b", Matrix(1, 2, {0.5, -0.5}));
  CHECK(store.index_of("b") == 1);
  CHECK(store.index_of("zz") == -1);
  CHECK(store.scalar_count() == 6);

  Tape t(&store);
  Var x = t.constant(Matrix(1, 2, {1, 1}));
  Var y = add_row(matmul(x, t.param("w")), t.param("b"));
  Var loss = sum(mul(y, y));
  t.backward(loss);
  Gradients g = Gradients::zeros_like(store);
  t.accumulate(g);
  // y = [4, 6] + [0.5, -0.5] = [4.5, 5.5]; dL/dW = x^T 2y; dL/db = 2y.
  CHECK(g.grads[0] == Matrix(2, 2, {9, 11, 9, 11}));
  CHECK(g.grads[1] == Matrix(1, 2, {9, 11}));
  CHECK(g.global_norm() == doctest::Approx(std::sqrt(2 * (81 + 121) + 81 + 121)));
  g.scale(0.5);
  CHECK(g.grads[1] == Matrix(1, 2, {4.5, 5.5}));

  Tape inf(&store, false);
  Var y2 = add_row(matmul(inf.constant(Matrix(1, 2, {1, 1})), inf.param("w")), inf.param("b"));
  CHECK(y2.value() == y.value());
  CHECK(!inf.needs_grad(y2));
}

TEST_CASE("backward requires a scalar") {
  Tape t;
  Var a = t.variable(Matrix(2, 2, 1.0));
  CHECK_THROWS(t.backward(a));
}
