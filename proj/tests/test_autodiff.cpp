#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "agcn/autodiff.hpp"
#include "agcn/grad_check.hpp"
#include "agcn/matrix.hpp"
#include "agcn/rng.hpp"
#include "oracles.hpp"

using namespace agcn;

TEST_CASE("matrix shape errors name both shapes") {
  Matrix a(2, 3), b(2, 3);
  REQUIRE_THROWS_WITH(matmul(a, b), Catch::Matchers::ContainsSubstring("2x3"));
  REQUIRE_THROWS_AS(add(Matrix(2, 2), Matrix(3, 3)), std::invalid_argument);
  REQUIRE_THROWS_AS(Matrix::from_rows({{1.0, 2.0}, {3.0}}), std::invalid_argument);
}

TEST_CASE("matmul against triple-loop oracle") {
  Rng rng(3);
  Matrix a = oracle::random_matrix(4, 6, rng, -2.0, 2.0);
  Matrix b = oracle::random_matrix(6, 3, rng, -2.0, 2.0);
  Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 6; ++k) s += a(i, k) * b(k, j);
      REQUIRE(c(i, j) == Catch::Approx(s).margin(1e-14));
    }
}

TEST_CASE("identity products are bitwise exact") {
  Rng rng(4);
  Matrix a = oracle::random_matrix(5, 5, rng, -3.0, 3.0);
  REQUIRE(matmul(Matrix::identity(5), a) == a);
  REQUIRE(matmul(a, Matrix::identity(5)) == a);
}

TEST_CASE("tape forward values") {
  Tape t;
  Var a = t.constant(Matrix::from_rows({{1.0, -2.0}, {3.0, 0.0}}));

  SECTION("leaky relu scales negatives") {
    Var y = t.leaky_relu(a, 0.2);
    REQUIRE(t.value(y)(0, 1) == Catch::Approx(-0.4));
    REQUIRE(t.value(y)(1, 0) == 3.0);
    REQUIRE(t.value(y)(1, 1) == 0.0);
  }
  SECTION("relu zeroes negatives") {
    Var y = t.relu(a);
    REQUIRE(t.value(y)(0, 1) == 0.0);
    REQUIRE(t.value(y)(0, 0) == 1.0);
  }
  SECTION("abs") {
    Var y = t.abs(a);
    REQUIRE(t.value(y)(0, 1) == 2.0);
  }
  SECTION("clamp_min") {
    Var y = t.clamp_min(a, 0.5);
    REQUIRE(t.value(y)(0, 0) == 1.0);
    REQUIRE(t.value(y)(0, 1) == 0.5);
    REQUIRE(t.value(y)(1, 1) == 0.5);
  }
  SECTION("reduce_sum") {
    Var y = t.reduce_sum(a);
    REQUIRE(t.value(y)(0, 0) == 2.0);
  }
  SECTION("sigmoid is stable far out") {
    Var big = t.constant(Matrix::from_rows({{1000.0, -1000.0}}));
    Var y = t.sigmoid(big);
    REQUIRE(t.value(y)(0, 0) == 1.0);
    REQUIRE(t.value(y)(0, 1) >= 0.0);
    REQUIRE(std::isfinite(t.value(y)(0, 1)));
  }
  SECTION("rsqrt rejects non-positive input") {
    REQUIRE_THROWS_AS(t.rsqrt(a), std::invalid_argument);
  }
}

TEST_CASE("backward needs a scalar output") {
  Tape t;
  Var a = t.constant(Matrix(2, 2));
  REQUIRE_THROWS_WITH(t.backward(a), Catch::Matchers::ContainsSubstring("1x1"));
}

TEST_CASE("matmul gradients match the hand rule") {
  // f = sum(A B); df/dA = ones * B^T, df/dB = A^T * ones
  Parameter pa(Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
  Parameter pb(Matrix::from_rows({{5.0, 6.0}, {7.0, 8.0}}));
  Tape t;
  Var out = t.reduce_sum(t.matmul(t.leaf(pa), t.leaf(pb)));
  pa.zero_grad();
  pb.zero_grad();
  t.backward(out);
  const Matrix ga = matmul(Matrix::ones(2, 2), transpose(pb.value));
  const Matrix gb = matmul(transpose(pa.value), Matrix::ones(2, 2));
  REQUIRE(max_abs_diff(pa.grad, ga) == 0.0);
  REQUIRE(max_abs_diff(pb.grad, gb) == 0.0);
}

TEST_CASE("a parameter used twice accumulates both contributions") {
  Parameter p(Matrix::from_rows({{2.0}}));
  Tape t;
  Var x = t.leaf(p);
  Var out = t.reduce_sum(t.mul(x, x));  // d(x^2)/dx = 2x
  p.zero_grad();
  t.backward(out);
  REQUIRE(p.grad(0, 0) == 4.0);
}

TEST_CASE("bce with logits") {
  SECTION("zero logits give log 2") {
    Tape t;
    Rng rng(1);
    Var p = t.constant(Matrix(2, 3));
    Var l = t.bce_with_logits(p, oracle::random_binary(2, 3, rng));
    for (std::size_t i = 0; i < 6; ++i)
      REQUIRE(t.value(l).raw()[i] == Catch::Approx(std::log(2.0)).epsilon(1e-15));
  }
  SECTION("saturated correct logits vanish") {
    Tape t;
    Matrix y = Matrix::ones(1, 4);
    Matrix logits(1, 4, 50.0);
    Var l = t.bce_with_logits(t.constant(logits), y);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(t.value(l).raw()[i] < 1e-12);
  }
  SECTION("extreme logits stay finite both ways") {
    Parameter p(Matrix::from_rows({{1000.0, -1000.0}}));
    Tape t;
    Var l = t.reduce_sum(t.bce_with_logits(t.leaf(p), Matrix::from_rows({{0.0, 1.0}})));
    REQUIRE(std::isfinite(t.value(l)(0, 0)));
    p.zero_grad();
    t.backward(l);
    REQUIRE(std::isfinite(p.grad(0, 0)));
    // dL/dp = sigma(p) - y: about 1 at (1000, y=0) and -1 at (-1000, y=1)
    REQUIRE(p.grad(0, 0) == Catch::Approx(1.0));
    REQUIRE(p.grad(0, 1) == Catch::Approx(-1.0));
  }
  SECTION("backward is sigma(p) - y elementwise") {
    Rng rng(9);
    Parameter p(oracle::random_matrix(3, 4, rng, -3.0, 3.0));
    Matrix y = oracle::random_binary(3, 4, rng);
    Tape t;
    Var l = t.reduce_sum(t.bce_with_logits(t.leaf(p), y));
    p.zero_grad();
    t.backward(l);
    for (std::size_t i = 0; i < p.value.size(); ++i)
      REQUIRE(p.grad.raw()[i] ==
              Catch::Approx(oracle::sigmoid(p.value.raw()[i]) - y.raw()[i]).margin(1e-12));
  }
}

TEST_CASE("composite expression matches finite differences") {
  Rng rng(11);
  Parameter a(oracle::random_matrix(3, 3, rng, -1.0, 1.0));
  Parameter b(oracle::random_matrix(3, 2, rng, -1.0, 1.0));
  auto f = [&](Tape& t) {
    Var x = t.matmul(t.leaky_relu(t.leaf(a), 0.2), t.leaf(b));
    Var s = t.sigmoid(t.scale(x, 0.5));
    return t.reduce_sum(t.mul(s, t.abs(t.transpose(t.transpose(s)))));
  };
  const GradCheckReport rep =
      grad_check(f, {{"a", &a}, {"b", &b}}, 1e-5, 1e-6);
  INFO("max rel err " << rep.max_rel_err);
  REQUIRE(rep.ok());
}

TEST_CASE("repeated backward over fresh tapes is bitwise stable") {
  Rng rng(13);
  Parameter a(oracle::random_matrix(4, 4, rng, -1.0, 1.0));
  Matrix first;
  for (int it = 0; it < 3; ++it) {
    Tape t;
    Var out = t.reduce_sum(t.sigmoid(t.matmul(t.leaf(a), t.leaf(a))));
    a.zero_grad();
    t.backward(out);
    if (it == 0)
      first = a.grad;
    else
      REQUIRE(a.grad == first);
  }
}
