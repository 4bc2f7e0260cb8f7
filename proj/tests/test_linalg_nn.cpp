#include <doctest.h>

#include <cmath>
#include <random>

#include "moosurr/adam.hpp"
#include "moosurr/errors.hpp"
#include "moosurr/linalg.hpp"
#include "moosurr/losses.hpp"
#include "moosurr/mlp.hpp"
#include "oracles.hpp"

using namespace moosurr;

namespace {

Mlp single(Matrix w, Vector b, Activation act, OutputKind kind) {
  return Mlp({DenseLayer{std::move(w), std::move(b), act}}, kind);
}

Matrix random_batch(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : m.data()) v = normal(rng);
  return m;
}

}  // namespace

TEST_CASE("matrix and vector helpers") {
  Matrix m{{1, 2}, {3, 4}, {5, 6}};
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 2);
  CHECK(m(2, 1) == 6);
  const std::size_t idx[] = {2, 0};
  CHECK(m.select_rows(idx) == Matrix{{5, 6}, {1, 2}});
  CHECK(dot(Vector{1, 2, 3}, Vector{4, 5, 6}) == 32);
  CHECK(norm(Vector{3, 4}) == 5);
  Vector y{1, 1};
  axpy(2.0, Vector{1, 2}, y);
  CHECK(y == Vector{3, 5});
  CHECK_FALSE(all_finite(Vector{1, NAN}));
  CHECK_THROWS_AS(require_same_size(2, 3, "x"), ShapeError);
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), ShapeError);
}

TEST_CASE("forward: identity layer (1,1) at (2,3) is 5") {
  const Mlp f = single(Matrix{{1, 1}}, {0}, Activation::Identity, OutputKind::RegressionScalar);
  CHECK(f.forward(Vector{2, 3}) == 5.0);
}

TEST_CASE("forward: zero sigmoid layer is 0.5 everywhere") {
  const Mlp f = single(Matrix{{0, 0}}, {0}, Activation::Sigmoid, OutputKind::BinaryProbability);
  CHECK(f.forward(Vector{2, 3}) == 0.5);
  CHECK(f.forward(Vector{-100, 7}) == 0.5);
}

TEST_CASE("forward: 2x2x1 ReLU net against hand arithmetic") {
  // hidden: h1 = relu(1*x1 - 2*x2 + 0.5), h2 = relu(-1*x1 + 3*x2 - 1)
  // out = 2*h1 - 0.5*h2 + 0.25
  const Mlp f({DenseLayer{Matrix{{1, -2}, {-1, 3}}, {0.5, -1}, Activation::ReLU},
               DenseLayer{Matrix{{2, -0.5}}, {0.25}, Activation::Identity}},
              OutputKind::RegressionScalar);
  // x = (3, 1): h1 = relu(3 - 2 + 0.5) = 1.5, h2 = relu(-3 + 3 - 1) = 0 -> 3.25
  CHECK(f.forward(Vector{3, 1}) == doctest::Approx(3.25).epsilon(1e-15));
  // x = (1, 2): h1 = relu(1 - 4 + 0.5) = 0, h2 = relu(-1 + 6 - 1) = 4 -> -1.75
  CHECK(f.forward(Vector{1, 2}) == doctest::Approx(-1.75).epsilon(1e-15));
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(Mlp({}, OutputKind::RegressionScalar), ShapeError);
  // dims do not chain
  CHECK_THROWS_AS(Mlp({DenseLayer{Matrix(3, 2), Vector(3), Activation::ReLU},
                       DenseLayer{Matrix(1, 2), Vector(1), Activation::Identity}},
                      OutputKind::RegressionScalar),
                  ShapeError);
  // probability output needs a sigmoid
  CHECK_THROWS_AS(single(Matrix{{1, 1}}, {0}, Activation::Identity, OutputKind::BinaryProbability),
                  std::invalid_argument);
  // multi-output final layer
  CHECK_THROWS_AS(single(Matrix(2, 2), Vector(2), Activation::Identity, OutputKind::RegressionScalar),
                  ShapeError);
  const Mlp f = single(Matrix{{1, 1}}, {0}, Activation::Identity, OutputKind::RegressionScalar);
  CHECK_THROWS_AS(f.forward(Vector{1, 2, 3}), ShapeError);
}

TEST_CASE("backward: zero upstream gives a zero gradient") {
  Rng rng(1);
  const std::size_t hidden[] = {5, 4};
  const Mlp f = Mlp::glorot(3, hidden, OutputKind::BinaryProbability, rng);
  std::mt19937_64 data_rng(2);
  const Matrix x = random_batch(data_rng, 6, 3);
  const Vector g = f.backward(x, Vector(6, 0.0));
  CHECK(g.size() == f.parameter_count());
  for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("backward: linear model under MSE is 2(f(x)-y)(x,1)") {
  const Mlp f = single(Matrix{{0.5, -1.0}}, {0.25}, Activation::Identity, OutputKind::RegressionScalar);
  const Matrix x{{2.0, 3.0}};
  const double y = 1.0;
  const double out = f.forward(x.row(0));
  const Vector up = upstream_derivative(Vector{out}, Vector{y}, LossKind::MSE);
  const Vector g = f.backward(x, up);
  const double r = 2.0 * (out - y);
  CHECK(g[0] == doctest::Approx(r * 2.0));
  CHECK(g[1] == doctest::Approx(r * 3.0));
  CHECK(g[2] == doctest::Approx(r));
}

TEST_CASE("backward matches central finite differences on random nets") {
  std::mt19937_64 meta(42);
  for (int trial = 0; trial < 24; ++trial) {
    CAPTURE(trial);
    const std::size_t in = 1 + meta() % 6;
    std::vector<std::size_t> hidden;
    const std::size_t depth = meta() % 3;  // 1 to 3 layers total
    for (std::size_t k = 0; k < depth; ++k) hidden.push_back(1 + meta() % 16);
    const OutputKind kind = trial % 2 ? OutputKind::BinaryProbability : OutputKind::RegressionScalar;
    Rng rng(meta());
    Mlp f = Mlp::glorot(in, hidden, kind, rng);
    // non-zero biases so ReLU kinks are not hit at exactly zero inputs
    Vector params = f.flatten();
    for (double& p : params) p += 0.1 * std::normal_distribution<double>(0, 1)(meta);
    f.unflatten(params);

    const Matrix x = random_batch(meta, 4, in);
    const Vector up = oracle::random_vector(meta, 4);
    const Vector analytic = f.backward(x, up);

    auto objective = [&](const Vector& p) {
      Mlp g = f;
      g.unflatten(p);
      const Vector out = g.forward_batch(x);
      double s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += up[i] * out[i];
      return s;
    };
    const Vector numeric = oracle::central_difference(objective, params, 1e-5);
    CHECK(oracle::max_relative_error(analytic, numeric, 1e-6) < 1e-4);
  }
}

TEST_CASE("flatten order and parameter count") {
  const Mlp f = single(Matrix{{1.5, -2.5}}, {0.75}, Activation::Identity, OutputKind::RegressionScalar);
  CHECK(f.flatten() == Vector{1.5, -2.5, 0.75});

  // 8*16 + 16 + 16*16 + 16 + 16*1 + 1
  Rng rng(3);
  const std::size_t hidden[] = {16, 16};
  CHECK(Mlp::glorot(8, hidden, OutputKind::BinaryProbability, rng).parameter_count() == 433);
  const std::size_t one_hidden[] = {16};
  CHECK(Mlp::glorot(8, one_hidden, OutputKind::BinaryProbability, rng).parameter_count() == 161);
}

TEST_CASE("flatten/unflatten round-trips bit-exactly") {
  std::mt19937_64 meta(7);
  for (int trial = 0; trial < 10; ++trial) {
    Rng rng(meta());
    const std::size_t hidden[] = {1 + meta() % 9, 1 + meta() % 9};
    const Mlp f = Mlp::glorot(1 + meta() % 7, hidden, OutputKind::RegressionScalar, rng);
    Mlp g = f;
    const Vector random = oracle::random_vector(meta, f.parameter_count());
    g.unflatten(random);
    CHECK(g.flatten() == random);
    g.unflatten(f.flatten());
    CHECK(g == f);
  }
  Rng rng(1);
  const std::size_t hidden[] = {2};
  Mlp f = Mlp::glorot(2, hidden, OutputKind::RegressionScalar, rng);
  CHECK_THROWS_AS(f.unflatten(Vector(3)), ShapeError);
}

TEST_CASE("glorot init: biases zero, weights within the Glorot bound") {
  Rng rng(11);
  const std::size_t hidden[] = {12, 7};
  const Mlp f = Mlp::glorot(5, hidden, OutputKind::BinaryProbability, rng);
  for (const auto& layer : f.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.input_dim() + layer.output_dim()));
    for (double w : layer.weight.data()) CHECK(std::abs(w) <= bound);
    for (double b : layer.bias) CHECK(b == 0.0);
  }
  CHECK(f.layers().back().activation == Activation::Sigmoid);
  CHECK(f.layers().front().activation == Activation::ReLU);
}

TEST_CASE("output ranges and determinism") {
  std::mt19937_64 meta(5);
  Rng rng(5);
  const std::size_t hidden[] = {8};
  const Mlp p = Mlp::glorot(4, hidden, OutputKind::BinaryProbability, rng);
  const Matrix x = random_batch(meta, 200, 4);
  const Vector out = p.forward_batch(x);
  for (double v : out) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(p.forward_batch(x) == out);
  const ForwardCache cache = p.forward_cached(x);
  for (double v : cache.post.front().data()) CHECK(v >= 0.0);
  CHECK(cache.outputs() == out);
}

TEST_CASE("activation and output kind names") {
  for (auto a : {Activation::ReLU, Activation::Identity, Activation::Sigmoid}) {
    CHECK(activation_from_string(to_string(a)) == a);
  }
  for (auto k : {OutputKind::RegressionScalar, OutputKind::BinaryProbability}) {
    CHECK(output_kind_from_string(to_string(k)) == k);
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Vector p{1.0, -2.0, 3.0};
  AdamState s = AdamState::fresh(3);
  adam_step(p, Vector(3, 0.0), s, 0.1);
  CHECK(p == Vector{1.0, -2.0, 3.0});
  CHECK(s.step_count == 1);
}

TEST_CASE("adam: first step moves each parameter by about -lr * sign(g)") {
  Vector p{0.0, 0.0, 0.0};
  AdamState s = AdamState::fresh(3);
  adam_step(p, Vector{3.0, -0.02, 1e3}, s, 0.01);
  CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-5));
  CHECK(p[2] == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("adam: three steps on w^2 from w=1 match a hand-rolled reference") {
  double w = 1.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Vector p{1.0};
  AdamState s = AdamState::fresh(1);
  for (int t = 1; t <= 3; ++t) {
    const double g = 2.0 * w;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    w -= lr * mhat / (std::sqrt(vhat) + eps);

    adam_step(p, Vector{2.0 * p[0]}, s, lr);
    CHECK(p[0] == doctest::Approx(w).epsilon(1e-14));
  }
}

TEST_CASE("adam: non-finite gradient is rejected before any update") {
  Vector p{1.0, 2.0};
  AdamState s = AdamState::fresh(2);
  CHECK_THROWS_AS(adam_step(p, Vector{1.0, NAN}, s, 0.1), NumericError);
  CHECK(p == Vector{1.0, 2.0});
  CHECK(s.step_count == 0);
  CHECK_THROWS_AS(adam_step(p, Vector{1.0}, s, 0.1), ShapeError);
}
