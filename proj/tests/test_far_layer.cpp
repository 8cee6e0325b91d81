#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "far/dct.hpp"
#include "far/nn_ops.hpp"
#include "support.hpp"

using namespace far;
using test::central_diff;
using test::random_tensor;
using test::rel_err;

TEST_CASE("1x1 bank is the single value 1") {
  DctBank bank(1, 1);
  CHECK(bank.value(0, 0, 0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("3x3 DC kernel is constant 1/3") {
  DctBank bank(3, 3);
  for (int h = 0; h < 3; ++h) {
    for (int w = 0; w < 3; ++w) {
      CHECK(bank.value(0, 0, h, w) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("bank kernels are pairwise orthonormal") {
  for (int size = 1; size <= 7; ++size) {
    DctBank bank(size, size);
    const int subbands = size * size;
    double max_err = 0.0;
    for (int a = 0; a < subbands; ++a) {
      for (int b = 0; b < subbands; ++b) {
        const double* ka = bank.basis(a / size, a % size);
        const double* kb = bank.basis(b / size, b % size);
        double dot = 0.0;
        for (int t = 0; t < subbands; ++t) dot += ka[t] * kb[t];
        max_err = std::max(max_err, std::fabs(dot - (a == b ? 1.0 : 0.0)));
      }
    }
    CHECK(max_err < 1e-12);
  }
}

TEST_CASE("bank rejects non-positive sizes") {
  CHECK_THROWS_AS(DctBank(0, 3), ShapeError);
  CHECK_THROWS_AS(DctBank(3, -1), ShapeError);
}

TEST_CASE("reparameterize of zero weights is zero") {
  DctBank bank(3, 3);
  Tensor v({2, 2, 3, 3});
  CHECK(reparameterize(v, bank).max_abs() == 0.0);
}

TEST_CASE("one-hot weights select the basis kernel") {
  DctBank bank(3, 3);
  Tensor v({1, 2, 3, 3});
  v(0, 1, 1, 2) = 1.0;
  Tensor k = reparameterize(v, bank);
  for (int h = 0; h < 3; ++h) {
    for (int w = 0; w < 3; ++w) {
      CHECK(k(0, 1, h, w) == doctest::Approx(bank.value(1, 2, h, w)).epsilon(1e-15));
      CHECK(k(0, 0, h, w) == 0.0);
    }
  }
}

TEST_CASE("reparameterize matches the four-loop oracle") {
  Rng rng(21);
  DctBank bank(3, 3);
  Tensor v = random_tensor({2, 2, 3, 3}, rng);
  Tensor k = reparameterize(v, bank);
  for (int m = 0; m < 2; ++m)
    for (int n = 0; n < 2; ++n)
      for (int h = 0; h < 3; ++h)
        for (int w = 0; w < 3; ++w) {
          double acc = 0.0;
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
              acc += v(m, n, i, j) * bank.value(i, j, h, w);
          CHECK(std::fabs(k(m, n, h, w) - acc) < 1e-12);
        }
}

TEST_CASE("projection inverts reparameterization") {
  Rng rng(22);
  DctBank bank(3, 3);

  // Basis kernel projects to a one-hot.
  Tensor basis_k({1, 1, 3, 3});
  for (int h = 0; h < 3; ++h)
    for (int w = 0; w < 3; ++w) basis_k(0, 0, h, w) = bank.value(2, 1, h, w);
  Tensor v = project_to_frequency(basis_k, bank);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double want = (i == 2 && j == 1) ? 1.0 : 0.0;
      CHECK(v(0, 0, i, j) == doctest::Approx(want).epsilon(1e-12));
    }

  CHECK(project_to_frequency(Tensor({2, 3, 3, 3}), bank).max_abs() == 0.0);

  // Round trips in both directions.
  Tensor k = random_tensor({3, 2, 3, 3}, rng);
  Tensor k2 = reparameterize(project_to_frequency(k, bank), bank);
  for (std::int64_t i = 0; i < k.size(); ++i) {
    CHECK(std::fabs(k.data()[i] - k2.data()[i]) < 1e-12);
  }
  Tensor vv = random_tensor({2, 2, 3, 3}, rng);
  Tensor vv2 = project_to_frequency(reparameterize(vv, bank), bank);
  for (std::int64_t i = 0; i < vv.size(); ++i) {
    CHECK(std::fabs(vv.data()[i] - vv2.data()[i]) < 1e-12);
  }
}

TEST_CASE("basis change preserves the Euclidean norm") {
  Rng rng(23);
  for (int size : {1, 3, 5}) {
    DctBank bank(size, size);
    Tensor v = random_tensor({2, 2, size, size}, rng);
    Tensor k = reparameterize(v, bank);
    CHECK(std::sqrt(k.squared_norm()) ==
          doctest::Approx(std::sqrt(v.squared_norm())).epsilon(1e-12));
  }
}

TEST_CASE("shape mismatches are rejected") {
  DctBank bank(3, 3);
  Tensor wrong({1, 1, 5, 5});
  CHECK_THROWS_AS(reparameterize(wrong, bank), ShapeError);
  CHECK_THROWS_AS(project_to_frequency(wrong, bank), ShapeError);
  CHECK_THROWS_AS(far_gradient(wrong, bank), ShapeError);
}

TEST_CASE("far_gradient is the adjoint of basis synthesis") {
  DctBank bank(3, 3);
  CHECK(far_gradient(Tensor({1, 1, 3, 3}), bank).max_abs() == 0.0);

  Tensor g({1, 1, 3, 3});
  for (int h = 0; h < 3; ++h)
    for (int w = 0; w < 3; ++w) g(0, 0, h, w) = bank.value(0, 2, h, w);
  Tensor gv = far_gradient(g, bank);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double want = (i == 0 && j == 2) ? 1.0 : 0.0;
      CHECK(gv(0, 0, i, j) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("loss gradient w.r.t. V matches finite differences end to end") {
  Rng rng(24);
  DctBank bank(3, 3);
  Tensor input = random_tensor({1, 2, 5, 5}, rng);
  Tensor v = random_tensor({2, 2, 3, 3}, rng);
  Tensor target = random_tensor({1, 2, 5, 5}, rng);
  std::vector<double> bias(2, 0.0);

  auto loss = [&](const Tensor& vv) {
    Tensor k = reparameterize(vv, bank);
    Tensor out = conv2d_forward(input, k, bias);
    return mse_loss(out, target).loss;
  };

  // Analytic: conv kernel gradient projected onto the bank.
  Tensor k = reparameterize(v, bank);
  Tensor out = conv2d_forward(input, k, bias);
  MseResult r = mse_loss(out, target);
  ConvGrads cg = conv2d_backward(input, k, r.grad_prediction);
  Tensor gv = far_gradient(cg.kernels, bank);

  for (std::int64_t i = 0; i < v.size(); ++i) {
    const double fd = central_diff(loss, v, i);
    CHECK(rel_err(gv.data()[i], fd) < 1e-4);
  }
}

TEST_CASE("projected initialization gives bit-close forward equality") {
  Rng rng(25);
  DctBank bank(3, 3);
  Tensor k = random_tensor({3, 4, 3, 3}, rng);
  Tensor input = random_tensor({1, 3, 8, 8}, rng);
  std::vector<double> bias = {0.1, -0.1, 0.2, 0.0};

  Tensor v = project_to_frequency(k, bank);
  Tensor k_far = reparameterize(v, bank);
  Tensor a = conv2d_forward(input, k, bias);
  Tensor b = conv2d_forward(input, k_far, bias);
  for (std::int64_t i = 0; i < a.size(); ++i) {
    CHECK(std::fabs(a.data()[i] - b.data()[i]) < 1e-12);
  }
}
