#include <doctest.h>

#include <cmath>

#include "fpdhf/error.hpp"
#include "fpdhf/linops.hpp"
#include "fpdhf/probes.hpp"
#include "test_support.hpp"

using namespace fpdhf;

TEST_CASE("discrete gradient on small grids") {
  SUBCASE("1x2") {
    ImageGrid img(1, 2, Vector{{3.0, 5.0}});
    const Vector g = discrete_gradient(img);
    CHECK(g[0] == 2.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 0.0);
    CHECK(g[3] == 0.0);
  }
  SUBCASE("2x2 hand evaluation") {
    ImageGrid img(2, 2, Vector{{0.0, 1.0, 2.0, 3.0}});
    const Vector g = discrete_gradient(img);
    const Vector expected{{1.0, 0.0, 1.0, 0.0, 2.0, 2.0, 0.0, 0.0}};
    CHECK(g == expected);
  }
  SUBCASE("constant image has zero gradient") {
    ImageGrid img(5, 7, Vector::Constant(35, 0.7));
    CHECK(discrete_gradient(img).isZero(0.0));
  }
  CHECK_THROWS_AS(discrete_gradient(Vector::Zero(5), 2, 3), ContractViolation);
}

TEST_CASE("discrete divergence is the adjoint of the gradient") {
  CHECK(discrete_divergence(Vector::Zero(8), 2, 2).isZero(0.0));
  CHECK_THROWS_AS(discrete_divergence(Vector::Zero(7), 2, 2), ContractViolation);
  CHECK_THROWS_AS(discrete_divergence(Vector::Zero(10), 2, 2), ContractViolation);

  // 50 random pairs on an 8x8 grid, unit-scale probes.
  for (std::uint64_t k = 0; k < 50; ++k) {
    const Vector x = random_vector(64, 100 + k);
    const Vector y = random_vector(128, 900 + k);
    const double lhs = discrete_gradient(x, 8, 8).dot(y);
    const double rhs = x.dot(discrete_divergence(y, 8, 8));
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }

  const Vector c = Vector::Constant(48, 2.5);
  CHECK(discrete_divergence(discrete_gradient(c, 6, 8), 6, 8).isZero(0.0));
}

TEST_CASE("gradient norm bound") {
  CHECK(gradient_norm_bound(512, 512) == doctest::Approx(2.8284271).epsilon(1e-8));
  CHECK_THROWS_AS(gradient_norm_bound(1, 5), ContractViolation);
  const double est16 = power_iteration_norm(gradient_map(16, 16), 500, 3);
  CHECK(est16 <= std::sqrt(8.0) + 1e-9);
  const double est64 = power_iteration_norm(gradient_map(64, 64), 300, 3);
  CHECK(est64 >= 2.7);
  CHECK(est64 <= std::sqrt(8.0) + 1e-9);
  for (Index n : {2, 3, 7, 20}) {
    CHECK(power_iteration_norm(gradient_map(n, n + 1), 200, 9) <= std::sqrt(8.0) + 1e-9);
  }
}

TEST_CASE("haar transform") {
  SUBCASE("constant 2x2, one level") {
    const double c = 1.5;
    const Vector w = haar_dwt(ImageGrid(2, 2, Vector::Constant(4, c)), 1);
    CHECK(w[0] == doctest::Approx(2.0 * c).epsilon(1e-15));
    CHECK(std::abs(w[1]) < 1e-15);
    CHECK(std::abs(w[2]) < 1e-15);
    CHECK(std::abs(w[3]) < 1e-15);
  }
  SUBCASE("isometry on random 32x32") {
    for (std::uint64_t k = 0; k < 10; ++k) {
      const ImageGrid img(32, 32, random_vector(1024, k));
      const double n = img.pixels().norm();
      CHECK(std::abs(haar_dwt(img, 3).norm() - n) <= 1e-12 * n);
    }
  }
  SUBCASE("round trip on random 64x64") {
    const ImageGrid img(64, 64, random_vector(4096, 77));
    const ImageGrid back = haar_idwt(haar_dwt(img, 3), 64, 64, 3);
    CHECK((back.pixels() - img.pixels()).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("inverse of zero and of a unit coefficient") {
    CHECK(haar_idwt(Vector::Zero(64), 8, 8, 3).pixels().isZero(0.0));
    Vector e = Vector::Zero(64);
    e[13] = 1.0;
    CHECK(haar_idwt(e, 8, 8, 3).pixels().norm() == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("adjoint probe") {
    const auto r = probe_adjoint(haar_map(16, 32, 3), 50, 5, 1e-12);
    CHECK(r.violations == 0);
  }
  CHECK_THROWS_AS(haar_dwt(ImageGrid(12, 16), 3), ContractViolation);
  CHECK_THROWS_AS(haar_map(16, 16, 0), ContractViolation);
}

TEST_CASE("gaussian blur") {
  const Matrix k = gaussian_kernel(9, 4.0);
  CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k(0, 0) == doctest::Approx(k(8, 8)));
  CHECK(k(4, 4) == k.maxCoeff());

  const ImageGrid flat(16, 16, Vector::Constant(256, 0.42));
  const ImageGrid blurred = gaussian_blur(flat, 9, 4.0);
  CHECK((blurred.pixels().array() - 0.42).abs().maxCoeff() <= 1e-14);

  const LinearMap t = blur_map(32, 32, 9, 4.0);
  CHECK(std::abs(power_iteration_norm(t, 200, 1) - 1.0) <= 1e-6);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Vector x = random_vector(1024, s), y = random_vector(1024, 50 + s);
    CHECK(std::abs(t.apply(x).dot(y) - x.dot(t.apply(y))) <= 1e-12);
  }

  // Matches a direct 2-D periodic convolution with the 9x9 kernel.
  const ImageGrid img(12, 10, random_vector(120, 4));
  const ImageGrid fast = gaussian_blur(img, 9, 4.0);
  double worst = 0.0;
  for (Index r = 0; r < 12; ++r) {
    for (Index c = 0; c < 10; ++c) {
      double acc = 0.0;
      for (int i = -4; i <= 4; ++i)
        for (int j = -4; j <= 4; ++j)
          acc += k(i + 4, j + 4) * img(((r + i) % 12 + 12) % 12, ((c + j) % 10 + 10) % 10);
      worst = std::max(worst, std::abs(acc - fast(r, c)));
    }
  }
  CHECK(worst <= 1e-14);
  CHECK_THROWS_AS(gaussian_blur(img, 8, 4.0), ContractViolation);
  CHECK_THROWS_AS(gaussian_blur(img, 9, 0.0), ContractViolation);
}

TEST_CASE("power iteration") {
  CHECK(power_iteration_norm(identity_map(7), 5, 1) == doctest::Approx(1.0).epsilon(1e-15));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  CHECK(std::abs(power_iteration_norm(matrix_map(d), 100, 2) - 3.0) <= 1e-9);
  CHECK(power_iteration_norm(scaled_identity_map(4, 0.0), 10, 1) == 0.0);

  const Matrix m = testing::random_matrix(10, 10, 42);
  const double svd = testing::spectral_norm(m);
  CHECK(std::abs(power_iteration_norm(matrix_map(m), 5000, 7) - svd) <= 1e-6);

  // Nondecreasing in the iteration count, never above the true norm.
  double prev = 0.0;
  for (int it : {1, 2, 5, 10, 50, 200}) {
    const double e = power_iteration_norm(matrix_map(m), it, 7);
    CHECK(e >= prev);
    CHECK(e <= svd * (1.0 + 1e-12));
    prev = e;
  }
}

TEST_CASE("shipped linear maps satisfy their contracts") {
  const std::vector<LinearMap> maps = {
      gradient_map(9, 11),       haar_map(16, 8, 3),
      blur_map(10, 14, 9, 4.0),  matrix_map(testing::random_matrix(5, 8, 3)),
      identity_map(6),           compose(gradient_map(8, 8), haar_map(8, 8, 2)),
  };
  for (const auto& m : maps) {
    CHECK(probe_adjoint(m, 50, 11).violations == 0);
    CHECK(probe_linearity(m, 20, 12).violations == 0);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Vector x = random_vector(m.in_dim(), s);
      CHECK(m.apply(x).norm() <= m.norm_bound() * x.norm() * (1.0 + 1e-12));
    }
  }
}
