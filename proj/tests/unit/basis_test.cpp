#include <random>

#include <gtest/gtest.h>

#include "occlp/basis.hpp"

using namespace occlp;

namespace {
long binomial(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Eigen::Index find(const BasisSpec& b, std::initializer_list<int> alpha) {
  Eigen::VectorXi a(static_cast<Eigen::Index>(alpha.size()));
  Eigen::Index i = 0;
  for (int x : alpha) a[i++] = x;
  for (Eigen::Index r = 0; r < b.size(); ++r) {
    if (b.exponents.row(r).transpose() == a) return r;
  }
  return -1;
}
}  // namespace

TEST(Basis, LinearBasis) {
  const auto b = enumerate_basis(2, 1);
  ASSERT_EQ(b.size(), 2);
  EXPECT_EQ(b.exponents(0, 0) + b.exponents(1, 0), 1);
  EXPECT_GE(find(b, {1, 0}), 0);
  EXPECT_GE(find(b, {0, 1}), 0);
}

TEST(Basis, CountsMatchBinomials) {
  for (int m = 1; m <= 3; ++m) {
    for (int d = 1; d <= 6; ++d) {
      EXPECT_EQ(enumerate_basis(m, d).size(), binomial(m + d, d) - 1) << "m=" << m << " d=" << d;
    }
  }
  EXPECT_EQ(enumerate_basis(2, 2).size(), 5);
  EXPECT_EQ(enumerate_basis(3, 3).size(), 19);
}

TEST(Basis, NoConstantAndDegreesGraded) {
  const auto b = enumerate_basis(2, 4);
  int prev = 0;
  for (Eigen::Index r = 0; r < b.size(); ++r) {
    const int deg = b.exponents.row(r).sum();
    EXPECT_GE(deg, 1);
    EXPECT_GE(deg, prev);
    prev = deg;
  }
  EXPECT_THROW(enumerate_basis(2, 0), std::invalid_argument);
}

TEST(Basis, HandComputedValuesAndGradients) {
  const auto b = enumerate_basis(2, 3);
  const Eigen::Index y1y2 = find(b, {1, 1});
  EXPECT_DOUBLE_EQ(eval_phi(b, y1y2, Eigen::Vector2d(1, 2)), 2.0);
  EXPECT_EQ(eval_grad_phi(b, y1y2, Eigen::Vector2d(1, 2)), Eigen::Vector2d(2, 1));

  const Eigen::Index sq = find(b, {2, 0});
  EXPECT_DOUBLE_EQ(eval_phi(b, sq, Eigen::Vector2d(0, 7)), 0.0);
  EXPECT_TRUE(eval_grad_phi(b, sq, Eigen::Vector2d(0, 7)).isZero(0.0));

  const Eigen::Index cub = find(b, {2, 1});
  EXPECT_DOUBLE_EQ(eval_phi(b, cub, Eigen::Vector2d(2, 3)), 12.0);
  EXPECT_EQ(eval_grad_phi(b, cub, Eigen::Vector2d(2, 3)), Eigen::Vector2d(12, 4));
}

TEST(Basis, ScalingMapsBoxToUnitCube) {
  BoxShape box{Eigen::Vector2d(0, -2), Eigen::Vector2d(4, 2)};
  const auto b = enumerate_basis(2, 2, AffineScaling::from_box(box));
  const Eigen::Index lin = find(b, {1, 0});
  // s1 = (y1 - 2) / 2
  EXPECT_DOUBLE_EQ(eval_phi(b, lin, Eigen::Vector2d(4, 0)), 1.0);
  EXPECT_DOUBLE_EQ(eval_phi(b, lin, Eigen::Vector2d(0, 0)), -1.0);
  EXPECT_DOUBLE_EQ(eval_grad_phi(b, lin, Eigen::Vector2d(1, 1))[0], 0.5);
}

TEST(Basis, FiniteDifferenceGradients) {
  BoxShape box{Eigen::Vector3d(-1.5, -1.5, 0), Eigen::Vector3d(1.5, 1.5, 2)};
  const auto b = enumerate_basis(3, 4, AffineScaling::from_box(box));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double h = 1e-6;
  for (int p = 0; p < 100; ++p) {
    Eigen::Vector3d y;
    for (int d = 0; d < 3; ++d) y[d] = box.lower[d] + 0.5 * (unit(rng) + 1.0) * (box.upper[d] - box.lower[d]);
    const Eigen::MatrixXd grads = phi_gradients(b, y);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      for (int d = 0; d < 3; ++d) {
        Eigen::Vector3d yp = y, ym = y;
        yp[d] += h;
        ym[d] -= h;
        const double fd = (eval_phi(b, i, yp) - eval_phi(b, i, ym)) / (2 * h);
        EXPECT_NEAR(grads(i, d), fd, 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(Basis, CombinationIsLinear) {
  const auto b = enumerate_basis(2, 3);
  Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(b.size(), -1.0, 1.0);
  const Eigen::Vector2d y(0.3, -0.8);
  EXPECT_NEAR(combination_value(b, c, y), c.dot(phi_values(b, y)), 1e-15);
  EXPECT_TRUE(combination_gradient(b, c, y).isApprox(phi_gradients(b, y).transpose() * c));
}
