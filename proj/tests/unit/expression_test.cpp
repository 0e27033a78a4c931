#include <cmath>

#include <gtest/gtest.h>

#include "occlp/expression.hpp"

using occlp::Expression;

namespace {
Eigen::VectorXd v(std::initializer_list<double> xs) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}
}  // namespace

TEST(Expression, ArithmeticAndPrecedence) {
  const auto e = Expression::parse("1 + 2*y1^2 - y2/4");
  EXPECT_DOUBLE_EQ(e(v({3, 8})), 1 + 18 - 2);
  EXPECT_DOUBLE_EQ(Expression::parse("-2^2")(v({0})), -4.0);
  EXPECT_DOUBLE_EQ(Expression::parse("2^3^2")(v({0})), 512.0);
  EXPECT_DOUBLE_EQ(Expression::parse("(1 + 2) * 3")(v({0})), 9.0);
}

TEST(Expression, FunctionsAndControls) {
  const auto e = Expression::parse("sin(y1) + cos(u1) + exp(0) + sqrt(4) + pi");
  EXPECT_NEAR(e(v({0.3}), v({0.2})), std::sin(0.3) + std::cos(0.2) + 1 + 2 + M_PI, 1e-15);
  EXPECT_EQ(e.max_state_index(), 1);
  EXPECT_EQ(e.max_control_index(), 1);
  EXPECT_FALSE(e.is_constant());
  EXPECT_TRUE(Expression::parse("3 * 2").is_constant());
}

TEST(Expression, SymbolicDerivativeMatchesHandDerivative) {
  // d/dy1 of y1^2 y2 + sin(y1) is 2 y1 y2 + cos(y1)
  const auto e = Expression::parse("y1^2*y2 + sin(y1)");
  const auto d = e.derivative_state(0);
  for (double a : {-1.0, 0.2, 2.0}) {
    EXPECT_NEAR(d(v({a, 3.0})), 2 * a * 3.0 + std::cos(a), 1e-14);
  }
  EXPECT_NEAR(e.derivative_state(1)(v({2.0, 5.0})), 4.0, 1e-14);
}

TEST(Expression, RejectsMalformedInput) {
  EXPECT_THROW(Expression::parse("1 +"), std::invalid_argument);
  EXPECT_THROW(Expression::parse("(y1"), std::invalid_argument);
  EXPECT_THROW(Expression::parse("foo(y1)"), std::invalid_argument);
  EXPECT_THROW(Expression::parse("y0"), std::invalid_argument);
  EXPECT_THROW(Expression::parse(""), std::invalid_argument);
}

TEST(Expression, MissingVariableThrows) {
  const auto e = Expression::parse("y3");
  EXPECT_THROW(e(v({1, 2})), std::exception);
}
