#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "occlp/grid.hpp"

using namespace occlp;

namespace {
Eigen::VectorXd v(std::initializer_list<double> xs) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

Eigen::Index find(const BasisSpec& b, std::initializer_list<int> alpha) {
  for (Eigen::Index r = 0; r < b.size(); ++r) {
    Eigen::Index i = 0;
    bool same = true;
    for (int x : alpha) same = same && b.exponents(r, i++) == x;
    if (same) return r;
  }
  return -1;
}

GridOptions annulus_options(int nr, int nth, int nu, Placement radial = Placement::Nodes) {
  GridOptions o;
  o.state_resolution = {nr, nth};
  o.control_resolution = {nu};
  o.radial_placement = radial;
  return o;
}
}  // namespace

TEST(Grid, SingleCircleEnumeration) {
  // One radial cell of [0.5, 1.5] is the unit circle.
  const auto spec = make_rotation_system(0.5, 1.5);
  const Grid g = build_grid(spec, annulus_options(1, 4, 3, Placement::Midpoint));
  ASSERT_EQ(g.size(), 12);
  const double pi = std::numbers::pi;
  for (Eigen::Index a = 0; a < g.size(); ++a) {
    const double r = g.states().col(a).norm();
    EXPECT_NEAR(r, 1.0, 1e-15);
    const double angle = std::atan2(g.states()(1, a), g.states()(0, a));
    const double k = std::remainder(angle, pi / 2);
    EXPECT_NEAR(k, 0.0, 1e-12);
    const double u = g.controls()(0, a);
    EXPECT_TRUE(u == -1.0 || u == 0.0 || u == 1.0);
  }
  EXPECT_TRUE(g.polar());
}

TEST(Grid, BoxMidpoints) {
  CustomSystemDecl decl;
  decl.dynamics = {"0"};
  const auto spec = make_custom_system(decl, StateRegion::box(v({0}), v({1})), ControlRegion::box(v({0}), v({1})));
  GridOptions o;
  o.state_resolution = {2};
  o.control_resolution = {2};
  o.control_placement = Placement::Midpoint;
  const Grid g = build_grid(spec, o);
  ASSERT_EQ(g.size(), 4);
  for (Eigen::Index a = 0; a < 4; ++a) {
    EXPECT_TRUE(g.states()(0, a) == 0.25 || g.states()(0, a) == 0.75);
    EXPECT_TRUE(g.controls()(0, a) == 0.25 || g.controls()(0, a) == 0.75);
  }
}

TEST(Grid, RadialMidpointsAndNodes) {
  const auto spec = make_rotation_system(0.5, 1.5);
  const Grid mid = build_grid(spec, annulus_options(3, 8, 3, Placement::Midpoint));
  std::vector<double> radii;
  for (Eigen::Index a = 0; a < mid.size(); a += 8 * 3) radii.push_back(mid.states().col(a).norm());
  ASSERT_EQ(radii.size(), 3u);
  EXPECT_NEAR(radii[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(radii[1], 1.0, 1e-15);
  EXPECT_NEAR(radii[2], 4.0 / 3.0, 1e-15);

  const Eigen::VectorXd nodes = axis_points(0.5, 1.5, 5, Placement::Nodes);
  EXPECT_EQ(nodes, v({0.5, 0.75, 1.0, 1.25, 1.5}));
}

TEST(Grid, AnchorAddsRingThroughY0) {
  const auto spec = make_rotation_system(0.5, 1.5);
  const auto opt = annulus_options(5, 16, 3);
  const Grid plain = build_grid(spec, opt);
  // (1, 0) is already an atom with node placement.
  EXPECT_EQ(build_grid(spec, opt, {v({1, 0})}).size(), plain.size());
  const Grid anchored = build_grid(spec, opt, {v({0, 1.1})});
  ASSERT_EQ(anchored.size(), plain.size() + 16 * 3);
  const Eigen::Index first = plain.size();
  EXPECT_NEAR((anchored.states().col(first) - v({0, 1.1})).norm(), 0.0, 1e-15);
  EXPECT_NE(anchored.fingerprint(), plain.fingerprint());
  EXPECT_THROW(build_grid(spec, opt, {v({3, 0})}), std::invalid_argument);
}

TEST(Grid, FlowMatrixExamples) {
  const auto spec = make_rotation_system(0.5, 1.5);
  const auto basis = enumerate_basis(2, 4);
  const Grid g = build_grid(spec, annulus_options(3, 12, 5));
  const Eigen::MatrixXd B = assemble_flow_matrix(g, basis, spec);
  // y1^2 + y2^2 and its square are first integrals: rows y1^2, y2^2 sum to zero, etc.
  const Eigen::Index s20 = find(basis, {2, 0}), s02 = find(basis, {0, 2});
  EXPECT_LE((B.row(s20) + B.row(s02)).cwiseAbs().maxCoeff(), 1e-14);
  const Eigen::Index q40 = find(basis, {4, 0}), q22 = find(basis, {2, 2}), q04 = find(basis, {0, 4});
  EXPECT_LE((B.row(q40) + 2 * B.row(q22) + B.row(q04)).cwiseAbs().maxCoeff(), 1e-13);

  // Direct substitution: phi = y1, f1 = u y2.
  const Eigen::Index lin = find(basis, {1, 0});
  for (Eigen::Index a = 0; a < g.size(); ++a) {
    EXPECT_NEAR(B(lin, a), g.controls()(0, a) * g.states()(1, a), 1e-15);
  }
}

TEST(Grid, FlowMatrixAtExplicitAtom) {
  const auto spec = make_rotation_system(0.5, 1.5);
  const auto basis = enumerate_basis(2, 1);
  Eigen::MatrixXd y(2, 1), u(1, 1);
  y << 0, 1;
  u << 1;
  const Grid g(y, u, GridOptions{}, true);
  const Eigen::MatrixXd B = assemble_flow_matrix(g, basis, spec);
  EXPECT_DOUBLE_EQ(B(find(basis, {1, 0}), 0), 1.0);
  EXPECT_DOUBLE_EQ(B(find(basis, {0, 1}), 0), 0.0);
}

TEST(Grid, FrozenFlowMatrixIsZero) {
  const auto spec = make_frozen_system();
  GridOptions o;
  o.state_resolution = {4, 4};
  o.control_resolution = {3};
  const Grid g = build_grid(spec, o);
  EXPECT_TRUE(assemble_flow_matrix(g, enumerate_basis(2, 3), spec).isZero(0.0));
}

TEST(Grid, InitialMatrixExamples) {
  const auto spec = make_rotation_system(0.5, 1.5);
  const auto basis = enumerate_basis(2, 3);
  const Grid g = build_grid(spec, annulus_options(5, 8, 3));
  const Eigen::VectorXd y0 = v({1, 0});
  const Eigen::MatrixXd C = assemble_initial_matrix(g, basis, spec, y0);
  const Eigen::Index lin = find(basis, {1, 0});
  for (Eigen::Index a = 0; a < g.size(); ++a) {
    const Eigen::VectorXd ya = g.states().col(a);
    if ((ya - y0).norm() < 1e-15) {
      EXPECT_TRUE(C.col(a).isZero(0.0));
    }
    if ((ya - v({-1, 0})).norm() < 1e-12) {
      EXPECT_NEAR(C(lin, a), 2.0, 1e-12);
    }
  }
}

TEST(Grid, FrozenInitialRowsForceMomentMatch) {
  // C gamma = 0 for a probability measure means int phi dgamma = phi(y0) for every phi.
  const auto spec = make_frozen_system();
  const auto basis = enumerate_basis(2, 3);
  GridOptions o;
  o.state_resolution = {4, 4};
  o.control_resolution = {3};
  const Eigen::VectorXd y0 = v({-0.75, 0.25});
  const Grid g = build_grid(spec, o, {y0});
  const Eigen::MatrixXd C = assemble_initial_matrix(g, basis, spec, y0);
  DiscreteMeasure at_y0 = DiscreteMeasure::zero(g);
  DiscreteMeasure elsewhere = DiscreteMeasure::zero(g);
  for (Eigen::Index a = 0; a < g.size(); ++a) {
    if ((g.states().col(a) - y0).norm() < 1e-15) at_y0.weights[a] = 1.0 / 3.0;
  }
  elsewhere.weights[0] = 1.0;
  EXPECT_LE((C * at_y0.weights).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GT((C * elsewhere.weights).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Grid, CostVectorExamples) {
  const auto constant = make_rotation_system(0.5, 1.5, "3");
  const auto opt = annulus_options(1, 4, 3, Placement::Midpoint);
  const Grid g = build_grid(constant, opt);
  EXPECT_TRUE((assemble_cost_vector(g, constant).array() == 3.0).all());

  const auto first = make_rotation_system(0.5, 1.5, "y1");
  const Eigen::VectorXd c = assemble_cost_vector(g, first);
  const auto mixed = make_rotation_system(0.5, 1.5, "y1 + u1^2");
  const Eigen::VectorXd cm = assemble_cost_vector(g, mixed);
  for (Eigen::Index a = 0; a < g.size(); ++a) {
    if ((g.states().col(a) - v({-1, 0})).norm() < 1e-12) {
      EXPECT_NEAR(c[a], -1.0, 1e-15);
    }
    if ((g.states().col(a) - v({0, 1})).norm() < 1e-12 && g.controls()(0, a) == -1.0) {
      EXPECT_NEAR(cm[a], 1.0, 1e-15);
    }
  }
}

TEST(Grid, IntegrateMeasureExamples) {
  Eigen::MatrixXd y(1, 4), u(1, 4);
  y << 0, 1, 2, 3;
  u.setZero();
  const Grid g(y, u, GridOptions{}, false);
  EXPECT_DOUBLE_EQ(integrate_measure(DiscreteMeasure::uniform(g), v({1, 2, 3, 4})), 2.5);
  EXPECT_DOUBLE_EQ(integrate_measure(DiscreteMeasure::dirac(g, 2), v({7, -1, 9, 4})), 9.0);
  Eigen::MatrixXd y2(1, 2), u2(1, 2);
  y2 << 0, 1;
  u2.setZero();
  const Grid g2(y2, u2, GridOptions{}, false);
  DiscreteMeasure m{v({0.25, 0.75}), g2.fingerprint()};
  EXPECT_DOUBLE_EQ(integrate_measure(m, v({0, 4})), 3.0);
}

TEST(Grid, MeasureValidation) {
  Eigen::MatrixXd y(1, 2), u(1, 2);
  y << 0, 1;
  u.setZero();
  const Grid g(y, u, GridOptions{}, false);
  EXPECT_NO_THROW(validate_measure(DiscreteMeasure::uniform(g), true));
  EXPECT_THROW(validate_measure(DiscreteMeasure{v({-0.1, 1.1}), g.fingerprint()}, false), std::invalid_argument);
  EXPECT_THROW(validate_measure(DiscreteMeasure{v({0.2, 0.2}), g.fingerprint()}, true), std::invalid_argument);
  EXPECT_THROW(integrate_measure(DiscreteMeasure::uniform(g), v({1, 2, 3})), std::invalid_argument);
}

TEST(Grid, AssemblyIsDeterministic) {
  const auto spec = make_rotation_system(0.5, 1.5);
  const auto basis = enumerate_basis(2, 4);
  const auto opt = annulus_options(5, 32, 9);
  const Grid a = build_grid(spec, opt), b = build_grid(spec, opt);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(assemble_flow_matrix(a, basis, spec), assemble_flow_matrix(b, basis, spec));
}

TEST(Grid, UniformCircleResidualShrinksUnderRefinement) {
  // Uniform measure on one circle at u = 1 is invariant in the limit n_theta -> inf.
  const auto spec = make_rotation_system(0.5, 1.5);
  const auto basis = enumerate_basis(2, 4);
  double prev = 1e9;
  for (int nth : {8, 16, 32, 64}) {
    Eigen::MatrixXd y(2, nth), u(1, nth);
    for (int j = 0; j < nth; ++j) {
      const double t = 2 * std::numbers::pi * (j + 0.37) / nth;
      y.col(j) = Eigen::Vector2d(std::cos(t), std::sin(t));
      u(0, j) = 1.0;
    }
    const Grid g(y, u, GridOptions{}, true);
    const double r = (assemble_flow_matrix(g, basis, spec) * DiscreteMeasure::uniform(g).weights).cwiseAbs().maxCoeff();
    EXPECT_LE(r, prev + 1e-15);
    prev = r;
  }
  EXPECT_LE(prev, 1e-12);
}

TEST(Grid, NearestAtom) {
  const auto spec = make_rotation_system(0.5, 1.5);
  const Grid g = build_grid(spec, annulus_options(5, 16, 3));
  for (Eigen::Index a = 0; a < g.size(); a += 7) {
    EXPECT_EQ(g.nearest_atom(g.states().col(a), g.controls().col(a)), a);
  }
  // Brute force against a random query.
  const Eigen::VectorXd y = v({0.31, -0.92}), u = v({0.4});
  Eigen::Index best = 0;
  double bd = 1e300;
  for (Eigen::Index a = 0; a < g.size(); ++a) {
    const double d = (g.states().col(a) - y).squaredNorm() + (g.controls().col(a) - u).squaredNorm();
    if (d < bd) bd = d, best = a;
  }
  EXPECT_EQ(g.nearest_atom(y, u), best);
}
