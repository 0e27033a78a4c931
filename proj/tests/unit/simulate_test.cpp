#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "occlp/metrics.hpp"
#include "occlp/simulate.hpp"

using namespace occlp;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd v(std::initializer_list<double> xs) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

const SystemSpec& rotation() {
  static const SystemSpec spec = make_rotation_system(0.5, 1.5, "y1");
  return spec;
}

Policy constant(const SystemSpec& spec, double u) { return Policy::constant(spec.control_region, v({u})); }

// Atoms on the unit circle at one control value only.
Grid circle_grid(int nth, double u, double phase = 0.0) {
  Eigen::MatrixXd y(2, nth), c(1, nth);
  for (int j = 0; j < nth; ++j) {
    const double t = 2 * kPi * (j + phase) / nth;
    y.col(j) = Eigen::Vector2d(std::cos(t), std::sin(t));
    c(0, j) = u;
  }
  return Grid(y, c, GridOptions{}, true);
}

Grid rotation_grid(int nth) {
  GridOptions o;
  o.state_resolution = {5, nth};
  o.control_resolution = {9};
  return build_grid(rotation(), o);
}

}  // namespace

TEST(Simulate, FrozenStatesStayPut) {
  const auto spec = make_frozen_system();
  const auto traj = integrate(spec, v({0.2, -0.4}), constant(spec, 0.7), 3.0, 0.01);
  for (Eigen::Index j = 0; j < traj.states.cols(); ++j) EXPECT_EQ(traj.states.col(j), v({0.2, -0.4}));
  EXPECT_NEAR(traj.horizon(), 3.0, 1e-12);
  EXPECT_EQ(traj.steps(), 300);
}

TEST(Simulate, LastStepShortened) {
  const auto spec = make_frozen_system();
  const auto traj = integrate(spec, v({0, 0}), constant(spec, 0), 1.0025, 0.01);
  EXPECT_EQ(traj.steps(), 101);
  EXPECT_DOUBLE_EQ(traj.horizon(), 1.0025);
}

TEST(Simulate, RotationLoopClosesAndConservesRadius) {
  const auto traj = integrate(rotation(), v({1, 0}), constant(rotation(), 1.0), 2 * kPi, 1e-3);
  EXPECT_LE((traj.states.rightCols(1) - v({1, 0})).norm(), 1e-6);
  // y(t) = (cos t, -sin t)
  const Eigen::Index mid = traj.states.cols() / 2;
  EXPECT_NEAR(traj.states(0, mid), std::cos(traj.times[mid]), 1e-9);
  EXPECT_NEAR(traj.states(1, mid), -std::sin(traj.times[mid]), 1e-9);

  const auto longrun = integrate(rotation(), v({1.2, 0}), constant(rotation(), 1.0), 100.0, 1e-3);
  const Eigen::ArrayXd r2 = longrun.states.colwise().squaredNorm().transpose().array();
  EXPECT_LE((r2 - 1.44).abs().maxCoeff(), 1e-9);
}

TEST(Simulate, ScalarDriftMatchesExponential) {
  const auto spec = make_scalar_drift_system();
  const auto traj = integrate(spec, v({1.0}), constant(spec, 0.0), 1.0, 1e-3);
  EXPECT_NEAR(traj.states(0, traj.states.cols() - 1), std::exp(-1.0), 1e-6);
}

TEST(Simulate, OutsideStartRejected) {
  EXPECT_THROW(integrate(rotation(), v({2, 0}), constant(rotation(), 1.0), 1.0), std::invalid_argument);
}

TEST(Simulate, CesaroValues) {
  const auto c = make_rotation_system(0.5, 1.5, "0.7");
  EXPECT_NEAR(cesaro_value(integrate(c, v({1, 0}), constant(c, 0.3), 5.0), c), 0.7, 1e-12);
  const auto loop = integrate(rotation(), v({1, 0}), constant(rotation(), 1.0), 2 * kPi, 1e-3);
  EXPECT_NEAR(cesaro_value(loop, rotation()), 0.0, 1e-4);
  const auto steer = Policy::steer_then_hold(rotation().control_region, v({1}), v({-1, 0}), v({0}));
  const auto traj = integrate(rotation(), v({1, 0}), steer, 200.0, 1e-3);
  // pi time units at average cost 0, then cost -1 for the rest.
  EXPECT_NEAR(cesaro_value(traj, rotation()), -(200.0 - kPi) / 200.0, 1e-3);
  EXPECT_NEAR(cesaro_value(traj, rotation()), -1.0, 0.05);
}

TEST(Simulate, AbelClosedForms) {
  const auto c = make_rotation_system(0.5, 1.5, "0.7");
  const double H = abel_horizon(0.5, c.bound_k, 1e-8);
  const auto a = abel_value(c, v({1, 0}), constant(c, 1.0), 0.5, H, 1e-8, 1e-3);
  EXPECT_NEAR(a.value, 0.7, a.tail_bound + 1e-12);
  EXPECT_LE(a.tail_bound, 1e-8 * (1 + 1e-12));

  // lambda int e^{-lambda t} cos t dt = lambda^2 / (lambda^2 + 1). The linear interpolant of
  // k costs about dt^2/12 * |value|.
  for (double lambda : {0.5, 2.0}) {
    const double Hr = abel_horizon(lambda, rotation().bound_k, 1e-9);
    const auto r = abel_value(rotation(), v({1, 0}), constant(rotation(), 1.0), lambda, Hr, 1e-9, 1e-3);
    EXPECT_NEAR(r.value, lambda * lambda / (lambda * lambda + 1), 1e-7);
  }

  const auto frozen = make_frozen_system("y1 + u1^2");
  const double Hf = abel_horizon(1.0, frozen.bound_k, 1e-9);
  EXPECT_NEAR(abel_value(frozen, v({0.25, 0}), constant(frozen, 0.5), 1.0, Hf, 1e-9).value, 0.5, 1e-8);
  EXPECT_THROW(abel_value(rotation(), v({1, 0}), constant(rotation(), 1.0), 0.5, 1.0, 1e-3), std::invalid_argument);
}

TEST(Simulate, AbelMatchesCesaroAtMatchedScales) {
  const auto steer = Policy::steer_then_hold(rotation().control_region, v({1}), v({-1, 0}), v({0}));
  const double cesaro = cesaro_value(integrate(rotation(), v({1, 0}), steer, 200.0), rotation());
  const double H = abel_horizon(0.005, rotation().bound_k, 1e-3);
  const auto abel = abel_value(rotation(), v({1, 0}), steer, 0.005, H * (1 + 1e-9) + 1e-3, 1e-3);
  EXPECT_NEAR(abel.value, cesaro, 0.1);
}

TEST(Simulate, EmpiricalMeasureOfConstantTrajectory) {
  const auto spec = make_frozen_system();
  GridOptions o;
  o.state_resolution = {4, 4};
  o.control_resolution = {3};
  const Grid g = build_grid(spec, o);
  const auto traj = integrate(spec, v({0.3, -0.2}), constant(spec, 0.1), 2.0, 0.01);
  const auto m = empirical_occupational_measure(traj, g);
  const Eigen::Index atom = g.nearest_atom(v({0.3, -0.2}), v({0.1}));
  EXPECT_NEAR(m.weights[atom], 1.0, 1e-12);
  EXPECT_NEAR(m.mass(), 1.0, 1e-12);
  EXPECT_EQ(m.grid_fingerprint, g.fingerprint());

  const auto d = empirical_discounted_measure(traj, 0.5, g);
  EXPECT_NEAR(d.measure.weights[atom], 1.0 - std::exp(-0.5 * 2.0), 1e-12);
  EXPECT_NEAR(d.tail_mass, std::exp(-1.0), 1e-12);
  EXPECT_NEAR(d.normalized().mass(), 1.0, 1e-12);
}

TEST(Simulate, UniformRotationEquidistributes) {
  const int nth = 64;
  const Grid g = circle_grid(nth, 1.0, 0.5);
  const auto traj = integrate(rotation(), v({1, 0}), constant(rotation(), 1.0), 3 * 2 * kPi, 1e-3);
  const auto m = empirical_occupational_measure(traj, g);
  EXPECT_LE((m.weights.array() - 1.0 / nth).abs().maxCoeff(), 0.1 / nth);
}

TEST(Simulate, MeasureTrajectoryDuality) {
  // |int phi dgamma_hat - (1/T) int phi(y(t)) dt| <= Lip(phi) * cell diameter
  const Grid g = rotation_grid(64);
  const auto basis = enumerate_basis(2, 3, AffineScaling::from_box(rotation().region.bounding_box()));
  const auto policy = Policy::feedback_expression(rotation().control_region, {Expression::parse("0.5 + 0.5*y2")});
  const auto traj = integrate(rotation(), v({1.1, 0}), policy, 30.0, 1e-3);
  const auto m = empirical_occupational_measure(traj, g);
  // Cell diameter: radial gap 0.25, arc 2 pi * 1.5 / 64, control gap 0.25.
  const double cell = std::sqrt(0.25 * 0.25 + std::pow(2 * kPi * 1.5 / 64, 2) + 0.25 * 0.25);
  for (Eigen::Index b = 0; b < basis.size(); ++b) {
    double time_avg = 0.0;
    for (Eigen::Index j = 0; j < traj.steps(); ++j) {
      const double h = traj.times[j + 1] - traj.times[j];
      time_avg += h * eval_phi(basis, b, Eigen::VectorXd(traj.states.col(j)));
    }
    time_avg /= traj.horizon();
    double on_grid = 0.0;
    for (Eigen::Index a = 0; a < g.size(); ++a) {
      on_grid += m.weights[a] * eval_phi(basis, b, Eigen::VectorXd(g.states().col(a)));
    }
    // Lipschitz constant of a scaled monomial of degree d over [-1,1]^2 is at most d * sqrt(2) / half_width.
    const double lip = basis.exponents.row(b).sum() * std::sqrt(2.0) / 1.5;
    EXPECT_LE(std::abs(time_avg - on_grid), lip * cell) << "basis " << b;
  }
}

TEST(Simulate, DiscountedMeasureTendsToPeriodAverage) {
  const Grid g = rotation_grid(32);
  const auto basis = enumerate_basis(2, 4, AffineScaling::from_box(rotation().region.bounding_box()));
  const auto tf = make_test_functions(basis, g, rotation());
  const auto loop = integrate(rotation(), v({1, 0}), constant(rotation(), 1.0), 2 * kPi, 1e-3);
  const auto one_period = empirical_occupational_measure(loop, g);
  double prev = 1e9;
  for (double lambda : {1.0, 0.3, 0.1, 0.03}) {
    const double H = abel_horizon(lambda, 1.0, 1e-6);
    const auto traj = integrate(rotation(), v({1, 0}), constant(rotation(), 1.0), H, 1e-3);
    const auto d = empirical_discounted_measure(traj, lambda, g, 1e-6);
    const double rho = rho_hat(d.normalized(), one_period, tf);
    EXPECT_LT(rho, prev);
    prev = rho;
  }
  EXPECT_LT(prev, 0.05);
}

TEST(Simulate, FrozenDiscountedMeasureSatisfiesDiscountedRows) {
  const auto spec = make_frozen_system();
  GridOptions o;
  o.state_resolution = {4, 4};
  o.control_resolution = {3};
  const Eigen::VectorXd y0 = v({-0.75, 0.25});
  const Grid g = build_grid(spec, o, {y0});
  const auto basis = enumerate_basis(2, 3);
  const auto traj = integrate(spec, y0, constant(spec, 0.0), 20.0, 0.01);
  const auto d = empirical_discounted_measure(traj, 1.0, g, 1e-8).normalized();
  const Eigen::MatrixXd rows = assemble_flow_matrix(g, basis, spec) + 1.0 * assemble_initial_matrix(g, basis, spec, y0);
  EXPECT_LE((rows * d.weights).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Simulate, PoliciesProjectAndSwitch) {
  const auto& cr = rotation().control_region;
  auto ctl = Policy::constant(cr, v({4.0})).start();
  EXPECT_DOUBLE_EQ(ctl(0.0, v({1, 0}))[0], 1.0);

  Eigen::MatrixXd values(1, 3);
  values << -1, 0.5, 0;
  auto sched = Policy::schedule(cr, v({0, 1, 2}), values).start();
  EXPECT_DOUBLE_EQ(sched(0.5, v({1, 0}))[0], -1.0);
  EXPECT_DOUBLE_EQ(sched(1.0, v({1, 0}))[0], 0.5);
  EXPECT_DOUBLE_EQ(sched(7.0, v({1, 0}))[0], 0.0);

  auto periodic = Policy::periodic(Policy::schedule(cr, v({0, 1}), values.leftCols(2)), 2.0).start();
  EXPECT_DOUBLE_EQ(periodic(2.5, v({1, 0}))[0], -1.0);
  EXPECT_DOUBLE_EQ(periodic(3.5, v({1, 0}))[0], 0.5);

  Eigen::MatrixXd cells(2, 2), table(1, 2);
  cells << 1, -1, 0, 0;
  table << 0.2, -0.2;
  auto fb = Policy::feedback_table(cr, cells, table).start();
  EXPECT_DOUBLE_EQ(fb(0.0, v({0.9, 0.1}))[0], 0.2);
  EXPECT_DOUBLE_EQ(fb(0.0, v({-0.9, 0.1}))[0], -0.2);

  const auto steer = Policy::steer_then_hold(cr, v({1}), v({-1, 0}), v({0}), 0.1);
  auto s1 = steer.start();
  EXPECT_DOUBLE_EQ(s1(0.0, v({1, 0}))[0], 1.0);
  EXPECT_DOUBLE_EQ(s1(1.0, v({-1, 0.05}))[0], 0.0);
  // Latched: once captured it holds even away from the target.
  EXPECT_DOUBLE_EQ(s1(2.0, v({1, 0}))[0], 0.0);
  // A fresh start is independent.
  EXPECT_DOUBLE_EQ(steer.start()(0.0, v({1, 0}))[0], 1.0);
  EXPECT_THROW(Policy::schedule(cr, v({1, 0}), values.leftCols(2)), std::invalid_argument);
}

TEST(Simulate, PeriodicSearchRotationFamily) {
  PeriodicSearchOptions opt;
  const auto fam = rotation_cosine_family(rotation(), {1.0, 0.5, 0.1});
  const auto r = periodic_value_search(rotation(), v({1, 0}), fam, opt);
  ASSERT_EQ(r.candidates.size(), 3u);
  for (const auto& c : r.candidates) {
    EXPECT_TRUE(c.closed);
    EXPECT_LE(c.closure_error, 1e-3);
  }
  // delta = 1 is u = 1: a 2 pi loop with mean cos = 0.
  EXPECT_NEAR(r.candidates[0].period, 2 * kPi, 1e-6);
  EXPECT_NEAR(r.candidates[0].value, 0.0, 1e-3);
  EXPECT_TRUE(r.strictly_decreasing);
  EXPECT_EQ(r.best, 2);
  // Independent quadrature: the loop spends time d theta / u(theta), so the value is
  // int cos / u / int 1 / u over theta in [0, 2 pi).
  for (std::size_t i = 1; i < r.candidates.size(); ++i) {
    const double delta = fam.parameters[i];
    double num = 0.0, den = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      const double th = 2 * kPi * (k + 0.5) / n;
      const double u = delta + (1 - delta) * (1 + std::cos(th)) / 2;
      num += std::cos(th) / u;
      den += 1.0 / u;
    }
    EXPECT_NEAR(r.candidates[i].value, num / den, 1e-4);
    EXPECT_NEAR(r.candidates[i].period, 2 * kPi * den / n, 1e-4);
  }
}

TEST(Simulate, PeriodicSearchFrozenConstants) {
  const auto spec = make_frozen_system("y1 + u1^2");
  Eigen::MatrixXd controls(1, 3);
  controls << -1, 0.5, 0;
  const auto r = periodic_value_search(spec, v({0.25, 0}), constant_family(spec, controls));
  ASSERT_EQ(r.candidates.size(), 3u);
  EXPECT_NEAR(r.candidates[0].value, 1.25, 1e-12);
  EXPECT_NEAR(r.candidates[1].value, 0.5, 1e-12);
  EXPECT_NEAR(r.candidates[2].value, 0.25, 1e-12);
  for (const auto& c : r.candidates) EXPECT_TRUE(c.stationary);
  EXPECT_EQ(r.best, 2);
}

TEST(Simulate, ResidualDecayRotation) {
  const Grid g = rotation_grid(64);
  const auto basis = enumerate_basis(2, 4, AffineScaling::from_box(rotation().region.bounding_box()));
  const auto steer = Policy::steer_then_hold(rotation().control_region, v({1}), v({-1, 0}), v({0}));
  const auto rows = residual_decay_study(rotation(), v({1, 0}), steer, {25, 50, 100, 200}, g, basis);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    // Boundary term (phi(y(T)) - phi(y0)) / T halves with each doubling.
    EXPECT_NEAR(rows[i].w_residual / rows[i - 1].w_residual, 0.5, 0.02);
  }
  EXPECT_TRUE(residuals_non_increasing(rows, 0.0));
  EXPECT_LE(rows.back().omega_residual, 0.02);
}

TEST(Simulate, ResidualFloorForFrozenAndWholeLoops) {
  const auto spec = make_frozen_system();
  GridOptions o;
  o.state_resolution = {4, 4};
  o.control_resolution = {3};
  const Eigen::VectorXd y0 = v({-0.75, 0.25});
  const Grid g = build_grid(spec, o, {y0});
  const auto basis = enumerate_basis(2, 3);
  const auto rows = residual_decay_study(spec, y0, constant(spec, 0.0), {1, 2, 4}, g, basis);
  for (const auto& r : rows) {
    EXPECT_LE(r.w_residual, 1e-15);
    EXPECT_LE(r.omega_residual, 1e-9);
  }

  const Grid rg = rotation_grid(64);
  const auto rb = enumerate_basis(2, 4, AffineScaling::from_box(rotation().region.bounding_box()));
  const auto loops =
      residual_decay_study(rotation(), v({1, 0}), constant(rotation(), 1.0), {2 * kPi, 4 * kPi, 8 * kPi}, rg, rb);
  for (const auto& r : loops) EXPECT_NEAR(r.w_residual, loops.front().w_residual, 1e-5);
  EXPECT_LE(loops.front().w_residual, 1e-3);
}

TEST(Simulate, ResidualMonotoneHelper) {
  std::vector<ResidualRow> rows{{1, 0.1, 0}, {2, 0.05, 0}, {4, 0.051, 0}};
  EXPECT_FALSE(residuals_non_increasing(rows, 0.0));
  EXPECT_TRUE(residuals_non_increasing(rows, 0.001));
}

TEST(Simulate, CsvWriters) {
  const auto traj = integrate(rotation(), v({1, 0}), constant(rotation(), 1.0), 0.01, 1e-3);
  std::ostringstream t;
  write_trajectory_csv(traj, t, 5);
  std::istringstream ti(t.str());
  std::string line;
  std::getline(ti, line);
  EXPECT_EQ(line, "t,y1,y2,u1,in_region");
  int n = 0;
  while (std::getline(ti, line)) ++n;
  EXPECT_EQ(n, 3);  // rows 0, 5 and the final state

  const Grid g = circle_grid(4, 1.0);
  std::ostringstream m;
  write_measure_csv(DiscreteMeasure::dirac(g, 2), g, m, true);
  std::istringstream mi(m.str());
  std::getline(mi, line);
  EXPECT_EQ(line, "atom,y1,y2,u1,weight");
  std::getline(mi, line);
  EXPECT_EQ(line.substr(0, 2), "2,");
  EXPECT_FALSE(std::getline(mi, line));
}
