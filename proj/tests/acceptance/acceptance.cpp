// Acceptance suite: one PASS/FAIL line per criterion, exit status = number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "occlp/metrics.hpp"
#include "occlp/oracle.hpp"
#include "occlp/programs.hpp"
#include "occlp/simulate.hpp"

using namespace occlp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

// The rotation instance of criteria 1-8 and 10.
struct RotationSetup {
  SystemSpec spec = make_rotation_system(0.5, 1.5, "y1");
  Grid grid;
  BasisSpec basis;
  Eigen::VectorXd y0;

  RotationSetup(Eigen::VectorXd start, int n_theta = 64, int degree = 4)
      : grid(make_grid(start, n_theta)),
        basis(enumerate_basis(2, degree, AffineScaling::from_box(spec.region.bounding_box()))),
        y0(std::move(start)) {}

  Grid make_grid(const Eigen::VectorXd& start, int n_theta) const {
    GridOptions o;
    o.state_resolution = {5, n_theta};
    o.control_resolution = {9};
    return build_grid(spec, o, {start});
  }
};

struct Solved {
  LpInstance instance;
  LpSolution solution;
};

Solved solve_instance(LpInstance inst) {
  Solved s{std::move(inst), {}};
  s.solution = solve(s.instance);
  return s;
}

// Criterion 3 is checked on every solve collected here.
struct DualityLedger {
  int solves = 0;
  double worst_gap = 0.0;
  double worst_slack = 0.0;
  bool all_optimal = true;

  void add(const Solved& s, const RotationSetup& r) {
    ++solves;
    if (!s.solution.optimal()) {
      all_optimal = false;
      return;
    }
    const DualCertificate cert = extract_dual_certificate(s.solution, s.instance, r.basis, r.y0);
    const CertificateCheck chk = check_certificate(cert, r.basis, r.spec, r.grid, 1e-6);
    worst_gap = std::max(worst_gap, std::abs(s.solution.value - cert.mu));
    worst_slack = std::min({worst_slack, chk.min_cost_slack, chk.min_flow_slack});
  }
};

double dual_mu(const Solved& s, const RotationSetup& r) {
  return extract_dual_certificate(s.solution, s.instance, r.basis, r.y0).mu;
}

}  // namespace

int main() {
  const auto suite_start = Clock::now();
  DualityLedger ledger;
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;

  const RotationSetup unit(vec({1, 0}));
  const RotationSetup half(vec({0.5, 0}));
  Solved ne_unit, erg_unit, ne_half, erg_half;
  double solve_seconds = 0.0;

  criteria.emplace_back("1 rotation oracle match", [&] {
    const auto t0 = Clock::now();
    ne_unit = solve_instance(build_nonergodic_lp(unit.grid, unit.basis, unit.spec, unit.y0));
    solve_seconds = seconds_since(t0);
    ledger.add(ne_unit, unit);
    const double oracle = rotation_level_value(unit.y0.squaredNorm(), "y1", 512, 9).value;
    const double v = ne_unit.solution.value;
    return Outcome{ne_unit.solution.optimal() && std::abs(v - oracle) <= 0.05 && solve_seconds < 10.0,
                   fmt("value %.6f", v) + fmt(", oracle %.6f", oracle) + fmt(", solve %.2f s", solve_seconds)};
  });

  criteria.emplace_back("2 initial-condition dependence", [&] {
    ne_half = solve_instance(build_nonergodic_lp(half.grid, half.basis, half.spec, half.y0));
    erg_unit = solve_instance(build_ergodic_lp(unit.grid, unit.basis, unit.spec));
    erg_half = solve_instance(build_ergodic_lp(half.grid, half.basis, half.spec));
    ledger.add(ne_half, half);
    ledger.add(erg_unit, unit);
    ledger.add(erg_half, half);
    const double v1 = ne_unit.solution.value, v2 = ne_half.solution.value;
    const double e1 = erg_unit.solution.value, e2 = erg_half.solution.value;
    const bool ok = std::abs(v2 + 0.5) <= 0.05 && std::abs((v2 - v1) - 0.5) <= 0.1 && std::abs(e1 + 1.5) <= 0.05 &&
                    std::abs(e2 + 1.5) <= 0.05;
    return Outcome{ok, fmt("nonergodic y0=(0.5,0) %.6f", v2) + fmt(", difference %.6f", v2 - v1) +
                           fmt(", ergodic %.6f", e1) + fmt(" / %.6f", e2)};
  });

  std::vector<Solved> perturbed;
  const std::vector<double> eps{0.1, 0.01, 0.001, 0.0};
  criteria.emplace_back("8 perturbed LP", [&] {
    for (double e : eps) {
      perturbed.push_back(solve_instance(build_perturbed_lp(unit.grid, unit.basis, unit.spec, unit.y0, e)));
      ledger.add(perturbed.back(), unit);
    }
    bool ok = true;
    std::string detail = "values";
    for (std::size_t i = 0; i < perturbed.size(); ++i) {
      const double v = perturbed[i].solution.value;
      detail += fmt(" %.6f", v);
      ok = ok && perturbed[i].solution.optimal();
      if (i > 0) ok = ok && v <= perturbed[i - 1].solution.value + 1e-7;
      ok = ok && v >= perturbed.back().solution.value - 1e-7;
    }
    const double gap = std::abs(perturbed[2].solution.value - perturbed[3].solution.value);
    ok = ok && gap <= 0.01;
    return Outcome{ok, detail + fmt(", |v(1e-3) - v(0)| = %.2e", gap)};
  });

  criteria.emplace_back("3 duality", [&] {
    const bool ok = ledger.all_optimal && ledger.worst_gap <= 1e-6 && ledger.worst_slack >= -1e-6;
    return Outcome{ok, std::to_string(ledger.solves) + " solves" + fmt(", max |primal - mu| %.2e", ledger.worst_gap) +
                           fmt(", min slack %.2e", ledger.worst_slack)};
  });

  criteria.emplace_back("4 support concentration", [&] {
    const double mass = mass_on_level(ne_unit.solution.gamma, unit.grid, unit.spec.first_integrals.front(), 1.0);
    return Outcome{mass >= 0.999, fmt("mass on |y| = 1: %.9f", mass)};
  });

  const Policy steer = Policy::steer_then_hold(unit.spec.control_region, vec({1}), vec({-1, 0}), vec({0}));
  criteria.emplace_back("5 simulation consistency", [&] {
    const Trajectory traj = integrate(unit.spec, unit.y0, steer, 200.0, 1e-3);
    const double cesaro = cesaro_value(traj, unit.spec);
    const double H = abel_horizon(0.005, unit.spec.bound_k, 1e-3) * (1 + 1e-9) + 1e-3;
    const AbelResult abel = abel_value(unit.spec, unit.y0, steer, 0.005, H, 1e-3, 1e-3);
    const double mu = dual_mu(ne_unit, unit);
    const bool ok = std::abs(cesaro + 1.0) <= 0.05 && std::abs(abel.value - cesaro) <= 0.1 && cesaro >= mu - 0.05 &&
                    abel.value >= mu - 0.05;
    return Outcome{ok, fmt("cesaro %.6f", cesaro) + fmt(", abel %.6f", abel.value) + fmt(", mu %.6f", mu)};
  });

  criteria.emplace_back("6 residual decay", [&] {
    const auto rows = residual_decay_study(unit.spec, unit.y0, steer, {25, 50, 100, 200}, unit.grid, unit.basis);
    // Grid-quadrature floor: the w-residual of four whole loops at u = 1 on the start circle.
    const Trajectory loops =
        integrate(unit.spec, unit.y0, Policy::constant(unit.spec.control_region, vec({1})), 8 * M_PI, 1e-3);
    const double floor =
        membership_residual(empirical_occupational_measure(loops, unit.grid), unit.grid, unit.basis, unit.spec, unit.y0)
            .w_residual;
    const bool ok = residuals_non_increasing(rows, floor) && rows.back().omega_residual <= 0.02;
    std::string detail = "w";
    for (const auto& r : rows) detail += fmt(" %.3e", r.w_residual);
    return Outcome{ok, detail + fmt(", floor %.2e", floor) + fmt(", final omega %.2e", rows.back().omega_residual)};
  });

  criteria.emplace_back("7 periodic trend", [&] {
    const auto r = periodic_value_search(unit.spec, unit.y0, rotation_cosine_family(unit.spec, {0.5, 0.1, 0.02}));
    bool closed = true;
    std::string detail = "values";
    for (const auto& c : r.candidates) {
      closed = closed && c.closed && c.closure_error <= 1e-3;
      detail += fmt(" %.4f", c.value);
    }
    const double last = r.candidates.back().value;
    return Outcome{closed && r.strictly_decreasing && last <= -0.9,
                   detail + (last <= -0.9 ? "" : " (delta=0.02 value above -0.9)")};
  });

  criteria.emplace_back("9 frozen-system exactness", [&] {
    RotationSetup f(vec({-0.875, 0.125}));
    f.spec = make_frozen_system("y1 + u1^2");
    GridOptions o;
    o.state_resolution = {8, 8};
    o.control_resolution = {9};
    f.grid = build_grid(f.spec, o, {f.y0});
    f.basis = enumerate_basis(2, 4, AffineScaling::from_box(f.spec.region.bounding_box()));
    const OracleResult oracle = frozen_value(f.spec, f.y0, 9);
    std::vector<double> values{
        solve(build_ergodic_lp(f.grid, f.basis, f.spec)).value,
        solve(build_nonergodic_lp(f.grid, f.basis, f.spec, f.y0)).value,
        solve(build_discounted_lp(f.grid, f.basis, f.spec, f.y0, 1.0)).value,
        solve(build_perturbed_lp(f.grid, f.basis, f.spec, f.y0, 0.0)).value,
    };
    const Policy best = Policy::constant(f.spec.control_region, oracle.argmin_control);
    values.push_back(cesaro_value(integrate(f.spec, f.y0, best, 10.0, 1e-3), f.spec));
    const double H = abel_horizon(1.0, f.spec.bound_k, 1e-9) * (1 + 1e-9) + 1e-3;
    values.push_back(abel_value(f.spec, f.y0, best, 1.0, H, 1e-9, 1e-3).value);
    double worst = 0.0;
    for (double v : values) worst = std::max(worst, std::abs(v - oracle.value));
    return Outcome{worst <= 1e-6, fmt("oracle %.6f", oracle.value) + fmt(", max deviation %.2e", worst)};
  });

  criteria.emplace_back("10 refinement convergence", [&] {
    const RotationSetup fine(vec({1, 0}), 128, 6);
    const Solved s = solve_instance(build_nonergodic_lp(fine.grid, fine.basis, fine.spec, fine.y0));
    const double change = std::abs(s.solution.value - ne_unit.solution.value);
    return Outcome{s.solution.optimal() && change <= 0.02,
                   fmt("n_theta=128, degree 6: %.6f", s.solution.value) + fmt(", change %.2e", change)};
  });

  // Print in criterion order; some criteria reuse solves from earlier ones, so they run
  // in dependency order first.
  std::vector<std::pair<std::string, Outcome>> results;
  for (auto& [name, run] : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    o.detail += fmt(" [%.2f s]", seconds_since(t0));
    results.emplace_back(name, o);
  }
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    return std::stoi(a.first) < std::stoi(b.first);
  });
  int failures = 0;
  for (const auto& [name, o] : results) {
    std::printf("%s criterion %s: %s\n", o.passed ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    failures += o.passed ? 0 : 1;
  }
  const double total = seconds_since(suite_start);
  std::printf("%d of %zu criteria passed in %.1f s (target < 180 s)\n", static_cast<int>(results.size()) - failures,
              results.size(), total);
  std::fflush(stdout);
  return failures;
}
