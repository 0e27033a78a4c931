#include "occlp/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Core>

#include "occlp/log.hpp"
#include "occlp/metrics.hpp"
#include "occlp/oracle.hpp"
#include "occlp/programs.hpp"
#include "occlp/simulate.hpp"

namespace occlp {

const char* to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::Solve: return "solve";
    case StudyKind::Simulate: return "simulate";
    case StudyKind::Sweep: return "sweep";
    case StudyKind::Convergence: return "convergence";
    case StudyKind::Certify: return "certify";
    case StudyKind::Oracle: return "oracle";
  }
  return "unknown";
}

StudyKind parse_study_kind(const std::string& name) {
  for (auto k : {StudyKind::Solve, StudyKind::Simulate, StudyKind::Sweep, StudyKind::Convergence,
                 StudyKind::Certify, StudyKind::Oracle}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown study '" + name + "'");
}

namespace {

// Runs fn(0..n-1) on up to `jobs` threads; results keep index order. The first
// failure (by index) is rethrown after all workers stop.
template <typename T, typename F>
std::vector<T> parallel_map(int jobs, std::size_t n, F fn) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double finite_or(double x, double fallback) { return std::isfinite(x) ? x : fallback; }

struct Setup {
  SystemSpec spec;
  GridOptions options;
  Grid grid;
  BasisSpec basis;
  std::optional<Eigen::VectorXd> y0;
};

Setup make_setup(const StudyConfig& c, const std::vector<int>* state_resolution = nullptr, int degree = 0) {
  SystemSpec spec = make_system(c);
  GridOptions options = make_grid_options(c, spec);
  if (state_resolution) options.state_resolution = *state_resolution;
  std::optional<Eigen::VectorXd> y0;
  if (!c.program.y0.empty()) y0 = config_y0(c);
  std::vector<Eigen::VectorXd> anchors;
  if (y0 && c.grid.anchor_y0) anchors.push_back(*y0);
  Grid grid = build_grid(spec, options, anchors);
  BasisSpec basis = enumerate_basis(spec.dim_state, degree > 0 ? degree : c.basis.max_degree,
                                    AffineScaling::from_box(spec.region.bounding_box()));
  return {std::move(spec), std::move(options), std::move(grid), std::move(basis), std::move(y0)};
}

std::optional<double> cap_of(const StudyConfig& c) {
  return c.program.xi_mass_cap_enabled ? std::optional<double>(c.program.xi_mass_cap) : std::nullopt;
}

struct LpJob {
  std::string label;
  ProgramVariant variant = ProgramVariant::Ergodic;
  std::string parameter_name;
  double parameter = 0.0;
};

std::vector<LpJob> lp_jobs(const StudyConfig& c) {
  std::vector<LpJob> jobs;
  for (auto v : c.program.variants) {
    switch (v) {
      case ProgramVariant::Ergodic:
      case ProgramVariant::NonErgodic:
        jobs.push_back({to_string(v), v, "", 0.0});
        break;
      case ProgramVariant::Discounted:
        for (double l : c.program.lambda) jobs.push_back({"discounted lambda=" + fmt(l), v, "lambda", l});
        break;
      case ProgramVariant::Perturbed:
        for (double e : c.program.epsilon) jobs.push_back({"perturbed epsilon=" + fmt(e), v, "epsilon", e});
        break;
    }
  }
  return jobs;
}

LpInstance build_instance(const Setup& s, const LpJob& job, const StudyConfig& c) {
  switch (job.variant) {
    case ProgramVariant::Ergodic: return build_ergodic_lp(s.grid, s.basis, s.spec);
    case ProgramVariant::NonErgodic: return build_nonergodic_lp(s.grid, s.basis, s.spec, *s.y0, cap_of(c));
    case ProgramVariant::Discounted: return build_discounted_lp(s.grid, s.basis, s.spec, *s.y0, job.parameter);
    case ProgramVariant::Perturbed:
      return build_perturbed_lp(s.grid, s.basis, s.spec, *s.y0, job.parameter, cap_of(c));
  }
  throw std::logic_error("unhandled variant");
}

struct LpOutcome {
  LpJob job;
  LpInstance instance;
  LpSolution solution;
};

std::vector<LpOutcome> solve_all(const Setup& s, const std::vector<LpJob>& jobs, const StudyConfig& c, int threads) {
  return parallel_map<LpOutcome>(threads, jobs.size(), [&](std::size_t i) {
    const LpJob& job = jobs[i];
    try {
      log_info("solving " + job.label);
      LpOutcome o{job, build_instance(s, job, c), {}};
      o.solution = solve(o.instance);
      log_debug(job.label + ": " + to_string(o.solution.status) + " value " + fmt(o.solution.value) + " after " +
                std::to_string(o.solution.stats.iterations) + " pivots");
      return o;
    } catch (const std::exception& e) {
      throw std::runtime_error("while solving '" + job.label + "': " + e.what());
    }
  });
}

MeasureEntry measure_entry(const std::string& label, const DiscreteMeasure& m, const Grid& grid) {
  MeasureEntry e;
  e.label = label;
  e.grid_fingerprint = m.grid_fingerprint;
  for (Eigen::Index a = 0; a < m.weights.size(); ++a) {
    if (m.weights[a] == 0.0) continue;
    e.atoms.push_back({a, to_std(grid.states().col(a)), to_std(grid.controls().col(a)), m.weights[a]});
  }
  return e;
}

void check(ReportBundle& b, const std::string& name, bool passed, const std::string& detail = "") {
  b.checks.push_back({name, passed, detail});
  if (!passed) log_warn("check failed: " + name + (detail.empty() ? "" : " (" + detail + ")"));
}

// Random (seeded) points of Y x U for the off-grid certificate diagnostic.
StateControlSamples random_points(const SystemSpec& spec, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const BoxShape box = spec.region.bounding_box();
  StateControlSamples out{Eigen::MatrixXd(spec.dim_state, count), Eigen::MatrixXd(spec.dim_control, count)};
  const ControlRegion& cr = spec.control_region;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd y(spec.dim_state);
    do {
      for (int d = 0; d < spec.dim_state; ++d) y[d] = box.lower[d] + unit(rng) * (box.upper[d] - box.lower[d]);
    } while (!spec.region.contains(y));
    out.states.col(i) = y;
    if (cr.is_finite()) {
      std::uniform_int_distribution<Eigen::Index> pick(0, cr.points().cols() - 1);
      out.controls.col(i) = cr.points().col(pick(rng));
    } else {
      for (int d = 0; d < spec.dim_control; ++d) {
        out.controls(d, i) = cr.lower()[d] + unit(rng) * (cr.upper()[d] - cr.lower()[d]);
      }
    }
  }
  return out;
}

struct LpRecordOptions {
  bool offgrid = false;
  bool membership = true;
};

// Values, certificates, measures and per-solve checks for every LP outcome, followed
// by the cross-solve properties (projection consistency, epsilon monotonicity).
void record_lps(ReportBundle& b, const Setup& s, const std::vector<LpOutcome>& outcomes, const StudyConfig& c,
                const LpRecordOptions& opt) {
  const double tol = c.program.tolerance;
  for (const auto& o : outcomes) {
    const LpSolution& sol = o.solution;
    ValueEntry v;
    v.label = o.job.label;
    v.kind = "lp";
    v.variant = to_string(o.job.variant);
    v.parameter_name = o.job.parameter_name;
    v.parameter = o.job.parameter;
    v.status = to_string(sol.status);
    v.value = sol.value;
    v.duality_gap = sol.stats.duality_gap;
    v.iterations = sol.stats.iterations;
    v.xi_mass = sol.xi ? sol.xi->mass() : 0.0;
    v.cap_binding = sol.cap_binding;
    v.note = sol.diagnostics;
    check(b, o.job.label + ": solver status optimal", sol.optimal(), sol.optimal() ? "" : sol.diagnostics);
    if (!sol.optimal()) {
      b.values.push_back(v);
      continue;
    }
    if (sol.cap_binding) v.note = "xi mass cap binds";
    b.measures.push_back(measure_entry("gamma " + o.job.label, sol.gamma, s.grid));

    if (o.job.variant != ProgramVariant::Discounted) {
      const Eigen::VectorXd y0 = s.y0 ? *s.y0 : Eigen::VectorXd();
      const DualCertificate cert = extract_dual_certificate(sol, o.instance, s.basis, y0);
      const CertificateCheck on_grid = check_certificate(cert, s.basis, s.spec, s.grid, tol);
      v.has_mu = true;
      v.mu = cert.mu;
      CertificateEntry ce;
      ce.label = o.job.label;
      ce.mu = cert.mu;
      ce.cost_shift = cert.cost_shift;
      ce.flow_floor = cert.flow_floor;
      ce.psi = to_std(cert.psi_coeffs);
      ce.eta = to_std(cert.eta_coeffs);
      ce.min_cost_slack = on_grid.min_cost_slack;
      ce.min_flow_slack = on_grid.min_flow_slack;
      ce.passed = on_grid.passed;
      if (opt.offgrid) {
        const int count = static_cast<int>(std::min<Eigen::Index>(10 * s.grid.size(), 200000));
        const StateControlSamples pts = random_points(s.spec, count, c.seed);
        const CertificateCheck off = check_certificate(cert, s.basis, s.spec, pts.states, pts.controls, tol);
        ce.has_offgrid = true;
        ce.offgrid_points = count;
        ce.offgrid_min_cost_slack = off.min_cost_slack;
        ce.offgrid_min_flow_slack = off.min_flow_slack;
      }
      b.certificates.push_back(ce);
      check(b, o.job.label + ": weak duality (primal >= mu - tol)", verify_weak_duality(sol.value, cert.mu, tol),
            "primal " + fmt(sol.value) + ", mu " + fmt(cert.mu));
      check(b, o.job.label + ": |primal - mu| <= tol", std::abs(sol.value - cert.mu) <= tol,
            "gap " + fmt(std::abs(sol.value - cert.mu)));
      check(b, o.job.label + ": certificate inequalities at grid atoms", on_grid.passed,
            "min cost slack " + fmt(on_grid.min_cost_slack) + ", min flow slack " + fmt(on_grid.min_flow_slack));
    }

    if (o.job.variant == ProgramVariant::NonErgodic && opt.membership) {
      const MembershipResidual r = membership_residual(sol.gamma, s.grid, s.basis, s.spec, *s.y0, cap_of(c));
      check(b, o.job.label + ": optimal gamma residuals <= 1e-7", r.w_residual <= 1e-7 && r.omega_residual <= 1e-7,
            "w " + fmt(r.w_residual) + ", omega " + fmt(r.omega_residual));
      if (!s.spec.first_integrals.empty()) {
        const FirstIntegral& F = s.spec.first_integrals.front();
        const double mass = mass_on_level(sol.gamma, s.grid, F, F.value(*s.y0), 1e-9);
        ValueEntry m;
        m.label = "support mass " + o.job.label;
        m.kind = "diagnostic";
        m.variant = "support-mass";
        m.status = "ok";
        m.value = mass;
        m.note = "mass of gamma on the level set of " + F.label + " through y0";
        b.values.push_back(m);
        if (s.spec.dynamics_id == "rotation") {
          check(b, o.job.label + ": support on the y0 level set >= 1 - 1e-3", mass >= 1.0 - 1e-3, "mass " + fmt(mass));
        }
      }
    }
    b.values.push_back(v);
  }

  const LpOutcome* ergodic = nullptr;
  const LpOutcome* nonergodic = nullptr;
  std::vector<const LpOutcome*> perturbed, discounted;
  for (const auto& o : outcomes) {
    if (!o.solution.optimal()) continue;
    if (o.job.variant == ProgramVariant::Ergodic) ergodic = &o;
    if (o.job.variant == ProgramVariant::NonErgodic) nonergodic = &o;
    if (o.job.variant == ProgramVariant::Perturbed) perturbed.push_back(&o);
    if (o.job.variant == ProgramVariant::Discounted) discounted.push_back(&o);
  }
  if (ergodic && nonergodic) {
    check(b, "projection consistency: ergodic <= nonergodic + 1e-7",
          ergodic->solution.value <= nonergodic->solution.value + 1e-7,
          fmt(ergodic->solution.value) + " vs " + fmt(nonergodic->solution.value));
  }
  if (!perturbed.empty()) {
    std::sort(perturbed.begin(), perturbed.end(),
              [](const LpOutcome* a, const LpOutcome* b) { return a->job.parameter > b->job.parameter; });
    SweepTable t;
    t.name = "epsilon";
    t.columns = {"epsilon", "value", "xi_mass", "monotone_step"};
    t.monotone = true;
    double prev = std::numeric_limits<double>::infinity();
    for (const auto* o : perturbed) {
      const bool step = o->solution.value <= prev + 1e-7;
      t.monotone = t.monotone && step;
      prev = o->solution.value;
      t.rows.push_back({o->job.parameter, o->solution.value, o->solution.xi ? o->solution.xi->mass() : 0.0,
                        step ? 1.0 : 0.0});
    }
    t.note = "rows ordered by decreasing epsilon";
    b.sweeps.push_back(t);
    check(b, "perturbed values non-increasing as epsilon decreases", t.monotone);
    std::optional<double> base;
    if (nonergodic) base = nonergodic->solution.value;
    for (const auto* o : perturbed) {
      if (!base && o->job.parameter == 0.0) base = o->solution.value;
    }
    if (base) {
      bool above = true;
      for (const auto* o : perturbed) above = above && o->solution.value >= *base - 1e-7;
      check(b, "perturbed values >= unperturbed value - 1e-7", above, "unperturbed " + fmt(*base));
    }
    const LpOutcome* small = nullptr;
    const LpOutcome* zero = nullptr;
    for (const auto* o : perturbed) {
      if (std::abs(o->job.parameter - 1e-3) < 1e-15) small = o;
      if (o->job.parameter == 0.0) zero = o;
    }
    if (small && zero) {
      const double d = std::abs(small->solution.value - zero->solution.value);
      check(b, "|value(eps=1e-3) - value(eps=0)| <= 1e-2", d <= 1e-2, "difference " + fmt(d));
    }
  }
  if (!discounted.empty()) {
    SweepTable t;
    t.name = "lambda";
    t.columns = {"lambda", "lp_value"};
    std::sort(discounted.begin(), discounted.end(),
              [](const LpOutcome* a, const LpOutcome* b) { return a->job.parameter < b->job.parameter; });
    for (const auto* o : discounted) t.rows.push_back({o->job.parameter, o->solution.value});
    t.monotone = true;
    for (std::size_t i = 1; i < t.rows.size(); ++i) t.monotone = t.monotone && t.rows[i][1] >= t.rows[i - 1][1] - 1e-9;
    t.note = "monotone: lp_value non-decreasing in lambda (reported, not asserted)";
    b.sweeps.push_back(t);
  }
}

Policy make_policy(const StudyConfig& c, const SystemSpec& spec) {
  const auto& s = c.simulate;
  auto vec = [](const std::vector<double>& v) {
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  auto columns = [&](const std::vector<std::vector<double>>& rows, const char* key) {
    if (rows.empty()) throw std::invalid_argument(std::string("simulate.") + key + " is empty");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[j].size() != rows.front().size()) {
        throw std::invalid_argument(std::string("simulate.") + key + " rows differ in length");
      }
      m.col(static_cast<Eigen::Index>(j)) = vec(rows[j]);
    }
    return m;
  };
  std::optional<Policy> p;
  if (s.policy == "constant") {
    p = Policy::constant(spec.control_region, vec(s.control));
  } else if (s.policy == "steer-then-hold") {
    p = Policy::steer_then_hold(spec.control_region, vec(s.steer), vec(s.target), vec(s.hold), s.capture_radius);
  } else if (s.policy == "feedback") {
    std::vector<Expression> laws;
    for (const auto& text : s.feedback) laws.push_back(Expression::parse(text));
    p = Policy::feedback_expression(spec.control_region, laws);
  } else if (s.policy == "schedule") {
    p = Policy::schedule(spec.control_region, vec(s.schedule_times), columns(s.schedule_controls, "schedule_controls"));
  } else if (s.policy == "feedback-table") {
    p = Policy::feedback_table(spec.control_region, columns(s.table_states, "table_states"),
                               columns(s.table_controls, "table_controls"));
  } else {
    throw std::invalid_argument("study needs a [simulate] policy");
  }
  if (s.period > 0.0) p = Policy::periodic(*p, s.period);
  return *p;
}

TrajectoryEntry trajectory_entry(const std::string& label, const Trajectory& traj, int stride) {
  TrajectoryEntry e;
  e.label = label;
  e.columns.emplace_back("t");
  for (Eigen::Index i = 0; i < traj.states.rows(); ++i) e.columns.push_back("y" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < traj.controls.rows(); ++i) e.columns.push_back("u" + std::to_string(i + 1));
  e.columns.emplace_back("in_region");
  const Eigen::Index last = traj.states.cols() - 1;
  for (Eigen::Index j = 0; j <= last; ++j) {
    if (j % stride != 0 && j != last) continue;
    std::vector<double> row{traj.times[j]};
    for (Eigen::Index i = 0; i < traj.states.rows(); ++i) row.push_back(traj.states(i, j));
    const Eigen::Index cj = std::min(j, traj.controls.cols() - 1);
    for (Eigen::Index i = 0; i < traj.controls.rows(); ++i) row.push_back(traj.controls(i, cj));
    row.push_back(traj.in_region[static_cast<std::size_t>(j)] ? 1.0 : 0.0);
    e.rows.push_back(std::move(row));
  }
  return e;
}

// Grid-quadrature floor for residual decay: the w-residual of whole loops at full
// control on the y0 circle (rotation), otherwise a fixed tiny floor.
double residual_floor(const StudyConfig& c, const Setup& s) {
  if (c.simulate.residual_floor) return *c.simulate.residual_floor;
  if (s.spec.dynamics_id != "rotation" || !s.y0) return 1e-9;
  const double u = s.spec.control_region.upper()[0];
  const double T = 4.0 * 2.0 * M_PI / u;
  const Trajectory loop = integrate(s.spec, *s.y0, Policy::constant(s.spec.control_region, Eigen::VectorXd::Constant(1, u)),
                                    T, c.simulate.dt);
  return membership_residual(empirical_occupational_measure(loop, s.grid), s.grid, s.basis, s.spec, *s.y0,
                             cap_of(c))
      .w_residual;
}

struct SimRun {
  Trajectory traj;
  double cesaro = 0.0;
  bool in_region = true;
  MembershipResidual residual;
  DiscreteMeasure measure;
};

void simulate_block(ReportBundle& b, const Setup& s, const StudyConfig& c, int threads, double lp_dual,
                    bool have_lp) {
  const Policy policy = make_policy(c, s.spec);
  const auto& T = c.simulate.T;
  const Eigen::VectorXd y0 = *s.y0;
  auto runs = parallel_map<SimRun>(threads, T.size(), [&](std::size_t i) {
    try {
      SimRun r;
      r.traj = integrate(s.spec, y0, policy, T[i], c.simulate.dt);
      r.in_region = r.traj.fully_in_region();
      if (r.in_region) {
        r.cesaro = cesaro_value(r.traj, s.spec);
        r.measure = empirical_occupational_measure(r.traj, s.grid);
        r.residual = membership_residual(r.measure, s.grid, s.basis, s.spec, y0, cap_of(c));
      }
      return r;
    } catch (const std::exception& e) {
      throw std::runtime_error("while simulating T=" + fmt(T[i]) + ": " + e.what());
    }
  });

  std::vector<AbelResult> abel = parallel_map<AbelResult>(threads, c.simulate.lambda.size(), [&](std::size_t i) {
    const double lambda = c.simulate.lambda[i];
    const double H = abel_horizon(lambda, s.spec.bound_k, c.simulate.abel_tail) * (1.0 + 1e-9) + c.simulate.dt;
    try {
      return abel_value(s.spec, y0, policy, lambda, H, c.simulate.abel_tail, c.simulate.dt);
    } catch (const std::exception& e) {
      throw std::runtime_error("while computing the Abel value at lambda=" + fmt(lambda) + ": " + e.what());
    }
  });

  double best_cesaro = std::numeric_limits<double>::infinity();
  SweepTable decay;
  decay.name = "residual_decay";
  decay.columns = {"T", "w_residual", "omega_residual"};
  std::vector<ResidualRow> rows;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    ValueEntry v;
    v.label = "cesaro T=" + fmt(T[i]);
    v.kind = "simulation";
    v.variant = "cesaro";
    v.parameter_name = "T";
    v.parameter = T[i];
    v.status = r.in_region ? "ok" : "left-region";
    v.value = r.cesaro;
    v.note = policy.description();
    b.values.push_back(v);
    check(b, "trajectory T=" + fmt(T[i]) + " stays in Y", r.in_region);
    if (!r.in_region) continue;
    best_cesaro = std::min(best_cesaro, r.cesaro);
    rows.push_back({T[i], r.residual.w_residual, r.residual.omega_residual});
    decay.rows.push_back({T[i], r.residual.w_residual, r.residual.omega_residual});
    if (c.output.trajectories) b.trajectories.push_back(trajectory_entry(v.label, r.traj, c.output.trajectory_stride));
  }
  if (!rows.empty()) {
    b.measures.push_back(measure_entry("empirical T=" + fmt(rows.back().T), runs.back().measure, s.grid));
    const double floor = residual_floor(c, s);
    decay.monotone = residuals_non_increasing(rows, floor);
    decay.note = "floor " + fmt(floor);
    ValueEntry f;
    f.label = "residual floor";
    f.kind = "diagnostic";
    f.variant = "residual-floor";
    f.status = "ok";
    f.value = floor;
    b.values.push_back(f);
    b.sweeps.push_back(decay);
    check(b, "w-residuals non-increasing across T (within 2x floor)", decay.monotone, "floor " + fmt(floor));
  }
  for (std::size_t i = 0; i < abel.size(); ++i) {
    ValueEntry v;
    v.label = "abel lambda=" + fmt(c.simulate.lambda[i]);
    v.kind = "simulation";
    v.variant = "abel";
    v.parameter_name = "lambda";
    v.parameter = c.simulate.lambda[i];
    v.status = "ok";
    v.value = abel[i].value;
    v.error_bound = abel[i].tail_bound;
    v.note = "horizon " + fmt(abel[i].horizon);
    b.values.push_back(v);
  }
  if (have_lp) {
    const double budget = c.simulate.budget;
    if (std::isfinite(best_cesaro)) {
      check(b, "best Cesaro value >= LP dual value - budget", best_cesaro >= lp_dual - budget,
            "cesaro " + fmt(best_cesaro) + ", mu " + fmt(lp_dual));
    }
    for (std::size_t i = 0; i < abel.size(); ++i) {
      check(b, "Abel value lambda=" + fmt(c.simulate.lambda[i]) + " >= LP dual value - budget",
            abel[i].value >= lp_dual - budget, "abel " + fmt(abel[i].value) + ", mu " + fmt(lp_dual));
    }
  }
}

void periodic_block(ReportBundle& b, const Setup& s, const StudyConfig& c) {
  const auto& p = c.periodic;
  PolicyFamily family;
  if (p.family == "rotation-cosine") {
    family = rotation_cosine_family(s.spec, p.parameters);
  } else {
    Eigen::MatrixXd controls(s.spec.dim_control, static_cast<Eigen::Index>(p.parameters.size()));
    if (s.spec.dim_control != 1) throw std::invalid_argument("constant periodic family needs a scalar control");
    for (std::size_t i = 0; i < p.parameters.size(); ++i) controls(0, static_cast<Eigen::Index>(i)) = p.parameters[i];
    family = constant_family(s.spec, controls);
  }
  PeriodicSearchOptions opt;
  opt.dt = c.simulate.dt;
  opt.max_period = p.max_period;
  opt.closure_tolerance = p.closure_tolerance;
  const PeriodicSearchResult r = periodic_value_search(s.spec, *s.y0, family, opt);
  SweepTable t;
  t.name = "periodic";
  t.columns = {"parameter", "value", "period", "closure_error", "closed"};
  bool all_closed = true;
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    const auto& cand = r.candidates[i];
    const double param = p.family == "constant" ? p.parameters[i] : cand.parameter;
    t.rows.push_back({param, cand.value, cand.period, finite_or(cand.closure_error, -1.0), cand.closed ? 1.0 : 0.0});
    all_closed = all_closed && cand.closed;
  }
  t.monotone = r.strictly_decreasing;
  t.note = family.label + "; closure_error -1 means no return within max_period";
  b.sweeps.push_back(t);
  ValueEntry v;
  v.label = "periodic best";
  v.kind = "simulation";
  v.variant = "periodic";
  v.parameter_name = "parameter";
  v.parameter = t.rows[static_cast<std::size_t>(r.best)][0];
  v.status = "ok";
  v.value = r.best_value();
  v.note = family.label;
  b.values.push_back(v);
  check(b, "periodic candidates close their loops (<= " + fmt(p.closure_tolerance) + ")", all_closed);
  check(b, "periodic values strictly decreasing along the family", r.strictly_decreasing);
  if (p.value_threshold) {
    const double last = r.candidates.back().value;
    check(b, "last periodic candidate value <= " + fmt(*p.value_threshold), last <= *p.value_threshold,
          "value " + fmt(last));
  }
}

LpJob reference_job(const Setup& s) {
  return s.y0 ? LpJob{"nonergodic", ProgramVariant::NonErgodic, "", 0.0}
              : LpJob{"ergodic", ProgramVariant::Ergodic, "", 0.0};
}

void convergence_block(ReportBundle& b, const Setup& base, const StudyConfig& c, int threads) {
  std::vector<std::vector<int>> levels = c.convergence.state_resolutions;
  std::vector<int> degrees = c.convergence.degrees;
  if (levels.empty()) {
    std::vector<int> fine = base.options.state_resolution;
    fine.back() *= 2;
    levels = {base.options.state_resolution, fine};
    degrees = {c.basis.max_degree, c.basis.max_degree + 2};
  }
  struct Level {
    double value = 0.0;
    bool optimal = false;
    Eigen::Index atoms = 0;
  };
  const LpJob job = reference_job(base);
  auto results = parallel_map<Level>(threads, levels.size(), [&](std::size_t i) {
    try {
      const Setup s = make_setup(c, &levels[i], degrees[i]);
      const LpSolution sol = solve(build_instance(s, job, c));
      return Level{sol.value, sol.optimal(), s.grid.size()};
    } catch (const std::exception& e) {
      throw std::runtime_error("while solving refinement level " + std::to_string(i) + ": " + e.what());
    }
  });
  SweepTable t;
  t.name = "refinement";
  t.columns = {"level", "value", "atoms", "degree"};
  bool all_optimal = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    t.rows.push_back({static_cast<double>(i), results[i].value, static_cast<double>(results[i].atoms),
                      static_cast<double>(degrees[i])});
    all_optimal = all_optimal && results[i].optimal;
  }
  const double change = std::abs(results.back().value - results.front().value);
  t.monotone = change <= c.convergence.tolerance;
  t.note = job.label + " value per refinement level";
  b.sweeps.push_back(t);
  check(b, "refinement solves optimal", all_optimal);
  check(b, "refinement changes the value by <= " + fmt(c.convergence.tolerance), change <= c.convergence.tolerance,
        "change " + fmt(change));

  if (c.simulate.policy == "none" || c.simulate.T.empty() || !base.y0) return;
  // Empirical measures against the LP-optimal measure on the base grid.
  const LpSolution ref = solve(build_instance(base, job, c));
  if (!ref.optimal()) return;
  const TestFunctionSet tf = make_test_functions(base.basis, base.grid, base.spec);
  const Policy policy = make_policy(c, base.spec);
  const auto& T = c.simulate.T;
  auto rho = parallel_map<double>(threads, T.size(), [&](std::size_t i) {
    const Trajectory traj = integrate(base.spec, *base.y0, policy, T[i], c.simulate.dt);
    return rho_hausdorff({empirical_occupational_measure(traj, base.grid)}, {ref.gamma}, tf);
  });
  SweepTable r;
  r.name = "rho_empirical_vs_lp";
  r.columns = {"T", "rho_hausdorff"};
  r.monotone = true;
  for (std::size_t i = 0; i < T.size(); ++i) {
    r.rows.push_back({T[i], rho[i]});
    if (i > 0) r.monotone = r.monotone && rho[i] <= rho[i - 1] + 1e-6;
  }
  r.note = "moment pseudometric over the degree-" + std::to_string(base.basis.max_degree) + " basis";
  b.sweeps.push_back(r);
  check(b, "rho_H(empirical, LP gamma) non-increasing in T", r.monotone);
}

void oracle_block(ReportBundle& b, const Setup& s, const StudyConfig& c, int threads) {
  const double tol = c.oracle.tolerance;
  auto add = [&](const std::string& label, const OracleResult& r) {
    ValueEntry v;
    v.label = label;
    v.kind = "oracle";
    v.variant = label;
    v.status = to_string(r.method);
    v.value = r.value;
    v.error_bound = r.error_bound;
    v.note = r.instance + (r.attained_by.empty() ? "" : "; attained by " + r.attained_by);
    b.values.push_back(v);
  };
  auto compare = [&](const std::string& what, double lp, double oracle) {
    check(b, what + " within tolerance of the oracle", std::abs(lp - oracle) <= tol,
          "lp " + fmt(lp) + ", oracle " + fmt(oracle));
    check(b, what + " not below oracle - tolerance", lp >= oracle - tol, "lp " + fmt(lp) + ", oracle " + fmt(oracle));
  };

  if (s.spec.dynamics_id == "rotation" && s.spec.region.is_annulus() &&
      s.spec.region.as_annulus().center.isZero()) {
    const auto& ann = s.spec.region.as_annulus();
    RotationOracleOptions opt;
    opt.inner = ann.inner;
    opt.outer = ann.outer;
    opt.control_lower = s.spec.control_region.lower()[0];
    opt.control_upper = s.spec.control_region.upper()[0];
    const int n_u = c.oracle.control_resolution > 0 ? c.oracle.control_resolution
                                                    : (s.options.control_resolution.empty()
                                                           ? 9
                                                           : s.options.control_resolution.front());
    const std::string cost = s.spec.cost_id;
    std::vector<double> zs = c.oracle.z;
    if (zs.empty()) {
      for (int i = 0; i < 9; ++i) zs.push_back(opt.inner * opt.inner + (opt.outer * opt.outer - opt.inner * opt.inner) * i / 8.0);
    }
    const LevelSetTable table = level_set_ordering(cost, zs, c.oracle.angle_resolution, n_u, opt);
    SweepTable t;
    t.name = "level_set";
    t.columns = {"z", "value"};
    for (std::size_t i = 0; i < table.z.size(); ++i) t.rows.push_back({table.z[i], table.values[i]});
    t.note = "min over z " + fmt(table.min_value) + " at z=" + fmt(table.argmin_z);
    b.sweeps.push_back(t);
    ValueEntry e;
    e.label = "oracle ergodic (min over levels)";
    e.kind = "oracle";
    e.variant = "oracle-ergodic";
    e.status = to_string(OracleMethod::ExhaustiveAtomScan);
    e.value = table.min_value;
    b.values.push_back(e);

    std::vector<LpJob> jobs{{"ergodic", ProgramVariant::Ergodic, "", 0.0}};
    std::optional<OracleResult> level;
    if (s.y0) {
      const double z = s.y0->squaredNorm();
      level = rotation_level_value(z, cost, c.oracle.angle_resolution, n_u, opt);
      add("oracle level value", *level);
      RotationOracleOptions only_uniform = opt;
      only_uniform.stationary_family = false;
      add("oracle level value (uniform family only)",
          rotation_level_value(z, cost, c.oracle.angle_resolution, n_u, only_uniform));
      jobs.push_back({"nonergodic", ProgramVariant::NonErgodic, "", 0.0});
    }
    const auto outcomes = solve_all(s, jobs, c, threads);
    for (const auto& o : outcomes) {
      check(b, o.job.label + ": solver status optimal", o.solution.optimal(), o.solution.diagnostics);
      ValueEntry v;
      v.label = o.job.label;
      v.kind = "lp";
      v.variant = o.job.label;
      v.status = to_string(o.solution.status);
      v.value = o.solution.value;
      b.values.push_back(v);
      if (!o.solution.optimal()) continue;
      if (o.job.variant == ProgramVariant::Ergodic) compare("ergodic LP", o.solution.value, table.min_value);
      if (o.job.variant == ProgramVariant::NonErgodic) compare("nonergodic LP", o.solution.value, level->value);
    }
    return;
  }

  if (s.spec.dynamics_id == "frozen") {
    const int n_u = c.oracle.control_resolution > 0 ? c.oracle.control_resolution
                                                    : (s.options.control_resolution.empty()
                                                           ? 9
                                                           : s.options.control_resolution.front());
    const Eigen::VectorXd y0 = *s.y0;
    const OracleResult fv = frozen_value(s.spec, y0, n_u);
    add("oracle frozen value", fv);
    // Exhaustive scan over atoms: the ergodic reference on this grid.
    const Eigen::VectorXd costs = assemble_cost_vector(s.grid, s.spec);
    ValueEntry atoms;
    atoms.label = "oracle atom minimum";
    atoms.kind = "oracle";
    atoms.variant = "oracle-atom-minimum";
    atoms.status = to_string(OracleMethod::ExhaustiveAtomScan);
    atoms.value = costs.minCoeff();
    b.values.push_back(atoms);
    const auto outcomes = solve_all(s, lp_jobs(c), c, threads);
    for (const auto& o : outcomes) {
      check(b, o.job.label + ": solver status optimal", o.solution.optimal(), o.solution.diagnostics);
      ValueEntry v;
      v.label = o.job.label;
      v.kind = "lp";
      v.variant = to_string(o.job.variant);
      v.parameter_name = o.job.parameter_name;
      v.parameter = o.job.parameter;
      v.status = to_string(o.solution.status);
      v.value = o.solution.value;
      b.values.push_back(v);
      if (!o.solution.optimal()) continue;
      switch (o.job.variant) {
        case ProgramVariant::Ergodic: compare(o.job.label, o.solution.value, atoms.value); break;
        case ProgramVariant::Perturbed:
          // f = 0 so M = 0: the perturbation only shifts the cost by 2 eps.
          compare(o.job.label, o.solution.value, fv.value + 2.0 * o.job.parameter);
          break;
        default: compare(o.job.label, o.solution.value, fv.value); break;
      }
    }
    return;
  }

  ValueEntry none;
  none.label = "oracle";
  none.kind = "oracle";
  none.variant = "none";
  none.status = "unavailable";
  none.note = "no independent oracle for system '" + s.spec.name + "'";
  b.values.push_back(none);
}

nlohmann::json environment_stamp() {
  return {{"tool", "occlp"},
          {"version", kToolVersion},
          {"compiler", __VERSION__},
          {"cxx_standard", static_cast<long>(__cplusplus)},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"lp_solver", "dense two-phase revised simplex (Eigen LU)"}};
}

}  // namespace

ReportBundle run_study(const StudyConfig& config, StudyKind kind, int jobs) {
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  ReportBundle b;
  b.study = to_string(kind);
  b.config = config_to_json(config);
  b.environment = environment_stamp();
  b.basis_degree = config.basis.max_degree;
  const std::string context = std::string("study '") + to_string(kind) + "'";
  try {
    const Setup s = make_setup(config);
    log_info(context + ": grid with " + std::to_string(s.grid.size()) + " atoms, " +
             std::to_string(s.basis.size()) + " basis functions");
    switch (kind) {
      case StudyKind::Solve:
      case StudyKind::Certify: {
        const auto outcomes = solve_all(s, lp_jobs(config), config, jobs);
        record_lps(b, s, outcomes, config, {kind == StudyKind::Certify, true});
        break;
      }
      case StudyKind::Sweep: {
        const auto outcomes = solve_all(s, lp_jobs(config), config, jobs);
        record_lps(b, s, outcomes, config, {false, false});
        if (config.simulate.policy != "none" && s.y0) {
          // Abel values along the discounted LP's lambda list.
          const Policy policy = make_policy(config, s.spec);
          std::vector<double> lambdas;
          for (const auto& o : outcomes) {
            if (o.job.variant == ProgramVariant::Discounted && o.solution.optimal()) lambdas.push_back(o.job.parameter);
          }
          std::sort(lambdas.begin(), lambdas.end());
          auto abel = parallel_map<AbelResult>(jobs, lambdas.size(), [&](std::size_t i) {
            const double H = abel_horizon(lambdas[i], s.spec.bound_k, config.simulate.abel_tail) * (1.0 + 1e-9) +
                             config.simulate.dt;
            return abel_value(s.spec, *s.y0, policy, lambdas[i], H, config.simulate.abel_tail, config.simulate.dt);
          });
          for (auto& t : b.sweeps) {
            if (t.name != "lambda") continue;
            t.columns = {"lambda", "lp_value", "abel_value", "abel_tail"};
            for (std::size_t i = 0; i < t.rows.size(); ++i) {
              t.rows[i].push_back(abel[i].value);
              t.rows[i].push_back(abel[i].tail_bound);
              check(b, "discounted LP lambda=" + fmt(lambdas[i]) + " <= Abel value + budget",
                    t.rows[i][1] <= abel[i].value + abel[i].tail_bound + config.simulate.budget,
                    "lp " + fmt(t.rows[i][1]) + ", abel " + fmt(abel[i].value));
            }
          }
        }
        break;
      }
      case StudyKind::Simulate: {
        double mu = 0.0;
        bool have = false;
        if (s.y0) {
          const auto ref = solve_all(s, {reference_job(s)}, config, 1);
          if (ref.front().solution.optimal()) {
            const DualCertificate cert =
                extract_dual_certificate(ref.front().solution, ref.front().instance, s.basis, *s.y0);
            mu = cert.mu;
            have = true;
            ValueEntry v;
            v.label = "nonergodic";
            v.kind = "lp";
            v.variant = "nonergodic";
            v.status = "optimal";
            v.value = ref.front().solution.value;
            v.has_mu = true;
            v.mu = mu;
            b.values.push_back(v);
          }
        }
        if (config.simulate.policy != "none") simulate_block(b, s, config, jobs, mu, have);
        if (config.periodic.enabled) periodic_block(b, s, config);
        break;
      }
      case StudyKind::Convergence:
        convergence_block(b, s, config, jobs);
        break;
      case StudyKind::Oracle:
        oracle_block(b, s, config, jobs);
        break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error(context + ": " + e.what());
  }
  return b;
}

void export_lp_instances(const StudyConfig& config, const std::string& dir) {
  namespace fs = std::filesystem;
  const Setup s = make_setup(config);
  fs::create_directories(fs::path(dir) / "lp");
  for (const auto& job : lp_jobs(config)) {
    std::string name;
    for (char ch : job.label) name += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-') ? ch : '_';
    std::ofstream out(fs::path(dir) / "lp" / (name + ".lp"));
    if (!out) throw std::runtime_error("cannot write LP export for '" + job.label + "'");
    write_lp_text(build_instance(s, job, config), out);
  }
}

}  // namespace occlp
