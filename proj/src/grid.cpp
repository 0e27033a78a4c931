#include "occlp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace occlp {

// Static k-d tree over the joint (y, u) atom coordinates.
class NearestAtomIndex {
 public:
  explicit NearestAtomIndex(Eigen::MatrixXd points) : points_(std::move(points)) {
    order_.resize(static_cast<std::size_t>(points_.cols()));
    std::iota(order_.begin(), order_.end(), Eigen::Index{0});
    if (!order_.empty()) root_ = build(0, static_cast<Eigen::Index>(order_.size()));
  }

  Eigen::Index nearest(const Eigen::VectorXd& q) const {
    Eigen::Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    search(root_, q, best, best_d);
    return best;
  }

 private:
  struct Node {
    Eigen::Index begin = 0;
    Eigen::Index end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  static constexpr Eigen::Index kLeafSize = 8;

  int build(Eigen::Index begin, Eigen::Index end) {
    Node node;
    node.begin = begin;
    node.end = end;
    if (end - begin > kLeafSize) {
      Eigen::VectorXd lo = points_.col(order_[static_cast<std::size_t>(begin)]);
      Eigen::VectorXd hi = lo;
      for (Eigen::Index i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_.col(order_[static_cast<std::size_t>(i)]));
        hi = hi.cwiseMax(points_.col(order_[static_cast<std::size_t>(i)]));
      }
      Eigen::Index axis = 0;
      const double width = (hi - lo).maxCoeff(&axis);
      if (width > 0.0) {
        const Eigen::Index mid = begin + (end - begin) / 2;
        auto first = order_.begin() + begin;
        std::nth_element(first, order_.begin() + mid, order_.begin() + end, [&](Eigen::Index a, Eigen::Index b) {
          return points_(axis, a) < points_(axis, b);
        });
        node.axis = static_cast<int>(axis);
        node.split = points_(axis, order_[static_cast<std::size_t>(mid)]);
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes_[static_cast<std::size_t>(self)].left = left;
        nodes_[static_cast<std::size_t>(self)].right = right;
        return self;
      }
    }
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  void search(int id, const Eigen::VectorXd& q, Eigen::Index& best, double& best_d) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.axis < 0) {
      for (Eigen::Index i = node.begin; i < node.end; ++i) {
        const Eigen::Index a = order_[static_cast<std::size_t>(i)];
        const double d = (points_.col(a) - q).squaredNorm();
        if (d < best_d || (d == best_d && a < best)) {
          best_d = d;
          best = a;
        }
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    search(near, q, best, best_d);
    if (delta * delta <= best_d) search(far, q, best, best_d);
  }

  Eigen::MatrixXd points_;
  std::vector<Eigen::Index> order_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

namespace {

std::uint64_t fnv1a(const Eigen::MatrixXd& m, std::uint64_t h) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
  const std::size_t n = static_cast<std::size_t>(m.size()) * sizeof(double);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

// Columns are the cartesian product of per-axis point lists, first axis slowest.
Eigen::MatrixXd cartesian(const std::vector<Eigen::VectorXd>& axes) {
  Eigen::Index total = 1;
  for (const auto& a : axes) total *= a.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(axes.size()), total);
  for (Eigen::Index c = 0; c < total; ++c) {
    Eigen::Index rem = c;
    for (auto i = static_cast<Eigen::Index>(axes.size()) - 1; i >= 0; --i) {
      const auto& a = axes[static_cast<std::size_t>(i)];
      out(i, c) = a[rem % a.size()];
      rem /= a.size();
    }
  }
  return out;
}

Eigen::MatrixXd control_points(const SystemSpec& spec, const GridOptions& options) {
  const auto& cr = spec.control_region;
  if (cr.is_finite()) return cr.points();
  if (static_cast<int>(options.control_resolution.size()) != cr.dim()) {
    throw std::invalid_argument("control_resolution must list one count per control axis");
  }
  std::vector<Eigen::VectorXd> axes;
  for (int i = 0; i < cr.dim(); ++i) {
    const int n = options.control_resolution[static_cast<std::size_t>(i)];
    const bool degenerate = cr.lower()[i] == cr.upper()[i];
    if (n < (degenerate ? 1 : 2)) throw std::invalid_argument("control resolution must be >= 2 per axis");
    axes.push_back(axis_points(cr.lower()[i], cr.upper()[i], n, options.control_placement));
  }
  return cartesian(axes);
}

void append_columns(Eigen::MatrixXd& m, const Eigen::MatrixXd& extra) {
  Eigen::MatrixXd out(m.rows(), m.cols() + extra.cols());
  out << m, extra;
  m.swap(out);
}

}  // namespace

Eigen::VectorXd axis_points(double lower, double upper, int count, Placement placement) {
  if (count < 1) throw std::invalid_argument("axis resolution must be positive");
  Eigen::VectorXd pts(count);
  if (placement == Placement::Midpoint || count == 1) {
    const double h = (upper - lower) / count;
    for (int i = 0; i < count; ++i) pts[i] = lower + (i + 0.5) * h;
  } else {
    const double h = (upper - lower) / (count - 1);
    for (int i = 0; i < count; ++i) pts[i] = lower + i * h;
    pts[count - 1] = upper;
  }
  return pts;
}

Grid::Grid(Eigen::MatrixXd states, Eigen::MatrixXd controls, GridOptions options, bool polar)
    : states_(std::move(states)), controls_(std::move(controls)), options_(std::move(options)), polar_(polar) {
  if (states_.cols() != controls_.cols()) throw std::invalid_argument("grid states/controls atom count mismatch");
  fingerprint_ = fnv1a(controls_, fnv1a(states_, 1469598103934665603ULL));
  Eigen::MatrixXd joint(states_.rows() + controls_.rows(), states_.cols());
  joint << states_, controls_;
  index_ = std::make_shared<const NearestAtomIndex>(std::move(joint));
}

Eigen::Index Grid::nearest_atom(const VectorRef& y, const VectorRef& u) const {
  if (y.size() != states_.rows() || u.size() != controls_.rows()) {
    throw std::invalid_argument("nearest_atom: dimension mismatch");
  }
  Eigen::VectorXd q(y.size() + u.size());
  q << y, u;
  return index_->nearest(q);
}

Grid build_grid(const SystemSpec& spec, const GridOptions& options, const std::vector<Eigen::VectorXd>& anchors) {
  const Eigen::MatrixXd ctrl = control_points(spec, options);
  const Eigen::Index nu = ctrl.cols();
  Eigen::MatrixXd states;
  const bool polar = spec.region.is_annulus();

  // States of each "ring" (annulus) or the product grid (box); controls are expanded below.
  Eigen::MatrixXd base_states;
  if (polar) {
    if (options.state_resolution.size() != 2) {
      throw std::invalid_argument("annulus grids take state_resolution = {n_r, n_theta}");
    }
    const int nr = options.state_resolution[0];
    const int nth = options.state_resolution[1];
    if (nr < 1 || nth < 2) throw std::invalid_argument("annulus grid needs n_r >= 1 and n_theta >= 2");
    const auto& a = spec.region.as_annulus();
    const Eigen::VectorXd radii = axis_points(a.inner, a.outer, nr, options.radial_placement);
    base_states.resize(2, nr * nth);
    for (int i = 0; i < nr; ++i) {
      for (int j = 0; j < nth; ++j) {
        const double t = 2.0 * std::numbers::pi * j / nth;
        base_states.col(i * nth + j) = a.center + radii[i] * Eigen::Vector2d(std::cos(t), std::sin(t));
      }
    }
  } else {
    const auto& b = spec.region.as_box();
    if (static_cast<Eigen::Index>(options.state_resolution.size()) != b.lower.size()) {
      throw std::invalid_argument("state_resolution must list one count per state axis");
    }
    std::vector<Eigen::VectorXd> axes;
    for (Eigen::Index i = 0; i < b.lower.size(); ++i) {
      const int n = options.state_resolution[static_cast<std::size_t>(i)];
      if (n < 2) throw std::invalid_argument("state resolution must be >= 2 per axis");
      axes.push_back(axis_points(b.lower[i], b.upper[i], n, options.state_placement));
    }
    base_states = cartesian(axes);
  }

  auto expand = [&](const Eigen::MatrixXd& ys, Eigen::MatrixXd& out_y, Eigen::MatrixXd& out_u) {
    out_y.resize(ys.rows(), ys.cols() * nu);
    out_u.resize(ctrl.rows(), ys.cols() * nu);
    for (Eigen::Index s = 0; s < ys.cols(); ++s) {
      for (Eigen::Index c = 0; c < nu; ++c) {
        out_y.col(s * nu + c) = ys.col(s);
        out_u.col(s * nu + c) = ctrl.col(c);
      }
    }
  };

  Eigen::MatrixXd atom_y;
  Eigen::MatrixXd atom_u;
  expand(base_states, atom_y, atom_u);

  for (const auto& anchor : anchors) {
    if (anchor.size() != spec.dim_state) throw std::invalid_argument("anchor dimension mismatch");
    if (!spec.region.contains(anchor)) throw std::invalid_argument("anchor lies outside the state region");
    Eigen::MatrixXd extra;
    if (polar) {
      const auto& a = spec.region.as_annulus();
      const Eigen::Vector2d rel = anchor - a.center;
      const double r = rel.norm();
      bool present = false;
      for (Eigen::Index s = 0; s < atom_y.cols() && !present; ++s) {
        present = std::abs((atom_y.col(s) - a.center).norm() - r) <= 1e-12;
      }
      if (present) continue;
      const int nth = options.state_resolution[1];
      const double t0 = std::atan2(rel[1], rel[0]);
      extra.resize(2, nth);
      for (int j = 0; j < nth; ++j) {
        const double t = t0 + 2.0 * std::numbers::pi * j / nth;
        extra.col(j) = a.center + r * Eigen::Vector2d(std::cos(t), std::sin(t));
      }
      extra.col(0) = anchor;
    } else {
      const bool present = ((atom_y.colwise() - anchor).colwise().norm().array() <= 1e-12).any();
      if (present) continue;
      extra = anchor;
    }
    Eigen::MatrixXd ey;
    Eigen::MatrixXd eu;
    expand(extra, ey, eu);
    append_columns(atom_y, ey);
    append_columns(atom_u, eu);
  }

  return Grid(std::move(atom_y), std::move(atom_u), options, polar);
}

Eigen::MatrixXd assemble_flow_matrix(const Grid& grid, const BasisSpec& basis, const SystemSpec& spec) {
  if (basis.dim != spec.dim_state || grid.states().rows() != spec.dim_state) {
    throw std::invalid_argument("assemble_flow_matrix: dimension mismatch");
  }
  Eigen::MatrixXd B(basis.size(), grid.size());
  for (Eigen::Index a = 0; a < grid.size(); ++a) {
    const Eigen::VectorXd f = spec.dynamics(grid.states().col(a), grid.controls().col(a));
    B.col(a) = phi_gradients(basis, grid.states().col(a)) * f;
  }
  return B;
}

Eigen::MatrixXd assemble_initial_matrix(const Grid& grid, const BasisSpec& basis, const SystemSpec& spec,
                                        const VectorRef& y0) {
  if (y0.size() != spec.dim_state) throw std::invalid_argument("y0 dimension mismatch");
  if (!spec.region.contains(y0)) throw std::invalid_argument("y0 lies outside the state region");
  const Eigen::VectorXd at_y0 = phi_values(basis, y0);
  Eigen::MatrixXd C(basis.size(), grid.size());
  for (Eigen::Index a = 0; a < grid.size(); ++a) C.col(a) = at_y0 - phi_values(basis, grid.states().col(a));
  return C;
}

Eigen::VectorXd assemble_cost_vector(const Grid& grid, const SystemSpec& spec) {
  Eigen::VectorXd c(grid.size());
  for (Eigen::Index a = 0; a < grid.size(); ++a) c[a] = spec.cost(grid.states().col(a), grid.controls().col(a));
  return c;
}

DiscreteMeasure DiscreteMeasure::zero(const Grid& grid) {
  return {Eigen::VectorXd::Zero(grid.size()), grid.fingerprint()};
}

DiscreteMeasure DiscreteMeasure::dirac(const Grid& grid, Eigen::Index atom) {
  if (atom < 0 || atom >= grid.size()) throw std::out_of_range("dirac atom index out of range");
  auto m = zero(grid);
  m.weights[atom] = 1.0;
  return m;
}

DiscreteMeasure DiscreteMeasure::uniform(const Grid& grid) {
  return {Eigen::VectorXd::Constant(grid.size(), 1.0 / static_cast<double>(grid.size())), grid.fingerprint()};
}

void validate_measure(const DiscreteMeasure& measure, bool probability, double tol) {
  if (measure.weights.size() > 0 && measure.weights.minCoeff() < 0.0) {
    throw std::invalid_argument("measure has negative weights");
  }
  if (probability && std::abs(measure.mass() - 1.0) > tol) {
    throw std::invalid_argument("probability measure mass differs from 1");
  }
}

double integrate_measure(const DiscreteMeasure& measure, const VectorRef& q_values) {
  if (measure.weights.size() != q_values.size()) throw std::invalid_argument("integrate_measure: length mismatch");
  return measure.weights.dot(q_values);
}

}  // namespace occlp
