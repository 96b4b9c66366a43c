#pragma once

// Independent oracles used to validate the solver on tiny instances: an
// exact 2x2 entropic best response via bisection, an exact small-instance
// W1 solver by enumerating spanning-tree bases of the transportation
// polytope, the transport-entropy inequality check, and the fixed-point
// residual of a converged run. None of these share code with the solver
// paths they check.

#include "sfw/functional.hpp"
#include "sfw/inner_sinkhorn.hpp"
#include "sfw/measures.hpp"
#include "sfw/reference_kernel.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace sfw {

/// 2x2 problem data. The feasible couplings form the segment
/// theta in [max(0, mu1+nu1-1), min(mu1, nu1)] with pi_11 = theta.
struct TwoByTwoInstance {
  double mu1 = 0.5;
  double nu1 = 0.5;
  Eigen::Matrix2d log_kernel = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d phi = Eigen::Matrix2d::Zero();
};

namespace detail {

inline Eigen::Matrix2d coupling_2x2(const TwoByTwoInstance& inst, double theta) {
  Eigen::Matrix2d pi;
  pi << theta, inst.mu1 - theta, inst.nu1 - theta, 1.0 - inst.mu1 - inst.nu1 + theta;
  return pi.cwiseMax(0.0);
}

inline MeasurePtr two_point_measure(double first_weight) {
  std::vector<GridPoint> pts{GridPoint{0.0, {0.0, 0.0}}, GridPoint{0.0, {1.0, 0.0}}};
  Eigen::VectorXd w(2);
  w << first_weight, 1.0 - first_weight;
  return make_measure(std::move(pts), std::move(w));
}

}  // namespace detail

/// Minimizes <phi, pi> + H(pi || R) over the feasible segment by bisecting
/// the (strictly increasing) scalar derivative to an interval of width
/// 1e-14. The kernel normalization only shifts the objective by a constant,
/// so raw log weights are fine.
inline Coupling inner_oracle_2x2(const TwoByTwoInstance& inst) {
  if (!(inst.mu1 > 0.0 && inst.mu1 < 1.0 && inst.nu1 > 0.0 && inst.nu1 < 1.0)) {
    throw std::invalid_argument("inner_oracle_2x2: marginals must lie in (0, 1)");
  }
  const double lo = std::max(0.0, inst.mu1 + inst.nu1 - 1.0);
  const double hi = std::min(inst.mu1, inst.nu1);
  MeasurePtr mu = detail::two_point_measure(inst.mu1);
  MeasurePtr nu = detail::two_point_measure(inst.nu1);
  if (hi - lo <= 1e-15) {
    return Coupling(std::move(mu), std::move(nu), detail::coupling_2x2(inst, lo));
  }
  const Eigen::Matrix2d& k = inst.log_kernel;
  const Eigen::Matrix2d& p = inst.phi;
  const double delta_phi = p(0, 0) - p(0, 1) - p(1, 0) + p(1, 1);
  const double delta_kernel = -k(0, 0) + k(0, 1) + k(1, 0) - k(1, 1);
  auto derivative = [&](double theta) {
    return delta_phi + delta_kernel + std::log(theta) - std::log(inst.mu1 - theta) -
           std::log(inst.nu1 - theta) + std::log(1.0 - inst.mu1 - inst.nu1 + theta);
  };
  double a = lo, b = hi;
  for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
    const double mid = 0.5 * (a + b);
    (derivative(mid) > 0.0 ? b : a) = mid;
  }
  return Coupling(std::move(mu), std::move(nu), detail::coupling_2x2(inst, 0.5 * (a + b)));
}

/// Exact optimal transport cost between weight vectors p and q under the
/// given pairwise distances, via complete enumeration of spanning-tree bases
/// of the transportation polytope. Exact but only viable for p.size() +
/// q.size() <= max_size; larger inputs are refused.
inline double wasserstein1_exact(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                                 const Eigen::MatrixXd& dist, int max_size = 8) {
  const int m = static_cast<int>(p.size()), n = static_cast<int>(q.size());
  if (m + n > max_size) {
    throw std::runtime_error("wasserstein1_exact: combined support exceeds the exact-solver cap");
  }
  if (dist.rows() != m || dist.cols() != n) {
    throw std::invalid_argument("wasserstein1_exact: distance matrix shape mismatch");
  }
  if (m < 1 || n < 1 || (p.array() < 0.0).any() || (q.array() < 0.0).any()) {
    throw std::invalid_argument("wasserstein1_exact: weights must be nonnegative and nonempty");
  }
  if (std::abs(p.sum() - q.sum()) > 1e-9) {
    throw std::invalid_argument("wasserstein1_exact: masses must balance");
  }

  const int nodes = m + n;
  const int n_edges = m * n;
  const int basis_size = nodes - 1;
  std::vector<int> edge_src(n_edges), edge_tgt(n_edges);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      edge_src[i * n + j] = i;
      edge_tgt[i * n + j] = m + j;
    }
  }

  std::vector<int> pick(basis_size);
  std::iota(pick.begin(), pick.end(), 0);
  std::vector<int> parent(nodes);
  std::vector<int> degree(nodes);
  std::vector<double> balance(nodes);
  std::vector<int> incident_edge(nodes);
  double best = std::numeric_limits<double>::infinity();

  auto find_root = [&](int u) {
    while (parent[u] != u) {
      parent[u] = parent[parent[u]];
      u = parent[u];
    }
    return u;
  };

  while (true) {
    // Tree test: basis_size edges with no cycle spans all nodes.
    std::iota(parent.begin(), parent.end(), 0);
    bool tree = true;
    for (int e : pick) {
      const int a = find_root(edge_src[e]);
      const int b = find_root(edge_tgt[e]);
      if (a == b) {
        tree = false;
        break;
      }
      parent[a] = b;
    }
    if (tree) {
      // Peel leaves; each leaf's edge flow is its remaining balance.
      std::fill(degree.begin(), degree.end(), 0);
      for (int u = 0; u < m; ++u) balance[u] = p[u];
      for (int v = 0; v < n; ++v) balance[m + v] = -q[v];
      // XOR-accumulate incident edges so a degree-1 node's edge pops out.
      std::fill(incident_edge.begin(), incident_edge.end(), 0);
      for (int e : pick) {
        ++degree[edge_src[e]];
        ++degree[edge_tgt[e]];
        incident_edge[edge_src[e]] ^= e + 1;
        incident_edge[edge_tgt[e]] ^= e + 1;
      }
      double cost = 0.0;
      bool feasible = true;
      int peeled = 0;
      std::vector<int> stack;
      for (int u = 0; u < nodes; ++u) {
        if (degree[u] == 1) stack.push_back(u);
      }
      while (!stack.empty() && feasible) {
        const int u = stack.back();
        stack.pop_back();
        if (degree[u] != 1) continue;
        const int e = incident_edge[u] - 1;
        const int other = edge_src[e] == u ? edge_tgt[e] : edge_src[e];
        const double flow = u < m ? balance[u] : -balance[u];
        if (flow < -1e-12) {
          feasible = false;
          break;
        }
        cost += flow * dist(edge_src[e] , edge_tgt[e] - m);
        balance[other] += balance[u];
        balance[u] = 0.0;
        degree[u] = 0;
        --degree[other];
        incident_edge[u] ^= e + 1;
        incident_edge[other] ^= e + 1;
        ++peeled;
        if (degree[other] == 1) stack.push_back(other);
      }
      if (feasible && peeled == basis_size && cost < best) best = cost;
    }
    // Next combination of basis_size out of n_edges.
    int k = basis_size - 1;
    while (k >= 0 && pick[k] == n_edges - basis_size + k) --k;
    if (k < 0) break;
    ++pick[k];
    for (int t = k + 1; t < basis_size; ++t) pick[t] = pick[t - 1] + 1;
  }
  if (!std::isfinite(best)) {
    throw std::runtime_error("wasserstein1_exact: no feasible basic solution (unbalanced input)");
  }
  return best;
}

/// Exact W1 between two discrete measures under the grid-point metric,
/// restricted to their positive supports.
inline double wasserstein1_exact_small(const DiscreteMeasure& p, const DiscreteMeasure& q,
                                       int max_size = 8) {
  std::vector<Eigen::Index> sp, sq;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p.weight(i) > 0.0) sp.push_back(i);
  }
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    if (q.weight(j) > 0.0) sq.push_back(j);
  }
  if (static_cast<int>(sp.size() + sq.size()) > max_size) {
    throw std::runtime_error("wasserstein1_exact_small: combined support exceeds the cap");
  }
  Eigen::VectorXd pw(sp.size()), qw(sq.size());
  Eigen::MatrixXd dist(sp.size(), sq.size());
  for (size_t a = 0; a < sp.size(); ++a) {
    pw[static_cast<Eigen::Index>(a)] = p.weight(sp[a]);
    for (size_t b = 0; b < sq.size(); ++b) {
      dist(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          distance(p.point(sp[a]), q.point(sq[b]));
    }
  }
  for (size_t b = 0; b < sq.size(); ++b) qw[static_cast<Eigen::Index>(b)] = q.weight(sq[b]);
  return wasserstein1_exact(pw, qw, dist, max_size);
}

struct TransportEntropyResult {
  double lhs = 0.0;  // W1(p, q)
  double rhs = 0.0;  // sqrt(H(p||q)/2)
  bool ok = false;
};

/// Checks W1(p, q) <= sqrt(H(p||q)/2) for two couplings on a common product
/// space (product metric between support pairs). The bound presumes the
/// product space has diameter at most one; callers own that.
inline TransportEntropyResult transport_entropy_check(const Coupling& p, const Coupling& q,
                                                      int max_size = 8) {
  require_same_support(p, q, "transport_entropy_check");
  struct Atom {
    GridPoint src, tgt;
    double mass;
  };
  auto atoms = [](const Coupling& c) {
    std::vector<Atom> out;
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      for (Eigen::Index i = 0; i < c.rows(); ++i) {
        if (c.probs()(i, j) > 0.0) {
          out.push_back(Atom{c.source()->point(i), c.target()->point(j), c.probs()(i, j)});
        }
      }
    }
    return out;
  };
  const std::vector<Atom> ap = atoms(p), aq = atoms(q);
  if (static_cast<int>(ap.size() + aq.size()) > max_size) {
    throw std::runtime_error("transport_entropy_check: combined support exceeds the cap");
  }
  Eigen::VectorXd pw(ap.size()), qw(aq.size());
  Eigen::MatrixXd dist(ap.size(), aq.size());
  for (size_t a = 0; a < ap.size(); ++a) {
    pw[static_cast<Eigen::Index>(a)] = ap[a].mass;
    for (size_t b = 0; b < aq.size(); ++b) {
      const double ds = distance(ap[a].src, aq[b].src);
      const double dt = distance(ap[a].tgt, aq[b].tgt);
      dist(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          std::sqrt(ds * ds + dt * dt);
    }
  }
  for (size_t b = 0; b < aq.size(); ++b) qw[static_cast<Eigen::Index>(b)] = aq[b].mass;

  TransportEntropyResult res;
  res.lhs = wasserstein1_exact(pw, qw, dist, max_size);
  const double h = relative_entropy(p, q);
  res.rhs = std::isfinite(h) ? std::sqrt(0.5 * h) : std::numeric_limits<double>::infinity();
  res.ok = res.lhs <= res.rhs * (1.0 + 1e-9);
  return res;
}

/// TV distance between a plan and one full best response taken at it; small
/// at a converged flow's endpoint.
inline double fixed_point_residual(const Coupling& final, const ReferenceKernel& kernel,
                                   const FunctionalModel& solver_model,
                                   const InnerOptions& opts) {
  const Eigen::MatrixXd phi = solver_model.linear_derivative(final);
  const InnerResult best =
      solve_inner(kernel, phi, final.source(), final.target(), opts, nullptr, &final.probs());
  return total_variation(best.plan, final);
}

/// Strictly positive random coupling with the prescribed marginals, for
/// property tests: a jittered product measure pushed onto the marginal
/// polytope by exact alternating scalings.
inline Coupling make_random_coupling(MeasurePtr mu, MeasurePtr nu, std::mt19937_64& rng) {
  const Eigen::Index I = mu->size(), J = nu->size();
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  Eigen::MatrixXd w(I, J);
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = std::exp(jitter(rng));
  w.array() *= (mu->weights() * nu->weights().transpose()).array();
  for (int sweep = 0; sweep < 1000; ++sweep) {
    for (Eigen::Index i = 0; i < I; ++i) {
      const double r = w.row(i).sum();
      if (r > 0.0) w.row(i) *= mu->weight(i) / r;
    }
    for (Eigen::Index j = 0; j < J; ++j) {
      const double c = w.col(j).sum();
      if (c > 0.0) w.col(j) *= nu->weight(j) / c;
    }
    const double err = (w.rowwise().sum() - mu->weights()).cwiseAbs().sum();
    if (err <= 1e-14) break;
  }
  w /= w.sum();
  return Coupling(std::move(mu), std::move(nu), std::move(w));
}

}  // namespace sfw
