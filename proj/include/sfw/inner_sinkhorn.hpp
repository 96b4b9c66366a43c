#pragma once

// Entropic best response: minimize <phi, pi> + H(pi || R) over couplings
// with prescribed marginals, by log-domain Sinkhorn scaling on the tilted
// kernel. Marginal updates are exact row/column scalings; the global
// normalizing constant rides along in the potentials and the gauge is fixed
// once at the end (mu-weighted mean of f equals zero).

#include "sfw/measures.hpp"
#include "sfw/reference_kernel.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace sfw {

struct Potentials {
  Eigen::VectorXd f;  // over source support; +inf on zero-mass points
  Eigen::VectorXd g;  // over target support
};

enum class SinkhornSchedule { gauss_seidel, jacobi };

struct InnerOptions {
  double tol = 1e-4;
  int max_iters = 30;
  SinkhornSchedule schedule = SinkhornSchedule::gauss_seidel;
};

struct InnerResult {
  Coupling plan;
  Potentials potentials;
  int iterations = 0;
  double final_step_tv = std::numeric_limits<double>::quiet_NaN();
  double log_constant = 0.0;  // common value of the first-order system on the support
  double row_residual = 0.0;  // worst row sum deviation from mu
  double col_residual = 0.0;  // worst column sum deviation from nu
  bool converged = false;
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

/// r_i = logsumexp_j (a_ij - g_j). Entries of a may be -inf, entries of g
/// may be +inf; rows with no finite contribution come back -inf.
inline Eigen::VectorXd shifted_row_logsumexp(const Eigen::MatrixXd& a, const Eigen::VectorXd& g) {
  const Eigen::Index I = a.rows(), J = a.cols();
  Eigen::VectorXd m = Eigen::VectorXd::Constant(I, kNegInf);
  for (Eigen::Index j = 0; j < J; ++j) {
    const double gj = g[j];
    if (gj == kPosInf) continue;
    const double* col = a.data() + j * I;
    for (Eigen::Index i = 0; i < I; ++i) {
      const double v = col[i] - gj;
      if (v > m[i]) m[i] = v;
    }
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(I);
  for (Eigen::Index j = 0; j < J; ++j) {
    const double gj = g[j];
    if (gj == kPosInf) continue;
    const double* col = a.data() + j * I;
    for (Eigen::Index i = 0; i < I; ++i) acc[i] += std::exp(col[i] - gj - m[i]);
  }
  Eigen::VectorXd out(I);
  for (Eigen::Index i = 0; i < I; ++i) out[i] = m[i] == kNegInf ? kNegInf : m[i] + std::log(acc[i]);
  return out;
}

/// c_j = logsumexp_i (a_ij - f_i).
inline Eigen::VectorXd shifted_col_logsumexp(const Eigen::MatrixXd& a, const Eigen::VectorXd& f) {
  const Eigen::Index I = a.rows(), J = a.cols();
  Eigen::VectorXd out(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const double* col = a.data() + j * I;
    double m = kNegInf;
    for (Eigen::Index i = 0; i < I; ++i) {
      if (f[i] == kPosInf) continue;
      const double v = col[i] - f[i];
      if (v > m) m = v;
    }
    if (m == kNegInf) {
      out[j] = kNegInf;
      continue;
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < I; ++i) {
      if (f[i] == kPosInf) continue;
      acc += std::exp(col[i] - f[i] - m);
    }
    out[j] = m + std::log(acc);
  }
  return out;
}

/// plan = exp(a - f (+) g), normalized to unit mass.
inline void form_plan(const Eigen::MatrixXd& a, const Eigen::VectorXd& f,
                      const Eigen::VectorXd& g, Eigen::MatrixXd& plan) {
  const Eigen::Index I = a.rows(), J = a.cols();
  plan.resize(I, J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const double gj = g[j];
    const double* col = a.data() + j * I;
    double* out = plan.data() + j * I;
    if (gj == kPosInf) {
      for (Eigen::Index i = 0; i < I; ++i) out[i] = 0.0;
      continue;
    }
    for (Eigen::Index i = 0; i < I; ++i) {
      out[i] = f[i] == kPosInf ? 0.0 : std::exp(col[i] - f[i] - gj);
    }
  }
  plan /= plan.sum();
}

/// Median of `values` under `weights` (both positive); consumes the buffer.
inline double weighted_median(std::vector<std::pair<double, double>>& items, double total) {
  if (items.empty()) return 0.0;
  const double target = 0.5 * total;
  size_t lo = 0, hi = items.size();
  double below = 0.0;
  auto by_value = [](const std::pair<double, double>& a, const std::pair<double, double>& b) {
    return a.first < b.first;
  };
  while (hi - lo > 64) {
    const size_t mid = lo + (hi - lo) / 2;
    std::nth_element(items.begin() + lo, items.begin() + mid, items.begin() + hi, by_value);
    double left = 0.0;
    for (size_t k = lo; k < mid; ++k) left += items[k].second;
    if (below + left >= target) {
      hi = mid;
    } else {
      below += left;
      lo = mid;
    }
  }
  std::sort(items.begin() + lo, items.begin() + hi, by_value);
  double acc = below;
  for (size_t k = lo; k < hi; ++k) {
    acc += items[k].second;
    if (acc >= target) return items[k].first;
  }
  return items[hi - 1].first;
}

/// First-order combination phi + log(plan/R) + f (+) g on the support,
/// together with its mass-weighted median.
inline std::pair<Eigen::MatrixXd, double> optimality_field(const Eigen::MatrixXd& plan,
                                                           const ReferenceKernel& kernel,
                                                           const Eigen::MatrixXd& phi,
                                                           const Potentials& pot) {
  const Eigen::Index I = plan.rows(), J = plan.cols();
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(I, J, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::pair<double, double>> items;
  items.reserve(static_cast<size_t>(plan.size()));
  double total = 0.0;
  for (Eigen::Index j = 0; j < J; ++j) {
    for (Eigen::Index i = 0; i < I; ++i) {
      const double p = plan(i, j);
      if (p <= 0.0) continue;
      const double v =
          phi(i, j) + std::log(p) - kernel.log_weights()(i, j) + pot.f[i] + pot.g[j];
      h(i, j) = v;
      items.emplace_back(v, p);
      total += p;
    }
  }
  const double med = weighted_median(items, total);
  return {std::move(h), med};
}

}  // namespace detail

/// Sinkhorn scaling toward marginals (mu, nu) on the kernel tilted by phi.
/// Each sweep rescales rows then columns (gauss_seidel re-forms the matrix
/// between the two, jacobi derives both from the same one); iteration stops
/// once consecutive plans differ by at most tol in total variation (measured
/// against tv_reference before the first sweep) and the plan's marginal
/// residuals are within tol too.
inline InnerResult solve_inner(const ReferenceKernel& kernel, const Eigen::MatrixXd& phi,
                               MeasurePtr mu, MeasurePtr nu, const InnerOptions& opts,
                               const Potentials* warm_start = nullptr,
                               const Eigen::MatrixXd* tv_reference = nullptr) {
  using detail::kNegInf;
  using detail::kPosInf;
  const Eigen::Index I = kernel.rows(), J = kernel.cols();
  if (!mu || !nu || mu->size() != I || nu->size() != J) {
    throw std::invalid_argument("solve_inner: marginal sizes do not match kernel");
  }
  if (phi.rows() != I || phi.cols() != J || !phi.allFinite()) {
    throw std::invalid_argument("solve_inner: phi must be finite and match the kernel shape");
  }
  if (!(opts.tol > 0.0) || opts.max_iters < 1) {
    throw std::invalid_argument("solve_inner: tol must be > 0 and max_iters >= 1");
  }

  const Eigen::MatrixXd a = kernel.log_weights() - phi;
  Eigen::VectorXd log_mu(I), log_nu(J);
  for (Eigen::Index i = 0; i < I; ++i) {
    log_mu[i] = mu->weight(i) > 0.0 ? std::log(mu->weight(i)) : kNegInf;
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    log_nu[j] = nu->weight(j) > 0.0 ? std::log(nu->weight(j)) : kNegInf;
  }
  for (Eigen::Index i = 0; i < I; ++i) {
    if (log_mu[i] == kNegInf) continue;
    bool reachable = false;
    for (Eigen::Index j = 0; j < J && !reachable; ++j) {
      reachable = log_nu[j] > kNegInf && a(i, j) > kNegInf;
    }
    if (!reachable) {
      throw std::runtime_error("solve_inner: source point " + std::to_string(i) +
                               " has no reachable target mass");
    }
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    if (log_nu[j] == kNegInf) continue;
    bool reachable = false;
    for (Eigen::Index i = 0; i < I && !reachable; ++i) {
      reachable = log_mu[i] > kNegInf && a(i, j) > kNegInf;
    }
    if (!reachable) {
      throw std::runtime_error("solve_inner: target point " + std::to_string(j) +
                               " has no reachable source mass");
    }
  }

  Eigen::VectorXd f, g;
  if (warm_start) {
    if (warm_start->f.size() != I || warm_start->g.size() != J) {
      throw std::invalid_argument("solve_inner: warm start size mismatch");
    }
    f = warm_start->f;
    g = warm_start->g;
  } else {
    f = Eigen::VectorXd::Zero(I);
    g = Eigen::VectorXd::Zero(J);
  }

  Eigen::MatrixXd plan, prev;
  if (tv_reference) {
    if (tv_reference->rows() != I || tv_reference->cols() != J) {
      throw std::invalid_argument("solve_inner: tv_reference shape mismatch");
    }
    prev = *tv_reference;
  } else {
    detail::form_plan(a, f, g, prev);
  }

  // Zero-mass marginal points get +inf potentials (their plan slices are
  // identically zero); subtracting their -inf log weights would produce NaN.
  const auto row_update = [&](const Eigen::VectorXd& g_cur) {
    Eigen::VectorXd f_new = detail::shifted_row_logsumexp(a, g_cur) - log_mu;
    for (Eigen::Index i = 0; i < I; ++i) {
      if (log_mu[i] == kNegInf) f_new[i] = kPosInf;
    }
    return f_new;
  };
  const auto col_update = [&](const Eigen::VectorXd& f_cur) {
    Eigen::VectorXd g_new = detail::shifted_col_logsumexp(a, f_cur) - log_nu;
    for (Eigen::Index j = 0; j < J; ++j) {
      if (log_nu[j] == kNegInf) g_new[j] = kPosInf;
    }
    return g_new;
  };

  // Stopping needs both a small step and small marginal residuals: from a
  // warm start the iteration can move less than tol per sweep while the
  // plan is still far from feasible (slowly contracting kernels), and the
  // result contract promises marginals within tol.
  int iterations = 0;
  double step_tv = std::numeric_limits<double>::quiet_NaN();
  double row_residual = 0.0, col_residual = 0.0;
  bool converged = false;
  for (int k = 1; k <= opts.max_iters; ++k) {
    if (opts.schedule == SinkhornSchedule::gauss_seidel) {
      f = row_update(g);
      g = col_update(f);
    } else {
      Eigen::VectorXd f_next = row_update(g);
      Eigen::VectorXd g_next = col_update(f);
      f = std::move(f_next);
      g = std::move(g_next);
    }
    detail::form_plan(a, f, g, plan);
    iterations = k;
    step_tv = total_variation(plan, prev);
    row_residual = (plan.rowwise().sum() - mu->weights()).cwiseAbs().maxCoeff();
    col_residual = (plan.colwise().sum().transpose() - nu->weights()).cwiseAbs().maxCoeff();
    std::swap(prev, plan);
    if (step_tv <= opts.tol && std::max(row_residual, col_residual) <= opts.tol) {
      converged = true;
      break;
    }
  }
  Eigen::MatrixXd final_plan = std::move(prev);

  // Gauge: both weighted means vanish; whatever constant the potentials
  // carried moves into log_constant via the optimality field's median.
  double f_mean = 0.0, g_mean = 0.0;
  for (Eigen::Index i = 0; i < I; ++i) {
    if (mu->weight(i) > 0.0) f_mean += mu->weight(i) * f[i];
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    if (nu->weight(j) > 0.0) g_mean += nu->weight(j) * g[j];
  }
  for (Eigen::Index i = 0; i < I; ++i) {
    if (f[i] != kPosInf) f[i] -= f_mean;
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    if (g[j] != kPosInf) g[j] -= g_mean;
  }

  Potentials potentials{std::move(f), std::move(g)};
  const double log_constant =
      detail::optimality_field(final_plan, kernel, phi, potentials).second;
  return InnerResult{Coupling(std::move(mu), std::move(nu), std::move(final_plan)),
                     std::move(potentials), iterations,  step_tv,
                     log_constant,           row_residual, col_residual,
                     converged};
}

/// Max deviation of the first-order combination from its central value over
/// the plan's support; zero at an exact solution.
inline double first_order_residual(const InnerResult& result, const ReferenceKernel& kernel,
                                   const Eigen::MatrixXd& phi) {
  const auto [h, med] = detail::optimality_field(result.plan.probs(), kernel, phi,
                                                 result.potentials);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < h.size(); ++k) {
    const double v = h.data()[k];
    if (std::isnan(v)) continue;
    worst = std::max(worst, std::abs(v - med));
  }
  return worst;
}

}  // namespace sfw
