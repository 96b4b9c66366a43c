#pragma once

// Outer Frank-Wolfe loop over couplings: linearize the functional at the
// current plan, solve the entropic best response on the tilted kernel, move
// a step alpha toward it, and record energy/dissipation diagnostics.

#include "sfw/functional.hpp"
#include "sfw/inner_sinkhorn.hpp"
#include "sfw/measures.hpp"
#include "sfw/reference_kernel.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace sfw {

struct SfwConfig {
  double alpha = 0.02;  // update rate in (0, 1]
  int max_outer = 40;
  double outer_tol = 1e-4;
  InnerOptions inner{};
  bool record_entropies = true;
};

struct SfwStep {
  int outer_iter = 0;
  double t = 0.0;          // accumulated flow time, sum of the alphas taken so far
  double energy = 0.0;     // V at the iterate before this step's update
  double functional_value = 0.0;
  double sym_entropy = 0.0;  // H(best_response || plan) + H(plan || best_response)
  double step_tv = 0.0;
  int inner_iterations = 0;
  double marginal_res = 0.0;  // worst marginal entry deviation after the update
  double alpha_used = 0.0;
};

struct SfwTrace {
  std::vector<SfwStep> steps;
  double final_energy = 0.0;
  double final_functional_value = 0.0;
  double final_marginal_res = 0.0;
  bool converged = false;
};

struct SfwResult {
  Coupling final;
  SfwTrace trace;
  Potentials potentials;  // from the last inner solve
};

/// V(pi) = H(pi || R) + F(pi), with F the model in solver units. +inf when
/// pi escapes the kernel support.
inline double energy(const Coupling& pi, const ReferenceKernel& kernel,
                     const FunctionalModel& model) {
  if (pi.rows() != kernel.rows() || pi.cols() != kernel.cols()) {
    throw std::invalid_argument("energy: coupling/kernel shape mismatch");
  }
  return relative_entropy_log_ref(pi.probs(), kernel.log_weights()) + model.value(pi);
}

/// sum c.pi + F(pi) + epsilon H(pi || mu (x) nu), the objective in physical
/// units; model here is the unscaled functional. Infinite-cost entries only
/// contribute where pi puts mass on them.
inline double physical_energy(const Coupling& pi, const Eigen::MatrixXd& cost, double epsilon,
                              const FunctionalModel& model) {
  if (cost.rows() != pi.rows() || cost.cols() != pi.cols()) {
    throw std::invalid_argument("physical_energy: cost shape mismatch");
  }
  double transport = 0.0;
  const double* p = pi.probs().data();
  const double* c = cost.data();
  for (Eigen::Index k = 0; k < pi.probs().size(); ++k) {
    if (p[k] > 0.0) transport += p[k] * c[k];
  }
  const Eigen::MatrixXd product =
      pi.source()->weights() * pi.target()->weights().transpose();
  return transport + model.value(pi) + epsilon * relative_entropy(pi.probs(), product);
}

/// Product measure mu (x) nu restricted to the kernel support; when the
/// support excludes pairs the marginals are repaired by exact alternating
/// scalings before returning. Full-support kernels give back mu (x) nu
/// bit-exactly.
inline Coupling default_initial(const ReferenceKernel& kernel, MeasurePtr mu, MeasurePtr nu) {
  if (!mu || !nu || mu->size() != kernel.rows() || nu->size() != kernel.cols()) {
    throw std::invalid_argument("default_initial: marginal sizes do not match kernel");
  }
  const Eigen::Index I = kernel.rows(), J = kernel.cols();
  Eigen::MatrixXd probs = mu->weights() * nu->weights().transpose();
  bool restricted = false;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    if (!std::isfinite(kernel.log_weights().data()[k]) && probs.data()[k] > 0.0) {
      probs.data()[k] = 0.0;
      restricted = true;
    }
  }
  if (restricted) {
    for (int sweep = 0; sweep < 10000; ++sweep) {
      Eigen::VectorXd row = probs.rowwise().sum();
      for (Eigen::Index i = 0; i < I; ++i) {
        if (mu->weight(i) > 0.0) {
          if (!(row[i] > 0.0)) {
            throw std::runtime_error("default_initial: kernel support too sparse for row " +
                                     std::to_string(i));
          }
          probs.row(i) *= mu->weight(i) / row[i];
        }
      }
      Eigen::VectorXd col = probs.colwise().sum().transpose();
      double err = 0.0;
      for (Eigen::Index j = 0; j < J; ++j) {
        if (nu->weight(j) > 0.0) {
          if (!(col[j] > 0.0)) {
            throw std::runtime_error("default_initial: kernel support too sparse for column " +
                                     std::to_string(j));
          }
          probs.col(j) *= nu->weight(j) / col[j];
        }
        err += std::abs(probs.col(j).sum() - nu->weight(j));
      }
      err += (probs.rowwise().sum() - mu->weights()).cwiseAbs().sum();
      if (err <= 1e-13) break;
    }
    probs /= probs.sum();
  }
  return Coupling(std::move(mu), std::move(nu), std::move(probs));
}

/// Runs the flow from P0. Each step: phi = dF/dpi(P), best response via
/// solve_inner (warm-started, with P as the first TV reference), then
/// P <- (1-alpha) P + alpha best_response. Stops when the outer step's TV
/// drops to outer_tol. If V ever increases by more than 1e-8 the rate is
/// halved once; a second increase aborts.
inline SfwResult run_sfw(const Coupling& initial, const ReferenceKernel& kernel,
                         const FunctionalModel& model, const SfwConfig& config) {
  if (!(config.alpha > 0.0 && config.alpha <= 1.0)) {
    throw std::invalid_argument("run_sfw: alpha must lie in (0, 1]");
  }
  if (config.max_outer < 1 || !(config.outer_tol > 0.0)) {
    throw std::invalid_argument("run_sfw: max_outer must be >= 1 and outer_tol > 0");
  }
  if (initial.rows() != kernel.rows() || initial.cols() != kernel.cols()) {
    throw std::invalid_argument("run_sfw: initial coupling does not match kernel");
  }
  if (marginal_residual(initial) > 1e-6) {
    throw std::invalid_argument("run_sfw: initial coupling is not feasible");
  }

  MeasurePtr mu = initial.source();
  MeasurePtr nu = initial.target();
  Coupling plan = initial;
  Potentials warm;
  bool have_warm = false;
  double alpha = config.alpha;
  double t = 0.0;
  int energy_increases = 0;

  SfwTrace trace;
  trace.steps.reserve(static_cast<size_t>(config.max_outer));
  double v_current = energy(plan, kernel, model);
  double f_current = model.value(plan);
  if (!std::isfinite(v_current)) {
    throw std::runtime_error("run_sfw: initial energy is not finite (P0 escapes the kernel support)");
  }

  for (int s = 0; s < config.max_outer; ++s) {
    const Eigen::MatrixXd phi = model.linear_derivative(plan);
    const InnerResult inner = solve_inner(kernel, phi, mu, nu, config.inner,
                                          have_warm ? &warm : nullptr, &plan.probs());
    warm = inner.potentials;
    have_warm = true;

    const double sym = config.record_entropies
                           ? relative_entropy(inner.plan, plan) + relative_entropy(plan, inner.plan)
                           : std::numeric_limits<double>::quiet_NaN();

    Coupling next = convex_combine(plan, inner.plan, alpha);
    double v_next = energy(next, kernel, model);
    if (!std::isfinite(v_next)) {
      throw std::runtime_error("run_sfw: energy diverged at outer step " + std::to_string(s) +
                               " (V=" + std::to_string(v_next) + ")");
    }
    while (v_next > v_current + 1e-8) {
      ++energy_increases;
      if (energy_increases >= 2) {
        throw std::runtime_error("run_sfw: energy increased twice (step " + std::to_string(s) +
                                 ", V " + std::to_string(v_current) + " -> " +
                                 std::to_string(v_next) + "); inner solves too loose");
      }
      alpha *= 0.5;
      next = convex_combine(plan, inner.plan, alpha);
      v_next = energy(next, kernel, model);
    }

    const double step_tv = total_variation(next, plan);
    trace.steps.push_back(SfwStep{s, t, v_current, f_current, sym, step_tv, inner.iterations,
                                  marginal_residual_max(next), alpha});
    t += alpha;
    plan = std::move(next);
    v_current = v_next;
    f_current = model.value(plan);
    if (step_tv <= config.outer_tol) {
      trace.converged = true;
      break;
    }
  }

  trace.final_energy = v_current;
  trace.final_functional_value = f_current;
  trace.final_marginal_res = marginal_residual_max(plan);
  return SfwResult{std::move(plan), std::move(trace), std::move(warm)};
}

/// Per-step |(V_{s+1} - V_s)/alpha_s + sym_entropy_s|; O(alpha) along a flow
/// that satisfies the dissipation identity, exactly zero at a fixed point.
inline std::vector<double> dissipation_residuals(const SfwTrace& trace) {
  std::vector<double> out;
  if (trace.steps.empty()) return out;
  out.reserve(trace.steps.size());
  for (size_t s = 0; s < trace.steps.size(); ++s) {
    const double v_here = trace.steps[s].energy;
    const double v_next =
        s + 1 < trace.steps.size() ? trace.steps[s + 1].energy : trace.final_energy;
    const double rate = (v_next - v_here) / trace.steps[s].alpha_used;
    out.push_back(std::abs(rate + trace.steps[s].sym_entropy));
  }
  return out;
}

/// Lower estimate of the optimal energy from a long run: the best energy
/// seen minus the final dissipation (which bounds the remaining gap).
inline double estimate_optimal_energy(const SfwTrace& trace) {
  double vmin = trace.final_energy;
  for (const SfwStep& s : trace.steps) vmin = std::min(vmin, s.energy);
  double d_last = 0.0;
  if (!trace.steps.empty() && std::isfinite(trace.steps.back().sym_entropy)) {
    d_last = std::max(0.0, trace.steps.back().sym_entropy);
  }
  return vmin - d_last;
}

}  // namespace sfw
