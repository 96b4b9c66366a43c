// Acceptance suite: end-to-end checks of the solver's identities,
// convergence behavior, and scale budget. Prints one line per criterion and
// exits with the number of failures.

#include "sfw/cli_commands.hpp"

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

using namespace sfw;

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

int g_failures = 0;

void report(int id, const std::string& label, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", id, label.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

ScenarioConfig desk_config() {
  ScenarioConfig cfg;  // paper defaults except the grid
  cfg.nx = 20;
  cfg.ny = 15;
  return cfg;
}

SfwConfig desk_solver(double alpha) {
  SfwConfig cfg;
  cfg.alpha = alpha;
  cfg.max_outer = 40;
  cfg.outer_tol = 1e-12;  // run the full 40 steps for rate diagnostics
  return cfg;
}

double fitted_log_gap_slope(const SfwTrace& trace, double v_star) {
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  int n = 0;
  for (const SfwStep& s : trace.steps) {
    const double gap = s.energy - v_star;
    if (!(gap > 0.0)) continue;
    st += s.t;
    sl += std::log(gap);
    stt += s.t * s.t;
    stl += s.t * std::log(gap);
    ++n;
  }
  return n > 1 ? (n * stl - st * sl) / (n * stt - st * st) : 0.0;
}

}  // namespace

int main() {
  const uint64_t seed = 20250401;

  // 1. Tilting identity on 1000 random 5x5 instances, residual <= 1e-12, < 5 s.
  {
    Stopwatch watch;
    const auto check = detail::check_tilting_identity(seed + 1, false);
    const double elapsed = watch.seconds();
    report(1, "tilting identity",
           check.pass && elapsed < 5.0,
           fmt("max residual %.3e (tol 1e-12), %.2f s", check.details["max_residual"].get<double>(),
               elapsed));
  }

  // 2. Inner solver vs the 2x2 bisection oracle (TV 1e-8, 100 instances) and
  //    first-order residual <= 1e-8 at inner tol 1e-12, < 10 s.
  {
    Stopwatch watch;
    const auto oracle = detail::check_inner_oracle(seed + 2);
    const auto first_order = detail::check_first_order(seed + 3);
    const double elapsed = watch.seconds();
    report(2, "inner solver correctness",
           oracle.pass && first_order.pass && elapsed < 10.0,
           fmt("max TV %.3e (tol 1e-8), max residual %.3e (tol 1e-8), %.2f s",
               oracle.details["max_tv"].get<double>(),
               first_order.details["max_residual"].get<double>(), elapsed));
  }

  // 3. Feasibility along the desk-scale flow: every iterate within 1e-4 of the
  //    marginals, and each FW combination no worse than its two inputs, < 30 s.
  {
    Stopwatch watch;
    const Scenario s = build_scenario(desk_config());
    const SfwConfig cfg = desk_solver(0.02);
    Coupling plan = default_initial(s.kernel, s.mu, s.nu);
    double worst_iterate = marginal_residual_max(plan);
    double worst_degradation = 0.0;
    Potentials warm;
    bool have_warm = false;
    for (int step = 0; step < cfg.max_outer; ++step) {
      const Eigen::MatrixXd phi = s.solver_model->linear_derivative(plan);
      const InnerResult inner = solve_inner(s.kernel, phi, s.mu, s.nu, cfg.inner,
                                            have_warm ? &warm : nullptr, &plan.probs());
      warm = inner.potentials;
      have_warm = true;
      const double res_best = std::max(inner.row_residual, inner.col_residual);
      const Coupling next = convex_combine(plan, inner.plan, cfg.alpha);
      const double res_next = marginal_residual_max(next);
      worst_degradation = std::max(
          worst_degradation, res_next - std::max(marginal_residual_max(plan), res_best));
      worst_iterate = std::max(worst_iterate, res_next);
      plan = next;
    }
    const double elapsed = watch.seconds();
    report(3, "feasibility along the flow",
           worst_iterate <= 1e-4 && worst_degradation <= 1e-12 && elapsed < 30.0,
           fmt("max marginal residual %.3e (tol 1e-4), max degradation %.3e, %.2f s",
               worst_iterate, worst_degradation, elapsed));
  }

  // Desk-scale runs reused by criteria 4-7.
  const Scenario desk = build_scenario(desk_config());
  const Coupling desk_initial = default_initial(desk.kernel, desk.mu, desk.nu);
  const std::vector<double> alphas{0.01, 0.02, 0.04};
  std::vector<SfwResult> desk_runs;
  for (double a : alphas) {
    desk_runs.push_back(run_sfw(desk_initial, desk.kernel, *desk.solver_model, desk_solver(a)));
  }

  // 4. Monotone energy for all three rates, and dissipation residuals that
  //    shrink with alpha at matched times.
  {
    bool monotone = true;
    double worst_rise = 0.0;
    for (const SfwResult& run : desk_runs) {
      for (size_t k = 0; k + 1 < run.trace.steps.size(); ++k) {
        const double rise = run.trace.steps[k + 1].energy - run.trace.steps[k].energy;
        worst_rise = std::max(worst_rise, rise);
        if (rise > 1e-12) monotone = false;
      }
      const double last_rise = run.trace.final_energy - run.trace.steps.back().energy;
      worst_rise = std::max(worst_rise, last_rise);
      if (last_rise > 1e-12) monotone = false;
    }
    const std::vector<double> r_fine = dissipation_residuals(desk_runs[0].trace);
    const std::vector<double> r_coarse = dissipation_residuals(desk_runs[2].trace);
    int matched = 0, smaller = 0;
    for (size_t sc = 0; sc < desk_runs[2].trace.steps.size() && sc < r_coarse.size(); ++sc) {
      const double t = desk_runs[2].trace.steps[sc].t;
      for (size_t sf = 0; sf < desk_runs[0].trace.steps.size() && sf < r_fine.size(); ++sf) {
        if (std::abs(desk_runs[0].trace.steps[sf].t - t) <= 1e-9) {
          ++matched;
          if (r_fine[sf] < r_coarse[sc]) ++smaller;
        }
      }
    }
    const double fraction = matched > 0 ? static_cast<double>(smaller) / matched : 0.0;
    report(4, "energy dissipation",
           monotone && matched > 0 && fraction >= 0.9,
           fmt("worst energy rise %.3e (slack 1e-12), residual smaller at %.0f%% of %d matched "
               "times (need 90%%)",
               worst_rise, 100.0 * fraction, matched));
  }

  // Reference run for the optimal-energy anchor (criteria 5-6).
  SfwConfig ref_cfg = desk_solver(0.04);
  ref_cfg.max_outer = 400;
  ref_cfg.inner.tol = 1e-8;
  ref_cfg.inner.max_iters = 200;
  const SfwResult desk_ref = run_sfw(desk_initial, desk.kernel, *desk.solver_model, ref_cfg);
  const double v_star = estimate_optimal_energy(desk_ref.trace);

  // 5. Exponential convergence: gap(t) <= 1.1 gap(0) e^{-t} and fitted
  //    log-gap slope <= -0.8 on every desk run.
  {
    bool bound_ok = true;
    double worst_slope = -std::numeric_limits<double>::infinity();
    double worst_excess = 0.0;
    for (const SfwResult& run : desk_runs) {
      const double gap0 = run.trace.steps.front().energy - v_star;
      if (!(gap0 > 0.0)) bound_ok = false;
      for (const SfwStep& s : run.trace.steps) {
        const double gap = s.energy - v_star;
        if (!(gap > 0.0)) continue;
        const double allowed = 1.1 * gap0 * std::exp(-s.t);
        worst_excess = std::max(worst_excess, gap / allowed);
        if (gap > allowed) bound_ok = false;
      }
      worst_slope = std::max(worst_slope, fitted_log_gap_slope(run.trace, v_star));
    }
    report(5, "exponential convergence",
           bound_ok && worst_slope <= -0.8,
           fmt("max gap/bound %.3f (need <= 1), worst fitted slope %.3f (need <= -0.8)",
               worst_excess, worst_slope));
  }

  // 6. Rescaled log-gap curves collapse within 10% after the first 5 steps.
  {
    std::vector<detail::GapCurve> curves;
    for (size_t k = 0; k < alphas.size(); ++k) {
      curves.push_back(detail::gap_curve(alphas[k], desk_runs[k].trace, v_star));
    }
    const double deviation = detail::collapse_deviation(curves, 5);
    report(6, "rescaled gap collapse", deviation <= 0.10,
           fmt("max pairwise log-gap deviation %.3f (need <= 0.10)", deviation));
  }

  // 7. Congestion steering: gamma = 20 strictly lowers both the max cell load
  //    and the congestion cost relative to the gamma = 0 plan.
  {
    ScenarioConfig no_pen_cfg = desk_config();
    no_pen_cfg.gamma = 0.0;
    const Scenario no_pen = build_scenario(no_pen_cfg);
    const SfwResult plain = run_sfw(default_initial(no_pen.kernel, no_pen.mu, no_pen.nu),
                                    no_pen.kernel, *no_pen.solver_model, desk_solver(0.02));
    const auto* quad = dynamic_cast<const QuadraticCongestion*>(desk.model.get());
    const SfwResult& steered = desk_runs[1];  // alpha = 0.02
    const double max_load_steered = quad->spec().loads(steered.final.probs()).maxCoeff();
    const double max_load_plain = quad->spec().loads(plain.final.probs()).maxCoeff();
    const double f_steered = desk.model->value(steered.final);
    const double f_plain = desk.model->value(plain.final);
    report(7, "congestion effect",
           max_load_steered < max_load_plain && f_steered < f_plain,
           fmt("max cell load %.4f vs %.4f, congestion cost %.4f vs %.4f", max_load_steered,
               max_load_plain, f_steered, f_plain));
  }

  // 8. Transport-entropy bound on 1000 randomized small instances.
  {
    const auto check = detail::check_transport_entropy(seed + 5);
    report(8, "transport-entropy bound", check.pass,
           fmt("%d violations in 1000 trials, worst margin %.3e",
               check.details["violations"].get<int>(),
               check.details["worst_margin"].get<double>()));
  }

  // 9. With the zero functional, one full-rate step reproduces a standalone
  //    entropic solve within TV 1e-6.
  {
    ScenarioConfig cfg = desk_config();
    cfg.nx = 10;
    cfg.ny = 8;
    cfg.gamma = 0.0;
    const Scenario s = build_scenario(cfg);
    SfwConfig run_cfg;
    run_cfg.alpha = 1.0;
    run_cfg.max_outer = 3;
    run_cfg.inner.tol = 1e-8;
    run_cfg.inner.max_iters = 2000;
    const SfwResult result = run_sfw(default_initial(s.kernel, s.mu, s.nu), s.kernel,
                                     *s.solver_model, run_cfg);
    const InnerResult standalone =
        solve_inner(s.kernel, Eigen::MatrixXd::Zero(s.kernel.rows(), s.kernel.cols()), s.mu,
                    s.nu, run_cfg.inner);
    const double tv = total_variation(result.final, standalone.plan);
    report(9, "zero-functional reduction", tv <= 1e-6, fmt("TV %.3e (tol 1e-6)", tv));
  }

  // 10. Quadratic-model derivative residual scales exactly as eta^2; zero
  //     functional residuals vanish identically.
  {
    const auto check = detail::check_derivative_consistency(seed + 4);
    report(10, "derivative consistency", check.pass,
           fmt("ratio spread %.3e (tol 1e-6), zero-model residual %.3e",
               check.details["max_relative_ratio_spread"].get<double>(),
               check.details["max_zero_functional_residual"].get<double>()));
  }

  // 11. Paper-scale run (2460 x 2460) with monotone energy in under 10 minutes.
  {
    Stopwatch watch;
    const Scenario paper = build_scenario(ScenarioConfig{});
    const Coupling initial = default_initial(paper.kernel, paper.mu, paper.nu);
    SfwConfig cfg;
    cfg.alpha = 0.02;
    cfg.max_outer = 40;
    cfg.outer_tol = 1e-4;
    const SfwResult run = run_sfw(initial, paper.kernel, *paper.solver_model, cfg);
    bool monotone = true;
    for (size_t k = 0; k + 1 < run.trace.steps.size(); ++k) {
      if (run.trace.steps[k + 1].energy > run.trace.steps[k].energy + 1e-12) monotone = false;
    }
    if (run.trace.final_energy > run.trace.steps.back().energy + 1e-12) monotone = false;
    const double elapsed = watch.seconds();
    report(11, "paper-scale run", monotone && elapsed < 600.0,
           fmt("%zu x %zu coupling, %zu outer steps, monotone=%s, %.1f s (budget 600 s)",
               static_cast<size_t>(paper.kernel.rows()), static_cast<size_t>(paper.kernel.cols()),
               run.trace.steps.size(), monotone ? "yes" : "no", elapsed));
  }

  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
  } else {
    std::printf("%d acceptance criteria FAILED\n", g_failures);
  }
  return g_failures;
}
