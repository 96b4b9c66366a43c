#pragma once

// run / sweep / verify entry points behind the CLI binary. Kept header-side
// so the test suite can drive them in-process and check exit codes and
// emitted files without spawning.

#include "sfw/config.hpp"
#include "sfw/sfw_flow.hpp"
#include "sfw/trace_io.hpp"
#include "sfw/uav_scenario.hpp"
#include "sfw/verification.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

namespace sfw {

inline constexpr const char* kSolverVersion = "0.1.0";

// Exit codes: 0 converged / all checks pass, 1 error, 2 iteration-cap stop,
// 3 verification failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitIterationCap = 2;
inline constexpr int kExitVerifyFailed = 3;

struct RunSetup {
  ScenarioConfig scenario;
  SfwConfig solver;
};

namespace detail {

inline std::vector<double> scalars_per_component(ConfigFile& cfg, const std::string& key) {
  std::vector<double> out;
  for (const auto& group : cfg.get_tuple_list("marginals", key)) {
    if (group.size() != 1) {
      throw ConfigError(key + ": expected one value per ';'-separated component");
    }
    out.push_back(group[0]);
  }
  return out;
}

inline MarginalSpec parse_marginal(ConfigFile& cfg, const std::string& prefix,
                                   const MarginalSpec& fallback) {
  const std::string section = "marginals";
  if (!cfg.has(section, prefix + "_kind")) return fallback;
  const std::string kind = cfg.get_string(section, prefix + "_kind", "");
  MarginalSpec spec;
  if (kind == "uniform") {
    spec.kind = MarginalSpec::Kind::uniform;
    return spec;
  }
  if (kind == "half_gaussian_mixture") {
    spec.kind = MarginalSpec::Kind::half_gaussian_mixture;
    const auto centers = cfg.get_tuple_list(section, prefix + "_centers");
    const auto scales = scalars_per_component(cfg, prefix + "_scales");
    const auto weights = scalars_per_component(cfg, prefix + "_weights");
    const auto halfplanes = cfg.get_tuple_list(section, prefix + "_halfplanes");
    if (centers.empty() || centers.size() != scales.size() || centers.size() != weights.size() ||
        (!halfplanes.empty() && halfplanes.size() != centers.size())) {
      throw ConfigError(prefix + ": centers, scales, weights (and halfplanes, if given) must "
                        "have matching lengths");
    }
    for (size_t k = 0; k < centers.size(); ++k) {
      if (centers[k].size() != 2 || (!halfplanes.empty() && halfplanes[k].size() != 2)) {
        throw ConfigError(prefix + ": centers and halfplanes must be 2-vectors");
      }
      HalfGaussian comp;
      comp.center = {centers[k][0], centers[k][1]};
      comp.sigma = scales[k];
      comp.weight = weights[k];
      if (!halfplanes.empty()) comp.half_plane_normal = {halfplanes[k][0], halfplanes[k][1]};
      spec.components.push_back(comp);
    }
    return spec;
  }
  if (kind == "point_masses") {
    spec.kind = MarginalSpec::Kind::point_masses;
    const auto points = cfg.get_tuple_list(section, prefix + "_points");
    const auto weights = scalars_per_component(cfg, prefix + "_weights");
    if (points.empty() || points.size() != weights.size()) {
      throw ConfigError(prefix + ": points and weights must have matching nonzero lengths");
    }
    for (size_t k = 0; k < points.size(); ++k) {
      if (points[k].size() != 2) throw ConfigError(prefix + ": points must be 2-vectors");
      spec.points.emplace_back(std::array<double, 2>{points[k][0], points[k][1]}, weights[k]);
    }
    return spec;
  }
  throw ConfigError(prefix + "_kind: expected uniform, half_gaussian_mixture or point_masses, "
                    "got '" + kind + "'");
}

inline RunSetup setup_from_config(ConfigFile& cfg) {
  RunSetup setup;
  ScenarioConfig& sc = setup.scenario;
  sc.horizon = cfg.get_double("scenario", "horizon", sc.horizon);
  sc.nx = cfg.get_int("scenario", "nx", sc.nx);
  sc.ny = cfg.get_int("scenario", "ny", sc.ny);
  sc.departure_times = cfg.get_double_list("scenario", "departure_times", sc.departure_times);
  sc.arrival_times = cfg.get_double_list("scenario", "arrival_times", sc.arrival_times);
  sc.lambda = cfg.get_double("scenario", "lambda", sc.lambda);
  sc.beta = cfg.get_double("scenario", "beta", sc.beta);
  sc.epsilon = cfg.get_double("scenario", "epsilon", sc.epsilon);
  sc.gamma = cfg.get_double("congestion", "gamma", sc.gamma);
  sc.cells_t = cfg.get_int("congestion", "cells_t", sc.cells_t);
  sc.cells_x = cfg.get_int("congestion", "cells_x", sc.cells_x);
  sc.cells_y = cfg.get_int("congestion", "cells_y", sc.cells_y);
  sc.sample_count = cfg.get_int("congestion", "sample_count", sc.sample_count);
  sc.mu_spec = parse_marginal(cfg, "mu", sc.mu_spec);
  sc.nu_spec = parse_marginal(cfg, "nu", sc.nu_spec);

  SfwConfig& sv = setup.solver;
  sv.alpha = cfg.get_double("solver", "alpha", sv.alpha);
  sv.max_outer = cfg.get_int("solver", "max_outer", sv.max_outer);
  sv.outer_tol = cfg.get_double("solver", "outer_tol", sv.outer_tol);
  sv.inner.tol = cfg.get_double("solver", "inner_tol", sv.inner.tol);
  sv.inner.max_iters = cfg.get_int("solver", "max_inner", sv.inner.max_iters);
  sv.record_entropies = cfg.get_bool("solver", "record_entropies", sv.record_entropies);
  const std::string schedule = cfg.get_string("solver", "schedule", "gauss_seidel");
  if (schedule == "gauss_seidel") {
    sv.inner.schedule = SinkhornSchedule::gauss_seidel;
  } else if (schedule == "jacobi") {
    sv.inner.schedule = SinkhornSchedule::jacobi;
  } else {
    throw ConfigError("solver.schedule: expected gauss_seidel or jacobi, got '" + schedule + "'");
  }
  cfg.ensure_all_consumed();

  if (!(sv.alpha > 0.0 && sv.alpha <= 1.0)) {
    throw ConfigError("solver.alpha must lie in (0, 1], got " + std::to_string(sv.alpha));
  }
  if (sv.max_outer < 1 || sv.inner.max_iters < 1) {
    throw ConfigError("solver.max_outer and solver.max_inner must be >= 1");
  }
  if (!(sv.outer_tol > 0.0) || !(sv.inner.tol > 0.0)) {
    throw ConfigError("solver.outer_tol and solver.inner_tol must be > 0");
  }
  return setup;
}

/// log of sum_ij e^{-c_ij/eps} mu_i nu_j, the mass that normalizes the Gibbs
/// kernel; ties solver energies to physical ones.
inline double log_gibbs_mass(const Eigen::MatrixXd& cost, double epsilon,
                             const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd lw(cost.rows(), cost.cols());
  for (Eigen::Index j = 0; j < cost.cols(); ++j) {
    const double lnu = nu.weight(j) > 0.0 ? std::log(nu.weight(j)) : neg_inf;
    for (Eigen::Index i = 0; i < cost.rows(); ++i) {
      const double lmu = mu.weight(i) > 0.0 ? std::log(mu.weight(i)) : neg_inf;
      lw(i, j) = std::isfinite(cost(i, j)) ? -cost(i, j) / epsilon + lmu + lnu : neg_inf;
    }
  }
  return logsumexp(lw);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunOutput {
  SfwResult result;
  double v_ref = 0.0;
  double log_mass = 0.0;
  nlohmann::json summary;
};

/// Executes one flow and writes trace.csv / summary.json / manifest.json
/// into dir. v_ref_override anchors the gap column when a reference value is
/// already known (sweeps); otherwise the run's own estimate is used.
inline RunOutput execute_run(const Scenario& scenario, const SfwConfig& solver,
                             const std::filesystem::path& dir,
                             const std::map<std::string, std::string>& config_echo,
                             const double* v_ref_override = nullptr) {
  std::filesystem::create_directories(dir);
  Coupling initial = default_initial(scenario.kernel, scenario.mu, scenario.nu);
  SfwResult result = run_sfw(initial, scenario.kernel, *scenario.solver_model, solver);

  const double log_mass =
      log_gibbs_mass(scenario.cost, scenario.config.epsilon, *scenario.mu, *scenario.nu);
  const double v_ref =
      v_ref_override ? *v_ref_override : estimate_optimal_energy(result.trace);

  write_trace_csv((dir / "trace.csv").string(), result.trace, v_ref, scenario.config.epsilon,
                  log_mass);

  const double physical_direct = physical_energy(result.final, scenario.cost,
                                                 scenario.config.epsilon, *scenario.model);
  const double physical_affine =
      scenario.config.epsilon * (result.trace.final_energy - log_mass);
  const double identity_residual = std::abs(physical_direct - physical_affine);
  const double fp_residual =
      fixed_point_residual(result.final, scenario.kernel, *scenario.solver_model, solver.inner);
  double max_flow_residual = result.trace.final_marginal_res;
  for (const SfwStep& s : result.trace.steps) {
    max_flow_residual = std::max(max_flow_residual, s.marginal_res);
  }

  nlohmann::json summary;
  summary["V_solver"] = result.trace.final_energy;
  summary["V_physical"] = physical_direct;
  summary["F_physical"] = scenario.model->value(result.final);
  summary["gap_estimate"] = result.trace.final_energy - v_ref;
  summary["v_ref"] = v_ref;
  summary["log_gibbs_mass"] = log_mass;
  summary["energy_identity_residual"] = identity_residual;
  summary["fixed_point_residual"] = fp_residual;
  summary["feasibility"] = {{"final", result.trace.final_marginal_res},
                            {"final_l1", marginal_residual(result.final)},
                            {"max_along_flow", max_flow_residual}};
  summary["converged"] = result.trace.converged;
  summary["outer_iterations"] = result.trace.steps.size();
  summary["config"] = config_echo;
  write_json((dir / "summary.json").string(), summary);

  nlohmann::json manifest;
  manifest["solver_version"] = kSolverVersion;
  manifest["created_utc"] = utc_timestamp();
  manifest["outputs"] = {{"trace", (dir / "trace.csv").string()},
                         {"summary", (dir / "summary.json").string()}};
  manifest["config"] = config_echo;
  manifest["summary"] = summary;
  write_json((dir / "manifest.json").string(), manifest);

  return RunOutput{std::move(result), v_ref, log_mass, std::move(summary)};
}

struct GapCurve {
  double alpha = 0.0;
  // (outer step, t, gap) for positive gaps only
  std::vector<std::array<double, 3>> points;
};

inline GapCurve gap_curve(double alpha, const SfwTrace& trace, double v_ref) {
  GapCurve curve;
  curve.alpha = alpha;
  for (const SfwStep& s : trace.steps) {
    const double gap = s.energy - v_ref;
    if (gap > 0.0) curve.points.push_back({static_cast<double>(s.outer_iter), s.t, gap});
  }
  return curve;
}

/// Max over curve pairs and matched times of
/// |log gap_a - log gap_b| / max(|log gap_a|, |log gap_b|), skipping each
/// run's first warmup_steps outer steps. Times match when equal to 1e-9.
inline double collapse_deviation(const std::vector<GapCurve>& curves, int warmup_steps) {
  double worst = 0.0;
  for (size_t a = 0; a < curves.size(); ++a) {
    for (size_t b = a + 1; b < curves.size(); ++b) {
      for (const auto& pa : curves[a].points) {
        if (pa[0] < warmup_steps) continue;
        for (const auto& pb : curves[b].points) {
          if (pb[0] < warmup_steps) continue;
          if (std::abs(pa[1] - pb[1]) > 1e-9) continue;
          const double la = std::log(pa[2]);
          const double lb = std::log(pb[2]);
          const double denom = std::max({std::abs(la), std::abs(lb), 1e-300});
          worst = std::max(worst, std::abs(la - lb) / denom);
        }
      }
    }
  }
  return worst;
}

}  // namespace detail

inline int cmd_run(const std::string& config_path, const std::string& out_dir,
                   const std::vector<std::string>& overrides) {
  try {
    ConfigFile cfg = ConfigFile::parse_file(config_path);
    for (const std::string& o : overrides) cfg.apply_override(o);
    const RunSetup setup = detail::setup_from_config(cfg);
    const Scenario scenario = build_scenario(setup.scenario);
    const detail::RunOutput out =
        detail::execute_run(scenario, setup.solver, out_dir, cfg.echo());
    return out.result.trace.converged ? kExitOk : kExitIterationCap;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}

inline int cmd_sweep(const std::string& config_path, const std::vector<double>& alphas,
                     const std::string& out_dir) {
  try {
    if (alphas.empty()) throw ConfigError("sweep: at least one alpha is required");
    ConfigFile base = ConfigFile::parse_file(config_path);
    const RunSetup setup = detail::setup_from_config(base);
    for (double a : alphas) {
      if (!(a > 0.0 && a <= 1.0)) {
        throw ConfigError("sweep: alpha " + std::to_string(a) + " outside (0, 1]");
      }
    }
    const Scenario scenario = build_scenario(setup.scenario);
    const std::filesystem::path root(out_dir);
    std::filesystem::create_directories(root);

    // High-accuracy reference run anchors the optimal energy for every gap.
    SfwConfig ref_cfg = setup.solver;
    ref_cfg.alpha = 0.04;
    ref_cfg.max_outer = 400;
    ref_cfg.outer_tol = 1e-12;
    ref_cfg.inner.tol = 1e-8;
    ref_cfg.inner.max_iters = std::max(ref_cfg.inner.max_iters, 200);
    const detail::RunOutput ref =
        detail::execute_run(scenario, ref_cfg, root / "reference", base.echo());
    const double v_star = estimate_optimal_energy(ref.result.trace);

    int exit_code = kExitOk;
    std::vector<detail::GapCurve> curves;
    std::vector<CollapseRow> rows;
    nlohmann::json runs = nlohmann::json::array();
    for (double a : alphas) {
      SfwConfig run_cfg = setup.solver;
      run_cfg.alpha = a;
      char name[32];
      std::snprintf(name, sizeof(name), "alpha_%g", a);
      const detail::RunOutput out =
          detail::execute_run(scenario, run_cfg, root / name, base.echo(), &v_star);
      if (!out.result.trace.converged) exit_code = kExitIterationCap;
      curves.push_back(detail::gap_curve(a, out.result.trace, v_star));
      for (const SfwStep& s : out.result.trace.steps) {
        const double gap = s.energy - v_star;
        rows.push_back(CollapseRow{a, s.outer_iter, s.t, gap,
                                   gap > 0.0 ? std::log(gap) : std::nan("")});
      }
      runs.push_back({{"alpha", a}, {"dir", (root / name).string()},
                      {"converged", out.result.trace.converged}});
    }
    write_collapse_csv((root / "collapse.csv").string(), rows);

    const double deviation = detail::collapse_deviation(curves, 5);
    nlohmann::json manifest;
    manifest["solver_version"] = kSolverVersion;
    manifest["created_utc"] = detail::utc_timestamp();
    manifest["v_star"] = v_star;
    manifest["reference_dir"] = (root / "reference").string();
    manifest["runs"] = runs;
    manifest["collapse"] = {{"max_pairwise_log_gap_deviation", deviation},
                            {"warmup_steps", 5},
                            {"table", (root / "collapse.csv").string()}};
    manifest["config"] = base.echo();
    write_json((root / "manifest.json").string(), manifest);
    return exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}

namespace detail {

struct VerifyCheck {
  std::string name;
  bool pass = false;
  nlohmann::json details;
};

inline MeasurePtr synthetic_measure(int n, std::mt19937_64& rng, double extent = 1.0) {
  std::vector<GridPoint> pts;
  pts.reserve(static_cast<size_t>(n));
  std::uniform_real_distribution<double> u(0.0, extent);
  for (int k = 0; k < n; ++k) {
    // Distinct by construction: a deterministic component on the first axis.
    pts.push_back(GridPoint{u(rng), {extent * (k + u(rng)) / n, u(rng)}});
  }
  std::uniform_real_distribution<double> wdist(0.2, 1.0);
  Eigen::VectorXd w(n);
  for (int k = 0; k < n; ++k) w[k] = wdist(rng);
  w /= w.sum();
  return make_measure(std::move(pts), std::move(w));
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi,
                                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

inline VerifyCheck check_tilting_identity(uint64_t seed, bool corrupt_sign) {
  VerifyCheck check{"tilting_identity", false, {}};
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    MeasurePtr mu = synthetic_measure(5, rng);
    MeasurePtr nu = synthetic_measure(5, rng);
    const ReferenceKernel kernel(mu, nu, random_matrix(5, 5, -2.0, 2.0, rng));
    const Eigen::MatrixXd phi = random_matrix(5, 5, -2.0, 2.0, rng);
    const Coupling pi = make_random_coupling(mu, nu, rng);
    const TiltResult tilted = tilt(kernel, phi);
    const double lhs = (phi.array() * pi.probs().array()).sum() +
                       relative_entropy_log_ref(pi.probs(), kernel.log_weights());
    const double partition = corrupt_sign ? -tilted.log_partition : tilted.log_partition;
    const double rhs =
        relative_entropy_log_ref(pi.probs(), tilted.kernel.log_weights()) - partition;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  check.pass = worst <= 1e-12;
  check.details = {{"trials", 1000}, {"max_residual", worst}, {"tolerance", 1e-12}};
  return check;
}

inline TwoByTwoInstance random_2x2_instance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> marg(0.2, 0.8);
  std::uniform_real_distribution<double> entry(-2.0, 2.0);
  TwoByTwoInstance inst;
  inst.mu1 = marg(rng);
  inst.nu1 = marg(rng);
  for (int k = 0; k < 4; ++k) {
    inst.log_kernel(k / 2, k % 2) = entry(rng);
    inst.phi(k / 2, k % 2) = entry(rng);
  }
  return inst;
}

inline VerifyCheck check_inner_oracle(uint64_t seed) {
  VerifyCheck check{"inner_oracle_agreement", false, {}};
  std::mt19937_64 rng(seed);
  double worst_tv = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const TwoByTwoInstance inst = random_2x2_instance(rng);
    const Coupling oracle = inner_oracle_2x2(inst);
    const ReferenceKernel kernel(oracle.source(), oracle.target(), inst.log_kernel);
    InnerOptions opts{1e-12, 50000, SinkhornSchedule::gauss_seidel};
    const InnerResult solved = solve_inner(kernel, inst.phi, oracle.source(), oracle.target(), opts);
    worst_tv = std::max(worst_tv, total_variation(solved.plan, oracle));
  }
  check.pass = worst_tv <= 1e-8;
  check.details = {{"trials", 100}, {"max_tv", worst_tv}, {"tolerance", 1e-8}};
  return check;
}

inline VerifyCheck check_first_order(uint64_t seed) {
  VerifyCheck check{"first_order_residual", false, {}};
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    MeasurePtr mu = synthetic_measure(5, rng);
    MeasurePtr nu = synthetic_measure(5, rng);
    const ReferenceKernel kernel(mu, nu, random_matrix(5, 5, -2.0, 2.0, rng));
    const Eigen::MatrixXd phi = random_matrix(5, 5, -2.0, 2.0, rng);
    InnerOptions opts{1e-12, 50000, SinkhornSchedule::gauss_seidel};
    const InnerResult solved = solve_inner(kernel, phi, mu, nu, opts);
    worst = std::max(worst, first_order_residual(solved, kernel, phi));
  }
  check.pass = worst <= 1e-8;
  check.details = {{"trials", 20}, {"max_residual", worst}, {"tolerance", 1e-8}};
  return check;
}

inline ScenarioConfig tiny_uav_config() {
  ScenarioConfig cfg;
  cfg.nx = 10;
  cfg.ny = 8;
  return cfg;
}

inline MeasurePtr reweighted(const MeasurePtr& base, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Eigen::VectorXd w(base->size());
  for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = u(rng);
  w /= w.sum();
  return make_measure(base->points(), std::move(w));
}

inline VerifyCheck check_derivative_consistency(uint64_t seed) {
  VerifyCheck check{"derivative_consistency", false, {}};
  std::mt19937_64 rng(seed);
  const Scenario scenario = build_scenario(tiny_uav_config());
  const std::vector<double> etas{1e-2, 1e-3, 1e-4};
  double worst_rel = 0.0;
  double worst_zero = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    // Couplings share the support but not the marginals, so the cell loads
    // differ enough for the eta^2 term to rise above roundoff.
    const Coupling p = make_random_coupling(scenario.mu, scenario.nu, rng);
    const Coupling q = make_random_coupling(reweighted(scenario.mu, rng),
                                            reweighted(scenario.nu, rng), rng);
    const std::vector<double> res = derivative_check(*scenario.model, p, q, etas);
    std::vector<double> ratios;
    for (size_t k = 0; k < etas.size(); ++k) ratios.push_back(res[k] / (etas[k] * etas[k]));
    const double mid = ratios[0];
    for (double r : ratios) {
      worst_rel = std::max(worst_rel, std::abs(r - mid) / std::max(std::abs(mid), 1e-300));
    }
    const ZeroFunctional zero;
    for (double r : derivative_check(zero, p, q, etas)) worst_zero = std::max(worst_zero, r);
  }
  check.pass = worst_rel <= 1e-6 && worst_zero == 0.0;
  check.details = {{"max_relative_ratio_spread", worst_rel},
                   {"max_zero_functional_residual", worst_zero},
                   {"tolerance", 1e-6}};
  return check;
}

inline VerifyCheck check_transport_entropy(uint64_t seed) {
  VerifyCheck check{"transport_entropy", false, {}};
  std::mt19937_64 rng(seed);
  int violations = 0;
  double worst_margin = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    // Product-space diameter stays below one: coords and times in [0, 0.4].
    MeasurePtr mu = synthetic_measure(2, rng, 0.4);
    MeasurePtr nu = synthetic_measure(2, rng, 0.4);
    const Coupling p = make_random_coupling(mu, nu, rng);
    const Coupling q = make_random_coupling(mu, nu, rng);
    const TransportEntropyResult res = transport_entropy_check(p, q);
    if (!res.ok) ++violations;
    if (std::isfinite(res.rhs)) worst_margin = std::max(worst_margin, res.lhs - res.rhs);
  }
  check.pass = violations == 0;
  check.details = {{"trials", 1000}, {"violations", violations}, {"worst_margin", worst_margin}};
  return check;
}

inline VerifyCheck check_dissipation_trend() {
  VerifyCheck check{"dissipation_trend", false, {}};
  const Scenario scenario = build_scenario(tiny_uav_config());
  const Coupling initial = default_initial(scenario.kernel, scenario.mu, scenario.nu);
  auto run_at = [&](double alpha) {
    SfwConfig cfg;
    cfg.alpha = alpha;
    cfg.max_outer = 40;
    cfg.outer_tol = 1e-12;
    return run_sfw(initial, scenario.kernel, *scenario.solver_model, cfg);
  };
  const SfwResult fine = run_at(0.01);
  const SfwResult coarse = run_at(0.04);
  const std::vector<double> r_fine = dissipation_residuals(fine.trace);
  const std::vector<double> r_coarse = dissipation_residuals(coarse.trace);
  int matched = 0, smaller = 0;
  for (size_t sc = 0; sc < coarse.trace.steps.size(); ++sc) {
    const double t = coarse.trace.steps[sc].t;
    for (size_t sf = 0; sf < fine.trace.steps.size(); ++sf) {
      if (std::abs(fine.trace.steps[sf].t - t) <= 1e-9 && sf < r_fine.size() &&
          sc < r_coarse.size()) {
        ++matched;
        if (r_fine[sf] < r_coarse[sc]) ++smaller;
      }
    }
  }
  const double fraction = matched > 0 ? static_cast<double>(smaller) / matched : 0.0;
  check.pass = matched > 0 && fraction >= 0.9;
  check.details = {{"matched_times", matched}, {"fraction_smaller", fraction}, {"threshold", 0.9}};
  return check;
}

inline VerifyCheck check_exponential_bound() {
  VerifyCheck check{"exponential_bound", false, {}};
  const Scenario scenario = build_scenario(tiny_uav_config());
  const Coupling initial = default_initial(scenario.kernel, scenario.mu, scenario.nu);

  SfwConfig ref_cfg;
  ref_cfg.alpha = 0.04;
  ref_cfg.max_outer = 400;
  ref_cfg.outer_tol = 1e-12;
  ref_cfg.inner.tol = 1e-8;
  ref_cfg.inner.max_iters = 200;
  const SfwResult ref = run_sfw(initial, scenario.kernel, *scenario.solver_model, ref_cfg);
  const double v_star = estimate_optimal_energy(ref.trace);

  SfwConfig cfg;
  cfg.alpha = 0.04;
  cfg.max_outer = 40;
  cfg.outer_tol = 1e-12;
  const SfwResult run = run_sfw(initial, scenario.kernel, *scenario.solver_model, cfg);

  const double gap0 = run.trace.steps.front().energy - v_star;
  bool bound_ok = gap0 > 0.0;
  double sum_t = 0.0, sum_l = 0.0, sum_tt = 0.0, sum_tl = 0.0;
  int n = 0;
  for (const SfwStep& s : run.trace.steps) {
    const double gap = s.energy - v_star;
    if (!(gap > 0.0)) continue;
    if (gap > 1.1 * gap0 * std::exp(-s.t)) bound_ok = false;
    sum_t += s.t;
    sum_l += std::log(gap);
    sum_tt += s.t * s.t;
    sum_tl += s.t * std::log(gap);
    ++n;
  }
  const double slope =
      n > 1 ? (n * sum_tl - sum_t * sum_l) / (n * sum_tt - sum_t * sum_t) : 0.0;
  check.pass = bound_ok && slope <= -0.8;
  check.details = {{"bound_holds", bound_ok}, {"fitted_slope", slope}, {"gap0", gap0},
                   {"v_star", v_star}};
  return check;
}

}  // namespace detail

inline int cmd_verify(uint64_t seed, const std::string& out_dir,
                      bool corrupt_tilting_sign = false) {
  try {
    std::vector<detail::VerifyCheck> checks;
    checks.push_back(detail::check_tilting_identity(seed + 1, corrupt_tilting_sign));
    checks.push_back(detail::check_inner_oracle(seed + 2));
    checks.push_back(detail::check_first_order(seed + 3));
    checks.push_back(detail::check_derivative_consistency(seed + 4));
    checks.push_back(detail::check_transport_entropy(seed + 5));
    checks.push_back(detail::check_dissipation_trend());
    checks.push_back(detail::check_exponential_bound());

    nlohmann::json doc;
    doc["seed"] = seed;
    doc["solver_version"] = kSolverVersion;
    nlohmann::json table = nlohmann::json::array();
    bool all_pass = true;
    std::string first_failure;
    for (const auto& c : checks) {
      table.push_back({{"name", c.name}, {"pass", c.pass}, {"details", c.details}});
      std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << '\n';
      if (!c.pass && first_failure.empty()) first_failure = c.name;
      all_pass = all_pass && c.pass;
    }
    doc["checks"] = table;
    doc["all_pass"] = all_pass;
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      write_json((std::filesystem::path(out_dir) / "verify.json").string(), doc);
    }
    if (!all_pass) {
      std::cerr << "verification failed: " << first_failure << '\n';
      return kExitVerifyFailed;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace sfw
