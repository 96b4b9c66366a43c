#include "sfw/verification.hpp"
#include "sfw/uav_scenario.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace sfw;
using sfw::test::line_measure;

TEST_CASE("2x2 bisection oracle") {
  SECTION("no tilt on the uniform instance gives the uniform coupling") {
    TwoByTwoInstance inst;
    const Coupling opt = inner_oracle_2x2(inst);
    CHECK((opt.probs().array() - 0.25).abs().maxCoeff() < 1e-12);
  }

  SECTION("symmetric tilt matches the closed form") {
    TwoByTwoInstance inst;
    inst.phi << 0.0, 1.0, 1.0, 0.0;
    const Coupling opt = inner_oracle_2x2(inst);
    CHECK(opt.probs()(0, 0) == Catch::Approx(0.36552928931500245).margin(1e-12));
    CHECK(opt.probs()(0, 1) == Catch::Approx(0.13447071068499755).margin(1e-12));
  }

  SECTION("a strong diagonal penalty pushes mass off the diagonal") {
    TwoByTwoInstance inst;
    inst.phi << 10.0, 0.0, 0.0, 10.0;
    const Coupling opt = inner_oracle_2x2(inst);
    CHECK(opt.probs()(0, 0) < 0.05);
  }

  SECTION("marginals are exact") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> marg(0.2, 0.8), entry(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
      TwoByTwoInstance inst;
      inst.mu1 = marg(rng);
      inst.nu1 = marg(rng);
      for (int k = 0; k < 4; ++k) {
        inst.log_kernel(k / 2, k % 2) = entry(rng);
        inst.phi(k / 2, k % 2) = entry(rng);
      }
      const Coupling opt = inner_oracle_2x2(inst);
      CHECK(marginal_residual(opt) < 1e-12);
    }
  }

  SECTION("degenerate marginals are rejected") {
    TwoByTwoInstance inst;
    inst.mu1 = 1.0;
    CHECK_THROWS_AS(inner_oracle_2x2(inst), std::invalid_argument);
  }
}

TEST_CASE("exact small wasserstein") {
  SECTION("identical measures cost nothing") {
    MeasurePtr p = line_measure(3);
    CHECK(wasserstein1_exact_small(*p, *p) == Catch::Approx(0.0).margin(1e-15));
  }

  SECTION("two point masses pay the distance") {
    MeasurePtr p = make_measure({GridPoint{0.0, {0.0, 0.0}}}, Eigen::VectorXd::Ones(1));
    MeasurePtr q = make_measure({GridPoint{0.0, {0.3, 0.4}}}, Eigen::VectorXd::Ones(1));
    CHECK(wasserstein1_exact_small(*p, *q) == Catch::Approx(0.5).epsilon(1e-13));
  }

  SECTION("hand-checked three-point plan") {
    // Mass .5/.5 at x = 0 and 1 collapsing onto x = 0.5: each atom travels 0.5.
    Eigen::VectorXd pw(2);
    pw << 0.5, 0.5;
    MeasurePtr p =
        make_measure({GridPoint{0.0, {0.0, 0.0}}, GridPoint{0.0, {1.0, 0.0}}}, pw);
    MeasurePtr q = make_measure({GridPoint{0.0, {0.5, 0.0}}}, Eigen::VectorXd::Ones(1));
    CHECK(wasserstein1_exact_small(*p, *q) == Catch::Approx(0.5).epsilon(1e-13));
  }

  SECTION("size cap refuses large inputs") {
    MeasurePtr p = line_measure(5);
    MeasurePtr q = line_measure(5);
    CHECK_THROWS_AS(wasserstein1_exact_small(*p, *q, 8), std::runtime_error);
  }

  SECTION("metric properties on random triples") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
      auto random_measure = [&]() {
        std::vector<GridPoint> pts;
        Eigen::VectorXd w(3);
        for (int k = 0; k < 3; ++k) {
          pts.push_back(GridPoint{0.25 * k, {u(rng), u(rng)}});
          w[k] = 0.2 + u(rng);
        }
        w /= w.sum();
        return make_measure(std::move(pts), std::move(w));
      };
      MeasurePtr a = random_measure(), b = random_measure(), c = random_measure();
      const double ab = wasserstein1_exact_small(*a, *b);
      const double ba = wasserstein1_exact_small(*b, *a);
      const double ac = wasserstein1_exact_small(*a, *c);
      const double cb = wasserstein1_exact_small(*c, *b);
      CHECK(ab == Catch::Approx(ba).margin(1e-12));
      CHECK(ab <= ac + cb + 1e-10);
    }
  }
}

TEST_CASE("transport-entropy inequality") {
  SECTION("identical couplings") {
    std::mt19937_64 rng(19);
    MeasurePtr mu = line_measure(2);
    MeasurePtr nu = line_measure(2);
    const Coupling p = make_random_coupling(mu, nu, rng);
    const TransportEntropyResult res = transport_entropy_check(p, p);
    CHECK(res.lhs == Catch::Approx(0.0).margin(1e-12));
    CHECK(res.rhs == Catch::Approx(0.0).margin(1e-12));
    CHECK(res.ok);
  }

  SECTION("singular pairs hold vacuously") {
    MeasurePtr mu = line_measure(2);
    MeasurePtr nu = line_measure(2);
    Eigen::Matrix2d pp, qq;
    pp << 0.5, 0.0, 0.0, 0.5;
    qq << 0.0, 0.5, 0.5, 0.0;
    const TransportEntropyResult res =
        transport_entropy_check(Coupling(mu, nu, pp), Coupling(mu, nu, qq));
    CHECK(std::isinf(res.rhs));
    CHECK(res.ok);
  }

  SECTION("randomized small instances never violate the bound") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 0.4);
    std::uniform_real_distribution<double> marg(0.2, 0.8);
    for (int trial = 0; trial < 300; ++trial) {
      // Supports inside [0, 0.4]^3 keep the product-space diameter below 1.
      auto small_measure = [&]() {
        Eigen::VectorXd w(2);
        w << marg(rng), 0.0;
        w[1] = 1.0 - w[0];
        std::vector<GridPoint> pts{GridPoint{u(rng), {u(rng), u(rng)}},
                                   GridPoint{u(rng), {u(rng), u(rng)}}};
        while (pts[0] == pts[1]) pts[1].coords[0] = u(rng);
        return make_measure(std::move(pts), std::move(w));
      };
      MeasurePtr mu = small_measure();
      MeasurePtr nu = small_measure();
      const Coupling p = make_random_coupling(mu, nu, rng);
      const Coupling q = make_random_coupling(mu, nu, rng);
      CHECK(transport_entropy_check(p, q).ok);
    }
  }
}

TEST_CASE("fixed point residual on a converged congestion run") {
  ScenarioConfig cfg;
  cfg.nx = 6;
  cfg.ny = 5;
  const Scenario s = build_scenario(cfg);
  SfwConfig run_cfg;
  run_cfg.alpha = 0.04;
  run_cfg.max_outer = 400;
  run_cfg.outer_tol = 1e-6;
  run_cfg.inner.max_iters = 300;
  const SfwResult run =
      run_sfw(default_initial(s.kernel, s.mu, s.nu), s.kernel, *s.solver_model, run_cfg);
  REQUIRE(run.trace.converged);
  CHECK(fixed_point_residual(run.final, s.kernel, *s.solver_model, run_cfg.inner) <= 1e-3);
}

TEST_CASE("fixed point residual") {
  ScenarioConfig cfg;
  cfg.nx = 6;
  cfg.ny = 5;
  cfg.gamma = 0.0;
  const Scenario s = build_scenario(cfg);
  const InnerOptions opts{1e-8, 2000, SinkhornSchedule::gauss_seidel};
  const InnerResult entropic = solve_inner(
      s.kernel, Eigen::MatrixXd::Zero(s.kernel.rows(), s.kernel.cols()), s.mu, s.nu, opts);
  const ZeroFunctional zero;
  const double at_plan = fixed_point_residual(entropic.plan, s.kernel, zero, opts);
  CHECK(at_plan <= opts.tol);

  const Coupling product(s.mu, s.nu, s.mu->weights() * s.nu->weights().transpose());
  const Coupling perturbed = convex_combine(entropic.plan, product, 0.1);
  CHECK(fixed_point_residual(perturbed, s.kernel, zero, opts) > at_plan);
}

TEST_CASE("random coupling generator") {
  std::mt19937_64 rng(31);
  Eigen::VectorXd mw(3);
  mw << 0.5, 0.3, 0.2;
  MeasurePtr mu = line_measure(3, mw);
  MeasurePtr nu = line_measure(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Coupling c = make_random_coupling(mu, nu, rng);
    CHECK(marginal_residual(c) < 1e-12);
    CHECK(c.probs().minCoeff() > 0.0);
  }
}
