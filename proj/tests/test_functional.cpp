#include "sfw/functional.hpp"
#include "sfw/uav_scenario.hpp"
#include "sfw/verification.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

using namespace sfw;

namespace {

MeasurePtr single_point(double time, double x, double y) {
  return make_measure({GridPoint{time, {x, y}}}, Eigen::VectorXd::Ones(1));
}

MeasurePtr two_points(double time, std::array<double, 2> a, std::array<double, 2> b,
                      double w0 = 0.5) {
  Eigen::VectorXd w(2);
  w << w0, 1.0 - w0;
  return make_measure({GridPoint{time, a}, GridPoint{time, b}}, w);
}

CellBox covering_cell() {
  CellBox b;
  b.t_hi = 1.0;
  b.x_hi = 1.0;
  b.y_hi = 1.0;
  b.closed_t = b.closed_x = b.closed_y = true;
  return b;
}

}  // namespace

TEST_CASE("zero functional") {
  MeasurePtr mu = test::line_measure(3);
  MeasurePtr nu = test::line_measure(3);
  const Coupling pi(mu, nu, Eigen::MatrixXd::Constant(3, 3, 1.0 / 9));
  const ZeroFunctional zero;
  CHECK(zero.value(pi) == 0.0);
  CHECK(zero.linear_derivative(pi).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("occupancy geometry") {
  SECTION("a single covering cell catches every feasible pair") {
    MeasurePtr src = two_points(0.0, {0.1, 0.2}, {0.8, 0.9});
    MeasurePtr tgt = two_points(0.5, {0.3, 0.3}, {0.6, 0.1});
    const CongestionSpec spec({covering_cell()}, 1.0, src, tgt, 1.0, 0.001, 16);
    for (Eigen::Index i = 0; i < 2; ++i) {
      for (Eigen::Index j = 0; j < 2; ++j) CHECK(spec.occupies(i, j, 0));
    }
  }

  SECTION("stationary pair marks exactly its own cell") {
    MeasurePtr src = single_point(0.0, 0.3, 0.3);
    MeasurePtr tgt = single_point(0.5, 0.3, 0.3);
    auto cells = uniform_cell_partition(0.5, 1, 4, 4);
    const CongestionSpec spec(cells, 1.0, src, tgt, 1.0, 0.001, 16);
    int hits = 0;
    for (Eigen::Index n = 0; n < spec.n_cells(); ++n) {
      if (spec.occupies(0, 0, n)) {
        ++hits;
        CHECK(cells[static_cast<size_t>(n)].contains(0.0, {0.3, 0.3}));
      }
    }
    CHECK(hits == 1);
  }

  SECTION("a slow travel window only covers the start of the path") {
    // r_min = sqrt(2/0.001) ~ 44.7 >> 0.5, so the sampled window ends at
    // roughly 1.6% of the diagonal.
    MeasurePtr src = single_point(0.0, 0.0, 0.0);
    MeasurePtr tgt = single_point(0.5, 1.0, 1.0);
    const double r_min = travel_time({0.0, 0.0}, {1.0, 1.0}, 1.0, 0.001);
    CHECK(r_min == Catch::Approx(44.721359549995796).epsilon(1e-14));
    const auto end = trajectory_position({0.0, 0.0}, {1.0, 1.0}, r_min, 0.5);
    CHECK(end[0] == Catch::Approx(0.011180339887498949).epsilon(1e-12));
    const CongestionSpec spec(uniform_cell_partition(0.5, 1, 4, 4), 1.0, src, tgt, 1.0, 0.001, 32);
    int hits = 0;
    for (Eigen::Index n = 0; n < spec.n_cells(); ++n) {
      if (spec.occupies(0, 0, n)) ++hits;
    }
    CHECK(hits == 1);
    CHECK(spec.occupies(0, 0, 0));  // the corner cell
  }

  SECTION("infeasible pairs have empty occupancy") {
    MeasurePtr src = single_point(0.5, 0.2, 0.2);
    MeasurePtr tgt = single_point(0.0, 0.8, 0.8);  // arrives before departure
    const CongestionSpec spec({covering_cell()}, 1.0, src, tgt, 1.0, 0.001, 8);
    CHECK_FALSE(spec.occupies(0, 0, 0));
    const Coupling pi(src, tgt, Eigen::MatrixXd::Ones(1, 1));
    const QuadraticCongestion model(spec);
    CHECK(model.value(pi) == 0.0);
    CHECK(model.linear_derivative(pi).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("construction guards") {
    MeasurePtr src = single_point(0.0, 0.3, 0.3);
    MeasurePtr tgt = single_point(0.5, 0.3, 0.3);
    CHECK_THROWS_AS(CongestionSpec({covering_cell()}, 1.0, src, tgt, 1.0, 0.001, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(CongestionSpec({covering_cell(), covering_cell()}, 1.0, src, tgt, 1.0, 0.001,
                                   8),
                    std::invalid_argument);
  }
}

TEST_CASE("quadratic congestion values") {
  SECTION("one covering cell forces load one") {
    MeasurePtr src = two_points(0.0, {0.1, 0.2}, {0.8, 0.9});
    MeasurePtr tgt = two_points(0.5, {0.3, 0.3}, {0.6, 0.1});
    const QuadraticCongestion model(
        CongestionSpec({covering_cell()}, 20.0, src, tgt, 1.0, 0.001, 16));
    const Coupling pi(src, tgt, Eigen::MatrixXd::Constant(2, 2, 0.25));
    CHECK(model.value(pi) == Catch::Approx(20.0).epsilon(1e-14));
    CHECK(model.linear_derivative(pi).minCoeff() == Catch::Approx(40.0).epsilon(1e-14));
  }

  SECTION("split loads") {
    // Stationary-ish pairs: every trajectory keeps the x coordinate of its
    // source, so occupancy follows the source's half.
    Eigen::VectorXd w(2);
    w << 0.3, 0.7;
    MeasurePtr src = make_measure({GridPoint{0.0, {0.1, 0.5}}, GridPoint{0.0, {0.7, 0.5}}}, w);
    MeasurePtr tgt = make_measure({GridPoint{0.5, {0.1, 0.5}}, GridPoint{0.5, {0.7, 0.5}}}, w);
    const CongestionSpec spec(uniform_cell_partition(0.5, 1, 2, 1), 20.0, src, tgt, 1.0, 0.001,
                              16);
    Eigen::Matrix2d probs;
    probs << 0.3, 0.0, 0.0, 0.7;
    const Coupling pi(src, tgt, probs);
    const Eigen::VectorXd loads = spec.loads(pi.probs());
    CHECK(loads[0] == Catch::Approx(0.3));
    CHECK(loads[1] == Catch::Approx(0.7));
    const QuadraticCongestion model(spec);
    CHECK(model.value(pi) == Catch::Approx(11.6).epsilon(1e-14));
    const Eigen::MatrixXd grad = model.linear_derivative(pi);
    CHECK(grad(0, 0) == Catch::Approx(12.0));
    CHECK(grad(1, 1) == Catch::Approx(28.0));
  }
}

TEST_CASE("derivative check") {
  ScenarioConfig cfg;
  cfg.nx = 6;
  cfg.ny = 5;
  const Scenario scenario = build_scenario(cfg);
  std::mt19937_64 rng(43);
  // Shared support, different marginals: the quadratic term must clear
  // roundoff for the ratio test below.
  const auto reweight = [&](const MeasurePtr& base) {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    Eigen::VectorXd w(base->size());
    for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = u(rng);
    w /= w.sum();
    return make_measure(base->points(), std::move(w));
  };
  const Coupling p = make_random_coupling(scenario.mu, scenario.nu, rng);
  const Coupling q = make_random_coupling(reweight(scenario.mu), reweight(scenario.nu), rng);
  const std::vector<double> etas{1e-2, 1e-3, 1e-4};

  SECTION("q = p wipes the residuals") {
    for (double r : derivative_check(*scenario.model, p, p, etas)) {
      CHECK(r == Catch::Approx(0.0).margin(1e-14));
    }
  }

  SECTION("zero functional is exactly linear") {
    const ZeroFunctional zero;
    for (double r : derivative_check(zero, p, q, etas)) CHECK(r == 0.0);
  }

  SECTION("quadratic residual is the exact second-order term") {
    const auto* quad = dynamic_cast<const QuadraticCongestion*>(scenario.model.get());
    REQUIRE(quad != nullptr);
    const Eigen::VectorXd delta =
        quad->spec().loads(q.probs()) - quad->spec().loads(p.probs());
    const std::vector<double> res = derivative_check(*scenario.model, p, q, etas);
    for (size_t k = 0; k < etas.size(); ++k) {
      const double expected = cfg.gamma * etas[k] * etas[k] * delta.squaredNorm();
      CHECK(res[k] == Catch::Approx(expected).margin(1e-12));
    }
    // r(eta)/eta^2 constant across decades.
    const double base = res[0] / (etas[0] * etas[0]);
    for (size_t k = 1; k < etas.size(); ++k) {
      CHECK(res[k] / (etas[k] * etas[k]) == Catch::Approx(base).epsilon(1e-6));
    }
  }

  SECTION("convexity along segments") {
    const auto values = [&](double eta) {
      return scenario.model->value(convex_combine(p, q, eta));
    };
    for (double eta : {0.1, 0.3, 0.5, 0.7}) {
      const double second = values(eta + 0.05) - 2 * values(eta) + values(eta - 0.05);
      CHECK(second >= -1e-12);
    }
  }

  SECTION("derivative bound over the polytope") {
    const double bound = 2.0 * cfg.gamma * static_cast<double>(
        dynamic_cast<const QuadraticCongestion*>(scenario.model.get())->spec().n_cells());
    CHECK(scenario.model->linear_derivative(p).cwiseAbs().maxCoeff() <= bound);
    CHECK(scenario.model->value(p) >= 0.0);
  }
}

TEST_CASE("cell order does not matter") {
  MeasurePtr src = two_points(0.0, {0.1, 0.2}, {0.8, 0.9});
  MeasurePtr tgt = two_points(0.5, {0.3, 0.3}, {0.6, 0.1});
  auto cells = uniform_cell_partition(0.5, 1, 2, 2);
  const QuadraticCongestion a(CongestionSpec(cells, 5.0, src, tgt, 1.0, 0.001, 16));
  std::reverse(cells.begin(), cells.end());
  const QuadraticCongestion b(CongestionSpec(cells, 5.0, src, tgt, 1.0, 0.001, 16));
  std::mt19937_64 rng(5);
  const Coupling pi = make_random_coupling(src, tgt, rng);
  CHECK(a.value(pi) == Catch::Approx(b.value(pi)).epsilon(1e-14));
  CHECK((a.linear_derivative(pi) - b.linear_derivative(pi)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("scaled functional") {
  MeasurePtr mu = test::line_measure(2);
  MeasurePtr nu = test::line_measure(2);
  const Coupling pi(mu, nu, Eigen::MatrixXd::Constant(2, 2, 0.25));
  Eigen::MatrixXd phi(2, 2);
  phi << 1.0, 2.0, 3.0, 4.0;
  auto base = std::make_shared<test::LinearFunctional>(phi);
  const ScaledFunctional scaled(base, 10.0);
  CHECK(scaled.value(pi) == Catch::Approx(10.0 * base->value(pi)));
  CHECK((scaled.linear_derivative(pi) - 10.0 * phi).cwiseAbs().maxCoeff() == 0.0);
}
