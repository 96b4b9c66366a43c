#pragma once

// Assembles the UAV relocation instance: tempo-spatial grids, the flight
// energy cost matrix, the Gibbs reference kernel, the congestion cells, and
// the source/target marginals.

#include "sfw/functional.hpp"
#include "sfw/measures.hpp"
#include "sfw/reference_kernel.hpp"
#include "sfw/uav_cost.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace sfw {

/// One mixture component: a Gaussian bump cut to the half-plane
/// dot(x - center, half_plane_normal) >= 0. A zero normal keeps the full
/// bump.
struct HalfGaussian {
  std::array<double, 2> center{0.0, 0.0};
  double sigma = 0.1;
  double weight = 1.0;
  std::array<double, 2> half_plane_normal{0.0, 0.0};
};

struct MarginalSpec {
  enum class Kind { half_gaussian_mixture, point_masses, uniform };
  Kind kind = Kind::uniform;
  std::vector<HalfGaussian> components;                           // half_gaussian_mixture
  std::vector<std::pair<std::array<double, 2>, double>> points;   // point_masses
};

inline MarginalSpec default_source_spec() {
  MarginalSpec spec;
  spec.kind = MarginalSpec::Kind::half_gaussian_mixture;
  spec.components = {HalfGaussian{{0.25, 0.5}, 0.1, 0.5, {1.0, 0.0}},
                     HalfGaussian{{0.5, 0.25}, 0.1, 0.5, {0.0, 1.0}}};
  return spec;
}

inline MarginalSpec default_target_spec() {
  MarginalSpec spec;
  spec.kind = MarginalSpec::Kind::point_masses;
  spec.points = {{{0.9, 0.2}, 0.5}, {{0.2, 0.9}, 0.5}};
  return spec;
}

struct ScenarioConfig {
  double horizon = 0.5;
  int nx = 60;
  int ny = 41;
  std::vector<double> departure_times{0.0};
  std::vector<double> arrival_times{0.5};
  double lambda = 1.0;
  double beta = 0.001;
  double epsilon = 0.1;
  double gamma = 20.0;
  int cells_t = 1;
  int cells_x = 4;
  int cells_y = 4;
  int sample_count = 32;
  MarginalSpec mu_spec = default_source_spec();
  MarginalSpec nu_spec = default_target_spec();
};

/// Grid {(time, i/nx, j/ny)} over the given time slices, ordered slice by
/// slice, then x index, then y index.
inline std::vector<GridPoint> tempo_spatial_grid(const std::vector<double>& times, int nx,
                                                 int ny) {
  if (times.empty() || nx < 1 || ny < 1) {
    throw std::invalid_argument("tempo_spatial_grid: need at least one time slice and nx, ny >= 1");
  }
  std::vector<GridPoint> grid;
  grid.reserve(times.size() * static_cast<size_t>(nx) * ny);
  for (double t : times) {
    if (t < 0.0) throw std::invalid_argument("tempo_spatial_grid: times must be >= 0");
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) {
        grid.push_back(GridPoint{t, {static_cast<double>(i) / nx, static_cast<double>(j) / ny}});
      }
    }
  }
  return grid;
}

/// Mixture of half-Gaussians evaluated on the grid's spatial coordinates and
/// normalized over the grid.
inline DiscreteMeasure half_gaussian_mixture(std::vector<GridPoint> grid,
                                             const std::vector<HalfGaussian>& components) {
  if (components.empty()) {
    throw std::invalid_argument("half_gaussian_mixture: no components");
  }
  Eigen::VectorXd density(static_cast<Eigen::Index>(grid.size()));
  for (size_t k = 0; k < grid.size(); ++k) {
    const auto& pos = grid[k].coords;
    double v = 0.0;
    for (const HalfGaussian& comp : components) {
      if (comp.weight < 0.0 || !(comp.sigma > 0.0)) {
        throw std::invalid_argument("half_gaussian_mixture: weights must be >= 0, sigma > 0");
      }
      const double dx = pos[0] - comp.center[0];
      const double dy = pos[1] - comp.center[1];
      const double side = dx * comp.half_plane_normal[0] + dy * comp.half_plane_normal[1];
      if (side < 0.0) continue;
      v += comp.weight * std::exp(-(dx * dx + dy * dy) / (2.0 * comp.sigma * comp.sigma));
    }
    density[static_cast<Eigen::Index>(k)] = v;
  }
  const double mass = density.sum();
  if (!(mass > 0.0)) {
    throw std::invalid_argument("half_gaussian_mixture: density vanishes on the whole grid");
  }
  return DiscreteMeasure(std::move(grid), density / mass);
}

/// Each listed point snaps to the nearest grid node (spatial distance, first
/// slice wins ties); weights of coinciding snaps merge.
inline DiscreteMeasure point_masses(std::vector<GridPoint> grid,
                                    const std::vector<std::pair<std::array<double, 2>, double>>&
                                        points) {
  if (points.empty()) throw std::invalid_argument("point_masses: no points");
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (const auto& [pos, w] : points) {
    if (w < 0.0) throw std::invalid_argument("point_masses: weights must be >= 0");
    size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < grid.size(); ++k) {
      const double dx = grid[k].coords[0] - pos[0];
      const double dy = grid[k].coords[1] - pos[1];
      const double d = dx * dx + dy * dy;
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    weights[static_cast<Eigen::Index>(best)] += w;
  }
  const double mass = weights.sum();
  if (!(mass > 0.0)) throw std::invalid_argument("point_masses: total weight must be positive");
  return DiscreteMeasure(std::move(grid), weights / mass);
}

inline DiscreteMeasure uniform_measure(std::vector<GridPoint> grid) {
  const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
  return DiscreteMeasure(std::move(grid), Eigen::VectorXd::Constant(n, 1.0 / n));
}

inline MeasurePtr make_marginal(const MarginalSpec& spec, std::vector<GridPoint> grid) {
  switch (spec.kind) {
    case MarginalSpec::Kind::half_gaussian_mixture:
      return std::make_shared<DiscreteMeasure>(half_gaussian_mixture(std::move(grid),
                                                                     spec.components));
    case MarginalSpec::Kind::point_masses:
      return std::make_shared<DiscreteMeasure>(point_masses(std::move(grid), spec.points));
    case MarginalSpec::Kind::uniform:
      return std::make_shared<DiscreteMeasure>(uniform_measure(std::move(grid)));
  }
  throw std::logic_error("make_marginal: unknown kind");
}

struct Scenario {
  MeasurePtr mu;
  MeasurePtr nu;
  Eigen::MatrixXd cost;
  ReferenceKernel kernel;
  std::shared_ptr<const FunctionalModel> model;         // physical units
  std::shared_ptr<const FunctionalModel> solver_model;  // model / epsilon
  ScenarioConfig config;
};

inline Scenario build_scenario(const ScenarioConfig& cfg) {
  if (!(cfg.horizon > 0.0) || cfg.nx < 1 || cfg.ny < 1) {
    throw std::invalid_argument("build_scenario: horizon must be > 0 and nx, ny >= 1");
  }
  if (!(cfg.lambda > 0.0) || !(cfg.beta > 0.0) || !(cfg.epsilon > 0.0) || !(cfg.gamma >= 0.0)) {
    throw std::invalid_argument(
        "build_scenario: lambda, beta, epsilon must be > 0 and gamma >= 0");
  }
  for (double s : cfg.arrival_times) {
    if (s < 0.0) throw std::invalid_argument("build_scenario: arrival times must be >= 0");
  }

  MeasurePtr mu = make_marginal(cfg.mu_spec, tempo_spatial_grid(cfg.departure_times, cfg.nx, cfg.ny));
  MeasurePtr nu = make_marginal(cfg.nu_spec, tempo_spatial_grid(cfg.arrival_times, cfg.nx, cfg.ny));

  const Eigen::Index I = mu->size(), J = nu->size();
  Eigen::MatrixXd cost(I, J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const GridPoint& tgt = nu->point(j);
    for (Eigen::Index i = 0; i < I; ++i) {
      const GridPoint& src = mu->point(i);
      cost(i, j) = transport_cost(src.time, tgt.time, src.coords, tgt.coords, cfg.lambda, cfg.beta);
    }
  }

  ReferenceKernel kernel = gibbs_reference(cost, cfg.epsilon, mu, nu);

  std::shared_ptr<const FunctionalModel> model;
  if (cfg.gamma > 0.0) {
    auto cells = uniform_cell_partition(cfg.horizon, cfg.cells_t, cfg.cells_x, cfg.cells_y);
    model = quadratic_congestion(congestion_occupancy(std::move(cells), cfg.gamma, mu, nu,
                                                      cfg.lambda, cfg.beta, cfg.sample_count));
  } else {
    model = zero_functional();
  }
  auto solver_model = std::make_shared<ScaledFunctional>(model, 1.0 / cfg.epsilon);

  return Scenario{std::move(mu), std::move(nu), std::move(cost), std::move(kernel),
                  std::move(model), std::move(solver_model), cfg};
}

}  // namespace sfw
