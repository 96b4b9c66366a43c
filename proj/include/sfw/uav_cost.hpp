#pragma once

// Flight-energy cost model. A UAV travelling a spatial distance d in time r
// spends lambda*d^2/r^2 on kinetic effort plus beta*r of baseline burn; the
// optimum over r <= s - t picks the travel time below.

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sfw {

inline double spatial_distance(const std::array<double, 2>& x, const std::array<double, 2>& y) {
  const double dx = x[0] - y[0];
  const double dy = x[1] - y[1];
  return std::sqrt(dx * dx + dy * dy);
}

/// Energy-optimal travel time sqrt(lambda d^2 / beta); zero for d = 0.
inline double travel_time(const std::array<double, 2>& x, const std::array<double, 2>& y,
                          double lambda, double beta) {
  if (!(lambda > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("travel_time: lambda and beta must be positive");
  }
  return std::sqrt(lambda / beta) * spatial_distance(x, y);
}

/// Energy to move from x at time t to y by time s. +inf when s < t. When the
/// window allows the optimal travel time the cost is 2*beta*r_min; otherwise
/// the deadline binds and the full window s - t is flown. d = 0 costs
/// nothing (the limiting value of both branches).
inline double transport_cost(double t, double s, const std::array<double, 2>& x,
                             const std::array<double, 2>& y, double lambda, double beta) {
  if (s < t) return std::numeric_limits<double>::infinity();
  const double d = spatial_distance(x, y);
  if (d == 0.0) return 0.0;
  const double window = s - t;
  if (window == 0.0) return std::numeric_limits<double>::infinity();  // limit of the bound branch
  const double r_min = std::sqrt(lambda / beta) * d;
  if (r_min <= window) return 2.0 * beta * r_min;
  return (lambda * d * d / (window * window) + beta) * window;
}

/// Position along the straight-line path at `elapsed` time units after
/// departure, travelling at the r_min velocity. A stationary pair (r_min = 0)
/// sits at x.
inline std::array<double, 2> trajectory_position(const std::array<double, 2>& x,
                                                 const std::array<double, 2>& y, double r_min,
                                                 double elapsed) {
  if (r_min <= 0.0) return x;
  const double frac = elapsed / r_min;
  return {x[0] + (y[0] - x[0]) * frac, x[1] + (y[1] - x[1]) * frac};
}

}  // namespace sfw
