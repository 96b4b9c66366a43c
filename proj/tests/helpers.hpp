#pragma once

#include "sfw/functional.hpp"
#include "sfw/measures.hpp"

#include <random>
#include <vector>

namespace sfw::test {

/// n distinct points on a line, with the given weights (uniform by default).
inline MeasurePtr line_measure(int n, Eigen::VectorXd weights = {}) {
  std::vector<GridPoint> pts;
  pts.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    pts.push_back(GridPoint{0.0, {static_cast<double>(k) / n, 0.0}});
  }
  if (weights.size() == 0) weights = Eigen::VectorXd::Constant(n, 1.0 / n);
  return make_measure(std::move(pts), std::move(weights));
}

inline Coupling coupling_2x2(const Eigen::Matrix2d& probs) {
  return Coupling(line_measure(2, probs.rowwise().sum()),
                  line_measure(2, probs.colwise().sum().transpose()), probs);
}

/// F(pi) = <phi, pi> with constant derivative phi. Test-only model; its
/// value can be negative, which the solver never relies on here.
class LinearFunctional final : public FunctionalModel {
 public:
  explicit LinearFunctional(Eigen::MatrixXd phi) : phi_(std::move(phi)) {}
  double value(const Coupling& pi) const override {
    return (phi_.array() * pi.probs().array()).sum();
  }
  Eigen::MatrixXd linear_derivative(const Coupling&) const override { return phi_; }

 private:
  Eigen::MatrixXd phi_;
};

}  // namespace sfw::test
