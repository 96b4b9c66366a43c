#pragma once

// Discrete probability measures on tempo-spatial grids, couplings between
// them, and the entropy/TV primitives the solver is built on.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sfw {

inline constexpr double kMassTolerance = 1e-12;
// Inputs whose mass is off by at most this much are renormalized;
// anything worse is rejected as corrupt rather than silently fixed.
inline constexpr double kRenormalizeTolerance = 1e-9;

struct GridPoint {
  double time = 0.0;
  std::array<double, 2> coords{0.0, 0.0};

  friend bool operator==(const GridPoint& a, const GridPoint& b) {
    return a.time == b.time && a.coords == b.coords;
  }
};

/// Euclidean distance in (time, x, y).
inline double distance(const GridPoint& a, const GridPoint& b) {
  const double dt = a.time - b.time;
  const double dx = a.coords[0] - b.coords[0];
  const double dy = a.coords[1] - b.coords[1];
  return std::sqrt(dt * dt + dx * dx + dy * dy);
}

/// A weighted finite support. Weights are nonnegative and sum to one;
/// zero weights are allowed (grid nodes that carry no mass stay in the
/// support so couplings keep the full grid shape).
class DiscreteMeasure {
 public:
  DiscreteMeasure(std::vector<GridPoint> points, Eigen::VectorXd weights)
      : points_(std::move(points)), weights_(std::move(weights)) {
    if (static_cast<Eigen::Index>(points_.size()) != weights_.size()) {
      throw std::invalid_argument("DiscreteMeasure: points/weights size mismatch");
    }
    if (points_.empty()) {
      throw std::invalid_argument("DiscreteMeasure: empty support");
    }
    if ((weights_.array() < 0.0).any() || !weights_.allFinite()) {
      throw std::invalid_argument("DiscreteMeasure: weights must be finite and nonnegative");
    }
    const double mass = weights_.sum();
    if (std::abs(mass - 1.0) > kRenormalizeTolerance) {
      throw std::invalid_argument("DiscreteMeasure: total mass " + std::to_string(mass) +
                                  " too far from 1");
    }
    if (std::abs(mass - 1.0) > kMassTolerance) weights_ /= mass;
    check_distinct();
  }

  Eigen::Index size() const { return weights_.size(); }
  const std::vector<GridPoint>& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  double weight(Eigen::Index i) const { return weights_[i]; }
  const GridPoint& point(Eigen::Index i) const { return points_[static_cast<size_t>(i)]; }

 private:
  void check_distinct() const {
    std::vector<size_t> order(points_.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto less = [&](size_t a, size_t b) {
      const GridPoint& p = points_[a];
      const GridPoint& q = points_[b];
      if (p.time != q.time) return p.time < q.time;
      if (p.coords[0] != q.coords[0]) return p.coords[0] < q.coords[0];
      return p.coords[1] < q.coords[1];
    };
    std::sort(order.begin(), order.end(), less);
    for (size_t i = 1; i < order.size(); ++i) {
      if (points_[order[i - 1]] == points_[order[i]]) {
        throw std::invalid_argument("DiscreteMeasure: support points must be pairwise distinct");
      }
    }
  }

  std::vector<GridPoint> points_;
  Eigen::VectorXd weights_;
};

using MeasurePtr = std::shared_ptr<const DiscreteMeasure>;

inline MeasurePtr make_measure(std::vector<GridPoint> points, Eigen::VectorXd weights) {
  return std::make_shared<DiscreteMeasure>(std::move(points), std::move(weights));
}

/// A joint probability matrix over source x target supports. Entries are
/// nonnegative with total mass one; how closely the row/column sums track
/// the marginal weights is the caller's contract (solver iterates are only
/// approximately feasible), measured by marginal_residual().
class Coupling {
 public:
  Coupling(MeasurePtr source, MeasurePtr target, Eigen::MatrixXd probs)
      : source_(std::move(source)), target_(std::move(target)), probs_(std::move(probs)) {
    if (!source_ || !target_) throw std::invalid_argument("Coupling: null marginal measure");
    if (probs_.rows() != source_->size() || probs_.cols() != target_->size()) {
      throw std::invalid_argument("Coupling: matrix shape does not match supports");
    }
    if ((probs_.array() < 0.0).any() || !probs_.allFinite()) {
      throw std::invalid_argument("Coupling: entries must be finite and nonnegative");
    }
    const double mass = probs_.sum();
    if (std::abs(mass - 1.0) > kRenormalizeTolerance) {
      throw std::invalid_argument("Coupling: total mass " + std::to_string(mass) +
                                  " too far from 1");
    }
    if (std::abs(mass - 1.0) > kMassTolerance) probs_ /= mass;
  }

  const MeasurePtr& source() const { return source_; }
  const MeasurePtr& target() const { return target_; }
  const Eigen::MatrixXd& probs() const { return probs_; }
  Eigen::Index rows() const { return probs_.rows(); }
  Eigen::Index cols() const { return probs_.cols(); }

 private:
  MeasurePtr source_;
  MeasurePtr target_;
  Eigen::MatrixXd probs_;
};

inline bool same_points(const std::vector<GridPoint>& a, const std::vector<GridPoint>& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

inline bool same_support(const Coupling& p, const Coupling& q) {
  const bool src = p.source() == q.source() ||
                   same_points(p.source()->points(), q.source()->points());
  const bool tgt = p.target() == q.target() ||
                   same_points(p.target()->points(), q.target()->points());
  return src && tgt;
}

inline void require_same_support(const Coupling& p, const Coupling& q, const char* op) {
  if (!same_support(p, q)) {
    throw std::invalid_argument(std::string(op) + ": couplings live on different supports");
  }
}

/// sum_ij p_ij log(p_ij/q_ij) with 0 log 0 = 0; +infinity as soon as p puts
/// mass where q has none.
inline double relative_entropy(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw std::invalid_argument("relative_entropy: dimension mismatch");
  }
  double acc = 0.0;
  const double* pp = p.data();
  const double* qq = q.data();
  const Eigen::Index n = p.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double pv = pp[k];
    if (pv <= 0.0) continue;
    const double qv = qq[k];
    if (qv <= 0.0) return std::numeric_limits<double>::infinity();
    acc += pv * std::log(pv / qv);
  }
  return acc;
}

inline double relative_entropy(const Coupling& p, const Coupling& q) {
  require_same_support(p, q, "relative_entropy");
  return relative_entropy(p.probs(), q.probs());
}

/// Half the entrywise L1 distance; in [0, 1] for probability matrices.
inline double total_variation(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw std::invalid_argument("total_variation: dimension mismatch");
  }
  return 0.5 * (p - q).cwiseAbs().sum();
}

inline double total_variation(const Coupling& p, const Coupling& q) {
  require_same_support(p, q, "total_variation");
  return total_variation(p.probs(), q.probs());
}

/// Row-sum and column-sum vectors of the coupling matrix.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> marginals(const Coupling& p) {
  return {p.probs().rowwise().sum(), p.probs().colwise().sum().transpose()};
}

/// Entrywise (1-alpha) p + alpha q on a shared support.
inline Coupling convex_combine(const Coupling& p, const Coupling& q, double alpha) {
  require_same_support(p, q, "convex_combine");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::domain_error("convex_combine: alpha must lie in [0, 1]");
  }
  return Coupling(p.source(), p.target(), (1.0 - alpha) * p.probs() + alpha * q.probs());
}

/// L1 distance of the row sums to the source weights and of the column sums
/// to the target weights; returns the larger of the two.
inline double marginal_residual(const Coupling& p) {
  const auto [row, col] = marginals(p);
  const double r = (row - p.source()->weights()).cwiseAbs().sum();
  const double c = (col - p.target()->weights()).cwiseAbs().sum();
  return std::max(r, c);
}

/// Worst single row or column sum deviation from its marginal weight.
inline double marginal_residual_max(const Coupling& p) {
  const auto [row, col] = marginals(p);
  const double r = (row - p.source()->weights()).cwiseAbs().maxCoeff();
  const double c = (col - p.target()->weights()).cwiseAbs().maxCoeff();
  return std::max(r, c);
}

}  // namespace sfw
