#pragma once

// Reference measures on the product grid, kept as log-densities. Gibbs
// construction from a cost matrix, exponential tilting by a bounded
// potential, and the tilting identity residual used by the verify suite.
// Everything stays in log domain until a single logsumexp reduction;
// exponentiating first underflows at the cost scales this solver runs at.

#include "sfw/measures.hpp"

#include <cmath>
#include <limits>

namespace sfw {

inline constexpr double kKernelNormTolerance = 1e-10;

/// logsumexp over all entries; -inf entries contribute nothing, and a matrix
/// of only -inf reduces to -inf.
inline double logsumexp(const Eigen::MatrixXd& a) {
  const double m = a.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a stray +inf, rejected upstream)
  double acc = 0.0;
  const double* data = a.data();
  const Eigen::Index n = a.size();
  for (Eigen::Index k = 0; k < n; ++k) acc += std::exp(data[k] - m);
  return m + std::log(acc);
}

/// Log-density of a probability measure R over source x target. Entries are
/// finite on the support and -inf off it; exp(log_weights) sums to one.
class ReferenceKernel {
 public:
  ReferenceKernel(MeasurePtr source, MeasurePtr target, Eigen::MatrixXd log_weights)
      : source_(std::move(source)), target_(std::move(target)),
        log_weights_(std::move(log_weights)) {
    if (!source_ || !target_) throw std::invalid_argument("ReferenceKernel: null marginal measure");
    if (log_weights_.rows() != source_->size() || log_weights_.cols() != target_->size()) {
      throw std::invalid_argument("ReferenceKernel: matrix shape does not match supports");
    }
    const double* data = log_weights_.data();
    for (Eigen::Index k = 0; k < log_weights_.size(); ++k) {
      if (std::isnan(data[k]) || data[k] == std::numeric_limits<double>::infinity()) {
        throw std::invalid_argument("ReferenceKernel: log weights must be < +inf and not NaN");
      }
    }
    const double lse = logsumexp(log_weights_);
    if (!std::isfinite(lse)) {
      throw std::invalid_argument("ReferenceKernel: kernel has empty support");
    }
    if (std::abs(lse) > kKernelNormTolerance) log_weights_.array() -= lse;
  }

  const MeasurePtr& source() const { return source_; }
  const MeasurePtr& target() const { return target_; }
  const Eigen::MatrixXd& log_weights() const { return log_weights_; }
  Eigen::Index rows() const { return log_weights_.rows(); }
  Eigen::Index cols() const { return log_weights_.cols(); }

 private:
  MeasurePtr source_;
  MeasurePtr target_;
  Eigen::MatrixXd log_weights_;
};

struct TiltResult {
  ReferenceKernel kernel;
  double log_partition;  // log of the mass e^{-phi} carries under the base kernel
};

/// Gibbs reference exp(-cost/epsilon) relative to mu (x) nu, normalized.
/// Infinite cost entries (and zero-weight marginal nodes) are absent from
/// the support. Every positive-mass row and column must reach at least one
/// positive-mass, finite-cost partner.
inline ReferenceKernel gibbs_reference(const Eigen::MatrixXd& cost, double epsilon,
                                       MeasurePtr mu, MeasurePtr nu) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("gibbs_reference: epsilon must be positive");
  if (!mu || !nu) throw std::invalid_argument("gibbs_reference: null marginal measure");
  const Eigen::Index I = mu->size(), J = nu->size();
  if (cost.rows() != I || cost.cols() != J) {
    throw std::invalid_argument("gibbs_reference: cost shape does not match marginals");
  }
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd lw(I, J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const double lnu = nu->weight(j) > 0.0 ? std::log(nu->weight(j)) : neg_inf;
    for (Eigen::Index i = 0; i < I; ++i) {
      const double c = cost(i, j);
      if (std::isnan(c) || c < 0.0) {
        throw std::invalid_argument("gibbs_reference: costs must be nonnegative (or +inf)");
      }
      const double lmu = mu->weight(i) > 0.0 ? std::log(mu->weight(i)) : neg_inf;
      lw(i, j) = std::isfinite(c) ? -c / epsilon + lmu + lnu : neg_inf;
    }
  }
  for (Eigen::Index i = 0; i < I; ++i) {
    if (mu->weight(i) > 0.0 && !(lw.row(i).maxCoeff() > neg_inf)) {
      throw std::runtime_error("gibbs_reference: source point " + std::to_string(i) +
                               " has no reachable target (infeasible cost row)");
    }
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    if (nu->weight(j) > 0.0 && !(lw.col(j).maxCoeff() > neg_inf)) {
      throw std::runtime_error("gibbs_reference: target point " + std::to_string(j) +
                               " is unreachable (infeasible cost column)");
    }
  }
  return ReferenceKernel(std::move(mu), std::move(nu), std::move(lw));
}

/// Exponential tilt: R_phi has log weights  log R - phi - log Z_phi  with
/// log Z_phi = logsumexp(log R - phi).
inline TiltResult tilt(const ReferenceKernel& kernel, const Eigen::MatrixXd& phi) {
  if (phi.rows() != kernel.rows() || phi.cols() != kernel.cols()) {
    throw std::invalid_argument("tilt: potential shape mismatch");
  }
  Eigen::MatrixXd shifted = kernel.log_weights() - phi;
  const double log_z = logsumexp(shifted);
  shifted.array() -= log_z;
  return TiltResult{ReferenceKernel(kernel.source(), kernel.target(), std::move(shifted)), log_z};
}

/// H(pi || R) where R is given by its log weights. Same conventions as
/// relative_entropy: 0 log 0 = 0, +inf when pi charges an off-support pair.
inline double relative_entropy_log_ref(const Eigen::MatrixXd& p, const Eigen::MatrixXd& log_q) {
  if (p.rows() != log_q.rows() || p.cols() != log_q.cols()) {
    throw std::invalid_argument("relative_entropy_log_ref: dimension mismatch");
  }
  double acc = 0.0;
  const double* pp = p.data();
  const double* lq = log_q.data();
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double pv = pp[k];
    if (pv <= 0.0) continue;
    if (!std::isfinite(lq[k])) return std::numeric_limits<double>::infinity();
    acc += pv * (std::log(pv) - lq[k]);
  }
  return acc;
}

/// Absolute residual of  <phi, pi> + H(pi||R) = H(pi||R_phi) - log Z_phi.
/// Zero (to roundoff) for every pi absolutely continuous w.r.t. R.
inline double tilting_identity_residual(const Coupling& pi, const ReferenceKernel& kernel,
                                        const Eigen::MatrixXd& phi) {
  if (pi.rows() != kernel.rows() || pi.cols() != kernel.cols()) {
    throw std::invalid_argument("tilting_identity_residual: dimension mismatch");
  }
  const TiltResult tilted = tilt(kernel, phi);
  const double lhs = (phi.array() * pi.probs().array()).sum() +
                     relative_entropy_log_ref(pi.probs(), kernel.log_weights());
  const double rhs = relative_entropy_log_ref(pi.probs(), tilted.kernel.log_weights()) -
                     tilted.log_partition;
  if (std::isinf(lhs) && std::isinf(rhs)) return std::numeric_limits<double>::infinity();
  return std::abs(lhs - rhs);
}

}  // namespace sfw
