#pragma once

// Convex functional costs on couplings: value F(pi) plus the linear
// derivative dF/dpi(pi, .) as a matrix over the support. Two concrete
// models ship: the zero functional (plain entropic transport) and the
// quadratic congestion penalty on trajectory cell loads.

#include "sfw/measures.hpp"
#include "sfw/uav_cost.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace sfw {

class FunctionalModel {
 public:
  virtual ~FunctionalModel() = default;
  virtual double value(const Coupling& pi) const = 0;
  virtual Eigen::MatrixXd linear_derivative(const Coupling& pi) const = 0;
};

class ZeroFunctional final : public FunctionalModel {
 public:
  double value(const Coupling&) const override { return 0.0; }
  Eigen::MatrixXd linear_derivative(const Coupling& pi) const override {
    return Eigen::MatrixXd::Zero(pi.rows(), pi.cols());
  }
};

inline std::shared_ptr<const FunctionalModel> zero_functional() {
  return std::make_shared<ZeroFunctional>();
}

/// factor * F, with derivative scaled to match. Used to hand the solver the
/// functional in its own units (physical F divided by epsilon).
class ScaledFunctional final : public FunctionalModel {
 public:
  ScaledFunctional(std::shared_ptr<const FunctionalModel> base, double factor)
      : base_(std::move(base)), factor_(factor) {
    if (!base_) throw std::invalid_argument("ScaledFunctional: null base model");
    if (!(factor_ >= 0.0)) throw std::invalid_argument("ScaledFunctional: factor must be >= 0");
  }
  double value(const Coupling& pi) const override { return factor_ * base_->value(pi); }
  Eigen::MatrixXd linear_derivative(const Coupling& pi) const override {
    return factor_ * base_->linear_derivative(pi);
  }
  double factor() const { return factor_; }

 private:
  std::shared_ptr<const FunctionalModel> base_;
  double factor_;
};

/// Axis-aligned tempo-spatial box, half-open on each axis unless the closed_*
/// flag marks it as the top slice of a partition (so the zone's upper
/// boundary still belongs to a cell).
struct CellBox {
  double t_lo = 0.0, t_hi = 0.0;
  double x_lo = 0.0, x_hi = 0.0;
  double y_lo = 0.0, y_hi = 0.0;
  bool closed_t = false, closed_x = false, closed_y = false;

  bool contains(double time, const std::array<double, 2>& pos) const {
    auto in = [](double v, double lo, double hi, bool closed) {
      return v >= lo && (v < hi || (closed && v == hi));
    };
    return in(time, t_lo, t_hi, closed_t) && in(pos[0], x_lo, x_hi, closed_x) &&
           in(pos[1], y_lo, y_hi, closed_y);
  }
};

/// Uniform ct x cx x cy box partition of [0, t_max] x [0,1]^2.
inline std::vector<CellBox> uniform_cell_partition(double t_max, int ct, int cx, int cy) {
  if (!(t_max > 0.0) || ct < 1 || cx < 1 || cy < 1) {
    throw std::invalid_argument("uniform_cell_partition: invalid shape");
  }
  std::vector<CellBox> cells;
  cells.reserve(static_cast<size_t>(ct) * cx * cy);
  for (int it = 0; it < ct; ++it) {
    for (int ix = 0; ix < cx; ++ix) {
      for (int iy = 0; iy < cy; ++iy) {
        CellBox b;
        b.t_lo = t_max * it / ct;
        b.t_hi = t_max * (it + 1) / ct;
        b.x_lo = static_cast<double>(ix) / cx;
        b.x_hi = static_cast<double>(ix + 1) / cx;
        b.y_lo = static_cast<double>(iy) / cy;
        b.y_hi = static_cast<double>(iy + 1) / cy;
        b.closed_t = it == ct - 1;
        b.closed_x = ix == cx - 1;
        b.closed_y = iy == cy - 1;
        cells.push_back(b);
      }
    }
  }
  return cells;
}

/// Which congestion cells each (source, target) pair's trajectory passes
/// through, precomputed once per scenario. Stored as a CSR list over pairs
/// in column-major order; a pair marks a cell at most once.
class CongestionSpec {
 public:
  CongestionSpec(std::vector<CellBox> cells, double gamma, MeasurePtr source, MeasurePtr target,
                 double lambda, double beta, int sample_count)
      : cells_(std::move(cells)), gamma_(gamma), source_(std::move(source)),
        target_(std::move(target)), sample_count_(sample_count) {
    if (cells_.empty()) throw std::invalid_argument("CongestionSpec: no cells");
    if (!(gamma_ >= 0.0)) throw std::invalid_argument("CongestionSpec: gamma must be >= 0");
    if (sample_count_ < 2) throw std::invalid_argument("CongestionSpec: sample_count must be >= 2");
    check_disjoint();
    build_occupancy(lambda, beta);
  }

  Eigen::Index n_cells() const { return static_cast<Eigen::Index>(cells_.size()); }
  double gamma() const { return gamma_; }
  const std::vector<CellBox>& cells() const { return cells_; }
  Eigen::Index rows() const { return source_->size(); }
  Eigen::Index cols() const { return target_->size(); }

  /// load_n = sum over pairs whose trajectory touches cell n of pi_ij.
  Eigen::VectorXd loads(const Eigen::MatrixXd& probs) const {
    if (probs.rows() != rows() || probs.cols() != cols()) {
      throw std::invalid_argument("CongestionSpec::loads: shape mismatch");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_cells());
    const double* p = probs.data();
    for (Eigen::Index k = 0; k < probs.size(); ++k) {
      const double mass = p[k];
      if (mass == 0.0) continue;
      for (uint32_t idx = offsets_[k]; idx < offsets_[k + 1]; ++idx) {
        out[cell_ids_[idx]] += mass;
      }
    }
    return out;
  }

  double value(const Eigen::MatrixXd& probs) const {
    return gamma_ * loads(probs).squaredNorm();
  }

  Eigen::MatrixXd derivative(const Eigen::MatrixXd& probs) const {
    const Eigen::VectorXd load = loads(probs);
    Eigen::MatrixXd out(rows(), cols());
    double* o = out.data();
    for (Eigen::Index k = 0; k < out.size(); ++k) {
      double acc = 0.0;
      for (uint32_t idx = offsets_[k]; idx < offsets_[k + 1]; ++idx) acc += load[cell_ids_[idx]];
      o[k] = 2.0 * gamma_ * acc;
    }
    return out;
  }

  /// True iff pair (i, j) touches cell n.
  bool occupies(Eigen::Index i, Eigen::Index j, Eigen::Index n) const {
    const Eigen::Index k = j * rows() + i;
    for (uint32_t idx = offsets_[k]; idx < offsets_[k + 1]; ++idx) {
      if (cell_ids_[idx] == static_cast<uint32_t>(n)) return true;
    }
    return false;
  }

 private:
  void check_disjoint() const {
    for (size_t a = 0; a < cells_.size(); ++a) {
      for (size_t b = a + 1; b < cells_.size(); ++b) {
        const CellBox& u = cells_[a];
        const CellBox& v = cells_[b];
        const bool overlap = u.t_lo < v.t_hi && v.t_lo < u.t_hi && u.x_lo < v.x_hi &&
                             v.x_lo < u.x_hi && u.y_lo < v.y_hi && v.y_lo < u.y_hi;
        if (overlap) throw std::invalid_argument("CongestionSpec: cells must be pairwise disjoint");
      }
    }
  }

  void build_occupancy(double lambda, double beta) {
    const Eigen::Index I = rows(), J = cols();
    offsets_.assign(static_cast<size_t>(I) * J + 1, 0);
    cell_ids_.clear();
    cell_ids_.reserve(static_cast<size_t>(I) * J);
    std::vector<uint32_t> hit;
    hit.reserve(static_cast<size_t>(sample_count_));
    size_t k = 0;
    for (Eigen::Index j = 0; j < J; ++j) {
      const GridPoint& tgt = target_->point(j);
      for (Eigen::Index i = 0; i < I; ++i, ++k) {
        const GridPoint& src = source_->point(i);
        const double cost =
            transport_cost(src.time, tgt.time, src.coords, tgt.coords, lambda, beta);
        if (std::isfinite(cost)) {
          const double r_min = travel_time(src.coords, tgt.coords, lambda, beta);
          const double window = std::min(r_min, tgt.time - src.time);
          hit.clear();
          for (int s = 0; s < sample_count_; ++s) {
            const double elapsed = window * s / (sample_count_ - 1);
            const auto pos = trajectory_position(src.coords, tgt.coords, r_min, elapsed);
            const double when = src.time + elapsed;
            for (uint32_t n = 0; n < cells_.size(); ++n) {
              if (cells_[n].contains(when, pos)) {
                if (std::find(hit.begin(), hit.end(), n) == hit.end()) hit.push_back(n);
                break;  // cells are disjoint
              }
            }
          }
          cell_ids_.insert(cell_ids_.end(), hit.begin(), hit.end());
        }
        offsets_[k + 1] = static_cast<uint32_t>(cell_ids_.size());
      }
    }
  }

  std::vector<CellBox> cells_;
  double gamma_;
  MeasurePtr source_;
  MeasurePtr target_;
  int sample_count_;
  std::vector<uint32_t> offsets_;
  std::vector<uint32_t> cell_ids_;
};

/// Samples each feasible pair's straight-line trajectory at sample_count
/// uniformly spaced times in [t, t + min(r_min, s - t)] and records the cells
/// the samples land in. Pairs with infinite transport cost get empty
/// occupancy.
inline CongestionSpec congestion_occupancy(std::vector<CellBox> cells, double gamma,
                                           MeasurePtr source, MeasurePtr target, double lambda,
                                           double beta, int sample_count = 32) {
  return CongestionSpec(std::move(cells), gamma, std::move(source), std::move(target), lambda,
                        beta, sample_count);
}

/// F(pi) = gamma * sum_n load_n^2, derivative 2 gamma sum_n load_n 1{pair
/// touches cell n}.
class QuadraticCongestion final : public FunctionalModel {
 public:
  explicit QuadraticCongestion(CongestionSpec spec) : spec_(std::move(spec)) {}

  double value(const Coupling& pi) const override { return spec_.value(pi.probs()); }
  Eigen::MatrixXd linear_derivative(const Coupling& pi) const override {
    return spec_.derivative(pi.probs());
  }
  const CongestionSpec& spec() const { return spec_; }

 private:
  CongestionSpec spec_;
};

inline std::shared_ptr<const FunctionalModel> quadratic_congestion(CongestionSpec spec) {
  return std::make_shared<QuadraticCongestion>(std::move(spec));
}

/// First-order Taylor residuals |F((1-eta)p + eta q) - F(p) - eta <dF(p), q-p>|
/// per eta. For the quadratic model this equals gamma eta^2 sum_n (dload_n)^2.
inline std::vector<double> derivative_check(const FunctionalModel& model, const Coupling& p,
                                            const Coupling& q, const std::vector<double>& etas) {
  require_same_support(p, q, "derivative_check");
  const double fp = model.value(p);
  const Eigen::MatrixXd grad = model.linear_derivative(p);
  const double slope = (grad.array() * (q.probs() - p.probs()).array()).sum();
  std::vector<double> residuals;
  residuals.reserve(etas.size());
  for (double eta : etas) {
    if (!(eta > 0.0 && eta <= 1.0)) {
      throw std::domain_error("derivative_check: eta must lie in (0, 1]");
    }
    const double f_eta = model.value(convex_combine(p, q, eta));
    residuals.push_back(std::abs(f_eta - fp - eta * slope));
  }
  return residuals;
}

}  // namespace sfw
