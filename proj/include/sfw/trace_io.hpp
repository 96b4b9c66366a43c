#pragma once

// Trace and summary serialization. Energies go out with 17 significant
// digits so downstream rate fits see the same doubles the solver did.

#include "sfw/sfw_flow.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfw {

inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// trace.csv: one row per outer step. v_ref anchors the gap column; physical
/// energies come from the exact affine relation to solver energies,
/// V_physical = epsilon * (V_solver - log_gibbs_mass).
inline void write_trace_csv(const std::string& path, const SfwTrace& trace, double v_ref,
                            double epsilon, double log_gibbs_mass) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  out << "outer_iter,t,V_solver,V_physical,gap,sym_entropy,step_tv,inner_iters,F_physical\n";
  for (const SfwStep& s : trace.steps) {
    const double physical = epsilon * (s.energy - log_gibbs_mass);
    out << s.outer_iter << ',' << format_full(s.t) << ',' << format_full(s.energy) << ','
        << format_full(physical) << ',' << format_full(s.energy - v_ref) << ','
        << format_full(s.sym_entropy) << ',' << format_full(s.step_tv) << ','
        << s.inner_iterations << ',' << format_full(epsilon * s.functional_value) << '\n';
  }
}

/// Long-format table combining several runs, keyed by rescaled time.
struct CollapseRow {
  double alpha = 0.0;
  int outer_iter = 0;
  double t = 0.0;
  double gap = 0.0;
  double log_gap = 0.0;
};

inline void write_collapse_csv(const std::string& path, const std::vector<CollapseRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write collapse file: " + path);
  out << "alpha,outer_iter,t,gap,log_gap\n";
  for (const CollapseRow& r : rows) {
    out << format_full(r.alpha) << ',' << r.outer_iter << ',' << format_full(r.t) << ','
        << format_full(r.gap) << ',' << format_full(r.log_gap) << '\n';
  }
}

inline void write_json(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write json file: " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace sfw
