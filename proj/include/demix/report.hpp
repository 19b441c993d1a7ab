#pragma once

#include <map>
#include <string>

namespace demix {

/// Outcome of one inequality or residual check.
struct EstimateReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  double margin = 0.0;
  /// Scalar inputs (tau, delta, N, chi, d, a, K, ...).
  std::map<std::string, double> context;
  /// True when the inequality is one the theory guarantees, so a failure is
  /// a defect rather than an observation.
  bool proved = false;
  std::string note;
};

/// Fills holds and margin from lhs and rhs: lhs <= rhs (1 + 1e-9) + 1e-12.
EstimateReport make_report(std::string name, double lhs, double rhs, bool proved);

inline bool within_bound(double lhs, double rhs) { return lhs <= rhs * (1.0 + 1e-9) + 1e-12; }

}  // namespace demix
