#include "demix/report.hpp"

namespace demix {

EstimateReport make_report(std::string name, double lhs, double rhs, bool proved) {
  EstimateReport r;
  r.name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.holds = within_bound(lhs, rhs);
  r.margin = rhs - lhs;
  r.proved = proved;
  return r;
}

}  // namespace demix
