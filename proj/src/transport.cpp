#include "demix/transport.hpp"

#include <algorithm>
#include <cmath>

#include "demix/errors.hpp"

namespace demix {

namespace {

// Cumulative mass at the N+1 faces.
std::vector<double> cumulative(const Profile& p) {
  std::vector<double> s(p.size() + 1, 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    s[k + 1] = p.grid().h() * acc;
  }
  return s;
}

// Set of positions at which a piecewise-linear cumulative equals a level.
struct LevelRange {
  double lo;
  double hi;
  bool at_faces;
  std::size_t ilo;
  std::size_t ihi;
};

LevelRange locate(const std::vector<double>& cum, const Grid1D& g, double s) {
  const auto first = std::lower_bound(cum.begin(), cum.end(), s);
  if (first == cum.end()) {
    const std::size_t n = cum.size() - 1;
    return {g.face(n), g.face(n), true, n, n};
  }
  const auto i = static_cast<std::size_t>(first - cum.begin());
  if (*first == s) {
    const auto last = std::upper_bound(first, cum.end(), s);
    const auto j = static_cast<std::size_t>(last - cum.begin()) - 1;
    return {g.face(i), g.face(j), true, i, j};
  }
  // Strictly inside cell i-1 where the density is positive.
  const std::size_t k = i - 1;
  double x = g.face(k) + g.h() * (s - cum[k]) / (cum[i] - cum[k]);
  x = std::clamp(x, g.face(k), g.face(i));
  return {x, x, false, k, k};
}

std::size_t cell_of(const Grid1D& g, double x) {
  const double idx = std::floor(x / g.h());
  if (idx < 0.0) return 0;
  return std::min(static_cast<std::size_t>(idx), g.size() - 1);
}

// Vertices crossing the diagonal from (lo_x, lo_y) to (hi_x, hi_y) at fixed
// level s, with a vertex at every interior face of either side.
void append_level(std::vector<CouplingVertex>& path, const Grid1D& g, double s,
                  const LevelRange& rx, const LevelRange& ry) {
  auto push = [&](double x, double y) {
    if (!path.empty()) {
      const auto& b = path.back();
      if (b.s == s && b.x == x && b.y == y) return;
    }
    path.push_back({s, x, y});
  };
  push(rx.lo, ry.lo);
  const double wx = rx.hi - rx.lo;
  const double wy = ry.hi - ry.lo;
  std::size_t ix = rx.at_faces ? rx.ilo + 1 : 1;
  std::size_t iy = ry.at_faces ? ry.ilo + 1 : 1;
  const std::size_t ex = rx.at_faces ? rx.ihi : 0;
  const std::size_t ey = ry.at_faces ? ry.ihi : 0;
  while ((rx.at_faces && ix < ex) || (ry.at_faces && iy < ey)) {
    const bool has_x = rx.at_faces && ix < ex;
    const bool has_y = ry.at_faces && iy < ey;
    const double tx = has_x ? (g.face(ix) - rx.lo) / wx : 2.0;
    const double ty = has_y ? (g.face(iy) - ry.lo) / wy : 2.0;
    if (tx < ty) {
      push(g.face(ix), ry.lo + tx * wy);
      ++ix;
    } else if (ty < tx) {
      push(rx.lo + ty * wx, g.face(iy));
      ++iy;
    } else {
      push(g.face(ix), g.face(iy));
      ++ix;
      ++iy;
    }
  }
  push(rx.hi, ry.hi);
}

// Walks the path in increasing x (or y) and evaluates quantities at sorted
// query points.
class PathWalker {
 public:
  PathWalker(const std::vector<CouplingVertex>& path, const std::vector<double>& psi_at)
      : path_(path), psi_(psi_at) {}

  struct Sample {
    double psi;
    double x;
    double y;
  };

  Sample at_x(double q) {
    while (i_ + 1 < path_.size() - 1 && path_[i_ + 1].x < q) ++i_;
    return eval(i_, q, true);
  }

  Sample at_y(double q) {
    while (j_ + 1 < path_.size() - 1 && path_[j_ + 1].y < q) ++j_;
    return eval(j_, q, false);
  }

 private:
  Sample eval(std::size_t i, double q, bool by_x) const {
    const auto& a = path_[i];
    const auto& b = path_[i + 1];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double span = by_x ? dx : dy;
    const double start = by_x ? a.x : a.y;
    const double t = span > 0.0 ? std::clamp((q - start) / span, 0.0, 1.0) : 0.0;
    const double da = a.x - a.y;
    const double db = b.x - b.y;
    const double psi = psi_[i] + dx * (da * t + 0.5 * (db - da) * t * t);
    return {psi, a.x + t * dx, a.y + t * dy};
  }

  const std::vector<CouplingVertex>& path_;
  const std::vector<double>& psi_;
  std::size_t i_ = 0;
  std::size_t j_ = 0;
};

}  // namespace

TransportResult wasserstein_1d(const Profile& src, const Profile& dst) {
  if (!(src.grid() == dst.grid())) throw NumericalError("transport: grid mismatch");
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (src[k] < 0.0 || dst[k] < 0.0) throw NumericalError("invalid density");
  }
  const Grid1D& g = src.grid();
  const std::size_t n = g.size();
  std::vector<double> fc = cumulative(src);
  std::vector<double> gc = cumulative(dst);
  const double m = fc[n];
  if (!(m > 0.0)) throw NumericalError("invalid density");
  if (std::abs(m - gc[n]) > 1e-10 * m) throw NumericalError("unbalanced");
  const double scale = m / gc[n];
  for (auto& v : gc) v = std::min(v * scale, m);
  gc[n] = m;

  std::vector<double> levels;
  levels.reserve(2 * n + 2);
  std::merge(fc.begin(), fc.end(), gc.begin(), gc.end(), std::back_inserter(levels));
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  TransportResult r;
  auto& path = r.path;
  path.reserve(4 * n + 4);
  for (double s : levels) append_level(path, g, s, locate(fc, g, s), locate(gc, g, s));

  std::vector<double> psi_at(path.size(), 0.0);
  std::vector<double> psi_int(n, 0.0);
  std::vector<double> phi_int(n, 0.0);
  double w2 = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto& a = path[i];
    const auto& b = path[i + 1];
    const double ds = b.s - a.s;
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double da = a.x - a.y;
    const double db = b.x - b.y;
    const double quad = da * da + da * db + db * db;
    w2 += ds * quad / 3.0;
    const double lin = dx * (da / 3.0 + db / 6.0);
    if (dx > 0.0) psi_int[cell_of(g, 0.5 * (a.x + b.x))] += dx * (psi_at[i] + lin);
    if (dy > 0.0) phi_int[cell_of(g, 0.5 * (a.y + b.y))] += dy * (quad / 6.0 - psi_at[i] - lin);
    psi_at[i + 1] = psi_at[i] + 0.5 * dx * (da + db);
  }
  r.w2sq = std::max(w2, 0.0);

  const double h = g.h();
  std::vector<double> psi_c(n), psi_m(n), phi_c(n), phi_m(n), map(n);
  std::vector<double> psi_f(n + 1), map_f(n + 1);
  {
    PathWalker walk(path, psi_at);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i < n) {
        const auto smp = walk.at_x(g.face(i));
        psi_f[i] = smp.psi;
        map_f[i] = smp.y;
        const auto c = walk.at_x(g.center(i));
        psi_c[i] = c.psi;
        map[i] = c.y;
      } else {
        psi_f[n] = psi_at.back();
        map_f[n] = path.back().y;
      }
    }
  }
  {
    PathWalker walk(path, psi_at);
    for (std::size_t j = 0; j < n; ++j) {
      const auto smp = walk.at_y(g.center(j));
      const double d = smp.x - smp.y;
      phi_c[j] = 0.5 * d * d - smp.psi;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    psi_m[k] = psi_int[k] / h;
    phi_m[k] = phi_int[k] / h;
  }
  r.map = std::move(map);
  r.map_faces = std::move(map_f);
  r.psi = Profile(g, std::move(psi_c));
  r.psi_mean = Profile(g, std::move(psi_m));
  r.psi_faces = std::move(psi_f);
  r.phi = Profile(g, std::move(phi_c));
  r.phi_mean = Profile(g, std::move(phi_m));
  return r;
}

double monge_cost(const Profile& src, const TransportResult& r) {
  const Grid1D& g = src.grid();
  double cost = 0.0;
  for (std::size_t i = 0; i + 1 < r.path.size(); ++i) {
    const auto& a = r.path[i];
    const auto& b = r.path[i + 1];
    const double dx = b.x - a.x;
    if (!(dx > 0.0)) continue;
    const double da = a.x - a.y;
    const double db = b.x - b.y;
    cost += src[cell_of(g, 0.5 * (a.x + b.x))] * dx * (da * da + da * db + db * db) / 3.0;
  }
  return cost;
}

double dual_objective(const Profile& src, const Profile& dst, const TransportResult& r) {
  return inner(r.psi_mean, src) + inner(r.phi_mean, dst);
}

double metric_d_sq(const MixtureState& a, const MixtureState& b, const MetricParams& params) {
  const double w1 = wasserstein_1d(a.c1, b.c1).w2sq;
  const double w2 = wasserstein_1d(a.c2, b.c2).w2sq;
  return w1 / params.m1 + w2 / params.m2;
}

MixtureState regularize_delta(const MixtureState& state, double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("regularization delta must lie in [0, 1]");
  }
  std::vector<double> c1(state.c1.size());
  for (std::size_t k = 0; k < c1.size(); ++k) {
    c1[k] = delta * state.rho1 + (1.0 - delta) * state.c1[k];
  }
  return MixtureState::from_c1(Profile(state.c1.grid(), std::move(c1)), state.rho1);
}

double mollify_constant(double length, double rho1, double rho2, const MetricParams& params) {
  return length * length * length * (rho1 / params.m1 + rho2 / params.m2);
}

EstimateReport check_mollify_bound(const MixtureState& state, double delta,
                                   const MetricParams& params) {
  const double k = mollify_constant(state.c1.grid().length(), state.rho1, state.rho2, params);
  const double lhs = metric_d_sq(state, regularize_delta(state, delta), params);
  auto rep = make_report("mollify_bound", lhs, delta * k, true);
  rep.context = {{"delta", delta}, {"K", k}, {"N", static_cast<double>(state.c1.size())}};
  return rep;
}

EstimateReport check_w2_to_l2(const MixtureState& a, const MixtureState& b,
                              const MetricParams& params) {
  double diff = 0.0;
  for (std::size_t k = 0; k < a.c1.size(); ++k) {
    const double e1 = b.c1[k] - a.c1[k];
    const double e2 = b.c2[k] - a.c2[k];
    diff += e1 * e1 + e2 * e2;
  }
  const double lhs = a.c1.grid().h() * diff;
  const double grads = norm(a.c1, NormKind::H1Seminorm) + norm(b.c1, NormKind::H1Seminorm);
  const double d = std::sqrt(metric_d_sq(a, b, params));
  auto rep = make_report("w2_to_l2", lhs, 2.0 * std::sqrt(params.m1) * grads * d, true);
  rep.context = {{"m1", params.m1}, {"d", d}, {"grad_sum", grads}};
  return rep;
}

}  // namespace demix
