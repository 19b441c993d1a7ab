#include "demix/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "demix/errors.hpp"

namespace demix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sq_dist(const std::array<double, 2>& p, const std::array<double, 2>& q) {
  const double dx = p[0] - q[0];
  const double dy = p[1] - q[1];
  return dx * dx + dy * dy;
}

// -eps * log sum_j exp(logw_j + (pot_j - cost_j) / eps)
double softmin(const double* cost, std::size_t stride, const std::vector<double>& pot,
               const std::vector<double>& logw, double eps) {
  double top = kNegInf;
  const std::size_t n = pot.size();
  for (std::size_t j = 0; j < n; ++j) {
    if (logw[j] == kNegInf) continue;
    top = std::max(top, logw[j] + (pot[j] - cost[j * stride]) / eps);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (logw[j] == kNegInf) continue;
    sum += std::exp(logw[j] + (pot[j] - cost[j * stride]) / eps - top);
  }
  return -eps * (top + std::log(sum));
}

struct Problem {
  std::size_t n;
  std::size_t m;
  std::vector<double> cost;  // n x m, row-major
  std::vector<double> loga;
  std::vector<double> logb;
  std::vector<double> a;
  double diameter_sq;
};

struct Solution {
  std::vector<double> f;
  std::vector<double> g;
  int iterations = 0;
  double residual = 0.0;
  double eps = 0.0;
};

double marginal_error(const Problem& p, const Solution& s) {
  double err = 0.0;
  for (std::size_t i = 0; i < p.n; ++i) {
    if (p.a[i] == 0.0) continue;
    const double fi = softmin(&p.cost[i * p.m], 1, s.g, p.logb, s.eps);
    err += std::abs(p.a[i] * (1.0 - std::exp((s.f[i] - fi) / s.eps)));
  }
  return err;
}

Solution solve(const Problem& p, const SinkhornOptions& opts) {
  Solution s;
  s.f.assign(p.n, 0.0);
  s.g.assign(p.m, 0.0);
  double eps = opts.epsilon_scaling ? std::max(p.diameter_sq, opts.epsilon) : opts.epsilon;
  auto sweep = [&](double e) {
    for (std::size_t i = 0; i < p.n; ++i) s.f[i] = softmin(&p.cost[i * p.m], 1, s.g, p.logb, e);
    for (std::size_t j = 0; j < p.m; ++j) s.g[j] = softmin(&p.cost[j], p.m, s.f, p.loga, e);
    ++s.iterations;
  };
  while (eps > opts.epsilon) {
    s.eps = eps;
    for (int k = 0; k < 10 && s.iterations < opts.max_iter; ++k) sweep(eps);
    eps = std::max(0.5 * eps, opts.epsilon);
  }
  s.eps = opts.epsilon;
  while (true) {
    sweep(s.eps);
    if (s.iterations % 5 == 0 || s.iterations >= opts.max_iter) {
      s.residual = marginal_error(p, s);
      if (s.residual <= opts.tol) break;
      if (s.iterations >= opts.max_iter) {
        throw NumericalError("sinkhorn did not converge, residual " + std::to_string(s.residual));
      }
    }
  }
  return s;
}

Problem make_problem(const std::vector<std::array<double, 2>>& x, const std::vector<double>& a,
                     const std::vector<std::array<double, 2>>& y, const std::vector<double>& b) {
  Problem p;
  p.n = x.size();
  p.m = y.size();
  p.cost.resize(p.n * p.m);
  p.diameter_sq = 0.0;
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t j = 0; j < p.m; ++j) {
      const double c = sq_dist(x[i], y[j]);
      p.cost[i * p.m + j] = c;
      p.diameter_sq = std::max(p.diameter_sq, c);
    }
  }
  p.a = a;
  p.loga.resize(p.n);
  p.logb.resize(p.m);
  for (std::size_t i = 0; i < p.n; ++i) p.loga[i] = a[i] > 0.0 ? std::log(a[i]) : kNegInf;
  for (std::size_t j = 0; j < p.m; ++j) p.logb[j] = b[j] > 0.0 ? std::log(b[j]) : kNegInf;
  return p;
}

double dual_value(const std::vector<double>& a, const std::vector<double>& b, const Solution& s) {
  double v = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) v += a[i] * s.f[i];
  for (std::size_t j = 0; j < b.size(); ++j) v += b[j] * s.g[j];
  return v;
}

std::vector<double> normalized(const std::vector<double>& w, double& total) {
  total = 0.0;
  for (double v : w) {
    if (v < 0.0 || !std::isfinite(v)) throw NumericalError("invalid density");
    total += v;
  }
  if (!(total > 0.0)) throw NumericalError("invalid density");
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] / total;
  return out;
}

}  // namespace

EntropicResult sinkhorn_points(const std::vector<std::array<double, 2>>& x,
                               const std::vector<double>& a_in,
                               const std::vector<std::array<double, 2>>& y,
                               const std::vector<double>& b_in, const SinkhornOptions& opts) {
  if (!(opts.epsilon > 0.0)) throw std::invalid_argument("sinkhorn epsilon must be positive");
  if (x.size() != a_in.size() || y.size() != b_in.size()) {
    throw std::invalid_argument("sinkhorn: weights and points differ in length");
  }
  double ma = 0.0;
  double mb = 0.0;
  const auto a = normalized(a_in, ma);
  const auto b = normalized(b_in, mb);
  if (std::abs(ma - mb) > 1e-10 * ma) throw NumericalError("unbalanced");

  const Problem pab = make_problem(x, a, y, b);
  const Solution sab = solve(pab, opts);
  const Solution saa = solve(make_problem(x, a, x, a), opts);
  const Solution sbb = solve(make_problem(y, b, y, b), opts);

  EntropicResult r;
  r.ot_cost = ma * dual_value(a, b, sab);
  const double self = 0.5 * dual_value(a, a, saa) + 0.5 * dual_value(b, b, sbb);
  r.w2sq = ma * (dual_value(a, b, sab) - self);
  r.f = sab.f;
  r.g = sab.g;
  r.iterations = sab.iterations;
  r.residual = sab.residual;
  r.map.assign(x.size(), {0.0, 0.0});
  for (std::size_t i = 0; i < pab.n; ++i) {
    double w = 0.0;
    std::array<double, 2> acc{0.0, 0.0};
    for (std::size_t j = 0; j < pab.m; ++j) {
      if (b[j] == 0.0) continue;
      const double pij = std::exp(pab.logb[j] + (sab.f[i] + sab.g[j] - pab.cost[i * pab.m + j]) /
                                                    opts.epsilon);
      w += pij;
      acc[0] += pij * y[j][0];
      acc[1] += pij * y[j][1];
    }
    if (w > 0.0) r.map[i] = {acc[0] / w, acc[1] / w};
  }
  return r;
}

TransportResult sinkhorn(const Profile& src, const Profile& dst, const SinkhornOptions& opts) {
  if (!(src.grid() == dst.grid())) throw NumericalError("transport: grid mismatch");
  const Grid1D& g = src.grid();
  std::vector<std::array<double, 2>> pts(g.size());
  std::vector<double> a(g.size()), b(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    pts[k] = {g.center(k), 0.0};
    a[k] = src[k] * g.h();
    b[k] = dst[k] * g.h();
  }
  const auto e = sinkhorn_points(pts, a, pts, b, opts);
  TransportResult r;
  r.w2sq = e.w2sq;
  r.approximate = true;
  r.iterations = e.iterations;
  std::vector<double> psi(g.size()), phi(g.size());
  r.map.resize(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    psi[k] = 0.5 * e.f[k];
    phi[k] = 0.5 * e.g[k];
    r.map[k] = e.map[k][0];
  }
  r.psi = Profile(g, psi);
  r.psi_mean = Profile(g, std::move(psi));
  r.phi = Profile(g, phi);
  r.phi_mean = Profile(g, std::move(phi));
  return r;
}

EntropicResult sinkhorn(const Field2D& src, const Field2D& dst, const SinkhornOptions& opts) {
  auto atoms = [](const Field2D& fld, std::vector<std::array<double, 2>>& pts,
                  std::vector<double>& w) {
    if (fld.values.size() != fld.nx * fld.ny || fld.nx == 0 || fld.ny == 0) {
      throw std::invalid_argument("Field2D: values do not match nx*ny");
    }
    const double hx = fld.lx / fld.nx;
    const double hy = fld.ly / fld.ny;
    pts.clear();
    w.clear();
    for (std::size_t j = 0; j < fld.ny; ++j) {
      for (std::size_t i = 0; i < fld.nx; ++i) {
        pts.push_back({(i + 0.5) * hx, (j + 0.5) * hy});
        w.push_back(fld.values[j * fld.nx + i] * hx * hy);
      }
    }
  };
  std::vector<std::array<double, 2>> xs, ys;
  std::vector<double> a, b;
  atoms(src, xs, a);
  atoms(dst, ys, b);
  return sinkhorn_points(xs, a, ys, b, opts);
}

}  // namespace demix
