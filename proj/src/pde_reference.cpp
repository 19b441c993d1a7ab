#include "demix/pde_reference.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "demix/errors.hpp"

namespace demix {

void FdConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("pde dt must be positive");
  if (n_steps < 0) throw std::invalid_argument("pde n_steps must be nonnegative");
  if (!(theta_implicit >= 0.0 && theta_implicit <= 1.0)) {
    throw std::invalid_argument("theta_implicit must lie in [0, 1]");
  }
  if (!(elliptic_tol > 0.0)) throw std::invalid_argument("elliptic_tol must be positive");
}

namespace {

void require_unit_mobilities(const ModelParams& params) {
  if (params.m1 != 1.0 || params.m2 != 1.0) {
    throw std::invalid_argument("reference solvers are defined for m1 = m2 = 1");
  }
}

// Graph Laplacian with Neumann ends, scaled by 1/h^2 (positive semidefinite).
Eigen::SparseMatrix<double> neg_laplacian(std::size_t n, double h) {
  std::vector<Eigen::Triplet<double>> t;
  const double s = 1.0 / (h * h);
  for (std::size_t k = 0; k < n; ++k) {
    const int i = static_cast<int>(k);
    double diag = 0.0;
    if (k > 0) {
      t.emplace_back(i, i - 1, -s);
      diag += s;
    }
    if (k + 1 < n) {
      t.emplace_back(i, i + 1, -s);
      diag += s;
    }
    t.emplace_back(i, i, diag);
  }
  Eigen::SparseMatrix<double> m(static_cast<int>(n), static_cast<int>(n));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

// Explicit flux divergence div(mob grad v) with zero boundary fluxes.
std::vector<double> flux_divergence(const std::vector<double>& mob_faces, const Profile& v) {
  const std::size_t n = v.size();
  const double h = v.grid().h();
  const auto gv = gradient(v);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = (mob_faces[k + 1] * gv[k + 1] - mob_faces[k] * gv[k]) / h;
  }
  return out;
}

// Stabilized update: (I + dt A L^2) dc = dt rhs, then clamp. A is the
// largest face mobility times the larger adjacent f'^2, scaled by theta.
Profile stabilized_update(const Profile& c1, const std::vector<double>& mob_faces,
                          const std::vector<double>& rhs, const ModelParams& params,
                          const FdConfig& cfg, FdStepInfo* info) {
  const std::size_t n = c1.size();
  const double h = c1.grid().h();
  double coeff = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double fa = params.model.fprime(c1[i - 1]);
    const double fb = params.model.fprime(c1[i]);
    coeff = std::max(coeff, mob_faces[i] * std::max(fa * fa, fb * fb));
  }
  coeff *= cfg.theta_implicit;

  Eigen::VectorXd b(static_cast<int>(n));
  for (std::size_t k = 0; k < n; ++k) b(static_cast<int>(k)) = cfg.dt * rhs[k];
  Eigen::VectorXd dc;
  if (coeff > 0.0) {
    const Eigen::SparseMatrix<double> l = neg_laplacian(n, h);
    Eigen::SparseMatrix<double> id(static_cast<int>(n), static_cast<int>(n));
    id.setIdentity();
    const Eigen::SparseMatrix<double> op = id + (cfg.dt * coeff) * (l * l);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(op);
    if (solver.info() != Eigen::Success) throw NumericalError("stabilized system factorization failed");
    dc = solver.solve(b);
    if (solver.info() != Eigen::Success) throw NumericalError("stabilized system solve failed");
  } else {
    dc = b;
  }

  std::vector<double> out(n);
  double clamp = 0.0;
  std::uint64_t events = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double raw = c1[k] + dc(static_cast<int>(k));
    const double cl = std::clamp(raw, 0.0, 1.0);
    if (cl != raw) {
      clamp += std::abs(cl - raw);
      ++events;
    }
    out[k] = cl;
  }
  if (info) {
    info->clamp_mass = h * clamp;
    info->clamp_events = events;
  }
  return Profile(c1.grid(), std::move(out));
}

double harmonic(double a, double b) {
  if (a <= 0.0 || b <= 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

}  // namespace

Profile chemical_potential(const Profile& c1, const ModelParams& params, ClampCounter* counter) {
  const Profile lap = laplacian(f_profile(c1, params.model));
  std::vector<double> v(c1.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    v[k] = params.model.fprime(c1[k], counter) * lap[k] + params.chi * (c1[k] - 0.5);
  }
  return Profile(c1.grid(), std::move(v));
}

Profile step_local(const Profile& c1, const ModelParams& params, const FdConfig& cfg,
                   FdStepInfo* info) {
  require_unit_mobilities(params);
  const std::size_t n = c1.size();
  const Profile v = chemical_potential(c1, params);
  std::vector<double> mob(n + 1, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    mob[i] = harmonic(c1[i - 1] * (1.0 - c1[i - 1]), c1[i] * (1.0 - c1[i]));
  }
  auto rhs = flux_divergence(mob, v);
  for (auto& r : rhs) r = -r;
  return stabilized_update(c1, mob, rhs, params, cfg, info);
}

std::vector<double> nonlocal_elliptic_rhs(const Profile& c1, const Profile& v) {
  const std::size_t n = c1.size();
  std::vector<double> mob(n + 1, 0.0);
  for (std::size_t i = 1; i < n; ++i) mob[i] = 1.0 - 0.5 * (c1[i - 1] + c1[i]);
  return flux_divergence(mob, v);
}

Profile step_nonlocal(const Profile& c1, const ModelParams& params, const FdConfig& cfg,
                      FdStepInfo* info) {
  require_unit_mobilities(params);
  const std::size_t n = c1.size();
  const double h = c1.grid().h();
  const Profile v = chemical_potential(c1, params);
  std::vector<double> src = nonlocal_elliptic_rhs(c1, v);
  double mean = 0.0;
  for (double s : src) mean += s;
  mean /= static_cast<double>(n);
  Eigen::VectorXd b(static_cast<int>(n));
  for (std::size_t k = 0; k < n; ++k) b(static_cast<int>(k)) = src[k] - mean;

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<int>(n));
  int iters = 0;
  double resid = 0.0;
  if (b.norm() > 0.0) {
    const Eigen::SparseMatrix<double> l = neg_laplacian(n, h);
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(cfg.elliptic_tol);
    cg.setMaxIterations(cfg.elliptic_max_iter);
    cg.compute(l);
    mu = cg.solve(b);
    iters = static_cast<int>(cg.iterations());
    resid = cg.error();
    if (cg.info() != Eigen::Success) {
      throw NumericalError("elliptic solve did not converge, residual " + std::to_string(resid));
    }
    mu.array() -= mu.mean();
  }
  std::vector<double> muv(mu.data(), mu.data() + n);
  const Profile mup(c1.grid(), std::move(muv));
  std::vector<double> mob(n + 1, 0.0);
  std::vector<double> eff(n + 1, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double c = 0.5 * (c1[i - 1] + c1[i]);
    mob[i] = c;
    eff[i] = c * (1.0 - c);
  }
  const auto rhs = flux_divergence(mob, mup);
  Profile out = stabilized_update(c1, eff, rhs, params, cfg, info);
  if (info) {
    info->elliptic_iters = iters;
    info->elliptic_residual = resid;
  }
  return out;
}

DecaySeries compare_energy_decay(const Profile& initial, const ModelParams& params,
                                 const FdConfig& cfg, double horizon) {
  cfg.validate();
  const int steps = static_cast<int>(std::llround(horizon / cfg.dt));
  DecaySeries s;
  Profile loc = initial;
  Profile nl = initial;
  double cl_loc = 0.0;
  double cl_nl = 0.0;
  auto record = [&](double t) {
    s.t.push_back(t);
    s.e_local.push_back(energy_E1(loc, params));
    s.e_nonlocal.push_back(energy_E1(nl, params));
    s.mass_local.push_back(loc.mass());
    s.mass_nonlocal.push_back(nl.mass());
    s.clamp_local.push_back(cl_loc);
    s.clamp_nonlocal.push_back(cl_nl);
  };
  record(0.0);
  for (int n = 1; n <= steps; ++n) {
    FdStepInfo il, in;
    loc = step_local(loc, params, cfg, &il);
    nl = step_nonlocal(nl, params, cfg, &in);
    cl_loc += il.clamp_mass;
    cl_nl += in.clamp_mass;
    record(cfg.dt * n);
  }
  for (std::size_t k = 1; k < s.t.size(); ++k) {
    s.max_increase_local = std::max(s.max_increase_local, s.e_local[k] - s.e_local[k - 1]);
    s.max_increase_nonlocal =
        std::max(s.max_increase_nonlocal, s.e_nonlocal[k] - s.e_nonlocal[k - 1]);
    const double before = s.e_nonlocal[k - 1] - s.e_local[k - 1];
    const double after = s.e_nonlocal[k] - s.e_local[k];
    if (s.first_crossing < 0.0 && before != 0.0 && after != 0.0 && (before > 0.0) != (after > 0.0)) {
      s.first_crossing = s.t[k];
    }
  }
  s.terminal_ratio = s.e_local.back() > 0.0 ? s.e_nonlocal.back() / s.e_local.back() : 1.0;
  const double total = initial.mass();
  s.clamp_budget_ok = cl_loc <= 1e-6 * total && cl_nl <= 1e-6 * total;
  s.final_local = loc;
  s.final_nonlocal = nl;
  return s;
}

std::vector<Profile> run_nonlocal(const Profile& initial, const ModelParams& params,
                                  const FdConfig& cfg, int n_steps, int every) {
  cfg.validate();
  std::vector<Profile> out{initial};
  Profile c = initial;
  for (int n = 1; n <= n_steps; ++n) {
    c = step_nonlocal(c, params, cfg);
    if (every > 0 && n % every == 0) out.push_back(c);
  }
  return out;
}

}  // namespace demix
