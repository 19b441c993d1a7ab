#include "demix/jko.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "demix/errors.hpp"

namespace demix {

double JkoConfig::effective_delta() const {
  const double cap = tau * tau;
  return delta0 ? std::min(*delta0, cap) : cap;
}

void JkoConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (delta0 && !(*delta0 >= 0.0)) throw std::invalid_argument("delta0 must be nonnegative");
  if (!(inner_tol > 0.0)) throw std::invalid_argument("inner_tol must be positive");
  if (inner_max_iter < 1) throw std::invalid_argument("inner_max_iter must be positive");
  if (!(step_shrink > 0.0 && step_shrink < 1.0)) {
    throw std::invalid_argument("step_shrink must lie in (0, 1)");
  }
}

namespace {

Profile complement(const Profile& c1) {
  std::vector<double> v(c1.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = 1.0 - c1[k];
  return Profile(c1.grid(), std::move(v));
}

// Everything the inner solver needs at one iterate.
struct Evaluation {
  std::vector<double> c;
  double value = 0.0;
  std::vector<double> grad;  // per unit length
  TransportResult t1;
  TransportResult t2;
  double w_sq = 0.0;
};

class StepProblem {
 public:
  StepProblem(const MixtureState& target, double tau, const ModelParams& params,
              ClampCounter* clamps)
      : target_(target), tau_(tau), params_(params), clamps_(clamps) {}

  Evaluation evaluate(std::vector<double> c) const {
    Evaluation e;
    const Grid1D& g = target_.c1.grid();
    Profile c1(g, c);
    Profile c2 = complement(c1);
    e.t1 = wasserstein_1d(c1, target_.c1);
    e.t2 = wasserstein_1d(c2, target_.c2);
    e.w_sq = e.t1.w2sq / params_.m1 + e.t2.w2sq / params_.m2;
    e.value = e.w_sq / (2.0 * tau_) + energy_E1(c1, params_);
    const Profile vd = variational_derivative(c1, params_, clamps_);
    e.grad.resize(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
      e.grad[k] = (e.t1.psi_mean[k] / params_.m1 - e.t2.psi_mean[k] / params_.m2) / tau_ + vd[k];
    }
    e.c = std::move(c);
    return e;
  }

  // Approximate Hessian per unit length: transport part from the second
  // variation int dF^2 / b(T) and the exact Hessian of the discrete energy.
  Eigen::MatrixXd hessian(const Evaluation& e) const {
    const Grid1D& g = target_.c1.grid();
    const std::size_t n = g.size();
    const double h = g.h();
    Eigen::MatrixXd hm = Eigen::MatrixXd::Zero(n, n);
    auto add_transport = [&](const TransportResult& t, const Profile& b, double weight) {
      // S_j = sum over interior faces i >= j of 1/b(T(face_i)).
      std::vector<double> tail(n + 1, 0.0);
      for (std::size_t i = n - 1; i >= 1; --i) {
        const double y = t.map_faces[i];
        double idx = std::floor(y / h);
        std::size_t cell = idx < 0.0 ? 0 : std::min(static_cast<std::size_t>(idx), n - 1);
        const double dens = std::max(b[cell], 1e-12);
        tail[i] = tail[i + 1] + 1.0 / dens;
      }
      const double scale = weight * h * h;
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < n; ++l) {
          hm(k, l) += scale * tail[std::max(k, l) + 1];
        }
      }
    };
    add_transport(e.t1, target_.c1, 1.0 / (tau_ * params_.m1));
    add_transport(e.t2, target_.c2, 1.0 / (tau_ * params_.m2));

    const auto& model = params_.model;
    std::vector<double> f(n), fp(n), fpp(n);
    for (std::size_t k = 0; k < n; ++k) {
      f[k] = model.f(e.c[k]);
      fp[k] = model.fprime(e.c[k]);
      fpp[k] = model.fsecond(e.c[k]);
    }
    const double ih2 = 1.0 / (h * h);
    for (std::size_t k = 0; k < n; ++k) {
      double lf = 0.0;
      double diag = 0.0;
      if (k > 0) {
        lf += f[k] - f[k - 1];
        diag += 1.0;
        hm(k, k - 1) -= fp[k] * fp[k - 1] * ih2;
      }
      if (k + 1 < n) {
        lf += f[k] - f[k + 1];
        diag += 1.0;
        hm(k, k + 1) -= fp[k] * fp[k + 1] * ih2;
      }
      hm(k, k) += (diag * fp[k] * fp[k] + fpp[k] * lf) * ih2 - params_.chi;
    }
    return hm;
  }

 private:
  const MixtureState& target_;
  double tau_;
  const ModelParams& params_;
  ClampCounter* clamps_;
};

struct Stationarity {
  std::vector<bool> active;
  double multiplier = 0.0;
  double residual = 0.0;
};

Stationarity stationarity(const std::vector<double>& c, const std::vector<double>& grad, double h) {
  const std::size_t n = c.size();
  Stationarity s;
  s.active.assign(n, false);
  double lam = std::accumulate(grad.begin(), grad.end(), 0.0) / static_cast<double>(n);
  for (int round = 0; round < 50; ++round) {
    std::vector<bool> act(n, false);
    for (std::size_t k = 0; k < n; ++k) {
      const double r = grad[k] - lam;
      act[k] = (c[k] <= 0.0 && r > 0.0) || (c[k] >= 1.0 && r < 0.0);
    }
    double sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (!act[k]) {
        sum += grad[k];
        ++cnt;
      }
    }
    const double next = cnt > 0 ? sum / static_cast<double>(cnt) : lam;
    const bool same = act == s.active && round > 0;
    s.active = std::move(act);
    lam = next;
    if (same) break;
  }
  s.multiplier = lam;
  double r2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (s.active[k]) continue;
    const double r = grad[k] - lam;
    r2 += r * r;
  }
  s.residual = std::sqrt(h * r2);
  return s;
}

double directional(const std::vector<double>& grad, const std::vector<double>& from,
                   const std::vector<double>& to, double h) {
  double s = 0.0;
  for (std::size_t k = 0; k < grad.size(); ++k) s += grad[k] * (to[k] - from[k]);
  return h * s;
}

// Newton direction on the free set with the mean constraint as a KKT row.
std::optional<std::vector<double>> newton_direction(const Eigen::MatrixXd& hess,
                                                    const std::vector<double>& grad,
                                                    const std::vector<bool>& active) {
  const std::size_t n = grad.size();
  std::vector<std::size_t> free;
  for (std::size_t k = 0; k < n; ++k)
    if (!active[k]) free.push_back(k);
  const std::size_t nf = free.size();
  if (nf < 2) return std::nullopt;
  double scale = 0.0;
  for (std::size_t a = 0; a < nf; ++a) scale = std::max(scale, std::abs(hess(free[a], free[a])));
  double shift = 0.0;
  for (int attempt = 0; attempt < 14; ++attempt) {
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + 1, nf + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + 1);
    for (std::size_t a = 0; a < nf; ++a) {
      for (std::size_t b = 0; b < nf; ++b) kkt(a, b) = hess(free[a], free[b]);
      kkt(a, a) += shift;
      kkt(a, nf) = 1.0;
      kkt(nf, a) = 1.0;
      rhs(a) = -grad[free[a]];
    }
    const Eigen::VectorXd sol = kkt.partialPivLu().solve(rhs);
    std::vector<double> p(n, 0.0);
    double slope = 0.0;
    bool finite = true;
    for (std::size_t a = 0; a < nf; ++a) {
      p[free[a]] = sol(a);
      slope += grad[free[a]] * sol(a);
      finite = finite && std::isfinite(sol(a));
    }
    if (finite && slope < 0.0) return p;
    shift = shift == 0.0 ? 1e-8 * std::max(scale, 1.0) : 10.0 * shift;
  }
  return std::nullopt;
}

}  // namespace

std::vector<double> project_box_mean(const std::vector<double>& z, double rho) {
  const std::size_t n = z.size();
  const double target = rho * static_cast<double>(n);
  auto total = [&](double lam) {
    double s = 0.0;
    for (double v : z) s += std::clamp(v - lam, 0.0, 1.0);
    return s;
  };
  double lo = *std::min_element(z.begin(), z.end()) - 1.0;
  double hi = *std::max_element(z.begin(), z.end());
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (total(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // Pick whichever bracket end reproduces the mean more closely.
  const double lam = std::abs(total(lo) - target) <= std::abs(total(hi) - target) ? lo : hi;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = std::clamp(z[k] - lam, 0.0, 1.0);
  return out;
}

double jko_objective(const Profile& c1, const MixtureState& target, double tau,
                     const ModelParams& params) {
  const Profile c2 = complement(c1);
  const double w = wasserstein_1d(c1, target.c1).w2sq / params.m1 +
                   wasserstein_1d(c2, target.c2).w2sq / params.m2;
  return w / (2.0 * tau) + energy_E1(c1, params);
}

std::pair<double, double> normalization_integrals(const Profile& psi1, const Profile& psi2,
                                                  const MixtureState& state, double tau,
                                                  const ModelParams& params) {
  const Grid1D& g = state.c1.grid();
  double i1 = 0.0;
  double i2 = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double c1 = state.c1[k];
    const double c2 = state.c2[k];
    i1 += c1 * psi1[k] / params.m1 + c2 * psi2[k] / params.m2;
    if (params.model.supports_q()) {
      const double ww = params.model.omega(c1) * params.model.omega(c2);
      const double mu1 = psi1[k] / (params.m1 * tau);
      const double mu2 = psi2[k] / (params.m2 * tau);
      i2 += ww * (mu1 - mu2 - params.chi * (c1 - 0.5));
    }
  }
  return {g.h() * i1, g.h() * i2};
}

std::pair<double, double> normalization_constants(const Profile& psi1, const Profile& psi2,
                                                  const MixtureState& state, double tau,
                                                  const ModelParams& params) {
  const Grid1D& g = state.c1.grid();
  double weight = 0.0;
  if (params.model.supports_q()) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      weight += params.model.omega(state.c1[k]) * params.model.omega(state.c2[k]);
    }
    weight *= g.h();
  }
  if (!(weight > 1e-12)) throw NumericalError("degenerate normalization");
  const auto [i1, i2] = normalization_integrals(psi1, psi2, state, tau, params);
  const double len = g.length();
  // Rows: mass-weighted mean of the potentials, and the omega-weighted
  // chemical potential balance.
  Eigen::Matrix2d a;
  a << state.rho1 * len / params.m1, state.rho2 * len / params.m2,
      weight / (params.m1 * tau), -weight / (params.m2 * tau);
  const Eigen::Vector2d sol = a.fullPivLu().solve(Eigen::Vector2d(-i1, -i2));
  return {sol(0), sol(1)};
}

std::pair<Profile, Profile> normalize_potentials(const Profile& psi1, const Profile& psi2,
                                                 const MixtureState& state, double tau,
                                                 const ModelParams& params) {
  const auto [a1, a2] = normalization_constants(psi1, psi2, state, tau, params);
  std::vector<double> p1(psi1.size()), p2(psi2.size());
  for (std::size_t k = 0; k < p1.size(); ++k) {
    p1[k] = psi1[k] + a1;
    p2[k] = psi2[k] + a2;
  }
  return {Profile(psi1.grid(), std::move(p1)), Profile(psi2.grid(), std::move(p2))};
}

namespace {

void fill_record(JkoStepRecord& rec, const Evaluation& e, const MixtureState& target,
                 double tau, const ModelParams& params) {
  const Grid1D& g = rec.state.c1.grid();
  const std::size_t n = g.size();
  rec.w1_sq = e.t1.w2sq;
  rec.w2_sq = e.t2.w2sq;
  rec.w_step_sq = e.w_sq;
  rec.objective = e.value;
  rec.energy = energy_E1(rec.state.c1, params);
  rec.entropy = entropy_H(rec.state, params);
  (void)target;

  Profile psi1 = e.t1.psi_mean;
  Profile psi2 = e.t2.psi_mean;
  const double len = g.length();
  try {
    std::tie(psi1, psi2) = normalize_potentials(psi1, psi2, rec.state, tau, params);
    rec.flags.q_available = true;
  } catch (const NumericalError&) {
    // Only the first condition can be imposed; use a common shift.
    const auto [i1, i2] = normalization_integrals(psi1, psi2, rec.state, tau, params);
    (void)i2;
    const double a = -i1 / (len * (rec.state.rho1 / params.m1 + rec.state.rho2 / params.m2));
    std::vector<double> p1(n), p2(n);
    for (std::size_t k = 0; k < n; ++k) {
      p1[k] = psi1[k] + a;
      p2[k] = psi2[k] + a;
    }
    psi1 = Profile(g, std::move(p1));
    psi2 = Profile(g, std::move(p2));
    rec.flags.degenerate_normalization = params.model.supports_q();
    rec.flags.q_available = false;
  }
  const auto [r1, r2] = normalization_integrals(psi1, psi2, rec.state, tau, params);
  rec.normalization_residual1 = r1;
  rec.normalization_residual2 = r2;

  std::vector<double> mu1(n), mu2(n), q1(n, 0.0), q2(n, 0.0), mubar(n);
  double psi_form = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double c1 = rec.state.c1[k];
    const double c2 = rec.state.c2[k];
    mu1[k] = psi1[k] / (params.m1 * tau);
    mu2[k] = psi2[k] / (params.m2 * tau);
    mubar[k] = c1 * mu1[k] + c2 * mu2[k];
    if (params.model.supports_q()) {
      const double w1 = params.model.omega(c1);
      const double w2 = params.model.omega(c2);
      q1[k] = w1 * mu1[k];
      q2[k] = w2 * mu2[k];
      psi_form += (psi2[k] - psi1[k] - params.chi * (c1 - 0.5)) * w1 * w2;
    }
  }
  rec.normalization_residual_psi_form = g.h() * psi_form;
  rec.psi1 = std::move(psi1);
  rec.psi2 = std::move(psi2);
  rec.mu1 = Profile(g, std::move(mu1));
  rec.mu2 = Profile(g, std::move(mu2));
  rec.q1 = Profile(g, std::move(q1));
  rec.q2 = Profile(g, std::move(q2));
  rec.mubar = Profile(g, std::move(mubar));
}

JkoStepRecord empty_record(const MixtureState& s) {
  const Profile z = Profile::constant(s.c1.grid(), 0.0);
  JkoStepRecord rec;
  rec.state = s;
  rec.psi1 = rec.psi2 = rec.mu1 = rec.mu2 = rec.q1 = rec.q2 = rec.mubar = z;
  return rec;
}

}  // namespace

JkoStepRecord jko_step(const MixtureState& prev, const JkoConfig& cfg, const ModelParams& params) {
  cfg.validate();
  params.validate();
  const double delta = cfg.effective_delta();
  const double tau = cfg.tau;
  const MixtureState target = regularize_delta(prev, delta);
  const Grid1D& g = prev.c1.grid();
  const double h = g.h();

  ClampCounter clamps;
  StepProblem problem(target, tau, params, &clamps);

  std::vector<double> start(prev.c1.values().begin(), prev.c1.values().end());
  const Evaluation at_prev = problem.evaluate(start);
  Evaluation cur = at_prev;
  Stationarity st = stationarity(cur.c, cur.grad, h);

  int iters = 0;
  bool converged = st.residual <= cfg.inner_tol;
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxShrink = 60;

  auto line_search = [&](const std::vector<double>& dir) -> std::optional<Evaluation> {
    double alpha = 1.0;
    for (int s = 0; s < kMaxShrink; ++s, alpha *= cfg.step_shrink) {
      std::vector<double> z(cur.c.size());
      for (std::size_t k = 0; k < z.size(); ++k) z[k] = cur.c[k] + alpha * dir[k];
      std::vector<double> trial = project_box_mean(z, prev.rho1);
      if (trial == cur.c) break;
      const double slope = directional(cur.grad, cur.c, trial, h);
      Evaluation e = problem.evaluate(std::move(trial));
      if (e.value <= cur.value + kArmijo * slope) return e;
      // Near the optimum the decrease drops below the rounding of the
      // objective; accept if the value is flat and stationarity improves.
      if (std::abs(e.value - cur.value) <= 1e-14 * (1.0 + std::abs(cur.value))) {
        const Stationarity es = stationarity(e.c, e.grad, h);
        if (es.residual < st.residual) return e;
      }
    }
    return std::nullopt;
  };

  while (!converged && iters < cfg.inner_max_iter) {
    ++iters;
    std::optional<Evaluation> next;
    if (auto dir = newton_direction(problem.hessian(cur), cur.grad, st.active)) {
      next = line_search(*dir);
    }
    if (!next) {
      std::vector<double> dir(cur.grad.size(), 0.0);
      for (std::size_t k = 0; k < dir.size(); ++k) {
        if (!st.active[k]) dir[k] = -(cur.grad[k] - st.multiplier);
      }
      next = line_search(dir);
    }
    if (!next) break;
    cur = std::move(*next);
    st = stationarity(cur.c, cur.grad, h);
    converged = st.residual <= cfg.inner_tol;
  }

  const bool stagnated = cur.value > at_prev.value;
  const Evaluation& fin = stagnated ? at_prev : cur;
  const Stationarity fst = stagnated ? stationarity(fin.c, fin.grad, h) : st;

  JkoStepRecord rec = empty_record(
      stagnated ? prev : MixtureState::from_c1(Profile(g, fin.c), prev.rho1));
  rec.delta = delta;
  rec.inner_iters = iters;
  rec.optimality_residual = fst.residual;
  rec.multiplier = fst.multiplier;
  rec.objective_prev = at_prev.value;
  rec.w_reg_sq = metric_d_sq(prev, target, {params.m1, params.m2});
  rec.flags.converged = fst.residual <= cfg.inner_tol;
  rec.flags.stagnated = stagnated;
  fill_record(rec, fin, target, tau, params);
  rec.clamp_count = clamps.events;
  return rec;
}

JkoStepRecord reconstruct_step(const MixtureState& prev, const MixtureState& cur,
                               const JkoConfig& cfg, const ModelParams& params) {
  const double delta = cfg.effective_delta();
  const MixtureState target = regularize_delta(prev, delta);
  const double h = prev.c1.grid().h();
  StepProblem problem(target, cfg.tau, params, nullptr);
  std::vector<double> start(prev.c1.values().begin(), prev.c1.values().end());
  const Evaluation at_prev = problem.evaluate(std::move(start));
  std::vector<double> c(cur.c1.values().begin(), cur.c1.values().end());
  const Evaluation fin = problem.evaluate(std::move(c));
  const Stationarity st = stationarity(fin.c, fin.grad, h);
  JkoStepRecord rec = empty_record(cur);
  rec.delta = delta;
  rec.optimality_residual = st.residual;
  rec.multiplier = st.multiplier;
  rec.objective_prev = at_prev.value;
  rec.w_reg_sq = metric_d_sq(prev, target, {params.m1, params.m2});
  rec.flags.converged = st.residual <= cfg.inner_tol;
  fill_record(rec, fin, target, cfg.tau, params);
  return rec;
}

Trajectory run_trajectory(const MixtureState& initial, const JkoConfig& cfg,
                          const ModelParams& params, int n_steps) {
  Trajectory tr{initial, energy_E1(initial.c1, params), entropy_H(initial, params), cfg, params,
                {}};
  tr.steps.reserve(static_cast<std::size_t>(std::max(n_steps, 0)));
  for (int n = 0; n < n_steps; ++n) {
    tr.steps.push_back(jko_step(tr.state(static_cast<std::size_t>(n)), cfg, params));
  }
  return tr;
}

}  // namespace demix
