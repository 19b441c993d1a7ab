#include "demix/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace demix {

namespace {

double k_constant(const Trajectory& tr) {
  return mollify_constant(tr.initial.c1.grid().length(), tr.initial.rho1, tr.initial.rho2,
                          {tr.params.m1, tr.params.m2});
}

std::map<std::string, double> base_context(const Trajectory& tr) {
  return {{"tau", tr.cfg.tau},
          {"delta", tr.cfg.effective_delta()},
          {"N", static_cast<double>(tr.initial.c1.size())},
          {"steps", static_cast<double>(tr.steps.size())},
          {"chi", tr.params.chi},
          {"d", static_cast<double>(tr.params.d)},
          {"K", k_constant(tr)}};
}

// Face quadrature of c |grad psi|^2 with the cell weight taken upwind of the
// displacement -grad psi.
double weighted_kinetic(const Profile& c, const Profile& psi) {
  const auto g = gradient(psi);
  const double h = c.grid().h();
  double s = 0.0;
  for (std::size_t i = 1; i + 1 < g.size(); ++i) {
    const double w = g[i] > 0.0 ? c[i] : c[i - 1];
    s += w * g[i] * g[i];
  }
  return h * s;
}

double l2_diff(const MixtureState& a, const MixtureState& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.c1.size(); ++k) {
    const double e1 = a.c1[k] - b.c1[k];
    const double e2 = a.c2[k] - b.c2[k];
    s += e1 * e1 + e2 * e2;
  }
  return std::sqrt(a.c1.grid().h() * s);
}

}  // namespace

EstimateReport check_energy_telescoping(const Trajectory& tr) {
  const double tau = tr.cfg.tau;
  double dissip = 0.0;
  for (const auto& s : tr.steps) dissip += s.w_step_sq / (2.0 * tau);
  const double en = tr.steps.empty() ? tr.initial_energy : tr.steps.back().energy;
  const double k = k_constant(tr);
  const double n = static_cast<double>(tr.steps.size());
  auto rep = make_report("energy_telescoping", en + dissip,
                         tr.initial_energy + 0.5 * k * n * tau, true);
  rep.context = base_context(tr);
  rep.context["E0"] = tr.initial_energy;
  rep.context["dissipation"] = dissip;
  return rep;
}

std::vector<EstimateReport> check_step_energy(const Trajectory& tr) {
  std::vector<EstimateReport> out;
  const double tau = tr.cfg.tau;
  double prev_energy = tr.initial_energy;
  for (std::size_t n = 0; n < tr.steps.size(); ++n) {
    const auto& s = tr.steps[n];
    auto rep = make_report("step_energy", s.energy + s.w_step_sq / (2.0 * tau),
                           prev_energy + s.w_reg_sq / (2.0 * tau), true);
    rep.context = {{"n", static_cast<double>(n + 1)}, {"tau", tau}, {"delta", s.delta}};
    out.push_back(std::move(rep));
    prev_energy = s.energy;
  }
  return out;
}

std::vector<double> kinetic_discrepancy(const Trajectory& tr) {
  std::vector<double> out;
  for (const auto& s : tr.steps) {
    out.push_back(std::abs(weighted_kinetic(s.state.c1, s.psi1) - s.w1_sq));
  }
  return out;
}

EstimateReport check_kinetic_bound(const Trajectory& tr) {
  const double tau = tr.cfg.tau;
  double lhs = 0.0;
  double worst = 0.0;
  for (const auto& s : tr.steps) {
    const double k1 = weighted_kinetic(s.state.c1, s.psi1);
    const double k2 = weighted_kinetic(s.state.c2, s.psi2);
    lhs += tau * (k1 / tr.params.m1 + k2 / tr.params.m2) / (tau * tau);
    worst = std::max({worst, std::abs(k1 - s.w1_sq), std::abs(k2 - s.w2_sq)});
  }
  const double k = k_constant(tr);
  const double delta = tr.cfg.effective_delta();
  const double n = static_cast<double>(tr.steps.size());
  auto rep = make_report("kinetic_bound", lhs, 2.0 * tr.initial_energy + k * delta * n / tau, true);
  rep.context = base_context(tr);
  rep.context["max_step_discrepancy"] = worst;
  return rep;
}

std::vector<EstimateReport> check_entropy_steps(const Trajectory& tr) {
  std::vector<EstimateReport> out;
  const auto& p = tr.params;
  const double tau = tr.cfg.tau;
  const double d = static_cast<double>(p.d);
  const double a = p.model.a_constant();
  const double len = tr.initial.c1.grid().length();
  const Grid1D& g = tr.initial.c1.grid();
  const MixtureState flat{Profile::constant(g, tr.initial.rho1),
                          Profile::constant(g, tr.initial.rho2), tr.initial.rho1,
                          tr.initial.rho2};
  const double k = entropy_H(flat, p);
  double prev_h = tr.initial_entropy;
  for (std::size_t n = 0; n < tr.steps.size(); ++n) {
    const auto& s = tr.steps[n];
    const Profile lap = laplacian(f_profile(s.state.c1, p.model));
    const double lhs = tau * inner(lap, lap);
    const double rhs =
        2.0 * d * (prev_h - s.entropy) + tau * (d * d * p.chi * p.chi * std::pow(a, 4) * len + k);
    auto rep = make_report("entropy_step", lhs, rhs, true);
    rep.context = {{"n", static_cast<double>(n + 1)}, {"a", a}, {"K", k},
                   {"entropy_drop", prev_h - s.entropy}};
    out.push_back(std::move(rep));
    prev_h = s.entropy;
  }
  return out;
}

EstimateReport check_entropy_dissipation(const Trajectory& tr) {
  const auto steps = check_entropy_steps(tr);
  std::size_t ok = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& r : steps) {
    ok += r.holds ? 1 : 0;
    lhs += r.lhs;
    rhs += r.rhs;
    worst_margin = std::min(worst_margin, r.margin);
  }
  // Summed H^2 bound: tau sum ||f(c1)||_{H^2}^2 <= C (1 + N tau), with C fitted.
  const double tau = tr.cfg.tau;
  double h2 = 0.0;
  for (const auto& s : tr.steps) {
    const Profile f = f_profile(s.state.c1, tr.params.model);
    const double n0 = norm(f, NormKind::L2);
    const double n1 = norm(f, NormKind::H1Seminorm);
    const Profile lap = laplacian(f);
    h2 += tau * (n0 * n0 + n1 * n1 + inner(lap, lap));
  }
  const double horizon = tau * static_cast<double>(tr.steps.size());
  auto rep = make_report("entropy_dissipation", lhs, rhs, true);
  rep.holds = ok == steps.size();
  rep.context = base_context(tr);
  rep.context["a"] = tr.params.model.a_constant();
  rep.context["fraction_holding"] =
      steps.empty() ? 1.0 : static_cast<double>(ok) / static_cast<double>(steps.size());
  rep.context["worst_step_margin"] = steps.empty() ? 0.0 : worst_margin;
  rep.context["h2_sum"] = h2;
  rep.context["C"] = h2 / (1.0 + horizon);
  return rep;
}

Profile euler_lagrange_residual(const JkoStepRecord& rec, const ModelParams& params) {
  const Profile fr = frak_F(rec.state.c1, params);
  std::vector<double> r(fr.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double w1 = params.model.omega(rec.state.c1[k]);
    const double w2 = params.model.omega(rec.state.c2[k]);
    r[k] = w2 * rec.q1[k] - w1 * rec.q2[k] - fr[k];
  }
  return Profile(fr.grid(), std::move(r));
}

EstimateReport check_euler_lagrange(const JkoStepRecord& rec, const ModelParams& params,
                                    double inner_tol, double kappa) {
  const double h = rec.state.c1.grid().h();
  if (!rec.flags.q_available) {
    auto rep = make_report("euler_lagrange", 0.0, 0.0, false);
    rep.holds = false;
    rep.note = "q fields unavailable for this step";
    return rep;
  }
  const Profile r = euler_lagrange_residual(rec, params);
  // Same relation with the opposite orientation of the q difference.
  const Profile fr = frak_F(rec.state.c1, params);
  std::vector<double> alt(r.size());
  for (std::size_t k = 0; k < alt.size(); ++k) {
    alt[k] = -(r[k] + fr[k]) - fr[k];
  }
  auto rep = make_report("euler_lagrange", norm(r, NormKind::L2), kappa * (inner_tol + h), false);
  rep.context = {{"inner_tol", inner_tol},
                 {"h", h},
                 {"kappa", kappa},
                 {"optimality_residual", rec.optimality_residual},
                 {"opposite_orientation_residual", norm(Profile(r.grid(), alt), NormKind::L2)},
                 {"psi_form_normalization", rec.normalization_residual_psi_form}};
  return rep;
}

EstimateReport check_q_integrability(const Trajectory& tr) {
  const int d = tr.params.d;
  const double p = d == 1 ? 2.0 : static_cast<double>(d) / (d - 1.0);
  const double tau = tr.cfg.tau;
  double sum = 0.0;
  double flat = 0.0;
  std::size_t missing = 0;
  for (const auto& s : tr.steps) {
    if (!s.flags.q_available) {
      ++missing;
      continue;
    }
    const double a = norm(s.q1, NormKind::Lp, p);
    const double b = norm(s.q2, NormKind::Lp, p);
    sum += tau * (a * a + b * b);
    flat = std::max(flat, std::abs(integral(s.mubar)));
  }
  const double horizon = tau * static_cast<double>(tr.steps.size());
  auto rep = make_report("q_integrability", sum, sum, false);
  rep.context = base_context(tr);
  rep.context["p"] = p;
  rep.context["C"] = sum / (1.0 + horizon);
  rep.context["max_abs_mubar_integral"] = flat;
  rep.context["steps_without_q"] = static_cast<double>(missing);
  if (d == 1) rep.note = "exponent 2 used in one dimension";
  return rep;
}

EstimateReport check_mubar_gradient_decomposition(const JkoStepRecord& rec,
                                                  const ModelParams& params) {
  const Grid1D& g = rec.state.c1.grid();
  const double h = g.h();
  const auto direct = gradient(rec.mubar);
  const auto gmu1 = gradient(rec.mu1);
  const auto gmu2 = gradient(rec.mu2);
  const auto gf = gradient(f_profile(rec.state.c1, params.model));
  const Profile fr = frak_F(rec.state.c1, params);
  double mismatch = 0.0;
  double scale = 0.0;
  for (std::size_t i = 1; i + 1 < direct.size(); ++i) {
    const double c1 = 0.5 * (rec.state.c1[i] + rec.state.c1[i - 1]);
    const double c2 = 0.5 * (rec.state.c2[i] + rec.state.c2[i - 1]);
    const double favg = 0.5 * (fr[i] + fr[i - 1]);
    const double split = gf[i] * favg + c1 * gmu1[i] + c2 * gmu2[i];
    mismatch += std::abs(direct[i] - split);
    scale += std::abs(direct[i]);
  }
  mismatch *= h;
  scale *= h;
  auto rep = make_report("mubar_gradient_decomposition", mismatch, h * (1.0 + scale), false);
  rep.context = {{"h", h}, {"grad_mubar_l1", scale}};
  return rep;
}

double time_bump(double t, double horizon) {
  const double u = 2.0 * t / horizon - 1.0;
  if (!(std::abs(u) < 1.0)) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

EstimateReport check_weak_form_residual(const Trajectory& tr, int mode) {
  const Grid1D& g = tr.initial.c1.grid();
  const auto& p = tr.params;
  const double tau = tr.cfg.tau;
  const double len = g.length();
  const double horizon = tau * static_cast<double>(tr.steps.size());
  const double kx = mode * std::numbers::pi / len;
  const std::size_t n = g.size();
  double total = 0.0;
  double budget = 0.0;
  for (std::size_t step = 1; step <= tr.steps.size(); ++step) {
    const double theta = time_bump(tau * static_cast<double>(step), horizon);
    if (theta == 0.0) continue;
    const auto& rec = tr.steps[step - 1];
    const auto& cur = rec.state;
    const auto& old = tr.state(step - 1);
    double change = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      change += theta * std::cos(kx * g.center(k)) * (cur.c1[k] - old.c1[k]);
    }
    change *= g.h();
    double flux = 0.0;
    if (mode != 0) {
      double cells = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double lap_zeta = -kx * kx * theta * std::cos(kx * g.center(k));
        cells += rec.q1[k] * p.model.alpha(cur.c1[k]) * lap_zeta;
      }
      const auto gf = gradient(f_profile(cur.c1, p.model));
      double faces = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        const double qw = 0.5 * (rec.q1[i] * p.model.omega(cur.c2[i]) +
                                 rec.q1[i - 1] * p.model.omega(cur.c2[i - 1]));
        const double grad_zeta = -kx * theta * std::sin(kx * g.face(i));
        faces += qw * gf[i] * grad_zeta;
      }
      flux = tau * p.m1 * g.h() * (cells + faces);
    }
    total += change + flux;
    const double c2norm = theta * std::max({1.0, kx, kx * kx});
    const double kin = weighted_kinetic(cur.c1, rec.psi1) / (tau * tau);
    budget += tau * tau * (0.5 * c2norm * kin + theta * len);
  }
  auto rep = make_report("weak_form_mode_" + std::to_string(mode), std::abs(total), budget, false);
  rep.context = base_context(tr);
  rep.context["mode"] = mode;
  rep.context["signed_residual"] = total;
  return rep;
}

std::vector<EstimateReport> check_weak_form_modes(const Trajectory& tr, int modes) {
  std::vector<EstimateReport> out;
  for (int j = 1; j <= modes; ++j) out.push_back(check_weak_form_residual(tr, j));
  return out;
}

EstimateReport check_holder_modulus(const Trajectory& tr, std::size_t max_pairs) {
  const std::size_t last = tr.steps.size();
  const double tau = tr.cfg.tau;
  const double k = k_constant(tr);
  const double pref = 2.0 * std::pow(tr.params.m1, 0.25) *
                      std::sqrt(tr.initial_energy + k * static_cast<double>(last) * tau);
  const std::size_t total_pairs = last * (last + 1) / 2;
  const std::size_t stride =
      total_pairs <= max_pairs ? 1 : (total_pairs + max_pairs - 1) / max_pairs;
  std::size_t counter = 0;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_ratio = -1.0;
  double worst_lhs = 0.0;
  double worst_rhs = 0.0;
  for (std::size_t lo = 0; lo < last; ++lo) {
    for (std::size_t hi = lo + 1; hi <= last; ++hi, ++counter) {
      if (counter % stride != 0) continue;
      ++checked;
      const double lhs = l2_diff(tr.state(hi), tr.state(lo));
      const double rhs = pref * std::pow(tau * static_cast<double>(hi - lo), 0.25);
      if (!within_bound(lhs, rhs)) ++violations;
      const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? INFINITY : 0.0);
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        worst_lhs = lhs;
        worst_rhs = rhs;
      }
    }
  }
  auto rep = make_report("holder_modulus", worst_lhs, worst_rhs, true);
  rep.holds = violations == 0;
  rep.context = base_context(tr);
  rep.context["pairs_checked"] = static_cast<double>(checked);
  rep.context["violations"] = static_cast<double>(violations);
  rep.context["worst_ratio"] = std::max(worst_ratio, 0.0);
  return rep;
}

EstimateReport check_invariants(const Trajectory& tr) {
  double sum_dev = 0.0;
  double mean_dev = 0.0;
  for (std::size_t n = 0; n <= tr.steps.size(); ++n) {
    const auto& s = tr.state(n);
    for (std::size_t k = 0; k < s.c1.size(); ++k) {
      sum_dev = std::max(sum_dev, std::abs(s.c1[k] + s.c2[k] - 1.0));
    }
    mean_dev = std::max(mean_dev, std::abs(s.c1.mean() - tr.initial.rho1));
  }
  auto rep = make_report("constraint_and_mass", mean_dev, 1e-10, true);
  rep.holds = rep.holds && sum_dev == 0.0;
  rep.context = {{"max_sum_deviation", sum_dev}, {"max_mean_deviation", mean_dev}};
  return rep;
}

std::vector<EstimateReport> run_all_diagnostics(const Trajectory& tr,
                                                const DiagnosticsOptions& opts) {
  std::vector<EstimateReport> out;
  out.push_back(check_invariants(tr));
  out.push_back(check_energy_telescoping(tr));
  {
    const auto steps = check_step_energy(tr);
    auto agg = make_report("step_energy", 0.0, 0.0, true);
    agg.holds = std::all_of(steps.begin(), steps.end(), [](const auto& r) { return r.holds; });
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& r : steps) {
      if (r.margin < worst) {
        worst = r.margin;
        agg.lhs = r.lhs;
        agg.rhs = r.rhs;
      }
    }
    agg.margin = steps.empty() ? 0.0 : worst;
    agg.context = base_context(tr);
    out.push_back(std::move(agg));
  }
  {
    // Mollification bound at every step: d(c^{n-1}, [c^{n-1}]_delta)^2 <= K delta.
    const double k = k_constant(tr);
    auto agg = make_report("mollify_bound", 0.0, 0.0, true);
    agg.holds = true;
    double worst = -1.0;
    for (const auto& s : tr.steps) {
      const bool ok = within_bound(s.w_reg_sq, k * s.delta);
      agg.holds = agg.holds && ok;
      const double ratio = k * s.delta > 0.0 ? s.w_reg_sq / (k * s.delta) : 0.0;
      if (ratio > worst) {
        worst = ratio;
        agg.lhs = s.w_reg_sq;
        agg.rhs = k * s.delta;
      }
    }
    agg.margin = agg.rhs - agg.lhs;
    agg.context = base_context(tr);
    out.push_back(std::move(agg));
  }
  {
    auto agg = make_report("w2_to_l2", 0.0, 0.0, true);
    agg.holds = true;
    double worst = -1.0;
    for (std::size_t n = 1; n <= tr.steps.size(); ++n) {
      const auto r = check_w2_to_l2(tr.state(n - 1), tr.state(n), {tr.params.m1, tr.params.m2});
      agg.holds = agg.holds && r.holds;
      const double ratio = r.rhs > 0.0 ? r.lhs / r.rhs : 0.0;
      if (ratio > worst) {
        worst = ratio;
        agg.lhs = r.lhs;
        agg.rhs = r.rhs;
      }
    }
    agg.margin = agg.rhs - agg.lhs;
    agg.context = base_context(tr);
    out.push_back(std::move(agg));
  }
  out.push_back(check_kinetic_bound(tr));
  out.push_back(check_entropy_dissipation(tr));
  if (tr.params.model.supports_q()) {
    if (!tr.steps.empty()) {
      out.push_back(check_euler_lagrange(tr.steps.back(), tr.params, tr.cfg.inner_tol,
                                         opts.el_kappa));
      out.push_back(check_mubar_gradient_decomposition(tr.steps.back(), tr.params));
    }
    out.push_back(check_q_integrability(tr));
    for (auto& r : check_weak_form_modes(tr, opts.weak_modes)) out.push_back(std::move(r));
  }
  out.push_back(check_holder_modulus(tr));
  return out;
}

}  // namespace demix
