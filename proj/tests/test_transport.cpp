#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "demix/errors.hpp"
#include "demix/transport.hpp"
#include "oracles/lp_oracle.hpp"
#include "oracles/quantile_oracle.hpp"

using namespace demix;

namespace {

// Random nonnegative density; roughly one cell in five is empty.
std::vector<double> random_density(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = (rng() % 5 == 0) ? 0.0 : u(rng);
  if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
  return v;
}

// Pair of equal-mass profiles on [0, L] with n cells.
std::pair<Profile, Profile> random_pair(std::size_t n, double L, std::mt19937_64& rng) {
  Grid1D g(L, n);
  auto a = random_density(n, rng), b = random_density(n, rng);
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    ma += a[k];
    mb += b[k];
  }
  for (auto& x : b) x *= ma / mb;
  return {Profile(g, a), Profile(g, b)};
}

std::vector<double> vals(const Profile& p) { return {p.values().begin(), p.values().end()}; }

MixtureState random_state(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return MixtureState::from_c1(Profile(Grid1D(1.0, n), v));
}

}  // namespace

TEST(Wasserstein, IdenticalDensities) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    auto [a, b] = random_pair(12, 1.0, rng);
    auto r = wasserstein_1d(a, a);
    EXPECT_NEAR(r.w2sq, 0.0, 1e-15);
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a[k] > 0) EXPECT_NEAR(r.map[k], a.grid().center(k), 1e-12);
  }
  Grid1D g(1.0, 10);
  auto r = wasserstein_1d(Profile::constant(g, 0.4), Profile::constant(g, 0.4));
  for (double x : r.psi.values()) EXPECT_NEAR(x, 0.0, 1e-15);
}

TEST(Wasserstein, Translation) {
  Grid1D g(1.0, 16);
  std::vector<double> a(16, 0.0), b(16, 0.0);
  for (std::size_t k = 0; k < 8; ++k) {
    a[k] = 1.0;
    b[k + 8] = 1.0;
  }
  auto r = wasserstein_1d(Profile(g, a), Profile(g, b));
  EXPECT_NEAR(r.w2sq, 0.125, 1e-15);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(r.map[k], g.center(k) + 0.5, 1e-14);
}

TEST(Wasserstein, RejectsBadInput) {
  Grid1D g(1.0, 4);
  EXPECT_THROW(wasserstein_1d(Profile(g, {1, 1, 1, 1}), Profile(g, {1, 1, 1, 2})), NumericalError);
  EXPECT_THROW(wasserstein_1d(Profile(g, {1, 1, 1, -1}), Profile(g, {1, 1, 0, 0})), NumericalError);
  EXPECT_THROW(wasserstein_1d(Profile(g, {0, 0, 0, 0}), Profile(g, {0, 0, 0, 0})), NumericalError);
  EXPECT_THROW(wasserstein_1d(Profile(g, {1, 1, 1, 1}), Profile(Grid1D(1.0, 5), {1, 1, 1, 1, 0})),
               NumericalError);
}

TEST(Wasserstein, MatchesQuantileOracleAndLp) {
  std::mt19937_64 rng(2024);
  for (std::size_t n : {2u, 3u, 8u, 16u}) {
    for (int t = 0; t < 15; ++t) {
      const double L = 0.5 + (rng() % 4) * 0.5;
      auto [a, b] = random_pair(n, L, rng);
      const double w = wasserstein_1d(a, b).w2sq;
      const double q = static_cast<double>(oracle::quantile_w2sq(vals(a), vals(b), L));
      EXPECT_NEAR(w, q, 1e-12) << "n=" << n;

      const double h = a.grid().h();
      std::vector<double> ma(n), mb(n);
      for (std::size_t k = 0; k < n; ++k) {
        ma[k] = h * a[k];
        mb[k] = h * b[k];
      }
      const auto x = a.grid().centers();
      const double lp = static_cast<double>(oracle::kantorovich_lp(x, ma, x, mb));
      const double e = h * std::sqrt(a.mass() / 3.0);
      EXPECT_LE(std::abs(w - lp), e * (2 * std::sqrt(w) + e) + 1e-12) << "n=" << n;
    }
  }
}

TEST(Wasserstein, DualFeasibilityAndGap) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    auto [a, b] = random_pair(20, 1.0, rng);
    auto r = wasserstein_1d(a, b);
    const double monge = monge_cost(a, r);
    EXPECT_NEAR(monge, r.w2sq, 2e-9 * (1 + r.w2sq));
    const double dual = dual_objective(a, b, r);
    EXPECT_LE(std::abs(monge / 2 - dual), 1e-8 * (1 + monge));
    const auto x = a.grid().centers();
    for (std::size_t i = 0; i < 20; ++i) {
      if (a[i] == 0) continue;
      for (std::size_t j = 0; j < 20; ++j) {
        if (b[j] == 0) continue;
        EXPECT_GE(0.5 * (x[i] - x[j]) * (x[i] - x[j]) - r.psi[i] - r.phi[j], -1e-9);
      }
    }
  }
}

TEST(Wasserstein, PushForwardReproducesTarget) {
  // Each coupling segment moves mass ds from [x_a, x_b] to [y_a, y_b]
  // uniformly; binning it must reproduce both densities.
  std::mt19937_64 rng(31);
  for (std::size_t n : {16u, 64u, 256u}) {
    auto [a, b] = random_pair(n, 1.0, rng);
    auto r = wasserstein_1d(a, b);
    const double h = a.grid().h();
    std::vector<double> src_bins(n, 0.0), dst_bins(n, 0.0);
    auto spread = [&](std::vector<double>& bins, double lo, double hi, double mass) {
      if (mass == 0.0) return;
      if (hi - lo <= 0.0) {
        bins[std::min<std::size_t>(n - 1, static_cast<std::size_t>(lo / h))] += mass;
        return;
      }
      for (std::size_t k = static_cast<std::size_t>(lo / h); k < n && k * h < hi; ++k) {
        const double ov = std::min(hi, (k + 1) * h) - std::max(lo, k * h);
        if (ov > 0) bins[k] += mass * ov / (hi - lo);
      }
    };
    for (std::size_t i = 1; i < r.path.size(); ++i) {
      const auto& p = r.path[i - 1];
      const auto& q = r.path[i];
      const double ds = q.s - p.s;
      EXPECT_GE(ds, 0.0);
      EXPECT_GE(q.x, p.x - 1e-15);
      EXPECT_GE(q.y, p.y - 1e-15);
      spread(src_bins, p.x, q.x, ds);
      spread(dst_bins, p.y, q.y, ds);
    }
    double e_src = 0.0, e_dst = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      e_src += std::abs(src_bins[k] - h * a[k]);
      e_dst += std::abs(dst_bins[k] - h * b[k]);
    }
    EXPECT_LE(e_src, 1e-8);
    EXPECT_LE(e_dst, 1e-8);
    for (std::size_t k = 1; k < n; ++k) EXPECT_GE(r.map[k], r.map[k - 1] - 1e-14);
  }
}

TEST(Wasserstein, MassScaling) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    auto [a, b] = random_pair(10, 1.0, rng);
    const double w = wasserstein_1d(a, b).w2sq;
    for (double s : {0.1, 3.0}) {
      std::vector<double> sa(10), sb(10);
      for (std::size_t k = 0; k < 10; ++k) {
        sa[k] = s * a[k];
        sb[k] = s * b[k];
      }
      EXPECT_NEAR(wasserstein_1d(Profile(a.grid(), sa), Profile(a.grid(), sb)).w2sq, s * w,
                  1e-12 * (1 + s * w));
    }
  }
}

TEST(Wasserstein, PotentialDerivativeIsDisplacement) {
  // psi' = x - T(x) at the faces.
  std::mt19937_64 rng(12);
  std::vector<double> fa(32), fb(32);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (std::size_t k = 0; k < 32; ++k) {
    fa[k] = u(rng);
    fb[k] = u(rng);
  }
  double ma = 0, mb = 0;
  for (std::size_t k = 0; k < 32; ++k) {
    ma += fa[k];
    mb += fb[k];
  }
  for (auto& x : fb) x *= ma / mb;
  Grid1D g(1.0, 32);
  auto r = wasserstein_1d(Profile(g, fa), Profile(g, fb));
  for (std::size_t i = 1; i < 32; ++i) {
    const double slope = (r.psi_faces[i + 1] - r.psi_faces[i - 1]) / (2 * g.h());
    const double disp = g.face(i) - r.map_faces[i];
    EXPECT_NEAR(slope, disp, 2 * g.h());
  }
  EXPECT_EQ(r.psi_faces[0], 0.0);
}

TEST(Metric, Basics) {
  std::mt19937_64 rng(41);
  MixtureState a = random_state(12, rng), b = random_state(12, rng);
  // Equal means are needed for a finite distance.
  b = MixtureState::from_c1(
      Profile(b.c1.grid(), [&] {
        std::vector<double> v(12);
        for (std::size_t k = 0; k < 12; ++k) v[k] = 0.5 * b.c1[k] + 0.5 * a.rho1;
        double m = 0;
        for (double x : v) m += x / 12;
        for (auto& x : v) x += a.rho1 - m;
        return v;
      }()),
      a.rho1);
  EXPECT_EQ(metric_d_sq(a, a, {}), 0.0);
  const double w1 = wasserstein_1d(a.c1, b.c1).w2sq, w2 = wasserstein_1d(a.c2, b.c2).w2sq;
  EXPECT_DOUBLE_EQ(metric_d_sq(a, b, {1.0, 1.0}), w1 + w2);
  EXPECT_DOUBLE_EQ(metric_d_sq(a, b, {2.0, 1.0}), w1 / 2 + w2);
}

TEST(Metric, TriangleInequality) {
  std::mt19937_64 rng(43);
  const std::size_t n = 10;
  auto project_mean = [&](std::vector<double> v, double rho) {
    for (int it = 0; it < 100; ++it) {
      double m = 0;
      for (double x : v) m += x / n;
      for (auto& x : v) x = std::clamp(x + rho - m, 0.0, 1.0);
    }
    return MixtureState::from_c1(Profile(Grid1D(1.0, n), v), rho);
  };
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> va(n), vb(n), vc(n);
    for (std::size_t k = 0; k < n; ++k) {
      va[k] = u(rng);
      vb[k] = u(rng);
      vc[k] = u(rng);
    }
    MixtureState a = project_mean(va, 0.5), b = project_mean(vb, 0.5), c = project_mean(vc, 0.5);
    MetricParams mp{1.3, 0.7};
    const double ab = std::sqrt(metric_d_sq(a, b, mp)), bc = std::sqrt(metric_d_sq(b, c, mp)),
                 ac = std::sqrt(metric_d_sq(a, c, mp));
    EXPECT_GE(ab + bc - ac, -1e-9);
  }
}

TEST(Regularize, Arithmetic) {
  Grid1D g(1.0, 2);
  MixtureState s = MixtureState::from_c1(Profile(g, {0.0, 1.0}));
  EXPECT_DOUBLE_EQ(s.rho1, 0.5);
  auto r = regularize_delta(s, 0.1);
  EXPECT_DOUBLE_EQ(r.c1[0], 0.05);
  EXPECT_DOUBLE_EQ(r.c1[1], 0.95);
  auto id = regularize_delta(s, 0.0);
  EXPECT_EQ(id.c1[0], 0.0);
  EXPECT_EQ(id.c1[1], 1.0);
  auto full = regularize_delta(s, 1.0);
  EXPECT_EQ(full.c1[0], 0.5);
  EXPECT_EQ(full.c1[1], 0.5);
  EXPECT_THROW(regularize_delta(s, 1.5), std::invalid_argument);
}

TEST(MollifyBound, HoldsOnRandomStates) {
  std::mt19937_64 rng(5);
  Grid1D g(1.0, 32);
  MixtureState cst = MixtureState::from_c1(Profile::constant(g, 0.3));
  auto c = check_mollify_bound(cst, 0.01, {});
  EXPECT_EQ(c.lhs, 0.0);
  EXPECT_TRUE(c.holds);
  std::vector<double> step(32);
  for (std::size_t k = 0; k < 32; ++k) step[k] = k < 16 ? 0.0 : 1.0;
  MixtureState st = MixtureState::from_c1(Profile(g, step));
  EXPECT_TRUE(check_mollify_bound(st, 0.01, {}).holds);
  auto zero = check_mollify_bound(st, 0.0, {});
  EXPECT_EQ(zero.lhs, 0.0);
  EXPECT_EQ(zero.rhs, 0.0);
  EXPECT_TRUE(zero.holds);
  for (int t = 0; t < 20; ++t) {
    MixtureState s = random_state(24, rng);
    for (double d : {1e-4, 1e-3, 1e-2, 1e-1}) {
      auto rep = check_mollify_bound(s, d, {0.5, 2.0});
      EXPECT_TRUE(rep.holds) << rep.lhs << " " << rep.rhs;
      EXPECT_TRUE(rep.proved);
    }
  }
  EXPECT_DOUBLE_EQ(mollify_constant(2.0, 0.25, 0.75, {0.5, 1.0}), 8.0 * (0.5 + 0.75));
}

TEST(W2ToL2, Holds) {
  Grid1D g(1.0, 64);
  const double pi = std::acos(-1.0);
  std::vector<double> a(64), b(64), s1(64), s2(64);
  for (std::size_t k = 0; k < 64; ++k) {
    const double x = g.center(k);
    a[k] = 0.5 + 0.2 * std::cos(pi * x);
    b[k] = 0.5 + 0.21 * std::cos(pi * x) + 0.01 * std::cos(2 * pi * x);
    s1[k] = x < 0.5 ? 0.2 : 0.8;
    s2[k] = x < 0.45 ? 0.2 : (x < 0.55 ? 0.5 : 0.8);
  }
  MixtureState A = MixtureState::from_c1(Profile(g, a)), B = MixtureState::from_c1(Profile(g, b));
  auto same = check_w2_to_l2(A, A, {});
  EXPECT_EQ(same.lhs, 0.0);
  EXPECT_TRUE(same.holds);
  EXPECT_TRUE(check_w2_to_l2(A, B, {}).holds);
  EXPECT_TRUE(check_w2_to_l2(MixtureState::from_c1(Profile(g, s1)),
                             MixtureState::from_c1(Profile(g, s2)), {2.0, 1.0})
                  .holds);
}
