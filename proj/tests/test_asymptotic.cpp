#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ffr/asymptotic.hpp"
#include "oracles.hpp"

using namespace ffr;

namespace {

NetworkScenario base()
{
    NetworkScenario s;
    s.geometry = SectorGeometry(1000.0, 1.0);
    return s;
}

LimitModel model() { return LimitModel::from_scenario(base()); }

double rbar_bits(double b) { return b * kLn2; }

// One solved symmetric problem shared by several tests (about 5 s).
const AsymptoticSolution& reference()
{
    static const AsymptoticSolution sol = algorithm4(AsymptoticProfile::uniform(rbar_bits(1.0)), model(), 0.5, {});
    return sol;
}

// Independent quadrature of the four integrals: midpoint-free Gauss panels of fixed width,
// curve located by bisection on W.
LimitValues brute_integrals(const Theta& th, double rbar, const LimitModel& m, int xpanels, int ypanels)
{
    const SectorGeometry& g = m.geometry();
    std::vector<double> gx, gw;
    oracle::gauss_legendre(8, gx, gw);
    LimitValues v;
    const double nv = m.noise_var();
    const double D = g.radius, xe = kSqrt3 * g.epsilon;
    // x pieces: [-D,-xe], [-xe,0], [0,xe], [xe,D]; the first and last are split uniformly
    std::vector<std::pair<double, double>> pieces;
    for (int i = 0; i < xpanels; ++i) {
        double a = xe + (D - xe) * std::pow(double(i) / xpanels, 2.0), b = xe + (D - xe) * std::pow(double(i + 1) / xpanels, 2.0);
        pieces.push_back({a, b});
        pieces.push_back({-b, -a});
    }
    pieces.push_back({0.0, xe});
    pieces.push_back({-xe, 0.0});
    for (auto [xa, xb] : pieces)
        for (std::size_t i = 0; i < gx.size(); ++i) {
            double x = 0.5 * (xa + xb) + 0.5 * (xb - xa) * gx[i];
            double wx = 0.5 * (xb - xa) * gw[i] / g.area();
            double lo = g.lower(x), hi = g.upper(x);
            double d;
            auto w = [&](double y) { return pivot_criterion(th, x, y, m); };
            if (w(lo) < 0.0) d = lo;
            else if (w(hi) > 0.0) d = hi;
            else {
                double l = lo, r = hi;
                for (int it = 0; it < 200 && r - l > 1e-13 * D; ++it) {
                    double mid = 0.5 * (l + r);
                    (w(mid) > 0.0 ? l : r) = mid;
                }
                d = 0.5 * (l + r);
            }
            auto inner = [&](double a, double b, bool band1) {
                if (!(b > a)) return;
                for (int p = 0; p < ypanels; ++p) {
                    // quadratic spacing toward the station side
                    double ya = a + (b - a) * std::pow(double(p) / ypanels, 2.0);
                    double yb = a + (b - a) * std::pow(double(p + 1) / ypanels, 2.0);
                    for (std::size_t j = 0; j < gx.size(); ++j) {
                        double y = 0.5 * (ya + yb) + 0.5 * (yb - ya) * gx[j];
                        double wy = wx * 0.5 * (yb - ya) * gw[j];
                        ChannelGains ch = m.gains(x, y);
                        if (band1) {
                            double g1 = ginr(ch, nv, th.q_next, th.q_prev);
                            double arg = fading().f_inv(g1 * th.beta1 / (1.0 + th.xi));
                            double el = oracle::closed_expected_log(arg);
                            v.q1 += wy * arg / (g1 * el);
                            v.gamma1 += wy / el;
                        } else {
                            double g2 = ch.direct / nv;
                            double arg = fading().f_inv(g2 * th.beta2);
                            double el = oracle::closed_expected_log(arg);
                            v.q2 += wy * arg / (g2 * el);
                            v.gamma2 += wy / el;
                        }
                    }
                }
            };
            inner(lo, d, true);
            inner(d, hi, false);
        }
    v.q1 *= rbar;
    v.q2 *= rbar;
    v.gamma1 *= rbar;
    v.gamma2 *= rbar;
    return v;
}

Theta solved_theta()
{
    const CellSolution& c = reference().cells[0];
    return c.theta;
}

} // namespace

TEST(Asymptotic, PivotCriterionTrivialBranches)
{
    LimitModel m = model();
    // huge beta2 pushes F(g2 beta2) to 0: W > 0 everywhere, whole line reused
    Theta reuse{1e-18, 1e3, 0.5, 0.5, 0.0};
    // huge beta1 with tiny beta2: W < 0 everywhere, whole line protected
    Theta prot{1e3, 1e-18, 0.5, 0.5, 0.0};
    for (double x : {-900.0, -10.0, 0.0, 300.0, 999.0}) {
        EXPECT_EQ(curve_branch(reuse, x, m), CurveBranch::far_border);
        EXPECT_DOUBLE_EQ(separating_curve(reuse, x, m), m.geometry().upper(x));
        EXPECT_EQ(curve_branch(prot, x, m), CurveBranch::station_border);
        EXPECT_DOUBLE_EQ(separating_curve(prot, x, m), m.geometry().lower(x));
    }
    EXPECT_THROW(separating_curve(reuse, 1001.0, m), domain_error);
}

TEST(Asymptotic, PivotCriterionMatchesDefinition)
{
    LimitModel m = model();
    Theta th{0.7, 1.3, 0.4, 0.9, 0.25};
    const double x = 120.0, y = 400.0;
    ChannelGains ch = m.gains(x, y);
    double g2 = ch.direct / m.noise_var();
    double g1 = ch.direct / (m.noise_var() + ch.cross[0] * th.q_next + ch.cross[1] * th.q_prev);
    double a = g1 / (1.0 + th.xi);
    // F(v) = E[Z / (1 + f^-1(v) Z)]
    auto F = [](double v) {
        double p = fading().f_inv(v);
        return oracle::expectation([p](double z) { return z / (1.0 + p * z); });
    };
    EXPECT_NEAR(pivot_criterion(th, x, y, m) / (a * F(a * th.beta1) - g2 * F(g2 * th.beta2)), 1.0, 1e-8);
}

TEST(Asymptotic, CurveIsZeroOfW)
{
    LimitModel m = model();
    Theta th = solved_theta();
    int interior = 0;
    for (int i = 0; i <= 200; ++i) {
        double x = -1000.0 + 10.0 * i;
        CurveSample cs = separating_curve_sample(th, x, m, 64);
        if (cs.branch != CurveBranch::zero) continue;
        ++interior;
        double h = 1e-6 * 1000.0;
        EXPECT_GT(pivot_criterion(th, x, cs.y - h, m), 0.0) << x;
        EXPECT_LT(pivot_criterion(th, x, cs.y + h, m), 0.0) << x;
    }
    EXPECT_GT(interior, 100);
}

TEST(Asymptotic, SeparationConsistencyOnGrid)
{
    const AsymptoticSolution& s = reference();
    LimitModel m = model();
    const SectorGeometry& g = m.geometry();
    for (int c = 0; c < kCells; ++c) {
        ASSERT_EQ(s.cells[c].mode, CurveMode::theta);
        const Theta& th = s.cells[c].theta;
        int bad = 0, checked = 0;
        for (int i = 0; i < 200; ++i) {
            double x = -g.radius + (i + 0.5) * 2.0 * g.radius / 200;
            double d = separating_curve(th, x, m);
            for (int j = 0; j < 200; ++j) {
                double y = g.lower(x) + (j + 0.5) * (g.upper(x) - g.lower(x)) / 200;
                if (std::fabs(y - d) < 1e-6 * g.radius) continue;
                double w = pivot_criterion(th, x, y, m);
                ++checked;
                if ((y < d && !(w > 0.0)) || (y > d && !(w < 0.0))) ++bad;
            }
        }
        EXPECT_EQ(bad, 0) << "cell " << c;
        EXPECT_GT(checked, 39000);
    }
}

TEST(Asymptotic, IntegralsMatchIndependentQuadrature)
{
    LimitModel m = model();
    const double rbar = rbar_bits(1.0);
    for (Theta th : {solved_theta(), Theta{solved_theta().beta1, solved_theta().beta2, 0.2, 1.1, 0.4}}) {
        LimitValues a = limit_integrals(th, rbar, {}, m);
        LimitValues b = brute_integrals(th, rbar, m, 120, 60);
        EXPECT_NEAR(a.q1 / b.q1, 1.0, 2e-6);
        EXPECT_NEAR(a.q2 / b.q2, 1.0, 2e-6);
        EXPECT_NEAR(a.gamma1 / b.gamma1, 1.0, 2e-6);
        EXPECT_NEAR(a.gamma2 / b.gamma2, 1.0, 2e-6);
    }
}

TEST(Asymptotic, IntegralsMonteCarlo)
{
    LimitModel m = model();
    const SectorGeometry& g = m.geometry();
    Theta th = solved_theta();
    const double rbar = rbar_bits(1.0);
    LimitValues a = limit_integrals(th, rbar, {}, m);
    std::mt19937_64 rng(20);
    std::uniform_real_distribution<double> ux(-g.radius, g.radius), uy(0.0, 2.0 * g.radius / kSqrt3);
    const int n = 200000;
    double s1 = 0.0, ss1 = 0.0, s2 = 0.0, ss2 = 0.0;
    for (int i = 0; i < n;) {
        double x = ux(rng), y = uy(rng);
        if (y < g.lower(x) || y > g.upper(x)) continue;
        ++i;
        ChannelGains ch = m.gains(x, y);
        double v1 = 0.0, v2 = 0.0;
        if (pivot_criterion(th, x, y, m) > 0.0) {
            double g1 = ginr(ch, m.noise_var(), th.q_next, th.q_prev);
            Inversion inv = fading().invert(g1 / (1.0 + th.xi) * th.beta1);
            v1 = rbar / inv.log_term;
        } else {
            Inversion inv = fading().invert(ch.direct / m.noise_var() * th.beta2);
            v2 = rbar / inv.log_term;
        }
        s1 += v1;
        ss1 += v1 * v1;
        s2 += v2;
        ss2 += v2 * v2;
    }
    auto check = [n](double s, double ss, double ref) {
        double mean = s / n, sd = std::sqrt((ss / n - mean * mean) / n);
        EXPECT_LT(std::fabs(mean - ref), 4.0 * sd + 1e-3 * ref);
    };
    check(s1, ss1, a.gamma1);
    check(s2, ss2, a.gamma2);
}

TEST(Asymptotic, DoubledResolutionAgrees)
{
    LimitModel m = model();
    Theta th = solved_theta();
    th.q_prev *= 1.7; // asymmetric: no mirror
    QuadratureSpec fine;
    fine.order = 20;
    fine.max_panel = 0.125;
    fine.branch_samples = 96;
    LimitValues a = limit_integrals(th, 1.0, {}, m);
    LimitValues b = limit_integrals(th, 1.0, {}, m, fine);
    EXPECT_NEAR(a.q1 / b.q1, 1.0, 1e-9);
    EXPECT_NEAR(a.q2 / b.q2, 1.0, 1e-9);
    EXPECT_NEAR(a.gamma1 / b.gamma1, 1.0, 1e-9);
    EXPECT_NEAR(a.gamma2 / b.gamma2, 1.0, 1e-9);
}

TEST(Asymptotic, MirrorMatchesFullSector)
{
    LimitModel m = model();
    Theta th = solved_theta();
    QuadratureSpec full;
    full.use_mirror = false;
    LimitValues a = limit_integrals(th, 1.0, {}, m);
    LimitValues b = limit_integrals(th, 1.0, {}, m, full);
    EXPECT_NEAR(a.q1 / b.q1, 1.0, 1e-10);
    EXPECT_NEAR(a.gamma2 / b.gamma2, 1.0, 1e-10);
}

TEST(Asymptotic, DensityArgumentIsHonoured)
{
    LimitModel m = model();
    Theta th = solved_theta();
    const double area = m.geometry().area();
    Density flat = [area](double, double) { return 1.0 / area; };
    LimitValues a = limit_integrals(th, 1.0, {}, m);
    LimitValues b = limit_integrals(th, 1.0, flat, m);
    EXPECT_NEAR(a.q1 / b.q1, 1.0, 1e-10);
    // all mass on x > 0: same values while theta is even in x, different once it is not
    Density right = [area](double x, double) { return x > 0.0 ? 2.0 / area : 0.0; };
    LimitValues r = limit_integrals(th, 1.0, right, m);
    EXPECT_NEAR(r.q1 / a.q1, 1.0, 1e-8);
    Theta skew = th;
    skew.q_next *= 3.0;
    LimitValues u = limit_integrals(skew, 1.0, {}, m);
    LimitValues v = limit_integrals(skew, 1.0, right, m);
    EXPECT_GT(std::fabs(v.q1 / u.q1 - 1.0), 1e-3);
}

TEST(Asymptotic, BorderModes)
{
    LimitModel m = model();
    Theta th{0.5, 0.5, 0.3, 0.3, 0.0};
    LimitValues p = limit_integrals(th, 1.0, {}, m, {}, CurveMode::all_band2);
    EXPECT_EQ(p.q1, 0.0);
    EXPECT_EQ(p.gamma1, 0.0);
    EXPECT_GT(p.q2, 0.0);
    LimitValues r = limit_integrals(th, 1.0, {}, m, {}, CurveMode::all_band1);
    EXPECT_EQ(r.q2, 0.0);
    EXPECT_GT(r.gamma1, 0.0);
    EXPECT_EQ(limit_integrals(th, 0.0, {}, m).q1, 0.0);
    EXPECT_THROW(limit_integrals(th, -1.0, {}, m), domain_error);
}

TEST(Asymptotic, GammaMonotoneInMultipliers)
{
    LimitSystem sys(model(), AsymptoticProfile::uniform(rbar_bits(1.0)), 0.5);
    Theta th = solved_theta();
    LimitValues v = sys.values(0, th);
    ASSERT_GT(v.gamma1, 0.0);
    ASSERT_GT(v.gamma2, 0.0);
    Theta t1 = th;
    t1.beta1 *= 1.2;
    Theta t2 = th;
    t2.beta2 *= 1.2;
    Theta tx = th;
    tx.xi = 1.5 * th.xi + 0.1;
    EXPECT_LT(sys.values(0, t1).gamma1, v.gamma1);
    EXPECT_GT(sys.values(0, t2).gamma1, v.gamma1);
    EXPECT_LT(sys.values(0, tx).q1, v.q1);
}

TEST(Asymptotic, FreeSolveResiduals)
{
    LimitSystem sys(model(), AsymptoticProfile::uniform(rbar_bits(1.0)), 0.5);
    CellSolution s = sys.solve_free(0, 0.6, 0.9);
    ASSERT_TRUE(s.ok()) << s.message;
    EXPECT_EQ(s.theta.xi, 0.0);
    EXPECT_NEAR(s.values.gamma1, 0.5, 1e-8);
    EXPECT_NEAR(s.values.gamma2, 0.5 / 3.0, 1e-8);
    EXPECT_LE(s.residual, 1e-6);
}

TEST(Asymptotic, TargetedSolveHitsQ1)
{
    LimitSystem sys(model(), AsymptoticProfile::uniform(rbar_bits(1.0)), 0.5);
    CellSolution f = sys.solve_free(1, 0.5, 0.5);
    ASSERT_TRUE(f.ok());
    double prev_xi = 0.0;
    for (double frac : {0.8, 0.4, 0.1}) {
        CellSolution s = sys.solve_for_q1(1, frac * f.values.q1, 0.5, 0.5);
        ASSERT_TRUE(s.ok()) << s.message;
        EXPECT_NEAR(s.values.q1 / (frac * f.values.q1), 1.0, 1e-6);
        EXPECT_NEAR(s.values.gamma1, 0.5, 1e-6);
        EXPECT_NEAR(s.values.gamma2, 0.5 / 3.0, 1e-6);
        EXPECT_GT(s.theta.xi, prev_xi); // tighter cap, larger multiplier
        prev_xi = s.theta.xi;
    }
    // above the free power: no solution
    EXPECT_EQ(sys.solve_for_q1(1, 1.5 * f.values.q1, 0.5, 0.5).status, SolveStatus::no_solution);
    // zero target: the whole sector is protected
    CellSolution z = sys.solve_for_q1(1, 0.0, 0.5, 0.5);
    ASSERT_TRUE(z.ok());
    EXPECT_EQ(z.mode, CurveMode::all_band2);
}

TEST(Asymptotic, Algorithm4SymmetricSolution)
{
    const AsymptoticSolution& s = reference();
    EXPECT_LE(s.max_residual, 1e-6);
    EXPECT_TRUE(std::isfinite(s.q_total));
    for (int c = 1; c < kCells; ++c) {
        EXPECT_DOUBLE_EQ(s.q1[c], s.q1[0]);
        EXPECT_DOUBLE_EQ(s.q2[c], s.q2[0]);
        EXPECT_DOUBLE_EQ(s.cells[c].theta.beta1, s.cells[0].theta.beta1);
    }
    // the returned point is no worse than any probe and the all-protected candidate
    for (const GridPoint& p : s.probes) EXPECT_GE(p.q_total, s.q_total * (1.0 - 1e-12));
    LimitSystem sys(model(), AsymptoticProfile::uniform(rbar_bits(1.0)), 0.5);
    EXPECT_LE(s.q_total, 3.0 * sys.all_protected(0).power());
    // each cell is solved for the power the others assume
    for (int c = 0; c < kCells; ++c) {
        auto nb = neighbors(c);
        EXPECT_NEAR(s.cells[c].theta.q_next / s.q1[nb[0]], 1.0, 1e-6);
        EXPECT_NEAR(s.cells[c].theta.q_prev / s.q1[nb[1]], 1.0, 1e-6);
    }
    // the tabulated curve follows the solved theta
    LimitModel m = model();
    for (double x : {-700.0, -33.0, 0.0, 250.0, 810.0})
        EXPECT_NEAR(s.curves[0](x), separating_curve(s.cells[0].theta, x, m), 2.0);
}

TEST(Asymptotic, DiagonalSearchNotWorseThanCoarseGrid)
{
    Algorithm4Options o;
    o.solver.quad.order = 7;
    o.solver.quad.branch_samples = 24;
    AsymptoticSolution diag = algorithm4(AsymptoticProfile::uniform(rbar_bits(1.0)), model(), 0.5, o);
    o.force_full_grid = true;
    o.full_grid_points = 3;
    AsymptoticSolution full = algorithm4(AsymptoticProfile::uniform(rbar_bits(1.0)), model(), 0.5, o);
    EXPECT_EQ(full.search, "grid");
    EXPECT_LE(diag.q_total, full.q_total * (1.0 + 1e-9));
    // same model at reduced quadrature stays close to the reference
    EXPECT_NEAR(diag.q_total / reference().q_total, 1.0, 1e-4);
}

TEST(Asymptotic, ZeroRatesGiveZeroPower)
{
    AsymptoticSolution s = algorithm4(AsymptoticProfile::uniform(0.0), model(), 0.5, {});
    EXPECT_EQ(s.q_total, 0.0);
}

TEST(Asymptotic, AlphaEndpoints)
{
    AsymptoticProfile p = AsymptoticProfile::uniform(rbar_bits(0.5));
    AsymptoticSolution a0 = algorithm4(p, model(), 0.0, {});
    LimitSystem sys(model(), p, 0.0);
    EXPECT_NEAR(a0.q_total / (3.0 * sys.all_protected(0).power()), 1.0, 1e-12);
    for (int c = 0; c < kCells; ++c) EXPECT_EQ(a0.q1[c], 0.0);
    AsymptoticSolution a1 = algorithm4(p, model(), 1.0, {});
    for (int c = 0; c < kCells; ++c) {
        EXPECT_EQ(a1.q2[c], 0.0);
        EXPECT_EQ(a1.cells[c].mode, CurveMode::all_band1);
    }
    EXPECT_TRUE(std::isfinite(a1.q_total));
    EXPECT_THROW(algorithm4(AsymptoticProfile::uniform(rbar_bits(1.5)), model(), 1.0, {}), infeasible_error);
}

TEST(Asymptotic, Deterministic)
{
    Algorithm4Options o;
    o.solver.quad.order = 7;
    o.grid_points = 6;
    auto p = AsymptoticProfile::uniform(rbar_bits(0.5));
    AsymptoticSolution a = algorithm4(p, model(), 0.6, o);
    AsymptoticSolution b = algorithm4(p, model(), 0.6, o);
    EXPECT_EQ(a.q_total, b.q_total);
    EXPECT_EQ(a.curves[2].d, b.curves[2].d);
}

TEST(Asymptotic, OptimalAlphaIsArgmin)
{
    Algorithm4Options o;
    o.solver.quad.order = 7;
    o.grid_points = 6;
    AlphaTable t = optimal_alpha(AsymptoticProfile::uniform(rbar_bits(1.0)), model(), {0.0, 0.3, 0.5, 0.7}, o);
    ASSERT_EQ(t.q_total.size(), 4u);
    for (double q : t.q_total) EXPECT_LE(t.q_total[t.best], q);
    EXPECT_EQ(t.alpha_opt, t.alpha[t.best]);
    // reusing part of the band beats keeping it all protected here
    EXPECT_GT(t.alpha_opt, 0.0);
}

TEST(Asymptotic, AlphaGridIncludesEndpoints)
{
    auto g = alpha_grid(0.05);
    ASSERT_EQ(g.size(), 21u);
    EXPECT_EQ(g.front(), 0.0);
    EXPECT_EQ(g.back(), 1.0);
    EXPECT_THROW(alpha_grid(0.0), domain_error);
}
