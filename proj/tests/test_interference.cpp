#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ffr/interference_alloc.hpp"

using namespace ffr;

namespace {

NetworkScenario scenario(double alpha = 0.5)
{
    NetworkScenario s;
    s.geometry = SectorGeometry(1000.0, 1.0);
    s.alpha = alpha;
    return s;
}

// Users of cell c with y below a fraction of the sector height (the near users).
UserSet near_users(const NetworkScenario& s, int count, double sum_bps, std::uint64_t seed, double frac = 0.5)
{
    UserSet all = sample_users(s, count, bits_to_nats_per_hz(sum_bps, s.bandwidth), seed);
    UserSet out;
    for (int c = 0; c < 3; ++c)
        for (const User& u : all[c])
            if (u.pos.y <= s.geometry.lower(u.pos.x) + frac * (s.geometry.upper(u.pos.x) - s.geometry.lower(u.pos.x)))
                out[c].push_back(u);
    return out;
}

} // namespace

TEST(Interference, ZeroInterferenceReducesToSingleBand)
{
    NetworkScenario s = scenario(0.6);
    UserSet u = sample_users(s, 6, 0.3, 4);
    InterferenceProblem p(interference_users(u), s.noise_var(), s.alpha);
    std::vector<BandUser> b;
    for (const User& v : u[0]) b.push_back({v.gains.direct / s.noise_var(), v.rate});
    auto beta = p.solve_beta1(0, 0.0, 0.0);
    auto ref = solve_band_beta(b, 0.6);
    ASSERT_TRUE(beta && ref);
    EXPECT_NEAR(*beta / *ref, 1.0, 1e-12);
    // more interference -> larger beta1
    auto beta_hi = p.solve_beta1(0, 5.0, 0.0);
    EXPECT_GT(*beta_hi, *beta);
}

TEST(Interference, SingleUserClosedForm)
{
    CellUserLists cl;
    ChannelGains g{2e-16, {1e-17, 2e-17}};
    cl[0].push_back({g, 0.1});
    InterferenceProblem p(cl, 1e-16, 0.5);
    double q1 = 0.3, q2 = 0.7;
    double g1 = ginr(g, 1e-16, q1, q2);
    // 0.1 / C(g1 beta) = 0.5  =>  beta = f(EL^-1(0.2)) / g1
    double beta = fading().f(fading().expected_log_inv(0.2)) / g1;
    EXPECT_NEAR(*p.solve_beta1(0, q1, q2) / beta, 1.0, 1e-10);
    EXPECT_EQ(p.cell_power(1, 1.0, 1.0), 0.0);
    EXPECT_FALSE(p.solve_beta1(2, 0.0, 0.0).has_value());
}

TEST(Interference, YatesAxiomsRandomScenarios)
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> uq(0.0, 3.0);
    for (int inst = 0; inst < 100; ++inst) {
        NetworkScenario s = scenario(0.3 + 0.6 * (inst % 7) / 7.0);
        int k = 5 + inst % 21;
        UserSet u = sample_users(s, k, bits_to_nats_per_hz(1e6 + 8e6 * (inst % 5) / 4.0, s.bandwidth), 100 + inst);
        InterferenceProblem p(interference_users(u), s.noise_var(), s.alpha);
        Triple q{uq(rng), uq(rng), uq(rng)};
        Triple iq = p.map(q);
        for (int c = 0; c < 3; ++c) EXPECT_GT(iq[c], 0.0);
        Triple q2 = q;
        q2[inst % 3] += 0.5;
        Triple iq2 = p.map(q2);
        for (int c = 0; c < 3; ++c) EXPECT_GE(iq2[c], iq[c] * (1 - 1e-12));
        for (double t : {1.1, 2.0, 10.0}) {
            Triple qt{t * q[0], t * q[1], t * q[2]};
            Triple it = p.map(qt);
            for (int c = 0; c < 3; ++c) EXPECT_GT(t * iq[c], it[c]) << inst << " t=" << t;
        }
    }
}

TEST(Interference, SymmetricScenarioEqualPowers)
{
    NetworkScenario s = scenario(0.5);
    UserSet u = near_users(s, 20, 4e6, 77);
    u[1] = u[0];
    u[2] = u[0];
    for (int c = 1; c < 3; ++c)
        for (auto& v : u[c]) v.cell = c;
    InterferenceProblem p(interference_users(u), s.noise_var(), s.alpha);
    PingPongResult r = ping_pong(p, {});
    ASSERT_TRUE(r.fixed_point.ok());
    EXPECT_NEAR(r.fixed_point.q[1] / r.fixed_point.q[0], 1.0, 1e-10);
    EXPECT_NEAR(r.fixed_point.q[2] / r.fixed_point.q[0], 1.0, 1e-10);
}

TEST(Interference, ZeroRatesGiveZeroFixedPoint)
{
    NetworkScenario s = scenario(0.5);
    UserSet u = sample_users(s, 5, 0.0, 1);
    InterferenceProblem p(interference_users(u), s.noise_var(), s.alpha);
    PingPongResult r = ping_pong(p, {});
    ASSERT_TRUE(r.fixed_point.ok());
    for (double v : r.fixed_point.q) EXPECT_EQ(v, 0.0);
}

TEST(Interference, FixedPointResidualConstraintsAndUniqueness)
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        NetworkScenario s = scenario(0.5);
        UserSet u = near_users(s, 25, 6e6, seed);
        InterferenceProblem p(interference_users(u), s.noise_var(), s.alpha);
        PingPongOptions opt;
        opt.accuracy = 1e-8;
        PingPongResult r = ping_pong(p, opt);
        ASSERT_TRUE(r.fixed_point.ok()) << r.fixed_point.message;
        Triple q = r.fixed_point.q;
        Triple iq = p.map(q);
        double num = 0, den = 0;
        for (int c = 0; c < 3; ++c) {
            num = std::max(num, std::fabs(q[c] - iq[c]));
            den = std::max(den, q[c]);
        }
        EXPECT_LE(num / den, 1e-10);
        // band sums and rates at the final interference
        for (int c = 0; c < 3; ++c) {
            auto nb = neighbors(c);
            double occ = 0;
            for (std::size_t k = 0; k < u[c].size(); ++k) {
                occ += r.cells[c].share[k];
                double g1 = ginr(u[c][k].gains, s.noise_var(), q[nb[0]], q[nb[1]]);
                double ach = r.cells[c].share[k] * fading().expected_log(g1 * r.cells[c].power[k]);
                EXPECT_GE(ach, u[c][k].rate - 1e-8);
                EXPECT_NEAR(ach, u[c][k].rate, 1e-8);
            }
            EXPECT_NEAR(occ, 0.5, 1e-8);
        }
        // start from above
        PingPongOptions hi = opt;
        hi.initial = Triple{10 * q[0], 10 * q[1], 10 * q[2]};
        PingPongResult r2 = ping_pong(p, hi);
        ASSERT_TRUE(r2.fixed_point.ok());
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(r2.fixed_point.q[c] / q[c], 1.0, 10 * opt.accuracy);
        // trace is exported and starts at zero
        EXPECT_EQ(r.fixed_point.trace.front().iter, 0);
        EXPECT_EQ(int(r.fixed_point.trace.size()), r.fixed_point.iterations + 1);
    }
}

TEST(Interference, InfeasibleLoadDetected)
{
    // every user at the far border with a huge rate in a fully reused band
    NetworkScenario s = scenario(1.0);
    UserSet u;
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 5; ++k) {
            double x = -900 + 450 * k;
            u[c].push_back(s.make_user(c, {x, s.geometry.upper(x) - 1.0}, 3.0));
        }
    InterferenceProblem p(interference_users(u), s.noise_var(), s.alpha);
    PingPongResult r = ping_pong(p, {});
    EXPECT_EQ(r.fixed_point.status, FixedPointStatus::infeasible);
}
