#pragma once

// Finite-K allocation: users below the separating curve of their cell share the
// reused band (ping-pong), users above it get the protected band. Also the
// discrete-subcarrier variant, the full-reuse baseline, an independent audit and
// brute-force oracles for small instances.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "ffr/asymptotic.hpp"
#include "ffr/errors.hpp"
#include "ffr/fading.hpp"
#include "ffr/geometry.hpp"
#include "ffr/interference_alloc.hpp"
#include "ffr/protected_alloc.hpp"
#include "ffr/roots.hpp"

namespace ffr {

using CurveSet = std::array<CurveTable, kCells>;

struct Partition {
    std::array<std::vector<int>, kCells> reused;    ///< K_I: y <= d(x)
    std::array<std::vector<int>, kCells> protected_; ///< K_P
};

inline Partition partition_users(const NetworkScenario& s, const CurveSet& curves)
{
    Partition p;
    for (int c = 0; c < kCells; ++c)
        for (int k = 0; k < int(s.users[c].size()); ++k) {
            const User& u = s.users[c][k];
            if (u.pos.y <= curves[c](u.pos.x)) p.reused[c].push_back(k);
            else p.protected_[c].push_back(k);
        }
    return p;
}

struct UserAllocation {
    double gamma1 = 0.0, gamma2 = 0.0;
    double p1 = 0.0, p2 = 0.0;
    bool flagged = false; ///< lost every subcarrier of a band it needs (discrete case)
};

struct CellAllocation {
    double beta1 = 0.0, beta2 = 0.0;
    double q1 = 0.0, q2 = 0.0;
    bool reused_used = false, protected_used = false;
};

enum class AllocationStatus { ok, infeasible, numeric_failure };

inline const char* to_string(AllocationStatus s)
{
    switch (s) {
    case AllocationStatus::ok: return "ok";
    case AllocationStatus::infeasible: return "infeasible";
    default: return "numeric_failure";
    }
}

struct AllocationResult {
    AllocationStatus status = AllocationStatus::numeric_failure;
    std::string message;
    double alpha = 0.0;
    std::array<std::vector<UserAllocation>, kCells> users;
    std::array<CellAllocation, kCells> cells;
    double total = 0.0;
    int iterations = 0;
    int polish_iterations = 0;
    std::vector<TraceRow> trace;
    int flagged = 0;

    bool feasible() const { return status == AllocationStatus::ok; }
    Triple q1() const { return {cells[0].q1, cells[1].q1, cells[2].q1}; }
};

namespace detail {

inline void sum_up(AllocationResult& r)
{
    r.total = 0.0;
    for (int c = 0; c < kCells; ++c) {
        double a = 0.0, b = 0.0;
        for (const UserAllocation& u : r.users[c]) {
            a += u.gamma1 * u.p1;
            b += u.gamma2 * u.p2;
        }
        r.cells[c].q1 = a;
        r.cells[c].q2 = b;
        r.total += a + b;
    }
}

inline AllocationStatus from_fixed_point(FixedPointStatus s)
{
    return s == FixedPointStatus::infeasible ? AllocationStatus::infeasible : AllocationStatus::numeric_failure;
}

// Ping-pong on the given per-cell index sets, protected allocation on the rest.
inline AllocationResult allocate(const NetworkScenario& s, const Partition& p, const PingPongOptions& opt)
{
    AllocationResult r;
    r.alpha = s.alpha;
    const double nv = s.noise_var();
    for (int c = 0; c < kCells; ++c) r.users[c].assign(s.users[c].size(), UserAllocation{});
    bool any_reused = false;
    for (int c = 0; c < kCells; ++c) any_reused = any_reused || !p.reused[c].empty();
    if (any_reused) {
        if (!(s.alpha > 0.0)) throw domain_error("allocate: reused users but alpha = 0");
        CellUserLists lists;
        for (int c = 0; c < kCells; ++c)
            for (int k : p.reused[c]) lists[c].push_back({s.users[c][k].gains, s.users[c][k].rate});
        InterferenceProblem prob(lists, nv, s.alpha);
        PingPongResult pp = ping_pong(prob, opt);
        r.iterations = pp.fixed_point.iterations;
        r.polish_iterations = pp.fixed_point.polish_iterations;
        r.trace = pp.fixed_point.trace;
        if (!pp.fixed_point.ok()) {
            r.status = from_fixed_point(pp.fixed_point.status);
            r.message = pp.fixed_point.message;
            for (auto& v : r.users) v.clear();
            return r;
        }
        for (int c = 0; c < kCells; ++c) {
            const BandSolution& b = pp.cells[c];
            r.cells[c].reused_used = b.used;
            r.cells[c].beta1 = b.beta;
            for (std::size_t i = 0; i < p.reused[c].size(); ++i) {
                UserAllocation& u = r.users[c][p.reused[c][i]];
                u.gamma1 = b.share[i];
                u.p1 = b.power[i];
            }
        }
    }
    for (int c = 0; c < kCells; ++c) {
        if (p.protected_[c].empty()) continue;
        if (!(s.alpha < 1.0)) throw domain_error("allocate: protected users but alpha = 1");
        std::vector<BandUser> b;
        for (int k : p.protected_[c]) b.push_back({s.users[c][k].gains.direct / nv, s.users[c][k].rate});
        BandSolution ps = protected_allocation(b, s.alpha);
        r.cells[c].protected_used = ps.used;
        r.cells[c].beta2 = ps.beta;
        for (std::size_t i = 0; i < p.protected_[c].size(); ++i) {
            UserAllocation& u = r.users[c][p.protected_[c][i]];
            u.gamma2 = ps.share[i];
            u.p2 = ps.power[i];
        }
    }
    sum_up(r);
    r.status = AllocationStatus::ok;
    return r;
}

} // namespace detail

/// Partition by the curves, then ping-pong on the reused users and the protected allocation on the others.
/// alpha = 0 forces everybody into the protected band and alpha = 1 into the reused band.
inline AllocationResult algorithm3(const NetworkScenario& s, const CurveSet& curves, const PingPongOptions& opt = {})
{
    Partition p;
    if (s.alpha <= 0.0 || s.alpha >= 1.0) {
        for (int c = 0; c < kCells; ++c)
            for (int k = 0; k < int(s.users[c].size()); ++k)
                (s.alpha >= 1.0 ? p.reused[c] : p.protected_[c]).push_back(k);
    } else {
        p = partition_users(s, curves);
    }
    return detail::allocate(s, p, opt);
}

/// Full reuse: alpha = 1 and every user in the ping-pong.
inline AllocationResult reuse1_baseline(const NetworkScenario& s, const PingPongOptions& opt = {})
{
    NetworkScenario t = s;
    t.alpha = 1.0;
    Partition p;
    for (int c = 0; c < kCells; ++c)
        for (int k = 0; k < int(s.users[c].size()); ++k) p.reused[c].push_back(k);
    return detail::allocate(t, p, opt);
}

struct DiscretizeOptions {
    /// Hand the subcarriers left over by the floor to users floored to zero, one each,
    /// largest remainder first. Off by default: the plain floor rule.
    bool fill_slack = false;
};

/// Floors every gamma*N and recomputes the powers for the frozen sharing factors.
/// Users left without subcarriers in a band they need are flagged and get no power there.
inline AllocationResult discretize(const AllocationResult& cont, const NetworkScenario& s,
                                   const DiscretizeOptions& dopt = {}, const PingPongOptions& opt = {})
{
    if (!cont.feasible()) throw domain_error("discretize: needs a feasible continuous result");
    const double N = s.subcarriers;
    const double nv = s.noise_var();
    AllocationResult r = cont;
    r.trace.clear();
    r.iterations = r.polish_iterations = 0;
    r.flagged = 0;
    auto floor_share = [N](double g) { return std::floor(g * N * (1.0 + 1e-12)) / N; };
    // per-band rates of every user, from the continuous allocation
    std::array<std::vector<double>, kCells> r1, r2;
    for (int c = 0; c < kCells; ++c)
        for (std::size_t k = 0; k < cont.users[c].size(); ++k) {
            const UserAllocation& u = cont.users[c][k];
            const ChannelGains& g = s.users[c][k].gains;
            auto nb = neighbors(c);
            double g1 = ginr(g, nv, cont.cells[nb[0]].q1, cont.cells[nb[1]].q1);
            r1[c].push_back(u.gamma1 > 0.0 ? u.gamma1 * fading().expected_log(g1 * u.p1) : 0.0);
            r2[c].push_back(u.gamma2 > 0.0 ? u.gamma2 * fading().expected_log(g.direct / nv * u.p2) : 0.0);
        }
    for (int c = 0; c < kCells; ++c) {
        for (int band = 0; band < 2; ++band) {
            auto gam = [&](std::size_t k) -> double& { return band == 0 ? r.users[c][k].gamma1 : r.users[c][k].gamma2; };
            const std::vector<double>& need = band == 0 ? r1[c] : r2[c];
            std::vector<std::pair<double, std::size_t>> starving;
            double used = 0.0;
            for (std::size_t k = 0; k < r.users[c].size(); ++k) {
                double g = gam(k);
                gam(k) = floor_share(g);
                used += std::round(gam(k) * N);
                if (need[k] > 0.0 && gam(k) == 0.0) starving.push_back({g * N, k});
            }
            if (!dopt.fill_slack) continue;
            const double share = band == 0 ? r.alpha : (1.0 - r.alpha) / 3.0;
            long slack = long(std::floor(share * N * (1.0 + 1e-12))) - long(used);
            std::stable_sort(starving.begin(), starving.end(), [](auto& a, auto& b) { return a.first > b.first; });
            for (std::size_t i = 0; i < starving.size() && slack > 0; ++i, --slack) gam(starving[i].second) = 1.0 / N;
        }
    }
    for (int c = 0; c < kCells; ++c)
        for (std::size_t k = 0; k < r.users[c].size(); ++k) {
            UserAllocation& u = r.users[c][k];
            u.flagged = (r1[c][k] > 0.0 && u.gamma1 == 0.0) || (r2[c][k] > 0.0 && u.gamma2 == 0.0);
            if (u.flagged) ++r.flagged;
            // protected band: gamma EL(g2 P) = R2
            u.p2 = (u.gamma2 > 0.0 && r2[c][k] > 0.0)
                       ? fading().expected_log_inv(r2[c][k] / u.gamma2) / (s.users[c][k].gains.direct / nv)
                       : 0.0;
            if (u.gamma2 == 0.0) u.p2 = 0.0;
        }
    // reused band: P = EL^-1(R1/gamma) / g1(Q), affine in the neighbour powers
    std::array<std::vector<double>, kCells> need;
    bool any = false;
    for (int c = 0; c < kCells; ++c)
        for (std::size_t k = 0; k < r.users[c].size(); ++k) {
            const UserAllocation& u = r.users[c][k];
            double v = (u.gamma1 > 0.0 && r1[c][k] > 0.0) ? fading().expected_log_inv(r1[c][k] / u.gamma1) : 0.0;
            need[c].push_back(v);
            any = any || v > 0.0;
        }
    if (any) {
        CellMap map = [&](int c, double qn, double qp) {
            double q = 0.0;
            for (std::size_t k = 0; k < need[c].size(); ++k)
                if (need[c][k] > 0.0)
                    q += r.users[c][k].gamma1 * need[c][k] / ginr(s.users[c][k].gains, nv, qn, qp);
            return q;
        };
        FixedPointResult fp = gauss_seidel(map, opt);
        r.iterations = fp.iterations;
        r.polish_iterations = fp.polish_iterations;
        r.trace = fp.trace;
        if (!fp.ok()) {
            r.status = detail::from_fixed_point(fp.status);
            r.message = "fixed-share reused band: " + fp.message;
            return r;
        }
        for (int c = 0; c < kCells; ++c) {
            auto nb = neighbors(c);
            for (std::size_t k = 0; k < need[c].size(); ++k)
                r.users[c][k].p1 = need[c][k] > 0.0 ? need[c][k] / ginr(s.users[c][k].gains, nv, fp.q[nb[0]], fp.q[nb[1]]) : 0.0;
        }
    } else {
        for (auto& cell : r.users)
            for (auto& u : cell) u.p1 = 0.0;
    }
    detail::sum_up(r);
    if (r.flagged > 0) r.message = std::to_string(r.flagged) + " user(s) lost all subcarriers of a needed band";
    return r;
}

struct AuditReport {
    double max_rate_deficit = 0.0; ///< max over users of R_k - achieved (<= 0 when all met)
    double max_rate_error = 0.0;   ///< max |achieved - R_k|
    double max_share_error = 0.0;  ///< max |sum gamma - share| over used bands (or excess over share)
    double power_mismatch = 0.0;   ///< |total - sum gamma P| relative
    int users = 0;

    bool pass(double tol = 1e-8) const
    {
        return max_rate_deficit <= tol && max_share_error <= tol && power_mismatch <= 1e-12;
    }
};

/// Independent recomputation of every user's ergodic rate from the returned allocation.
/// exact_shares: used bands must be filled exactly (continuous case); otherwise only
/// the occupancy bound is checked. Flagged users are skipped.
inline AuditReport audit_allocation(const AllocationResult& r, const NetworkScenario& s, bool exact_shares = true)
{
    AuditReport a;
    if (!r.feasible()) throw domain_error("audit_allocation: infeasible result");
    const double nv = s.noise_var();
    double total = 0.0;
    for (int c = 0; c < kCells; ++c) {
        auto nb = neighbors(c);
        double q1n = 0.0, q1p = 0.0;
        for (const UserAllocation& u : r.users[nb[0]]) q1n += u.gamma1 * u.p1;
        for (const UserAllocation& u : r.users[nb[1]]) q1p += u.gamma1 * u.p1;
        double s1 = 0.0, s2 = 0.0;
        bool used1 = false, used2 = false;
        for (std::size_t k = 0; k < r.users[c].size(); ++k) {
            const UserAllocation& u = r.users[c][k];
            const User& usr = s.users[c][k];
            s1 += u.gamma1;
            s2 += u.gamma2;
            used1 = used1 || (u.gamma1 > 0.0 && u.p1 > 0.0);
            used2 = used2 || (u.gamma2 > 0.0 && u.p2 > 0.0);
            total += u.gamma1 * u.p1 + u.gamma2 * u.p2;
            if (u.flagged) continue;
            const double g1 = usr.gains.direct / (nv + usr.gains.cross[0] * q1n + usr.gains.cross[1] * q1p);
            const double g2 = usr.gains.direct / nv;
            double ach = 0.0;
            if (u.gamma1 > 0.0) ach += u.gamma1 * fading().expected_log(g1 * u.p1);
            if (u.gamma2 > 0.0) ach += u.gamma2 * fading().expected_log(g2 * u.p2);
            a.max_rate_deficit = std::max(a.max_rate_deficit, usr.rate - ach);
            a.max_rate_error = std::max(a.max_rate_error, std::fabs(ach - usr.rate));
            ++a.users;
        }
        const double sh1 = r.alpha, sh2 = (1.0 - r.alpha) / 3.0;
        auto check = [&](double sum, double share, bool used) {
            double e = (exact_shares && used) ? std::fabs(sum - share) : std::max(0.0, sum - share);
            a.max_share_error = std::max(a.max_share_error, e);
        };
        check(s1, sh1, used1);
        check(s2, sh2, used2);
    }
    a.power_mismatch = std::fabs(total - r.total) / std::max(total, std::numeric_limits<double>::min());
    return a;
}

// ---------------------------------------------------------------------------
// Brute-force oracles. The search variable is the fraction s_k of each user's
// rate carried on the reused band; for fixed s both bands reduce to the
// single-band problems (ping-pong for the reused one).

struct OracleOptions {
    int starts = 3;            ///< best vertices used as starting points
    int max_sweeps = 40;
    double tol = 1e-9;         ///< relative improvement that ends the sweeps
    int golden_bits = 30;
    PingPongOptions ping_pong = [] {
        PingPongOptions o;
        o.accuracy = 1e-10;
        o.polish_tol = 1e-13;
        return o;
    }();
};

struct OracleResult {
    AllocationResult allocation;
    std::array<std::vector<double>, kCells> split; ///< s_k per user
    double objective = kInf;
    long evaluations = 0;
};

namespace detail {

// Total power for a rate split; fills `out` when given.
inline double split_power(const NetworkScenario& s, const std::array<std::vector<double>, kCells>& split,
                          const PingPongOptions& opt, AllocationResult* out = nullptr)
{
    const double nv = s.noise_var();
    CellUserLists lists;
    bool any1 = false;
    for (int c = 0; c < kCells; ++c)
        for (std::size_t k = 0; k < s.users[c].size(); ++k) {
            double r = split[c][k] * s.users[c][k].rate;
            lists[c].push_back({s.users[c][k].gains, r});
            any1 = any1 || r > 0.0;
        }
    std::array<BandSolution, kCells> b1;
    if (any1) {
        InterferenceProblem prob(lists, nv, s.alpha);
        PingPongResult pp = ping_pong(prob, opt);
        if (!pp.fixed_point.ok()) {
            if (out) {
                out->status = from_fixed_point(pp.fixed_point.status);
                out->message = pp.fixed_point.message;
            }
            return kInf;
        }
        b1 = pp.cells;
    }
    double total = 0.0;
    if (out) {
        *out = AllocationResult{};
        out->alpha = s.alpha;
    }
    for (int c = 0; c < kCells; ++c) {
        std::vector<BandUser> b;
        for (std::size_t k = 0; k < s.users[c].size(); ++k)
            b.push_back({s.users[c][k].gains.direct / nv, (1.0 - split[c][k]) * s.users[c][k].rate});
        BandSolution b2 = s.alpha < 1.0 ? protected_allocation(b, s.alpha) : BandSolution{};
        total += b1[c].power_sum + b2.power_sum;
        if (out) {
            out->users[c].assign(s.users[c].size(), UserAllocation{});
            for (std::size_t k = 0; k < s.users[c].size(); ++k) {
                UserAllocation& u = out->users[c][k];
                if (b1[c].used) { u.gamma1 = b1[c].share[k]; u.p1 = b1[c].power[k]; }
                if (b2.used) { u.gamma2 = b2.share[k]; u.p2 = b2.power[k]; }
            }
            out->cells[c].beta1 = b1[c].beta;
            out->cells[c].beta2 = b2.beta;
            out->cells[c].reused_used = b1[c].used;
            out->cells[c].protected_used = b2.used;
        }
    }
    if (out) {
        sum_up(*out);
        out->status = AllocationStatus::ok;
    }
    return total;
}

// Minimum of obj along s + t d restricted to the unit box. Returns the step and value.
template <class Objective>
std::pair<double, double> box_line_min(const std::vector<double>& s, const std::vector<double>& d, double v0,
                                       Objective&& obj, int bits)
{
    double lo = -kInf, hi = kInf;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (d[k] > 0.0) {
            lo = std::max(lo, -s[k] / d[k]);
            hi = std::min(hi, (1.0 - s[k]) / d[k]);
        } else if (d[k] < 0.0) {
            lo = std::max(lo, (1.0 - s[k]) / d[k]);
            hi = std::min(hi, -s[k] / d[k]);
        }
    }
    if (!(hi > lo)) return {0.0, v0};
    auto line = [&](double t) {
        std::vector<double> u(s.size());
        for (std::size_t k = 0; k < s.size(); ++k) u[k] = std::clamp(s[k] + t * d[k], 0.0, 1.0);
        return obj(u);
    };
    auto [t, vt] = boost::math::tools::brent_find_minima(line, lo, hi, bits);
    // brent never probes the interval ends
    for (double e : {lo, hi}) {
        double ve = line(e);
        if (ve < vt) { t = e; vt = ve; }
    }
    if (!(vt < v0)) return {0.0, v0};
    return {t, vt};
}

// Vertex enumeration, then Powell's conjugate-direction search inside the box from the best vertices.
template <class Objective>
std::vector<double> split_search(int n, Objective&& obj, const OracleOptions& o, long& evals)
{
    auto f = [&](const std::vector<double>& s) {
        ++evals;
        return obj(s);
    };
    std::vector<std::pair<double, std::vector<double>>> verts;
    for (long m = 0; m < (1L << n); ++m) {
        std::vector<double> s(n);
        for (int k = 0; k < n; ++k) s[k] = (m >> k) & 1 ? 1.0 : 0.0;
        verts.push_back({f(s), s});
    }
    std::stable_sort(verts.begin(), verts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> best = verts.front().second;
    double bv = verts.front().first;
    std::vector<std::vector<double>> starts;
    for (int i = 0; i < std::min<int>(o.starts, int(verts.size())); ++i) starts.push_back(verts[i].second);
    starts.push_back(std::vector<double>(n, 0.5));
    for (auto s : starts) {
        double v = f(s);
        std::vector<std::vector<double>> dirs(n, std::vector<double>(n, 0.0));
        for (int k = 0; k < n; ++k) dirs[k][k] = 1.0;
        for (int sweep = 0; sweep < o.max_sweeps; ++sweep) {
            const double before = v;
            const std::vector<double> s0 = s;
            int biggest = 0;
            double drop = 0.0;
            for (int k = 0; k < n; ++k) {
                auto [t, vt] = box_line_min(s, dirs[k], v, f, o.golden_bits);
                if (vt < v) {
                    for (int j = 0; j < n; ++j) s[j] = std::clamp(s[j] + t * dirs[k][j], 0.0, 1.0);
                    if (v - vt > drop) { drop = v - vt; biggest = k; }
                    v = vt;
                }
            }
            std::vector<double> net(n);
            double len = 0.0;
            for (int j = 0; j < n; ++j) {
                net[j] = s[j] - s0[j];
                len = std::max(len, std::fabs(net[j]));
            }
            if (len > 0.0) {
                auto [t, vt] = box_line_min(s, net, v, f, o.golden_bits);
                if (vt < v) {
                    for (int j = 0; j < n; ++j) s[j] = std::clamp(s[j] + t * net[j], 0.0, 1.0);
                    v = vt;
                }
                dirs[biggest] = net;
            }
            if (!(before - v > o.tol * std::fabs(before))) {
                // restart from the axes once before giving up
                bool axes = true;
                for (int k = 0; k < n && axes; ++k)
                    for (int j = 0; j < n; ++j) axes = axes && dirs[k][j] == (j == k ? 1.0 : 0.0);
                if (axes) break;
                for (int k = 0; k < n; ++k) {
                    std::fill(dirs[k].begin(), dirs[k].end(), 0.0);
                    dirs[k][k] = 1.0;
                }
            }
        }
        if (v < bv) {
            bv = v;
            best = s;
        }
    }
    return best;
}

} // namespace detail

/// Near-global optimum of the three-cell problem for at most three users per cell.
inline OracleResult oracle_small(const NetworkScenario& s, const OracleOptions& o = {})
{
    int n = 0;
    for (const auto& cell : s.users) {
        if (cell.size() > 3) throw domain_error("oracle_small: at most three users per cell");
        n += int(cell.size());
    }
    OracleResult r;
    auto unpack = [&](const std::vector<double>& v) {
        std::array<std::vector<double>, kCells> split;
        int i = 0;
        for (int c = 0; c < kCells; ++c)
            for (std::size_t k = 0; k < s.users[c].size(); ++k) {
                double t = v[i++];
                if (s.alpha <= 0.0) t = 0.0;
                if (s.alpha >= 1.0) t = 1.0;
                split[c].push_back(t);
            }
        return split;
    };
    auto obj = [&](const std::vector<double>& v) { return detail::split_power(s, unpack(v), o.ping_pong); };
    std::vector<double> best = detail::split_search(n, obj, o, r.evaluations);
    r.split = unpack(best);
    r.objective = detail::split_power(s, r.split, o.ping_pong, &r.allocation);
    return r;
}

struct SingleCellOracle {
    double objective = kInf;
    double q1 = 0.0, q2 = 0.0;
    std::vector<double> split;
    long evaluations = 0;
};

/// Brute force for the single-cell problem with fixed neighbour powers and the cap on
/// the reused-band power: dual bisection on the cap multiplier around the split search.
inline SingleCellOracle single_cell_oracle(const std::vector<InterferenceUser>& users, double noise_var,
                                           double q_next, double q_prev, double cap, double alpha,
                                           const OracleOptions& o = {})
{
    if (users.size() > 4) throw domain_error("single_cell_oracle: at most four users");
    const int n = int(users.size());
    auto bands = [&](const std::vector<double>& s) {
        std::vector<BandUser> b1, b2;
        for (int k = 0; k < n; ++k) {
            b1.push_back({ginr(users[k].gains, noise_var, q_next, q_prev), s[k] * users[k].rate});
            b2.push_back({users[k].gains.direct / noise_var, (1.0 - s[k]) * users[k].rate});
        }
        return std::pair<double, double>{solve_band(b1, alpha).power_sum, protected_allocation(b2, alpha).power_sum};
    };
    SingleCellOracle r;
    auto solve_mu = [&](double mu) {
        auto obj = [&](const std::vector<double>& s) {
            auto [a, b] = bands(s);
            return (1.0 + mu) * a + b;
        };
        return detail::split_search(n, obj, o, r.evaluations);
    };
    auto take = [&](const std::vector<double>& s) {
        auto [a, b] = bands(s);
        r.split = s;
        r.q1 = a;
        r.q2 = b;
        r.objective = a + b;
    };
    std::vector<double> s0 = solve_mu(0.0);
    auto [a0, b0] = bands(s0);
    (void)b0;
    if (a0 <= cap) {
        take(s0);
        return r;
    }
    if (cap == 0.0) {
        take(std::vector<double>(n, 0.0));
        return r;
    }
    double lo = 0.0, hi = 1.0;
    std::vector<double> shi = solve_mu(hi);
    while (bands(shi).first > cap) {
        lo = hi;
        hi *= 4.0;
        if (hi > 1e12) {
            take(std::vector<double>(n, 0.0));
            return r;
        }
        shi = solve_mu(hi);
    }
    for (int it = 0; it < 60 && hi - lo > 1e-10 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        std::vector<double> sm = solve_mu(mid);
        if (bands(sm).first > cap) lo = mid;
        else { hi = mid; shi = sm; }
    }
    take(shi);
    return r;
}

} // namespace ffr
