#pragma once

// Single-cell reference solver with fixed neighbour powers and a cap on the
// reused-band power. Each user sits entirely in one band according to the sign
// of W at its position; at most one user (the pivot, W = 0) splits its rate.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ffr/asymptotic.hpp"
#include "ffr/errors.hpp"
#include "ffr/fading.hpp"
#include "ffr/geometry.hpp"
#include "ffr/interference_alloc.hpp"
#include "ffr/protected_alloc.hpp"
#include "ffr/roots.hpp"

namespace ffr {

struct SingleCellResult {
    SolveStatus status = SolveStatus::numeric_failure;
    bool trivial = false;     ///< all-protected fallback (cap 0 or unreachable)
    double beta1 = 0.0, beta2 = 0.0, xi = 0.0;
    std::vector<double> gamma1, gamma2, p1, p2;
    std::vector<int> band;    ///< 1, 2, or 0 for the pivot
    int pivot = -1;
    double q1 = 0.0, q2 = 0.0;
    std::string message;

    double total() const { return q1 + q2; }
};

namespace detail {

struct SingleCellCore {
    const std::vector<InterferenceUser>& users;
    std::vector<double> g1, g2, rate;
    std::vector<int> active; // users with positive rate
    double alpha, share2;

    SingleCellCore(const std::vector<InterferenceUser>& u, double nv, double qn, double qp, double a)
        : users(u), alpha(a), share2((1.0 - a) / 3.0)
    {
        for (std::size_t k = 0; k < u.size(); ++k) {
            g1.push_back(ginr(u[k].gains, nv, qn, qp));
            g2.push_back(u[k].gains.direct / nv);
            rate.push_back(u[k].rate);
            if (u[k].rate > 0.0) active.push_back(int(k));
        }
    }

    struct State {
        double beta1 = 0.0, beta2 = 0.0, xi = 0.0;
        int pivot = -1;
        double pivot_band2 = 0.0; // pivot's band-2 rate
        std::vector<char> in1;    // by user index
        double gamma1 = 0.0;
    };

    // For fixed (beta1, xi): beta2 and the pivot from the protected-band share, then Gamma1.
    State at(double beta1, double xi) const
    {
        State s;
        s.beta1 = beta1;
        s.xi = xi;
        s.in1.assign(users.size(), 0);
        const auto& F = fading();
        // user k joins the reused band once beta2 exceeds b_k
        std::vector<std::pair<double, int>> sw;
        for (int k : active) {
            double a = g1[k] / (1.0 + xi);
            double u = a * F.cap_F(a * beta1) / g2[k];
            double b = u >= 1.0 ? 0.0 : F.cap_F_inv(u) / g2[k];
            sw.push_back({b, k});
        }
        std::sort(sw.begin(), sw.end());
        const std::size_t n = sw.size();
        auto gamma2 = [&](std::size_t from, double b2) {
            double g = 0.0;
            for (std::size_t j = from; j < n; ++j) g += rate[sw[j].second] / F.cap_C(g2[sw[j].second] * b2);
            return g;
        };
        std::size_t first2 = n; // first sorted index still in the protected band
        for (std::size_t j = 0; j < n; ++j) {
            double left_b = j == 0 ? 0.0 : sw[j - 1].first;
            double right_b = sw[j].first;
            if (right_b > left_b && gamma2(j, right_b) <= share2) {
                // root inside (left_b, right_b)
                auto fn = [&](double t) { return gamma2(j, std::exp(t)) - share2; };
                double lo = left_b > 0.0 ? std::log(left_b) : std::log(right_b) - 1.0;
                double flo = fn(lo);
                while (flo < 0.0 && left_b == 0.0) {
                    lo -= 2.0;
                    flo = fn(lo);
                }
                double hi = std::log(right_b), fhi = gamma2(j, right_b) - share2;
                s.beta2 = flo == 0.0 ? std::exp(lo) : std::exp(brent_root(fn, lo, hi, flo, fhi, 1e-15));
                first2 = j;
                break;
            }
            double after = gamma2(j + 1, right_b);
            if (after <= share2) {
                // user j straddles the jump: pivot at beta2 = b_j
                int k = sw[j].second;
                s.beta2 = right_b;
                s.pivot = k;
                double c2 = F.cap_C(g2[k] * right_b);
                s.pivot_band2 = std::clamp((share2 - after) * c2, 0.0, rate[k]);
                first2 = j + 1;
                break;
            }
        }
        for (std::size_t j = 0; j < std::min(first2, n); ++j)
            if (sw[j].second != s.pivot) s.in1[sw[j].second] = 1;
        double g = 0.0;
        for (int k : active) {
            double a = g1[k] / (1.0 + xi);
            double r1 = s.in1[k] ? rate[k] : (k == s.pivot ? rate[k] - s.pivot_band2 : 0.0);
            if (r1 > 0.0) g += r1 / F.cap_C(a * beta1);
        }
        s.gamma1 = g;
        return s;
    }

    // Empty when even beta1 -> 0 leaves the reused band under-occupied: the protected
    // band then carries everything and Q1 = 0.
    std::optional<State> solve_xi(double xi) const
    {
        if (at(1e-200, xi).gamma1 < alpha) return std::nullopt;
        double b1 = solve_decreasing_log([&](double b) { return at(b, xi).gamma1 - alpha; }, 1.0, 1e-14);
        return at(b1, xi);
    }

    void fill(const State& st, SingleCellResult& r) const
    {
        const auto& F = fading();
        const std::size_t n = users.size();
        r.gamma1.assign(n, 0.0);
        r.gamma2.assign(n, 0.0);
        r.p1.assign(n, 0.0);
        r.p2.assign(n, 0.0);
        r.band.assign(n, 2);
        r.q1 = r.q2 = 0.0;
        r.beta1 = st.beta1;
        r.beta2 = st.beta2;
        r.xi = st.xi;
        r.pivot = st.pivot;
        for (int k : active) {
            double a = g1[k] / (1.0 + st.xi);
            double r1 = st.in1[k] ? rate[k] : (k == st.pivot ? rate[k] - st.pivot_band2 : 0.0);
            double r2 = rate[k] - r1;
            r.band[k] = k == st.pivot ? 0 : (st.in1[k] ? 1 : 2);
            if (r1 > 0.0) {
                Inversion inv = F.invert(a * st.beta1);
                r.gamma1[k] = r1 / inv.log_term;
                r.p1[k] = inv.arg / g1[k];
                r.q1 += r.gamma1[k] * r.p1[k];
            }
            if (r2 > 0.0) {
                Inversion inv = F.invert(g2[k] * st.beta2);
                r.gamma2[k] = r2 / inv.log_term;
                r.p2[k] = inv.arg / g2[k];
                r.q2 += r.gamma2[k] * r.p2[k];
            }
        }
    }
};

} // namespace detail

/// Reference solution of the single-cell problem: neighbours transmit (q_next, q_prev) on the
/// reused band and the cell's reused-band power may not exceed `cap`.
inline SingleCellResult lemma2_reference_solver(const std::vector<InterferenceUser>& users, double noise_var,
                                                double q_next, double q_prev, double cap, double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw domain_error("lemma2_reference_solver: alpha must lie in (0, 1)");
    if (!(cap >= 0.0)) throw domain_error("lemma2_reference_solver: cap must be >= 0");
    detail::SingleCellCore core(users, noise_var, q_next, q_prev, alpha);
    SingleCellResult r;
    auto trivial = [&](const std::string& why) {
        std::vector<BandUser> b;
        for (std::size_t k = 0; k < users.size(); ++k) b.push_back({core.g2[k], core.rate[k]});
        BandSolution ps = protected_allocation(b, alpha);
        const std::size_t n = users.size();
        r = SingleCellResult{};
        r.status = SolveStatus::solved;
        r.trivial = true;
        r.message = why;
        r.gamma1.assign(n, 0.0);
        r.p1.assign(n, 0.0);
        r.band.assign(n, 2);
        r.gamma2 = ps.used ? ps.share : std::vector<double>(n, 0.0);
        r.p2 = ps.used ? ps.power : std::vector<double>(n, 0.0);
        r.beta2 = ps.beta;
        r.q2 = ps.power_sum;
        return r;
    };
    if (core.active.empty()) {
        r.status = SolveStatus::solved;
        core.fill(detail::SingleCellCore::State{0.0, 0.0, 0.0, -1, 0.0, std::vector<char>(users.size(), 0), 0.0}, r);
        return r;
    }
    if (cap == 0.0) return trivial("zero cap forces every user into the protected band");
    try {
        auto st = core.solve_xi(0.0);
        if (!st) return trivial("the protected band carries every rate");
        core.fill(*st, r);
        if (r.q1 > cap) {
            auto q1_at = [&](double v) {
                auto sv = core.solve_xi(std::expm1(v));
                if (!sv) return -1e3;
                SingleCellResult t;
                core.fill(*sv, t);
                return std::log(t.q1 / cap);
            };
            double lo = 0.0, flo = std::log(r.q1 / cap), hi = 0.5, fhi = q1_at(hi);
            while (fhi > 0.0) {
                lo = hi;
                flo = fhi;
                hi *= 2.0;
                if (hi > 700.0) return trivial("cap unreachable with a finite multiplier");
                fhi = q1_at(hi);
            }
            double v = brent_root(q1_at, lo, hi, flo, fhi, 1e-14, 1e-14);
            auto sv = core.solve_xi(std::expm1(v));
            if (!sv) return trivial("the protected band carries every rate");
            core.fill(*sv, r);
        }
        r.status = SolveStatus::solved;
    } catch (const std::exception& e) {
        r.status = SolveStatus::numeric_failure;
        r.message = e.what();
    }
    return r;
}

} // namespace ffr
