#pragma once

// Reused-band allocation. For fixed powers (Q_next, Q_prev) of the other stations
// each cell solves a single-band problem with GINR gains and occupancy alpha; the
// resulting band power I^c(Q_next, Q_prev) is a standard interference function
// and the ping-pong (Gauss-Seidel) iteration converges to its unique fixed point.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ffr/errors.hpp"
#include "ffr/fading.hpp"
#include "ffr/geometry.hpp"
#include "ffr/protected_alloc.hpp"

namespace ffr {

using Triple = std::array<double, kCells>;

struct InterferenceUser {
    ChannelGains gains;
    double rate = 0.0;
};

using CellUserLists = std::array<std::vector<InterferenceUser>, kCells>;

inline CellUserLists interference_users(const UserSet& users)
{
    CellUserLists out;
    for (int c = 0; c < kCells; ++c)
        for (const User& u : users[c]) out[c].push_back({u.gains, u.rate});
    return out;
}

struct PingPongOptions {
    double accuracy = 1e-6;
    int max_iter = 500;
    double divergence_factor = 1e6;  ///< infeasible once some Q1 exceeds this times its zero-interference value
    double polish_tol = 1e-12;       ///< extra sweeps after convergence; 0 disables
    int polish_max = 20000;
    std::optional<Triple> initial;
};

enum class FixedPointStatus { converged, infeasible, numeric_failure };

inline const char* to_string(FixedPointStatus s)
{
    switch (s) {
    case FixedPointStatus::converged: return "converged";
    case FixedPointStatus::infeasible: return "infeasible";
    default: return "numeric_failure";
    }
}

struct TraceRow {
    int iter = 0;
    Triple q{};
    double max_rel_change = 0.0;
};

struct FixedPointResult {
    FixedPointStatus status = FixedPointStatus::numeric_failure;
    Triple q{};
    int iterations = 0;        ///< sweeps until the requested accuracy
    int polish_iterations = 0; ///< extra sweeps until polish_tol
    std::vector<TraceRow> trace;
    std::string message;

    bool ok() const { return status == FixedPointStatus::converged; }
};

/// Per-cell map: (cell, Q_next, Q_prev) -> band power of that cell.
using CellMap = std::function<double(int, double, double)>;

inline double max_rel_change(const Triple& a, const Triple& b)
{
    double m = 0.0;
    for (int c = 0; c < kCells; ++c) {
        double d = std::fabs(b[c] - a[c]);
        if (d > 0.0) m = std::max(m, d / std::max(std::fabs(b[c]), std::numeric_limits<double>::min()));
    }
    return m;
}

/// Gauss-Seidel sweep A -> B -> C until the maximum relative change drops below accuracy.
inline FixedPointResult gauss_seidel(const CellMap& map, const PingPongOptions& opt)
{
    FixedPointResult r;
    Triple q0{};
    try {
        for (int c = 0; c < kCells; ++c) q0[c] = map(c, 0.0, 0.0);
    } catch (const std::exception& e) {
        r.message = e.what();
        return r;
    }
    Triple q = opt.initial ? *opt.initial : Triple{0.0, 0.0, 0.0};
    r.trace.push_back({0, q, 0.0});
    auto sweep = [&](Triple& cur) {
        for (int c = 0; c < kCells; ++c) {
            auto nb = neighbors(c);
            cur[c] = map(c, cur[nb[0]], cur[nb[1]]);
        }
    };
    auto diverged = [&](const Triple& cur) {
        for (int c = 0; c < kCells; ++c)
            if (q0[c] > 0.0 && cur[c] > opt.divergence_factor * q0[c]) return true;
        return false;
    };
    auto growth = [&](const Triple& cur) {
        double g = 0.0;
        for (int c = 0; c < kCells; ++c)
            if (q0[c] > 0.0) g = std::max(g, cur[c] / q0[c]);
        return g;
    };

    bool converged = false;
    int it = 0;
    try {
        while (it < opt.max_iter) {
            Triple prev = q;
            sweep(q);
            ++it;
            for (double v : q)
                if (!std::isfinite(v)) throw convergence_error("non-finite band power");
            double ch = max_rel_change(prev, q);
            r.trace.push_back({it, q, ch});
            if (ch < opt.accuracy) { converged = true; break; }
            if (diverged(q)) {
                r.status = FixedPointStatus::infeasible;
                r.q = q;
                r.iterations = it;
                r.message = "band power exceeded divergence cap";
                return r;
            }
        }
    } catch (const std::exception& e) {
        r.q = q;
        r.iterations = it;
        r.status = growth(q) > 1e2 ? FixedPointStatus::infeasible : FixedPointStatus::numeric_failure;
        r.message = e.what();
        return r;
    }
    r.iterations = it;
    r.q = q;
    if (!converged) {
        r.status = growth(q) > 1.0 ? FixedPointStatus::infeasible : FixedPointStatus::numeric_failure;
        r.message = "iteration limit reached";
        return r;
    }
    if (opt.polish_tol > 0.0) {
        try {
            for (int p = 0; p < opt.polish_max; ++p) {
                Triple prev = q;
                sweep(q);
                ++r.polish_iterations;
                if (max_rel_change(prev, q) <= opt.polish_tol) break;
                if (diverged(q)) {
                    r.status = FixedPointStatus::infeasible;
                    r.q = q;
                    r.message = "diverged while polishing";
                    return r;
                }
            }
        } catch (const std::exception& e) {
            r.status = FixedPointStatus::numeric_failure;
            r.message = e.what();
            return r;
        }
        r.q = q;
    }
    r.status = FixedPointStatus::converged;
    return r;
}

/// The reused-band problem of the three cells for a fixed user partition.
class InterferenceProblem {
public:
    InterferenceProblem(CellUserLists users, double noise_var, double alpha)
        : users_(std::move(users)), noise_var_(noise_var), alpha_(alpha)
    {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw domain_error("InterferenceProblem: alpha must lie in (0, 1]");
        if (!(noise_var > 0.0)) throw domain_error("InterferenceProblem: noise variance must be positive");
        hint_.fill(0.0);
    }

    const CellUserLists& users() const { return users_; }
    double alpha() const { return alpha_; }
    double noise_var() const { return noise_var_; }

    std::vector<BandUser> band_users(int c, double q_next, double q_prev) const
    {
        std::vector<BandUser> b;
        b.reserve(users_[c].size());
        for (const InterferenceUser& u : users_[c]) b.push_back({ginr(u.gains, noise_var_, q_next, q_prev), u.rate});
        return b;
    }

    /// beta1 of cell c, or nullopt for an empty (zero-rate) user set.
    std::optional<double> solve_beta1(int c, double q_next, double q_prev) const
    {
        auto b = band_users(c, q_next, q_prev);
        auto beta = solve_band_beta(b, alpha_, hint_[c]);
        if (beta) hint_[c] = *beta;
        return beta;
    }

    /// I^c(Q_next, Q_prev).
    double cell_power(int c, double q_next, double q_prev) const
    {
        auto b = band_users(c, q_next, q_prev);
        auto beta = solve_band_beta(b, alpha_, hint_[c]);
        if (!beta) return 0.0;
        hint_[c] = *beta;
        double s = 0.0;
        for (const BandUser& u : b) {
            if (!(u.rate > 0.0)) continue;
            Inversion inv = fading().invert(u.gain * *beta);
            s += u.rate * inv.arg / (u.gain * inv.log_term);
        }
        return s;
    }

    /// Jacobi evaluation of the interference map at q.
    Triple map(const Triple& q) const
    {
        Triple out{};
        for (int c = 0; c < kCells; ++c) {
            auto nb = neighbors(c);
            out[c] = cell_power(c, q[nb[0]], q[nb[1]]);
        }
        return out;
    }

    BandSolution expand(int c, const Triple& q) const
    {
        auto nb = neighbors(c);
        return solve_band(band_users(c, q[nb[0]], q[nb[1]]), alpha_, hint_[c]);
    }

private:
    CellUserLists users_;
    double noise_var_;
    double alpha_;
    mutable Triple hint_; // warm start for the beta bracket; does not affect results beyond root tolerance
};

struct PingPongResult {
    FixedPointResult fixed_point;
    std::array<BandSolution, kCells> cells;
};

/// Ping-pong fixed point followed by the per-user expansion at the final powers.
inline PingPongResult ping_pong(const InterferenceProblem& prob, const PingPongOptions& opt = {})
{
    PingPongResult r;
    CellMap m = [&prob](int c, double a, double b) { return prob.cell_power(c, a, b); };
    r.fixed_point = gauss_seidel(m, opt);
    if (!r.fixed_point.ok()) return r;
    for (int c = 0; c < kCells; ++c) r.cells[c] = prob.expand(c, r.fixed_point.q);
    for (int c = 0; c < kCells; ++c) r.fixed_point.q[c] = r.cells[c].power_sum;
    return r;
}

} // namespace ffr
