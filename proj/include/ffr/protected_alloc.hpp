#pragma once

// Single-band KKT allocation: for users with gains g_k and rates R_k sharing a
// band of total occupancy `share`, the optimum is
//   P_k = f^-1(g_k beta) / g_k,   gamma_k = R_k / C(g_k beta),
// with beta the root of sum_k R_k / C(g_k beta) = share.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ffr/errors.hpp"
#include "ffr/fading.hpp"
#include "ffr/roots.hpp"

namespace ffr {

struct BandUser {
    double gain = 0.0; ///< g (GNR or GINR)
    double rate = 0.0; ///< R, nats/s/Hz
};

struct BandSolution {
    bool used = false;          ///< false when no user has a positive rate
    double beta = 0.0;
    double power_sum = 0.0;     ///< sum gamma_k P_k
    std::vector<double> power;  ///< P_k, W per occupied subcarrier
    std::vector<double> share;  ///< gamma_k
};

/// sum_k R_k / C(g_k beta).
inline double band_occupancy(std::span<const BandUser> users, double beta)
{
    double s = 0.0;
    for (const BandUser& u : users)
        if (u.rate > 0.0) s += u.rate / fading().cap_C(u.gain * beta);
    return s;
}

/// Root of sum_k R_k / C(g_k beta) = share, or nullopt when no user has a positive rate.
/// `hint` (if positive) centers the initial bracket.
inline std::optional<double> solve_band_beta(std::span<const BandUser> users, double share, double hint = 0.0)
{
    if (!(share > 0.0)) throw domain_error("solve_band_beta: share must be positive");
    bool any = false;
    for (const BandUser& u : users) {
        if (!(u.gain > 0.0) || !std::isfinite(u.gain) || u.rate < 0.0 || !std::isfinite(u.rate))
            throw domain_error("solve_band_beta: gains must be positive and rates nonnegative");
        any = any || u.rate > 0.0;
    }
    if (!any) return std::nullopt;
    if (!(hint > 0.0)) {
        // one-user estimate at the mean gain and total rate
        double gsum = 0.0, rsum = 0.0;
        for (const BandUser& u : users) {
            if (u.rate > 0.0) { gsum += u.gain * u.rate; rsum += u.rate; }
        }
        double gbar = gsum / rsum;
        double x = fading().expected_log_inv(rsum / share);
        hint = fading().f(x) / gbar;
        if (!(hint > 0.0) || !std::isfinite(hint)) hint = 1.0;
    }
    auto residual = [&](double beta) { return band_occupancy(users, beta) - share; };
    return solve_decreasing_log(residual, hint, 1e-14, 2.0);
}

inline BandSolution expand_band(std::span<const BandUser> users, double beta)
{
    BandSolution out;
    out.used = true;
    out.beta = beta;
    out.power.assign(users.size(), 0.0);
    out.share.assign(users.size(), 0.0);
    for (std::size_t k = 0; k < users.size(); ++k) {
        if (!(users[k].rate > 0.0)) continue;
        Inversion inv = fading().invert(users[k].gain * beta);
        out.power[k] = inv.arg / users[k].gain;
        out.share[k] = users[k].rate / inv.log_term;
        out.power_sum += out.share[k] * out.power[k];
    }
    return out;
}

/// Full single-band allocation. Empty (or all-zero-rate) sets give an unused band.
inline BandSolution solve_band(std::span<const BandUser> users, double share, double hint = 0.0)
{
    std::optional<double> beta = solve_band_beta(users, share, hint);
    if (!beta) {
        BandSolution out;
        out.power.assign(users.size(), 0.0);
        out.share.assign(users.size(), 0.0);
        return out;
    }
    return expand_band(users, *beta);
}

/// Protected band: gains are GNRs, occupancy (1 - alpha)/3.
inline std::optional<double> solve_beta2(std::span<const BandUser> users, double alpha)
{
    return solve_band_beta(users, (1.0 - alpha) / 3.0);
}

inline BandSolution protected_allocation(std::span<const BandUser> users, double alpha)
{
    if (!(alpha >= 0.0 && alpha < 1.0)) throw domain_error("protected_allocation: alpha must lie in [0, 1)");
    return solve_band(users, (1.0 - alpha) / 3.0);
}

} // namespace ffr
