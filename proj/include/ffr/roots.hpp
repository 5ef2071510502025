#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include <boost/math/tools/toms748_solve.hpp>

#include "ffr/errors.hpp"

namespace ffr {

/// Root of a continuous function with fn(lo) and fn(hi) of opposite sign.
/// Terminates when the bracket width drops below abs_tol + rel_tol*|x|
/// or when fn hits zero exactly.
template <class Fn>
double brent_root(Fn&& fn, double lo, double hi, double flo, double fhi,
                  double abs_tol, double rel_tol = 1e-15, std::uintmax_t max_iter = 200)
{
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw convergence_error("brent_root: interval does not bracket a root");
    auto tol = [abs_tol, rel_tol](double a, double b) {
        return std::fabs(b - a) <= abs_tol + rel_tol * std::max(std::fabs(a), std::fabs(b));
    };
    std::uintmax_t it = max_iter;
    auto r = boost::math::tools::toms748_solve(fn, lo, hi, flo, fhi, tol, it);
    if (it >= max_iter) throw convergence_error("brent_root: iteration limit");
    return 0.5 * (r.first + r.second);
}

/// Root of a strictly decreasing function of t = log(x) on (0, inf).
/// Brackets geometrically around `guess` (factor `grow` per step), then refines.
/// rel_tol is the final bracket width in log(x).
template <class Fn>
double solve_decreasing_log(Fn&& fn, double guess, double rel_tol = 1e-13,
                            double grow = 4.0, int max_expansions = 400)
{
    if (!(guess > 0.0) || !std::isfinite(guess)) guess = 1.0;
    double lo = guess, hi = guess;
    double flo = fn(lo), fhi = flo;
    int n = 0;
    if (flo > 0.0) {
        // root above guess
        while (fhi > 0.0) {
            lo = hi; flo = fhi;
            hi *= grow;
            if (++n > max_expansions || !std::isfinite(hi))
                throw convergence_error("solve_decreasing_log: no sign change above guess");
            fhi = fn(hi);
        }
    } else if (flo < 0.0) {
        while (flo < 0.0) {
            hi = lo; fhi = flo;
            lo /= grow;
            if (++n > max_expansions || lo <= 0.0)
                throw convergence_error("solve_decreasing_log: no sign change below guess");
            flo = fn(lo);
        }
    } else {
        return guess;
    }
    auto g = [&fn](double t) { return fn(std::exp(t)); };
    double t = brent_root(g, std::log(lo), std::log(hi), flo, fhi, rel_tol);
    return std::exp(t);
}

/// Safeguarded Newton for an increasing function: finds x in [lo, hi] with value(x) = target.
/// `eval(x)` returns {value, derivative}. `done(x, value)` lets the caller stop early.
template <class Eval>
double newton_increasing(Eval&& eval, double target, double lo, double hi, double x,
                         double rel_tol = 4.0 * std::numeric_limits<double>::epsilon(),
                         int max_iter = 100)
{
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    for (int i = 0; i < max_iter; ++i) {
        auto [v, d] = eval(x);
        double r = v - target;
        if (r == 0.0 || std::fabs(r) <= rel_tol * std::fabs(target)) return x;
        if (r < 0.0) lo = x; else hi = x;
        double xn = (d > 0.0 && std::isfinite(d)) ? x - r / d : 0.5 * (lo + hi);
        if (!(xn > lo && xn < hi)) {
            xn = (lo > 0.0 && hi / lo > 4.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
        }
        if (std::fabs(xn - x) <= rel_tol * std::fabs(x)) return xn;
        if (hi - lo <= rel_tol * hi) return 0.5 * (lo + hi);
        x = xn;
    }
    throw convergence_error("newton_increasing: iteration limit");
}

} // namespace ffr
