#pragma once

// Expectations over a unit-mean exponential variable Z (Rayleigh power fading)
// and the derived functions f, f^-1, C, F used by every allocation formula.
//
//   EL(x) = E[log(1+xZ)] = e^{1/x} E1(1/x)
//   ER(x) = E[Z/(1+xZ)]  = (1 - EL(x)/x) / x
//   f(x)  = EL(x)/ER(x) - x
//   C(y)  = EL(f^-1(y)),  F(y) = ER(f^-1(y))

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/special_functions/expint.hpp>

#include "ffr/errors.hpp"
#include "ffr/roots.hpp"

namespace ffr {

/// All expectations needed at one argument x.
struct FadingMoments {
    double log_term = 0.0;    ///< E[log(1+xZ)]
    double ratio_term = 1.0;  ///< E[Z/(1+xZ)]
    double excess = 0.0;      ///< E[log(1+xZ)] - x E[Z/(1+xZ)]
    double square_term = 2.0; ///< E[Z^2/(1+xZ)^2]
};

/// x = f^-1(y) together with C(y) = EL(x) and F(y) = ER(x).
struct Inversion {
    double arg = 0.0;
    double log_term = 0.0;
    double ratio_term = 1.0;
};

class FadingFunctions {
public:
    struct Options {
        double series_cutoff = 0.025; ///< below this x the power series is used
        double zero_floor = 1e-300;   ///< arguments below are treated as 0
        double table_min = 1e-8;      ///< inverse table range in x
        double table_max = 1e12;
        std::size_t table_size = 1024;
        double bracket_start = 1.0;   ///< fallback bracket [0, start], grown by `growth`
        double growth = 2.0;
        int max_expansions = 1100;
    };

    FadingFunctions() : FadingFunctions(Options{}) {}

    explicit FadingFunctions(Options opt) : opt_(opt)
    {
        const std::size_t n = std::max<std::size_t>(opt_.table_size, 8);
        lu_.resize(n);
        lv_.resize(n);
        dv_.resize(n);
        const double a = std::log(opt_.table_min), b = std::log(opt_.table_max);
        for (std::size_t i = 0; i < n; ++i) {
            double u = a + (b - a) * double(i) / double(n - 1);
            double x = std::exp(u);
            FadingMoments m = moments(x);
            double fx = m.excess / m.ratio_term;
            double dfx = m.log_term * m.square_term / (m.ratio_term * m.ratio_term);
            lu_[i] = u;
            lv_[i] = std::log(fx);
            dv_[i] = x * dfx / fx; // d log f / d log x
        }
    }

    const Options& options() const { return opt_; }

    FadingMoments moments(double x) const
    {
        check_arg(x, "x");
        if (x < opt_.zero_floor) return FadingMoments{};
        if (x <= opt_.series_cutoff) return series(x);
        return closed_form(x);
    }

    double expected_log(double x) const { return moments(x).log_term; }
    double expected_ratio(double x) const { return moments(x).ratio_term; }

    double f(double x) const
    {
        FadingMoments m = moments(x);
        return m.excess / m.ratio_term;
    }

    double f_derivative(double x) const
    {
        FadingMoments m = moments(x);
        return m.log_term * m.square_term / (m.ratio_term * m.ratio_term);
    }

    /// Solves f(x) = y; also returns EL and ER at the solution.
    Inversion invert(double y) const
    {
        check_arg(y, "y");
        if (y < opt_.zero_floor) return Inversion{};
        double lo, hi, x0;
        const double v = std::log(y);
        if (v < lv_.front()) {
            // f(x) = x^2 (1 - 2x + ...) for small x
            x0 = std::sqrt(y);
            lo = 0.0;
            hi = std::exp(lu_.front());
        } else if (v >= lv_.back()) {
            lo = std::exp(lu_.back());
            hi = std::max(lo, opt_.bracket_start);
            int n = 0;
            while (f(hi) < y) {
                lo = hi;
                hi *= opt_.growth;
                if (++n > opt_.max_expansions || !std::isfinite(hi))
                    throw convergence_error("f_inv: bracket expansion failed");
            }
            x0 = 0.5 * (lo + hi);
        } else {
            std::size_t i = std::size_t(std::upper_bound(lv_.begin(), lv_.end(), v) - lv_.begin()) - 1;
            i = std::min(i, lv_.size() - 2);
            lo = std::exp(lu_[i]);
            hi = std::exp(lu_[i + 1]);
            x0 = std::exp(hermite(i, v));
        }
        Inversion out;
        FadingMoments last;
        double last_x = -1.0;
        auto eval = [&](double x) {
            last = moments(x);
            last_x = x;
            double fx = last.excess / last.ratio_term;
            double d = last.log_term * last.square_term / (last.ratio_term * last.ratio_term);
            return std::pair<double, double>(fx, d);
        };
        double x = newton_increasing(eval, y, lo, hi, x0);
        if (x != last_x) {
            last = moments(x);
        }
        out.arg = x;
        out.log_term = last.log_term;
        out.ratio_term = last.ratio_term;
        return out;
    }

    double f_inv(double y) const { return invert(y).arg; }
    double cap_C(double y) const { return invert(y).log_term; }
    double cap_F(double y) const { return invert(y).ratio_term; }

    /// x >= 0 with E[log(1+xZ)] = c.
    double expected_log_inv(double c) const
    {
        check_arg(c, "c");
        if (c < opt_.zero_floor) return 0.0;
        // Jensen: EL(x) <= log(1+x), so x >= expm1(c).
        double lo = std::expm1(c);
        double hi = std::max(2.0 * lo, 1.0);
        while (expected_log(hi) < c) {
            lo = hi;
            hi *= 4.0;
            if (!std::isfinite(hi)) throw convergence_error("expected_log_inv: bracket");
        }
        auto eval = [&](double x) {
            FadingMoments m = moments(x);
            return std::pair<double, double>(m.log_term, m.ratio_term);
        };
        if (expected_log(lo) >= c) return lo;
        return newton_increasing(eval, c, lo, hi, lo);
    }

    /// x >= 0 with E[Z/(1+xZ)] = u, u in (0, 1].
    double expected_ratio_inv(double u) const
    {
        check_arg(u, "u");
        if (!(u > 0.0) || u > 1.0) throw domain_error("expected_ratio_inv: u must lie in (0, 1]");
        if (u == 1.0) return 0.0;
        // ER is decreasing; solve -ER(x) = -u.
        double lo = 0.0, hi = std::max(1.0, 1.0 / u);
        while (expected_ratio(hi) > u) {
            lo = hi;
            hi *= 4.0;
            if (!std::isfinite(hi)) throw convergence_error("expected_ratio_inv: bracket");
        }
        auto eval = [&](double x) {
            FadingMoments m = moments(x);
            return std::pair<double, double>(-m.ratio_term, m.square_term);
        };
        double guess = 0.5 * (1.0 / u - 1.0);
        return newton_increasing(eval, -u, lo, hi, std::clamp(guess, lo, hi));
    }

    /// y >= 0 with F(y) = u, u in (0, 1].
    double cap_F_inv(double u) const { return f(expected_ratio_inv(u)); }

private:
    static void check_arg(double x, const char* name)
    {
        if (!std::isfinite(x) || x < 0.0)
            throw domain_error(std::string("fading: argument ") + name + " must be finite and >= 0");
    }

    // Divergent asymptotic series truncated at the first term below 1e-17 relative.
    static FadingMoments series(double x)
    {
        double el = 0.0, er = 0.0, ex = 0.0, sq = 0.0;
        double p = x;   // (n-1)! x^n
        double r = 1.0; // n! x^(n-1)
        double s = 1.0; // (-1)^(n+1)
        double prev_sq = std::numeric_limits<double>::infinity();
        for (int n = 1; n < 200; ++n) {
            double t_el = p;
            double t_ex = (n - 1) * p;
            double t_er = r;
            double t_sq = n * (n + 1.0) * r;
            if (t_sq > prev_sq) break; // optimal truncation point reached
            prev_sq = t_sq;
            el += s * t_el;
            ex -= s * t_ex;
            er += s * t_er;
            sq += s * t_sq;
            if (t_el <= 1e-17 * std::fabs(el) && t_er <= 1e-17 * std::fabs(er)
                && t_sq <= 1e-17 * std::fabs(sq) && (n < 2 || t_ex <= 1e-17 * std::fabs(ex)))
                break;
            p *= n * x;
            r *= (n + 1) * x;
            s = -s;
        }
        return {el, er, ex, sq};
    }

    static FadingMoments closed_form(double x)
    {
        const double z = 1.0 / x;
        const double g = std::exp(z) * boost::math::expint(1, z); // e^z E1(z)
        const double h = g * z;                                   // E[1/(1+xZ)]
        FadingMoments m;
        m.log_term = g;
        m.ratio_term = (1.0 - h) * z;
        m.excess = g * (1.0 + z) - 1.0;
        m.square_term = z * z * (1.0 - 2.0 * h + (1.0 - h) * z);
        return m;
    }

    // Cubic Hermite interpolation of log x as a function of log f on cell i.
    double hermite(std::size_t i, double v) const
    {
        const double h = lv_[i + 1] - lv_[i];
        const double t = (v - lv_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        const double m0 = h / dv_[i], m1 = h / dv_[i + 1];
        return (2 * t3 - 3 * t2 + 1) * lu_[i] + (t3 - 2 * t2 + t) * m0
               + (-2 * t3 + 3 * t2) * lu_[i + 1] + (t3 - t2) * m1;
    }

    Options opt_;
    std::vector<double> lu_, lv_, dv_;
};

/// Shared default instance.
inline const FadingFunctions& fading()
{
    static const FadingFunctions instance;
    return instance;
}

} // namespace ffr
