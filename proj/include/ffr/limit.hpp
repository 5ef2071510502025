#pragma once

// Large-system quantities of one cell: the pivot criterion W, the separating
// curve d(x) and the four limit integrals (band powers and band occupancies)
// over the regions below and above the curve.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ffr/errors.hpp"
#include "ffr/fading.hpp"
#include "ffr/geometry.hpp"
#include "ffr/quadrature.hpp"
#include "ffr/roots.hpp"

namespace ffr {

/// (beta1, beta2, Q', Q'', xi): multipliers, powers of the (next, previous) stations, nuisance multiplier.
struct Theta {
    double beta1 = 0.0;
    double beta2 = 0.0;
    double q_next = 0.0;
    double q_prev = 0.0;
    double xi = 0.0;
};

/// Geometry, path loss and noise needed to evaluate g1/g2 anywhere in a sector.
class LimitModel {
public:
    LimitModel(SectorGeometry g, PathLossModel pl, double noise_var)
        : geom_(g), pl_(std::move(pl)), noise_var_(noise_var)
    {
        if (!(noise_var > 0.0)) throw domain_error("LimitModel: noise variance must be positive");
    }

    static LimitModel from_scenario(const NetworkScenario& s)
    {
        return LimitModel(s.geometry, s.pathloss, s.noise_var());
    }

    const SectorGeometry& geometry() const { return geom_; }
    const PathLossModel& pathloss() const { return pl_; }
    double noise_var() const { return noise_var_; }

    ChannelGains gains(double x, double y) const
    {
        ChannelGains g;
        g.direct = pl_.gain(std::hypot(x, y));
        for (int s = 0; s < 2; ++s) {
            Point b = geom_.station(s);
            g.cross[s] = pl_.gain(std::hypot(x - b.x, y - b.y));
        }
        return g;
    }

    double g2(double x, double y) const { return pl_.gain(std::hypot(x, y)) / noise_var_; }
    double g1(double x, double y, double q_next, double q_prev) const
    {
        return ginr(gains(x, y), noise_var_, q_next, q_prev);
    }

private:
    SectorGeometry geom_;
    PathLossModel pl_;
    double noise_var_;
};

/// Location density over the local sector frame; empty means uniform (1/area).
using Density = std::function<double(double, double)>;

/// W(x,y) = (g1/(1+xi)) F(g1 beta1/(1+xi)) - g2 F(g2 beta2).
/// Positive: the position belongs to the reused band; negative: protected band.
inline double pivot_criterion(const Theta& th, double x, double y, const LimitModel& m)
{
    const ChannelGains ch = m.gains(x, y);
    const double g2 = ch.direct / m.noise_var();
    const double a = ginr(ch, m.noise_var(), th.q_next, th.q_prev) / (1.0 + th.xi);
    return a * fading().cap_F(a * th.beta1) - g2 * fading().cap_F(g2 * th.beta2);
}

enum class CurveBranch {
    station_border, ///< W < 0 already at the border nearest the station: whole line protected
    far_border,     ///< W > 0 on both borders: whole line in the reused band
    zero            ///< interior zero of y -> W(x, y)
};

struct CurveSample {
    double y = 0.0;
    CurveBranch branch = CurveBranch::zero;
};

inline CurveBranch curve_branch(const Theta& th, double x, const LimitModel& m)
{
    const SectorGeometry& g = m.geometry();
    double wlo = pivot_criterion(th, x, g.lower(x), m);
    if (wlo < 0.0) return CurveBranch::station_border;
    double whi = pivot_criterion(th, x, g.upper(x), m);
    if (std::min(wlo, whi) > 0.0) return CurveBranch::far_border;
    return CurveBranch::zero;
}

/// d(x) by the three-branch rule; the zero is bracketed to tol_rel * D.
/// With check_samples > 0 the line is sampled and more than one sign change raises integrity_error.
inline CurveSample separating_curve_sample(const Theta& th, double x, const LimitModel& m, int check_samples = 0,
                                           double tol_rel = 1e-9)
{
    const SectorGeometry& g = m.geometry();
    const double D = g.radius;
    if (x < -D - 1e-12 * D || x > D + 1e-12 * D) throw domain_error("separating_curve: x outside [-D, D]");
    x = std::clamp(x, -D, D);
    const double lo = g.lower(x), hi = g.upper(x);
    auto w = [&](double y) { return pivot_criterion(th, x, y, m); };
    const double wlo = w(lo);
    if (check_samples > 0) {
        int changes = 0;
        double prev = wlo;
        for (int i = 1; i <= check_samples; ++i) {
            double v = w(lo + (hi - lo) * i / check_samples);
            if ((v > 0.0) != (prev > 0.0) && v != 0.0 && prev != 0.0) ++changes;
            prev = v;
        }
        if (changes > 1)
            throw integrity_error("separating_curve: W changes sign " + std::to_string(changes)
                                  + " times on line x = " + std::to_string(x));
    }
    if (wlo < 0.0) return {lo, CurveBranch::station_border};
    const double whi = w(hi);
    if (std::min(wlo, whi) > 0.0) return {hi, CurveBranch::far_border};
    if (whi == 0.0) return {hi, CurveBranch::zero};
    if (wlo == 0.0) return {lo, CurveBranch::zero};
    double y = brent_root(w, lo, hi, wlo, whi, tol_rel * D, 0.0);
    return {y, CurveBranch::zero};
}

inline double separating_curve(const Theta& th, double x, const LimitModel& m, int check_samples = 0,
                               double tol_rel = 1e-9)
{
    return separating_curve_sample(th, x, m, check_samples, tol_rel).y;
}

/// How the reused/protected split of the sector is decided.
enum class CurveMode {
    theta,     ///< the separating curve of theta
    all_band1, ///< the whole sector uses the reused band
    all_band2  ///< the whole sector is protected
};

struct QuadratureSpec {
    int order = 10;          ///< Gauss-Legendre nodes per panel
    double grading = 4.0;    ///< geometric panel ratio toward the station
    double max_panel = 0.25; ///< largest x panel, in units of D
    int branch_samples = 48; ///< samples per x segment used to locate branch changes of d
    double curve_tol = 1e-12; ///< curve root tolerance, in units of D
    bool use_mirror = true;   ///< integrate x >= 0 only when the integrand is even in x
};

/// R-bar-scaled band powers and occupancies of one cell.
struct LimitValues {
    double q1 = 0.0;
    double q2 = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
};

namespace detail {

// Breakpoints of [a, b] graded geometrically away from `origin` (which lies at or below a).
inline void graded_points(double a, double b, double origin, double scale, double ratio, double max_width,
                          std::vector<double>& out)
{
    out.clear();
    out.push_back(a);
    double s = std::max(a - origin, scale);
    double next = origin + s * ratio;
    double cur = a;
    while (true) {
        double target = std::min(next, b);
        while (target - cur > max_width * 1.0000001) {
            cur += max_width;
            out.push_back(cur);
        }
        if (target >= b) break;
        cur = target;
        out.push_back(cur);
        next = origin + (next - origin) * ratio;
    }
    out.push_back(b);
}

} // namespace detail

/// The four limit integrals of one cell for rate density rbar.
inline LimitValues limit_integrals(const Theta& th, double rbar, const Density& density, const LimitModel& m,
                                   const QuadratureSpec& spec = {}, CurveMode mode = CurveMode::theta)
{
    const SectorGeometry& g = m.geometry();
    const double D = g.radius, eps = g.epsilon;
    const double uniform = 1.0 / g.area();
    const GaussRule& rule = gauss_rule(spec.order);
    const double nv = m.noise_var();
    LimitValues out;
    if (rbar == 0.0) return out;
    if (rbar < 0.0) throw domain_error("limit_integrals: negative rate density");

    // uniform density and equal neighbour powers: the integrand is even in x
    const bool mirror = spec.use_mirror && !density && th.q_next == th.q_prev;

    // x breakpoints: kinks of the sector borders and branch changes of the curve
    const double xe = std::min(kSqrt3 * eps, D);
    std::vector<double> bp = mirror ? std::vector<double>{0.0, xe, D} : std::vector<double>{-D, -xe, 0.0, xe, D};
    if (mode == CurveMode::theta && spec.branch_samples > 0) {
        std::vector<double> extra;
        for (std::size_t s = 0; s + 1 < bp.size(); ++s) {
            double a = bp[s], b = bp[s + 1];
            int n = spec.branch_samples;
            double xa = a;
            CurveBranch la = curve_branch(th, xa, m);
            for (int i = 1; i <= n; ++i) {
                double xb = a + (b - a) * i / n;
                CurveBranch lb = curve_branch(th, xb, m);
                if (lb != la) {
                    double l = xa, r = xb;
                    for (int it = 0; it < 60 && r - l > 1e-13 * D; ++it) {
                        double mid = 0.5 * (l + r);
                        if (curve_branch(th, mid, m) == la) l = mid; else r = mid;
                    }
                    extra.push_back(0.5 * (l + r));
                }
                xa = xb;
                la = lb;
            }
        }
        bp.insert(bp.end(), extra.begin(), extra.end());
        std::sort(bp.begin(), bp.end());
        bp.erase(std::unique(bp.begin(), bp.end(), [D](double p, double q) { return q - p < 1e-12 * D; }), bp.end());
    }

    std::vector<double> xpan, ypan;
    auto inner = [&](double x, double a, double b, bool band1, double wx) {
        if (!(b > a)) return;
        detail::graded_points(a, b, a - std::max(std::hypot(x, a), eps), 0.0, spec.grading, 2.0 * D, ypan);
        for (std::size_t p = 0; p + 1 < ypan.size(); ++p) {
            double ya = ypan[p], yb = ypan[p + 1];
            double half = 0.5 * (yb - ya), mid = 0.5 * (yb + ya);
            for (std::size_t i = 0; i < rule.x.size(); ++i) {
                double y = mid + half * rule.x[i];
                double w = wx * half * rule.w[i] * (density ? density(x, y) : uniform);
                if (w == 0.0) continue;
                ChannelGains ch = m.gains(x, y);
                if (band1) {
                    double g1 = ginr(ch, nv, th.q_next, th.q_prev);
                    Inversion inv = fading().invert(g1 / (1.0 + th.xi) * th.beta1);
                    out.q1 += w * inv.arg / (g1 * inv.log_term);
                    out.gamma1 += w / inv.log_term;
                } else {
                    double g2 = ch.direct / nv;
                    Inversion inv = fading().invert(g2 * th.beta2);
                    out.q2 += w * inv.arg / (g2 * inv.log_term);
                    out.gamma2 += w / inv.log_term;
                }
            }
        }
    };

    for (std::size_t s = 0; s + 1 < bp.size(); ++s) {
        double a = bp[s], b = bp[s + 1];
        if (b - a <= 0.0) continue;
        // grade toward x = 0 on both sides
        if (a >= 0.0) {
            detail::graded_points(a, b, 0.0, xe, spec.grading, spec.max_panel * D, xpan);
        } else {
            detail::graded_points(-b, -a, 0.0, xe, spec.grading, spec.max_panel * D, xpan);
            for (double& v : xpan) v = -v;
            std::reverse(xpan.begin(), xpan.end());
        }
        for (std::size_t p = 0; p + 1 < xpan.size(); ++p) {
            double xa = xpan[p], xb = xpan[p + 1];
            double half = 0.5 * (xb - xa), mid = 0.5 * (xb + xa);
            for (std::size_t i = 0; i < rule.x.size(); ++i) {
                double x = mid + half * rule.x[i];
                double wx = half * rule.w[i];
                double lo = g.lower(x), hi = g.upper(x);
                double d;
                switch (mode) {
                case CurveMode::all_band1: d = hi; break;
                case CurveMode::all_band2: d = lo; break;
                default: d = separating_curve(th, x, m, 0, spec.curve_tol); break;
                }
                inner(x, lo, d, true, wx);
                inner(x, d, hi, false, wx);
            }
        }
    }
    const double scale = mirror ? 2.0 * rbar : rbar;
    out.q1 *= scale;
    out.q2 *= scale;
    out.gamma1 *= scale;
    out.gamma2 *= scale;
    return out;
}

} // namespace ffr
