#pragma once

// Large-system optimum. For each cell the limit system
//   Gamma1(theta) = alpha,  Gamma2(theta) = (1 - alpha)/3,  Q1(theta) = Q1^c
// is solved in (beta1, beta2, xi) for given reused-band powers of all cells;
// the reused-band powers themselves are chosen by minimizing the total limit power.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "ffr/errors.hpp"
#include "ffr/fading.hpp"
#include "ffr/geometry.hpp"
#include "ffr/interference_alloc.hpp"
#include "ffr/limit.hpp"
#include "ffr/roots.hpp"

namespace ffr {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct AsymptoticProfile {
    Triple rbar{};                        ///< rate per channel use of each cell, nats/s/Hz
    std::array<Density, kCells> density;  ///< empty: uniform over the sector
    double t = 15e-6;                     ///< users per Hz

    static AsymptoticProfile uniform(double rbar, double t = 15e-6)
    {
        AsymptoticProfile p;
        p.rbar = {rbar, rbar, rbar};
        p.t = t;
        return p;
    }

    bool symmetric() const
    {
        return rbar[0] == rbar[1] && rbar[1] == rbar[2] && !density[0] && !density[1] && !density[2];
    }
};

enum class SolveStatus { solved, no_solution, numeric_failure };

inline const char* to_string(SolveStatus s)
{
    switch (s) {
    case SolveStatus::solved: return "solved";
    case SolveStatus::no_solution: return "no_solution";
    default: return "numeric_failure";
    }
}

inline const char* to_string(CurveMode m)
{
    switch (m) {
    case CurveMode::theta: return "curve";
    case CurveMode::all_band1: return "all_reused";
    default: return "all_protected";
    }
}

struct CellSolution {
    SolveStatus status = SolveStatus::numeric_failure;
    CurveMode mode = CurveMode::theta;
    Theta theta;
    LimitValues values;
    double residual = kInf; ///< max relative residual of the active equations
    int evaluations = 0;
    std::string message;

    bool ok() const { return status == SolveStatus::solved; }
    double power() const { return values.q1 + values.q2; }
};

struct SolverOptions {
    QuadratureSpec quad;
    double tol = 1e-10;     ///< Newton stop, max |log residual|
    int max_newton = 60;
    double fd_step = 1e-6;  ///< forward-difference step in log variables
    double max_step = 3.0;  ///< largest Newton move per log variable
};

namespace detail {

template <int N>
using Vec = std::array<double, N>;

template <int N>
bool gauss_solve(std::array<Vec<N>, N> a, Vec<N> b, Vec<N>& x)
{
    for (int k = 0; k < N; ++k) {
        int p = k;
        for (int i = k + 1; i < N; ++i)
            if (std::fabs(a[i][k]) > std::fabs(a[p][k])) p = i;
        if (!(std::fabs(a[p][k]) > 0.0) || !std::isfinite(a[p][k])) return false;
        std::swap(a[k], a[p]);
        std::swap(b[k], b[p]);
        for (int i = k + 1; i < N; ++i) {
            double f = a[i][k] / a[k][k];
            for (int j = k; j < N; ++j) a[i][j] -= f * a[k][j];
            b[i] -= f * b[k];
        }
    }
    for (int k = N - 1; k >= 0; --k) {
        double s = b[k];
        for (int j = k + 1; j < N; ++j) s -= a[k][j] * x[j];
        x[k] = s / a[k][k];
    }
    return true;
}

template <int N>
double inf_norm(const Vec<N>& v)
{
    double m = 0.0;
    for (double e : v) m = std::max(m, std::fabs(e));
    return m;
}

template <int N>
struct NewtonOutcome {
    bool converged = false;
    Vec<N> x{};
    Vec<N> r{};
    int iterations = 0;
};

// Damped Newton with a forward-difference Jacobian. fn returns nullopt where the
// residual is undefined; `floor` bounds each variable from below.
template <int N, class Fn>
NewtonOutcome<N> newton(Fn&& fn, Vec<N> x, const Vec<N>& floor, const SolverOptions& o)
{
    NewtonOutcome<N> out;
    auto r0 = fn(x);
    if (!r0) return out;
    Vec<N> r = *r0;
    for (int it = 0; it < o.max_newton; ++it) {
        out.iterations = it;
        if (inf_norm<N>(r) <= o.tol) {
            out.converged = true;
            break;
        }
        std::array<Vec<N>, N> J{};
        for (int j = 0; j < N; ++j) {
            Vec<N> xp = x;
            double h = o.fd_step;
            xp[j] += h;
            auto rp = fn(xp);
            if (!rp) {
                xp[j] = x[j] - h;
                rp = fn(xp);
                h = -h;
                if (!rp) return out;
            }
            for (int i = 0; i < N; ++i) J[i][j] = ((*rp)[i] - r[i]) / h;
        }
        Vec<N> neg{}, dx{};
        for (int i = 0; i < N; ++i) neg[i] = -r[i];
        if (!gauss_solve<N>(J, neg, dx)) return out;
        double big = inf_norm<N>(dx);
        if (big > o.max_step)
            for (double& d : dx) d *= o.max_step / big;
        double lam = 1.0, n0 = inf_norm<N>(r);
        bool moved = false;
        for (int ls = 0; ls < 12; ++ls, lam *= 0.5) {
            Vec<N> xt;
            for (int i = 0; i < N; ++i) xt[i] = std::max(x[i] + lam * dx[i], floor[i]);
            auto rt = fn(xt);
            if (rt && inf_norm<N>(*rt) < n0) {
                x = xt;
                r = *rt;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    out.x = x;
    out.r = r;
    if (inf_norm<N>(r) <= o.tol) out.converged = true;
    return out;
}

} // namespace detail

/// Limit system of the three cells at a fixed reuse factor.
class LimitSystem {
public:
    LimitSystem(LimitModel model, AsymptoticProfile profile, double alpha, SolverOptions opt = {})
        : model_(std::move(model)), profile_(std::move(profile)), alpha_(alpha), opt_(opt)
    {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw domain_error("LimitSystem: alpha must lie in [0, 1]");
        for (double r : profile_.rbar)
            if (!(r >= 0.0) || !std::isfinite(r)) throw domain_error("LimitSystem: rates must be finite and >= 0");
    }

    const LimitModel& model() const { return model_; }
    const AsymptoticProfile& profile() const { return profile_; }
    const SolverOptions& options() const { return opt_; }
    double alpha() const { return alpha_; }
    double protected_share() const { return (1.0 - alpha_) / 3.0; }
    long evaluations() const { return evals_; }

    LimitValues values(int c, const Theta& th, CurveMode mode = CurveMode::theta) const
    {
        ++evals_;
        return limit_integrals(th, profile_.rbar[c], profile_.density[c], model_, opt_.quad, mode);
    }

    /// Cell with zero rate: nothing to transmit.
    CellSolution idle(int c, double qn, double qp) const
    {
        CellSolution s;
        s.status = SolveStatus::solved;
        s.mode = alpha_ > 0.0 ? CurveMode::all_band1 : CurveMode::all_band2;
        s.theta = {0.0, 0.0, qn, qp, 0.0};
        s.residual = 0.0;
        (void)c;
        return s;
    }

    /// Whole sector protected; the reused band carries no power (limit of Q1 -> 0).
    CellSolution all_protected(int c) const
    {
        if (profile_.rbar[c] == 0.0) return idle(c, 0.0, 0.0);
        if (!(protected_share() > 0.0)) throw domain_error("all_protected: no protected band at alpha = 1");
        CellSolution s;
        s.mode = CurveMode::all_band2;
        const int before = int(evals_);
        const double T2 = protected_share();
        Theta th{};
        try {
            double b2 = solve_decreasing_log(
                [&](double b) {
                    th.beta2 = b;
                    return std::log(values(c, th, CurveMode::all_band2).gamma2 / T2);
                },
                centroid_beta(c, T2, 0.0, 0.0, false), 1e-13);
            th.beta2 = b2;
            s.values = values(c, th, CurveMode::all_band2);
            s.theta = th;
            s.residual = std::fabs(s.values.gamma2 / T2 - 1.0);
            s.status = SolveStatus::solved;
        } catch (const std::exception& e) {
            s.message = e.what();
        }
        s.evaluations = int(evals_) - before;
        return s;
    }

    /// Whole sector reused (no protected band), for neighbour powers (qn, qp).
    CellSolution all_reused(int c, double qn, double qp) const
    {
        if (profile_.rbar[c] == 0.0) return idle(c, qn, qp);
        if (!(alpha_ > 0.0)) throw domain_error("all_reused: no reused band at alpha = 0");
        CellSolution s;
        s.mode = CurveMode::all_band1;
        const int before = int(evals_);
        Theta th{0.0, 0.0, qn, qp, 0.0};
        try {
            double b1 = solve_decreasing_log(
                [&](double b) {
                    th.beta1 = b;
                    return std::log(values(c, th, CurveMode::all_band1).gamma1 / alpha_);
                },
                centroid_beta(c, alpha_, qn, qp, true), 1e-13);
            th.beta1 = b1;
            s.values = values(c, th, CurveMode::all_band1);
            s.theta = th;
            s.residual = std::fabs(s.values.gamma1 / alpha_ - 1.0);
            s.status = SolveStatus::solved;
        } catch (const std::exception& e) {
            s.message = e.what();
        }
        s.evaluations = int(evals_) - before;
        return s;
    }

    /// Both sharing equations at fixed xi (xi = 0: the free solution).
    CellSolution solve_pair(int c, double qn, double qp, double xi, const CellSolution* warm = nullptr) const
    {
        if (profile_.rbar[c] == 0.0) return idle(c, qn, qp);
        require_interior();
        const int before = int(evals_);
        const double T2 = protected_share();
        auto theta_of = [&](const detail::Vec<2>& x) { return Theta{std::exp(x[0]), std::exp(x[1]), qn, qp, xi}; };
        auto fn = [&](const detail::Vec<2>& x) -> std::optional<detail::Vec<2>> {
            LimitValues v = values(c, theta_of(x));
            if (!(v.gamma1 > 0.0) || !(v.gamma2 > 0.0)) return std::nullopt;
            return detail::Vec<2>{std::log(v.gamma1 / alpha_), std::log(v.gamma2 / T2)};
        };
        detail::Vec<2> x0 = warm && warm->mode == CurveMode::theta && warm->theta.beta1 > 0.0
                                ? detail::Vec<2>{std::log(warm->theta.beta1), std::log(warm->theta.beta2)}
                                : detail::Vec<2>{std::log(centroid_beta(c, alpha_, qn, qp, true) / (1.0 + xi)),
                                                 std::log(centroid_beta(c, T2, 0.0, 0.0, false))};
        const double lo = -std::numeric_limits<double>::max();
        auto nw = detail::newton<2>(fn, x0, {lo, lo}, opt_);
        CellSolution s;
        Theta th;
        if (nw.converged) {
            th = theta_of(nw.x);
        } else {
            try {
                th = nested_pair(c, qn, qp, xi, x0);
            } catch (const std::exception& e) {
                s.message = std::string("pair solve failed: ") + e.what();
                s.evaluations = int(evals_) - before;
                return s;
            }
        }
        finish(s, c, th, kNaN);
        s.evaluations = int(evals_) - before;
        return s;
    }

    CellSolution solve_free(int c, double qn, double qp, const CellSolution* warm = nullptr) const
    {
        return solve_pair(c, qn, qp, 0.0, warm);
    }

    /// (beta1, beta2, xi) for the reused-band power q1 of this cell, or no_solution when
    /// even xi = 0 cannot reach q1.
    CellSolution solve_for_q1(int c, double q1, double qn, double qp, const CellSolution* warm = nullptr,
                              const CellSolution* free_hint = nullptr) const
    {
        if (!(q1 >= 0.0) || !(qn >= 0.0) || !(qp >= 0.0)) throw domain_error("solve_for_q1: powers must be >= 0");
        if (profile_.rbar[c] == 0.0) {
            CellSolution s = idle(c, qn, qp);
            if (q1 > 0.0) {
                s.status = SolveStatus::no_solution;
                s.message = "idle cell cannot carry reused-band power";
            }
            return s;
        }
        if (alpha_ == 0.0) {
            CellSolution s = all_protected(c);
            if (q1 > 0.0 && s.ok()) { s.status = SolveStatus::no_solution; s.message = "no reused band"; }
            return s;
        }
        if (alpha_ == 1.0) {
            CellSolution s = all_reused(c, qn, qp);
            if (s.ok() && std::fabs(s.values.q1 - q1) > 1e-9 * std::max(q1, s.values.q1)) {
                s.status = SolveStatus::no_solution;
                s.message = "without a protected band the reused-band power is fixed by the neighbours";
            }
            return s;
        }
        if (q1 == 0.0) {
            CellSolution s = all_protected(c);
            s.theta.q_next = qn;
            s.theta.q_prev = qp;
            return s;
        }
        if (qn == 0.0 && qp == 0.0) {
            CellSolution s = idle(c, qn, qp);
            s.status = SolveStatus::no_solution;
            s.message = "no interference: the two bands are interchangeable and the split is not unique";
            return s;
        }
        const int before = int(evals_);
        CellSolution fr = free_hint ? *free_hint : solve_free(c, qn, qp, warm);
        if (!fr.ok()) {
            fr.evaluations = int(evals_) - before;
            return fr;
        }
        const double qf = fr.values.q1;
        if (q1 > qf * (1.0 + 1e-9)) {
            CellSolution s = fr;
            s.status = SolveStatus::no_solution;
            s.message = "target reused-band power exceeds the unconstrained one";
            s.evaluations = int(evals_) - before;
            return s;
        }
        if (q1 >= qf * (1.0 - 1e-9)) {
            fr.residual = std::max(fr.residual, std::fabs(qf / q1 - 1.0));
            fr.evaluations = int(evals_) - before;
            return fr;
        }
        const double T2 = protected_share();
        auto theta_of = [&](const detail::Vec<3>& x) {
            return Theta{std::exp(x[0]), std::exp(x[1]), qn, qp, std::expm1(x[2])};
        };
        auto fn = [&](const detail::Vec<3>& x) -> std::optional<detail::Vec<3>> {
            LimitValues v = values(c, theta_of(x));
            if (!(v.gamma1 > 0.0) || !(v.gamma2 > 0.0) || !(v.q1 > 0.0)) return std::nullopt;
            return detail::Vec<3>{std::log(v.gamma1 / alpha_), std::log(v.gamma2 / T2), std::log(v.q1 / q1)};
        };
        detail::Vec<3> x0;
        const CellSolution* w = (warm && warm->ok() && warm->mode == CurveMode::theta && warm->theta.beta1 > 0.0) ? warm : &fr;
        x0 = {std::log(w->theta.beta1), std::log(w->theta.beta2), std::log1p(w->theta.xi)};
        if (w == &fr || x0[2] == 0.0) {
            // first move off xi = 0; shrink it until the residual is defined
            double v = 0.5 * std::log(qf / q1);
            const detail::Vec<3> base = x0;
            double best = kInf;
            for (int k = 0; k < 8; ++k, v *= 0.5) {
                for (double shift : {0.0, v}) {
                    detail::Vec<3> xt{base[0] + shift, base[1], v};
                    auto r = fn(xt);
                    if (r && detail::inf_norm<3>(*r) < best) {
                        best = detail::inf_norm<3>(*r);
                        x0 = xt;
                    }
                }
                if (std::isfinite(best)) break;
            }
        }
        const double lo = -std::numeric_limits<double>::max();
        auto nw = detail::newton<3>(fn, x0, {lo, lo, 0.0}, opt_);
        CellSolution s;
        Theta th;
        if (nw.converged) {
            th = theta_of(nw.x);
        } else {
            try {
                th = nested_xi(c, q1, qn, qp, fr);
            } catch (const std::exception& e) {
                s.message = std::string("xi solve failed: ") + e.what();
                s.evaluations = int(evals_) - before;
                return s;
            }
        }
        finish(s, c, th, q1);
        s.evaluations = int(evals_) - before;
        return s;
    }

private:
    static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

    void require_interior() const
    {
        if (!(alpha_ > 0.0 && alpha_ < 1.0))
            throw domain_error("LimitSystem: both bands must be present (0 < alpha < 1)");
    }

    // beta putting the whole cell rate at the centroid gain onto `share`
    double centroid_beta(int c, double share, double qn, double qp, bool reused) const
    {
        const SectorGeometry& g = model_.geometry();
        const double yc = g.radius / kSqrt3;
        const double gain = reused ? model_.g1(0.0, yc, qn, qp) : model_.g2(0.0, yc);
        const double u = profile_.rbar[c] / share;
        return fading().f(fading().expected_log_inv(u)) / gain;
    }

    void finish(CellSolution& s, int c, const Theta& th, double q1) const
    {
        s.theta = th;
        s.mode = CurveMode::theta;
        s.values = values(c, th);
        double r = std::max(std::fabs(s.values.gamma1 / alpha_ - 1.0),
                            std::fabs(s.values.gamma2 / protected_share() - 1.0));
        if (!std::isnan(q1)) r = std::max(r, std::fabs(s.values.q1 / q1 - 1.0));
        s.residual = r;
        if (r <= 1e-6) {
            s.status = SolveStatus::solved;
        } else {
            s.status = SolveStatus::numeric_failure;
            s.message = "residual " + std::to_string(r) + " above 1e-6";
        }
    }

    // Monotone fallback: beta1 from the reused-band share for each beta2, then beta2 from the protected share.
    Theta nested_pair(int c, double qn, double qp, double xi, const detail::Vec<2>& x0) const
    {
        const double T2 = protected_share();
        Theta th{std::exp(x0[0]), std::exp(x0[1]), qn, qp, xi};
        auto beta1_for = [&](double b2) {
            Theta t = th;
            t.beta2 = b2;
            return solve_decreasing_log(
                [&](double b1) {
                    t.beta1 = b1;
                    return values(c, t).gamma1 - alpha_;
                },
                th.beta1, 1e-12);
        };
        double b2 = solve_decreasing_log(
            [&](double b2v) {
                th.beta1 = beta1_for(b2v);
                th.beta2 = b2v;
                return values(c, th).gamma2 - T2;
            },
            th.beta2, 1e-12);
        th.beta2 = b2;
        th.beta1 = beta1_for(b2);
        return th;
    }

    // Monotone fallback: Q1 decreases in xi; each probe solves the pair at that xi.
    Theta nested_xi(int c, double q1, double qn, double qp, const CellSolution& fr) const
    {
        CellSolution last = fr;
        auto q_at = [&](double v) {
            CellSolution s = solve_pair(c, qn, qp, std::expm1(v), &last);
            if (!s.ok()) throw convergence_error("pair solve failed inside xi search");
            last = s;
            return std::log(s.values.q1 / q1);
        };
        double lo = 0.0, flo = std::log(fr.values.q1 / q1), hi = 0.5, fhi = q_at(hi);
        while (fhi > 0.0) {
            lo = hi;
            flo = fhi;
            hi *= 2.0;
            if (hi > 700.0) throw convergence_error("xi search: no bracket");
            fhi = q_at(hi);
        }
        double v = brent_root(q_at, lo, hi, flo, fhi, 1e-13, 1e-13);
        CellSolution s = solve_pair(c, qn, qp, std::expm1(v), &last);
        return s.theta;
    }

    LimitModel model_;
    AsymptoticProfile profile_;
    double alpha_;
    SolverOptions opt_;
    mutable long evals_ = 0;
};

/// Separating curve sampled on a uniform x grid; linear interpolation between samples.
struct CurveTable {
    std::vector<double> x;
    std::vector<double> d;

    bool empty() const { return x.empty(); }

    double operator()(double xv) const
    {
        if (x.empty()) throw domain_error("CurveTable: empty table");
        if (x.size() == 1) return d[0];
        xv = std::clamp(xv, x.front(), x.back());
        double h = (x.back() - x.front()) / double(x.size() - 1);
        std::size_t i = std::min(std::size_t((xv - x.front()) / h), x.size() - 2);
        double w = (xv - x[i]) / (x[i + 1] - x[i]);
        return (1.0 - w) * d[i] + w * d[i + 1];
    }

    /// Constant border curves.
    static CurveTable border(const SectorGeometry& g, bool upper_border, int samples = 512)
    {
        CurveTable t;
        for (int i = 0; i < samples; ++i) {
            double xv = -g.radius + 2.0 * g.radius * i / (samples - 1);
            t.x.push_back(xv);
            t.d.push_back(upper_border ? g.upper(xv) : g.lower(xv));
        }
        return t;
    }
};

/// Tabulates d for a solved cell. check_samples > 0 verifies a single sign change per line.
inline CurveTable tabulate_curve(const CellSolution& s, const LimitModel& m, int samples = 512, int check_samples = 32)
{
    const SectorGeometry& g = m.geometry();
    if (samples < 2) throw domain_error("tabulate_curve: need at least two samples");
    if (s.mode == CurveMode::all_band1) return CurveTable::border(g, true, samples);
    if (s.mode == CurveMode::all_band2) return CurveTable::border(g, false, samples);
    CurveTable t;
    for (int i = 0; i < samples; ++i) {
        double xv = -g.radius + 2.0 * g.radius * i / (samples - 1);
        t.x.push_back(xv);
        t.d.push_back(separating_curve(s.theta, xv, m, check_samples));
    }
    return t;
}

struct Algorithm4Options {
    SolverOptions solver;
    int grid_points = 12;         ///< log grid on the diagonal (plus the point 0)
    double floor_ratio = 1e-3;    ///< lowest grid point relative to the ceiling
    int refine_bits = 24;         ///< golden refinement precision in log q
    bool force_full_grid = false; ///< full 3-D grid even for symmetric profiles
    int full_grid_points = 5;     ///< per-cell points of the 3-D grid (plus 0)
    int curve_samples = 512;
    int curve_check = 32;         ///< samples per line for the uniqueness check of d
};

struct GridPoint {
    Triple q1{};
    double q_total = kInf;
};

struct AsymptoticSolution {
    double alpha = 0.0;
    std::array<CellSolution, kCells> cells;
    Triple q1{}, q2{};
    double q_total = kInf;
    std::array<CurveTable, kCells> curves;
    double max_residual = 0.0;
    std::string search;            ///< "diagonal", "grid" or "endpoint"
    Triple q_ceiling{};            ///< upper end of the search box (unconstrained fixed point or all-protected power)
    std::vector<GridPoint> probes; ///< every evaluated point, in evaluation order
    int failures = 0;              ///< probes that ended in numeric_failure
    long evaluations = 0;          ///< limit-integral evaluations
};

namespace detail {

inline void finalize(AsymptoticSolution& s, const LimitSystem& sys, const Algorithm4Options& o)
{
    s.alpha = sys.alpha();
    s.q_total = 0.0;
    s.max_residual = 0.0;
    for (int c = 0; c < kCells; ++c) {
        const CellSolution& cs = s.cells[c];
        s.q1[c] = cs.values.q1;
        s.q2[c] = cs.values.q2;
        s.q_total += cs.power();
        s.max_residual = std::max(s.max_residual, cs.residual);
        s.curves[c] = tabulate_curve(cs, sys.model(), o.curve_samples, o.curve_check);
    }
    s.evaluations = sys.evaluations();
}

// Reused-band fixed point of the unconstrained (xi = 0) cells.
inline Triple free_fixed_point(const LimitSystem& sys, std::array<CellSolution, kCells>& last)
{
    if (sys.profile().symmetric()) {
        // at q = 0 the two bands are interchangeable; bracket strictly inside (0, inf)
        CellSolution w;
        const double q0 = sys.all_protected(0).values.q2;
        if (q0 == 0.0) return {0.0, 0.0, 0.0};
        auto h = [&](double q) {
            CellSolution s = sys.solve_free(0, q, q, w.ok() ? &w : nullptr);
            if (!s.ok()) throw convergence_error("free solve failed: " + s.message);
            w = s;
            return s.values.q1 - q;
        };
        double lo = q0, flo = h(lo), hi = lo, fhi = flo;
        while (flo <= 0.0) {
            hi = lo;
            fhi = flo;
            lo *= 0.25;
            if (lo < 1e-30 * q0) throw convergence_error("free fixed point: no bracket below");
            flo = h(lo);
        }
        while (fhi > 0.0) {
            lo = hi;
            flo = fhi;
            hi *= 2.0;
            if (hi > 1e30 * q0) throw convergence_error("free fixed point: no bracket above");
            fhi = h(hi);
        }
        double q = brent_root(h, lo, hi, flo, fhi, 0.0, 1e-12);
        last[0] = last[1] = last[2] = sys.solve_free(0, q, q, &w);
        return {q, q, q};
    }
    CellMap map = [&](int c, double qn, double qp) {
        CellSolution s = sys.solve_free(c, qn, qp, last[c].ok() ? &last[c] : nullptr);
        if (!s.ok()) throw convergence_error("free solve failed: " + s.message);
        last[c] = s;
        return s.values.q1;
    };
    PingPongOptions po;
    po.accuracy = 1e-10;
    po.polish_tol = 0.0;
    FixedPointResult r = gauss_seidel(map, po);
    if (!r.ok()) throw convergence_error("free fixed point: " + std::string(to_string(r.status)) + " " + r.message);
    return r.q;
}

} // namespace detail

/// Evaluates one candidate triple of reused-band powers: total power or +inf.
inline double evaluate_triple(const LimitSystem& sys, const Triple& q, std::array<CellSolution, kCells>& cells,
                              const std::array<CellSolution, kCells>* warm = nullptr, int* failures = nullptr)
{
    double total = 0.0;
    for (int c = 0; c < kCells; ++c) {
        auto nb = neighbors(c);
        cells[c] = sys.solve_for_q1(c, q[c], q[nb[0]], q[nb[1]], warm ? &(*warm)[c] : nullptr);
        if (!cells[c].ok()) {
            if (failures && cells[c].status == SolveStatus::numeric_failure) ++*failures;
            return kInf;
        }
        total += cells[c].power();
    }
    return total;
}

/// Search over reused-band powers for the smallest total limit power at this alpha.
/// Symmetric profiles search the diagonal (log grid, then golden refinement); otherwise
/// (or with force_full_grid) a full 3-D grid is scanned.
inline AsymptoticSolution algorithm4(const AsymptoticProfile& profile, const LimitModel& model, double alpha,
                                     const Algorithm4Options& o = {})
{
    LimitSystem sys(model, profile, alpha, o.solver);
    AsymptoticSolution best;
    best.alpha = alpha;

    if (profile.rbar[0] == 0.0 && profile.rbar[1] == 0.0 && profile.rbar[2] == 0.0) {
        for (int c = 0; c < kCells; ++c) best.cells[c] = sys.idle(c, 0.0, 0.0);
        best.search = "endpoint";
        detail::finalize(best, sys, o);
        return best;
    }
    if (alpha == 0.0) {
        for (int c = 0; c < kCells; ++c) best.cells[c] = sys.all_protected(c);
        best.search = "endpoint";
    } else if (alpha == 1.0) {
        std::array<CellSolution, kCells> last;
        CellMap map = [&](int c, double qn, double qp) {
            CellSolution s = sys.all_reused(c, qn, qp);
            if (!s.ok()) throw convergence_error("reused-band solve failed: " + s.message);
            last[c] = s;
            return s.values.q1;
        };
        PingPongOptions po;
        po.accuracy = 1e-10;
        po.polish_tol = 0.0;
        FixedPointResult r = gauss_seidel(map, po);
        if (!r.ok())
            throw infeasible_error("asymptotically infeasible for alpha = 1: " + std::string(to_string(r.status)));
        for (int c = 0; c < kCells; ++c) {
            auto nb = neighbors(c);
            best.cells[c] = sys.all_reused(c, r.q[nb[0]], r.q[nb[1]]);
        }
        best.search = "endpoint";
    }
    if (alpha == 0.0 || alpha == 1.0) {
        for (const CellSolution& cs : best.cells)
            if (!cs.ok()) throw convergence_error("endpoint solve failed: " + cs.message);
        detail::finalize(best, sys, o);
        return best;
    }

    std::array<CellSolution, kCells> free_cells;
    Triple qfp = detail::free_fixed_point(sys, free_cells);
    Triple ceil{};
    std::array<CellSolution, kCells> prot;
    for (int c = 0; c < kCells; ++c) {
        prot[c] = sys.all_protected(c);
        if (!prot[c].ok()) throw convergence_error("all-protected solve failed: " + prot[c].message);
        ceil[c] = std::min(qfp[c], prot[c].values.q2);
    }
    best.q_ceiling = ceil;
    int failures = 0;
    std::vector<GridPoint> probes;

    std::array<CellSolution, kCells> best_cells = prot;
    double best_total = 0.0;
    for (const CellSolution& p : prot) best_total += p.power();
    probes.push_back({{0.0, 0.0, 0.0}, best_total});

    const bool diagonal = profile.symmetric() && !o.force_full_grid;
    if (diagonal) {
        const double qc = ceil[0];
        const int n = std::max(o.grid_points, 2);
        std::vector<double> grid(n);
        for (int i = 0; i < n; ++i) grid[i] = qc * std::pow(o.floor_ratio, double(i) / (n - 1));
        std::vector<double> totals(n, kInf);
        std::array<CellSolution, kCells> warm = free_cells, cur;
        // cell A alone: the other two are its rotations
        auto eval = [&](double q) {
            CellSolution s = sys.solve_for_q1(0, q, q, q, warm[0].ok() ? &warm[0] : nullptr);
            if (!s.ok()) {
                if (s.status == SolveStatus::numeric_failure) ++failures;
                return kInf;
            }
            warm[0] = s;
            cur = {s, s, s};
            return 3.0 * s.power();
        };
        int bi = -1;
        for (int i = 0; i < n; ++i) {
            totals[i] = eval(grid[i]);
            probes.push_back({{grid[i], grid[i], grid[i]}, totals[i]});
            if (totals[i] < best_total) {
                best_total = totals[i];
                best_cells = cur;
                bi = i;
            }
        }
        if (bi >= 0) {
            double hi = std::log(grid[std::max(bi - 1, 0)]);
            double lo = std::log(grid[std::min(bi + 1, n - 1)]);
            warm = best_cells;
            auto obj = [&](double lq) {
                double v = eval(std::exp(lq));
                probes.push_back({{std::exp(lq), std::exp(lq), std::exp(lq)}, v});
                if (v < best_total) {
                    best_total = v;
                    best_cells = cur;
                }
                return v;
            };
            if (hi > lo) boost::math::tools::brent_find_minima(obj, lo, hi, o.refine_bits);
        }
        best.search = "diagonal";
    } else {
        const int n = std::max(o.full_grid_points, 1);
        std::array<std::vector<double>, kCells> axes;
        for (int c = 0; c < kCells; ++c) {
            axes[c].push_back(0.0);
            for (int i = 0; i < n; ++i)
                axes[c].push_back(ceil[c] * std::pow(o.floor_ratio, n == 1 ? 0.0 : double(n - 1 - i) / (n - 1)));
        }
        std::array<CellSolution, kCells> cur, warm = free_cells;
        for (double a : axes[0])
            for (double b : axes[1])
                for (double cc : axes[2]) {
                    Triple q{a, b, cc};
                    if (a == 0.0 && b == 0.0 && cc == 0.0) continue;
                    double v = evaluate_triple(sys, q, cur, &warm, &failures);
                    probes.push_back({q, v});
                    if (v < best_total) {
                        best_total = v;
                        best_cells = cur;
                    }
                    if (std::isfinite(v)) warm = cur;
                }
        best.search = "grid";
    }
    if (!std::isfinite(best_total)) throw infeasible_error("asymptotically infeasible for this alpha");
    best.cells = best_cells;
    best.probes = std::move(probes);
    best.failures = failures;
    detail::finalize(best, sys, o);
    return best;
}

struct AlphaTable {
    std::vector<double> alpha;
    std::vector<double> q_total;
    std::vector<AsymptoticSolution> solutions;
    std::size_t best = 0;
    double alpha_opt = 0.0;
};

/// Uniform grid 0, step, ..., 1.
inline std::vector<double> alpha_grid(double step = 0.05)
{
    if (!(step > 0.0 && step <= 1.0)) throw domain_error("alpha_grid: step must lie in (0, 1]");
    std::vector<double> g;
    int n = int(std::lround(1.0 / step));
    for (int i = 0; i <= n; ++i) g.push_back(std::min(1.0, i * step));
    if (g.back() < 1.0) g.push_back(1.0);
    return g;
}

/// Q_T on an alpha grid and its argmin (ties go to the smaller alpha).
inline AlphaTable optimal_alpha(const AsymptoticProfile& profile, const LimitModel& model,
                                const std::vector<double>& alphas, const Algorithm4Options& o = {})
{
    if (alphas.empty()) throw domain_error("optimal_alpha: empty alpha grid");
    AlphaTable t;
    double bv = kInf;
    for (double a : alphas) {
        double q = kInf;
        AsymptoticSolution s;
        try {
            s = algorithm4(profile, model, a, o);
            q = s.q_total;
        } catch (const infeasible_error&) {
        }
        t.alpha.push_back(a);
        t.q_total.push_back(q);
        t.solutions.push_back(std::move(s));
        if (q < bv) {
            bv = q;
            t.best = t.alpha.size() - 1;
        }
    }
    if (!std::isfinite(bv)) throw infeasible_error("optimal_alpha: every alpha on the grid is infeasible");
    t.alpha_opt = t.alpha[t.best];
    return t;
}

} // namespace ffr
