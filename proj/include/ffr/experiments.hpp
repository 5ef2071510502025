#pragma once

// Drivers for the numerical studies: reuse-factor sweep, separating-curve export,
// finite-K convergence toward Q_T, comparison with full reuse, ping-pong iteration
// counts and the cost of integer subcarrier counts. Each returns plain rows; the CLI
// and the acceptance run format them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ffr/asymptotic.hpp"
#include "ffr/errors.hpp"
#include "ffr/geometry.hpp"
#include "ffr/pipeline.hpp"

namespace ffr {

inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

struct ExperimentConfig {
    NetworkScenario scenario;        ///< users are drawn per replicate
    int users_per_sector = 25;
    Algorithm4Options asymptotic;
    double alpha_step = 0.05;
    std::optional<double> alpha;     ///< fixed reuse factor instead of the optimum
    PingPongOptions ping_pong;
    std::uint64_t seed = 1;
    int replicates = 500;

    std::vector<double> rates_bps;   ///< sum rate per sector r_T
    // convergence_vs_K
    std::vector<int> users_grid{10, 25, 50, 100};
    double users_per_hz = 15e-6;     ///< t = total users / B
    double rate_per_user_bps = 120e3;
    double subcarrier_spacing_hz = 1e4;
    // iteration_accuracy
    std::vector<double> accuracies{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    int iteration_budget = 15;
    // discrete_rounding
    std::vector<int> subcarrier_grid;
    bool fill_slack = true;
    int max_draw_factor = 10;        ///< draws allowed per requested valid seed
    // curve_export
    int curve_samples = 512;
};

/// Running summary of audit_allocation over every feasible result a study produces.
struct AuditTally {
    long checked = 0;
    long failed = 0;
    double max_rate_deficit = 0.0;
    double max_share_error = 0.0;

    void add(const AllocationResult& r, const NetworkScenario& s, bool exact_shares = true)
    {
        if (!r.feasible()) return;
        AuditReport a = audit_allocation(r, s, exact_shares);
        ++checked;
        failed += !a.pass();
        max_rate_deficit = std::max(max_rate_deficit, a.max_rate_deficit);
        max_share_error = std::max(max_share_error, a.max_share_error);
    }
    void merge(const AuditTally& o)
    {
        checked += o.checked;
        failed += o.failed;
        max_rate_deficit = std::max(max_rate_deficit, o.max_rate_deficit);
        max_share_error = std::max(max_share_error, o.max_share_error);
    }
};

/// Seed of replicate i: independent of evaluation order.
inline std::uint64_t replicate_seed(const ExperimentConfig& c, std::uint64_t stream, int i)
{
    return split_seed(split_seed(c.seed, stream), std::uint64_t(i));
}

/// Everything derived from the asymptotic analysis for one sum rate.
struct RateDesign {
    double rate_bps = 0.0;
    double rbar = 0.0;               ///< nats/s/Hz per sector
    double alpha = 0.0;
    AsymptoticSolution solution;
    std::vector<double> alphas;      ///< sweep grid (empty for a fixed alpha)
    std::vector<double> q_t;         ///< Q_T over the sweep grid
};

inline RateDesign make_design(const ExperimentConfig& c, const NetworkScenario& s, double rate_bps)
{
    if (!(rate_bps >= 0.0)) throw domain_error("make_design: negative rate");
    RateDesign d;
    d.rate_bps = rate_bps;
    d.rbar = bits_to_nats_per_hz(rate_bps, s.bandwidth);
    AsymptoticProfile p = AsymptoticProfile::uniform(d.rbar, double(kCells * c.users_per_sector) / s.bandwidth);
    LimitModel m = LimitModel::from_scenario(s);
    if (c.alpha) {
        d.alpha = *c.alpha;
        d.solution = algorithm4(p, m, d.alpha, c.asymptotic);
        return d;
    }
    AlphaTable t = optimal_alpha(p, m, alpha_grid(c.alpha_step), c.asymptotic);
    d.alpha = t.alpha_opt;
    d.alphas = t.alpha;
    d.q_t = t.q_total;
    d.solution = std::move(t.solutions[t.best]);
    return d;
}

inline std::vector<RateDesign> make_designs(const ExperimentConfig& c)
{
    if (c.rates_bps.empty()) throw domain_error("rate grid is empty");
    std::vector<RateDesign> out;
    for (double r : c.rates_bps) out.push_back(make_design(c, c.scenario, r));
    return out;
}

// ---------------------------------------------------------------------------

struct ConvergenceRow {
    int users = 0;                 ///< per sector
    double bandwidth = 0.0;
    int subcarriers = 0;
    double t = 0.0;
    double alpha = 0.0;
    double q_t = 0.0;
    double mean_q = 0.0;
    double gap_of_mean = 0.0;      ///< |E[Q] - Q_T| / Q_T
    double mean_abs_gap = 0.0;     ///< E|Q - Q_T| / Q_T
    double mean_sq_gap = 0.0;      ///< E[(Q - Q_T)^2] / Q_T^2
    double stderr_q = 0.0;         ///< standard error of E[Q] / Q_T
    int feasible = 0;
    int infeasible = 0;
};

struct ConvergenceStudy {
    RateDesign design;
    std::vector<ConvergenceRow> rows;
};

/// B grows with K at fixed t and fixed subcarrier spacing, so the per-sector rate density
/// and the noise per subcarrier stay put and one Q_T serves every K.
inline ConvergenceStudy run_convergence_vs_K(const ExperimentConfig& c, AuditTally* audit = nullptr)
{
    if (c.users_grid.empty()) throw domain_error("users grid is empty");
    const double rbar = c.rate_per_user_bps * kLn2 * c.users_per_hz / kCells;
    auto scen_for = [&](int k) {
        NetworkScenario s = c.scenario;
        s.bandwidth = kCells * k / c.users_per_hz;
        s.subcarriers = int(std::lround(s.bandwidth / c.subcarrier_spacing_hz));
        return s;
    };
    ConvergenceStudy out;
    {
        NetworkScenario s0 = scen_for(c.users_grid.front());
        ExperimentConfig cc = c;
        cc.users_per_sector = c.users_grid.front();
        out.design = make_design(cc, s0, nats_per_hz_to_bits(rbar, s0.bandwidth));
    }
    const double qt = out.design.solution.q_total;
    for (int k : c.users_grid) {
        if (k < 1) throw domain_error("users per sector must be >= 1");
        NetworkScenario s = scen_for(k);
        s.alpha = out.design.alpha;
        ConvergenceRow row;
        row.users = k;
        row.bandwidth = s.bandwidth;
        row.subcarriers = s.subcarriers;
        row.t = kCells * k / s.bandwidth;
        row.alpha = s.alpha;
        row.q_t = qt;
        double sum = 0.0, sq = 0.0, ab = 0.0, sq_q = 0.0;
        for (int i = 0; i < c.replicates; ++i) {
            s.users = sample_users(s, k, rbar, replicate_seed(c, std::uint64_t(k), i));
            AllocationResult r = algorithm3(s, out.design.solution.curves, c.ping_pong);
            if (audit) audit->add(r, s);
            if (!r.feasible()) {
                ++row.infeasible;
                continue;
            }
            ++row.feasible;
            double g = (r.total - qt) / qt;
            sum += r.total;
            sq_q += r.total * r.total;
            ab += std::fabs(g);
            sq += g * g;
        }
        if (row.feasible > 0) {
            const double n = row.feasible;
            row.mean_q = sum / n;
            row.gap_of_mean = std::fabs(row.mean_q - qt) / qt;
            row.mean_abs_gap = ab / n;
            row.mean_sq_gap = sq / n;
            row.stderr_q = n > 1 ? std::sqrt(std::max(0.0, sq_q / n - row.mean_q * row.mean_q) / (n - 1)) / qt : 0.0;
        }
        out.rows.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------

struct BaselineRow {
    double rate_bps = 0.0;
    double alpha = 0.0;
    double q_alg3 = 0.0;      ///< mean over seeds where both runs are feasible
    double q_reuse1 = 0.0;
    int pairs = 0;
    int wins = 0;             ///< pairs with Q_alg3 <= Q_reuse1
    int alg3_infeasible = 0;
    int reuse1_infeasible = 0;
    bool feasible() const { return pairs > 0; }
};

inline std::vector<BaselineRow> run_baseline_comparison(const ExperimentConfig& c, const std::vector<RateDesign>& designs,
                                                        AuditTally* audit = nullptr)
{
    std::vector<BaselineRow> rows;
    for (std::size_t j = 0; j < designs.size(); ++j) {
        const RateDesign& d = designs[j];
        NetworkScenario s = c.scenario;
        s.alpha = d.alpha;
        BaselineRow row;
        row.rate_bps = d.rate_bps;
        row.alpha = d.alpha;
        double a = 0.0, b = 0.0;
        for (int i = 0; i < c.replicates; ++i) {
            s.users = sample_users(s, c.users_per_sector, d.rbar, replicate_seed(c, 1000 + j, i));
            AllocationResult ra = algorithm3(s, d.solution.curves, c.ping_pong);
            AllocationResult rb = reuse1_baseline(s, c.ping_pong);
            if (audit) {
                audit->add(ra, s);
                audit->add(rb, s);
            }
            row.alg3_infeasible += !ra.feasible();
            row.reuse1_infeasible += !rb.feasible();
            if (!ra.feasible() || !rb.feasible()) continue;
            ++row.pairs;
            row.wins += ra.total <= rb.total;
            a += ra.total;
            b += rb.total;
        }
        if (row.pairs) {
            row.q_alg3 = a / row.pairs;
            row.q_reuse1 = b / row.pairs;
        }
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------

struct IterationRow {
    double rate_bps = 0.0;
    double accuracy = 0.0;
    double mean_iterations = 0.0;
    int max_iterations = 0;
    int within_budget = 0;  ///< converged in at most iteration_budget sweeps
    int converged = 0;
    int runs = 0;
};

/// Polishing stays on: it runs after the counted sweeps, so the counts are unaffected and the
/// returned allocations are exact.
inline std::vector<IterationRow> run_iteration_accuracy(const ExperimentConfig& c, const std::vector<RateDesign>& designs,
                                                        AuditTally* audit = nullptr)
{
    if (c.accuracies.empty()) throw domain_error("accuracy grid is empty");
    std::vector<IterationRow> rows;
    for (std::size_t j = 0; j < designs.size(); ++j) {
        const RateDesign& d = designs[j];
        NetworkScenario s = c.scenario;
        s.alpha = d.alpha;
        for (double acc : c.accuracies) {
            PingPongOptions o = c.ping_pong;
            o.accuracy = acc;
            IterationRow row;
            row.rate_bps = d.rate_bps;
            row.accuracy = acc;
            long total = 0;
            for (int i = 0; i < c.replicates; ++i) {
                s.users = sample_users(s, c.users_per_sector, d.rbar, replicate_seed(c, 2000 + j, i));
                AllocationResult r = algorithm3(s, d.solution.curves, o);
                if (audit) audit->add(r, s);
                ++row.runs;
                if (!r.feasible()) continue;
                ++row.converged;
                total += r.iterations;
                row.max_iterations = std::max(row.max_iterations, r.iterations);
                row.within_budget += r.iterations <= c.iteration_budget;
            }
            row.mean_iterations = row.converged ? double(total) / row.converged : 0.0;
            rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------

struct DiscreteRow {
    double rate_bps = 0.0;
    double alpha = 0.0;
    int subcarriers = 0;
    double power_continuous = 0.0; ///< W, mean over the common valid seeds
    double power_discrete = 0.0;   ///< W
    double penalty = 0.0;          ///< W
    double relative_penalty = 0.0;
    int valid = 0;                 ///< seeds valid at every N
    int below = 0;                 ///< valid seeds with discrete < continuous
};

struct DiscreteStudy {
    std::vector<DiscreteRow> rows;
    std::vector<int> draws;             ///< per rate
    std::vector<int> excluded_flagged;  ///< per rate: some user left without subcarriers
    std::vector<int> excluded_infeasible;
};

/// Powers are reported in watts (N times the per-subcarrier figure) so that the rows for
/// different N share a scale; the noise per subcarrier follows N.
inline DiscreteStudy run_discrete_rounding(const ExperimentConfig& c, const std::vector<RateDesign>& designs,
                                           AuditTally* audit = nullptr)
{
    if (c.subcarrier_grid.empty()) throw domain_error("subcarrier grid is empty");
    for (int n : c.subcarrier_grid)
        if (n < 1) throw domain_error("subcarrier counts must be >= 1");
    DiscreteStudy st;
    const std::size_t nn = c.subcarrier_grid.size();
    for (std::size_t j = 0; j < designs.size(); ++j) {
        const RateDesign& d = designs[j];
        std::vector<double> pc(nn, 0.0), pd(nn, 0.0);
        std::vector<int> below(nn, 0);
        int valid = 0, draws = 0, flagged = 0, infeasible = 0;
        const int max_draws = c.replicates * std::max(1, c.max_draw_factor);
        while (valid < c.replicates && draws < max_draws) {
            NetworkScenario s = c.scenario;
            s.alpha = d.alpha;
            s.users = sample_users(s, c.users_per_sector, d.rbar, replicate_seed(c, 3000 + j, draws));
            ++draws;
            std::vector<double> vc(nn), vd(nn);
            bool ok = true, flag = false;
            for (std::size_t i = 0; i < nn && ok; ++i) {
                NetworkScenario t = s;
                t.subcarriers = c.subcarrier_grid[i];
                AllocationResult r = algorithm3(t, d.solution.curves, c.ping_pong);
                if (audit) audit->add(r, t);
                if (!r.feasible()) { ok = false; break; }
                DiscretizeOptions dopt;
                dopt.fill_slack = c.fill_slack;
                AllocationResult q = discretize(r, t, dopt, c.ping_pong);
                // rounded shares only bound the band occupancy from above
                if (audit && !q.flagged) audit->add(q, t, false);
                if (!q.feasible()) { ok = false; break; }
                if (q.flagged) { flag = true; ok = false; break; }
                vc[i] = r.total * t.subcarriers;
                vd[i] = q.total * t.subcarriers;
            }
            if (!ok) {
                (flag ? flagged : infeasible)++;
                continue;
            }
            ++valid;
            for (std::size_t i = 0; i < nn; ++i) {
                pc[i] += vc[i];
                pd[i] += vd[i];
                below[i] += vd[i] < vc[i];
            }
        }
        for (std::size_t i = 0; i < nn; ++i) {
            DiscreteRow row;
            row.rate_bps = d.rate_bps;
            row.alpha = d.alpha;
            row.subcarriers = c.subcarrier_grid[i];
            row.valid = valid;
            row.below = below[i];
            if (valid) {
                row.power_continuous = pc[i] / valid;
                row.power_discrete = pd[i] / valid;
                row.penalty = row.power_discrete - row.power_continuous;
                row.relative_penalty = row.penalty / row.power_continuous;
            }
            st.rows.push_back(row);
        }
        st.draws.push_back(draws);
        st.excluded_flagged.push_back(flagged);
        st.excluded_infeasible.push_back(infeasible);
    }
    return st;
}

} // namespace ffr
