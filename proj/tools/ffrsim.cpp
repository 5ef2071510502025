// ffrsim: experiment driver for the fractional-frequency-reuse allocation engine.
//
// Exit codes: 0 success, 2 usage error, 3 infeasible scenario, 4 numeric failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ffr/config.hpp"
#include "ffr/experiments.hpp"
#include "ffr/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ffr;

namespace {

enum Exit { kOk = 0, kUsage = 2, kInfeasible = 3, kNumeric = 4 };

class usage_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> replicates;
    std::optional<double> accuracy;
    std::optional<double> alpha;
    std::vector<std::string> grids;
    bool baseline = false;
    bool discrete = false;
    std::optional<int> subcarriers;
};

double parse_number(const std::string& s, const std::string& what)
{
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw usage_error("--grid " + what + ": '" + s + "' is not a number");
    }
}

// "v1,v2,..." or "start:stop:step" (stop included up to rounding).
std::vector<double> parse_values(const std::string& spec, const std::string& name)
{
    std::vector<double> v;
    if (spec.empty()) throw usage_error("--grid " + name + ": empty grid");
    if (spec.find(':') != std::string::npos) {
        std::vector<std::string> p;
        std::stringstream ss(spec);
        for (std::string t; std::getline(ss, t, ':');) p.push_back(t);
        if (p.size() != 3) throw usage_error("--grid " + name + ": range must be start:stop:step");
        double a = parse_number(p[0], name), b = parse_number(p[1], name), h = parse_number(p[2], name);
        if (!(h > 0.0) || b < a) throw usage_error("--grid " + name + ": need step > 0 and stop >= start");
        long n = std::lround(std::floor((b - a) / h + 1e-9));
        for (long i = 0; i <= n; ++i) v.push_back(a + h * double(i));
        return v;
    }
    std::stringstream ss(spec);
    for (std::string t; std::getline(ss, t, ',');) {
        if (t.empty()) throw usage_error("--grid " + name + ": empty entry");
        v.push_back(parse_number(t, name));
    }
    return v;
}

std::vector<int> to_ints(const std::vector<double>& v, const std::string& name)
{
    std::vector<int> out;
    for (double x : v) {
        if (x != std::floor(x) || x < 1.0) throw usage_error("--grid " + name + ": expected positive integers");
        out.push_back(int(x));
    }
    return out;
}

void apply_grid(ExperimentConfig& c, const std::string& g)
{
    auto eq = g.find('=');
    if (eq == std::string::npos) throw usage_error("--grid expects name=values, got '" + g + "'");
    std::string name = g.substr(0, eq);
    std::vector<double> v = parse_values(g.substr(eq + 1), name);
    if (name == "rates_bps") {
        c.rates_bps = v;
    } else if (name == "rbar_bits") {
        c.rates_bps.clear();
        for (double x : v) c.rates_bps.push_back(x * c.scenario.bandwidth);
    } else if (name == "users") {
        c.users_grid = to_ints(v, name);
    } else if (name == "accuracies") {
        c.accuracies = v;
    } else if (name == "subcarriers") {
        c.subcarrier_grid = to_ints(v, name);
    } else {
        throw usage_error("--grid: unknown grid '" + name +
                          "' (rates_bps, rbar_bits, users, accuracies, subcarriers)");
    }
    for (double x : v)
        if (!(x >= 0.0)) throw usage_error("--grid " + name + ": values must be nonnegative");
}

ExperimentConfig resolve(const Flags& f)
{
    ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
    if (f.seed) c.seed = *f.seed;
    if (f.replicates) {
        if (*f.replicates < 1) throw usage_error("--replicates must be >= 1");
        c.replicates = *f.replicates;
    }
    if (f.accuracy) {
        if (!(*f.accuracy > 0.0)) throw usage_error("--accuracy must be positive");
        c.ping_pong.accuracy = *f.accuracy;
        c.accuracies = {*f.accuracy};
    }
    if (f.alpha) {
        if (!(*f.alpha >= 0.0 && *f.alpha <= 1.0)) throw usage_error("--alpha must lie in [0, 1]");
        c.alpha = *f.alpha;
    }
    for (const std::string& g : f.grids) apply_grid(c, g);
    return c;
}

void require_rates(const ExperimentConfig& c)
{
    if (c.rates_bps.empty()) throw usage_error("rate grid is empty (set rates_bps in the config or --grid rates_bps=...)");
}

struct Output {
    fs::path dir;
    json header;

    void table(const std::string& name, const CsvTable& t) const { write_text((dir / (name + ".csv")).string(), t.str(header)); }
    void sidecar(const std::string& name, const json& summary) const
    {
        json j = header;
        j["summary"] = summary;
        write_text((dir / (name + ".json")).string(), j.dump(2) + "\n");
    }
};

Output open_output(const Flags& f, const ExperimentConfig& c, const std::string& experiment)
{
    Output o;
    o.dir = f.out;
    std::error_code ec;
    fs::create_directories(o.dir, ec);
    if (ec) throw usage_error("--out: cannot create '" + f.out + "': " + ec.message());
    o.header = {{"experiment", experiment}, {"seed", c.seed}, {"config", to_json(c)}};
    return o;
}

std::vector<RateDesign> designs_or_fail(const ExperimentConfig& c)
{
    std::vector<RateDesign> d = make_designs(c);
    for (const RateDesign& x : d)
        if (!std::isfinite(x.solution.q_total))
            throw infeasible_error("no feasible reuse factor for r_T = " + fmt_num(x.rate_bps) + " bit/s");
    return d;
}

json design_json(const RateDesign& d, int subcarriers)
{
    return {{"rate_bps", d.rate_bps},
            {"rbar_nats", d.rbar},
            {"alpha", d.alpha},
            {"q_t", d.solution.q_total},
            {"power_t_w", d.solution.q_total * subcarriers},
            {"search", d.solution.search},
            {"max_residual", d.solution.max_residual}};
}

json audit_json(const AuditTally& a)
{
    return {{"checked", a.checked},
            {"failed", a.failed},
            {"max_rate_deficit", a.max_rate_deficit},
            {"max_share_error", a.max_share_error}};
}

// ---------------------------------------------------------------------------

int cmd_alpha_sweep(const Flags& f)
{
    ExperimentConfig c = resolve(f);
    require_rates(c);
    Output out = open_output(f, c, "alpha_sweep");
    std::vector<RateDesign> ds = designs_or_fail(c);
    CsvTable t({"rate_bps", "rbar_bits", "alpha", "q_t", "power_t_w", "optimal"});
    CsvTable opt({"rate_bps", "rbar_bits", "alpha_opt", "q_t", "power_t_w"});
    json s = json::array();
    const int n = c.scenario.subcarriers;
    for (const RateDesign& d : ds) {
        const double rb = d.rbar / kLn2;
        if (d.alphas.empty()) {
            t.add({d.rate_bps, rb, d.alpha, d.solution.q_total, d.solution.q_total * n, 1LL});
        } else {
            for (std::size_t i = 0; i < d.alphas.size(); ++i)
                t.add({d.rate_bps, rb, d.alphas[i], d.q_t[i], d.q_t[i] * n, (long long)(d.alphas[i] == d.alpha)});
        }
        opt.add({d.rate_bps, rb, d.alpha, d.solution.q_total, d.solution.q_total * n});
        s.push_back(design_json(d, n));
    }
    out.table("alpha_sweep", t);
    out.table("alpha_opt", opt);
    out.sidecar("alpha_sweep", s);
    return kOk;
}

int cmd_curve_export(const Flags& f)
{
    ExperimentConfig c = resolve(f);
    require_rates(c);
    Output out = open_output(f, c, "curve_export");
    std::vector<RateDesign> ds = designs_or_fail(c);
    CsvTable t({"rate_bps", "alpha", "x_m", "d_A_m", "d_B_m", "d_C_m", "lower_m", "upper_m"});
    const SectorGeometry& g = c.scenario.geometry;
    json s = json::array();
    for (const RateDesign& d : ds) {
        for (int i = 0; i < c.curve_samples; ++i) {
            double x = -g.radius + 2.0 * g.radius * i / (c.curve_samples - 1);
            const auto& cv = d.solution.curves;
            t.add({d.rate_bps, d.alpha, x, cv[0](x), cv[1](x), cv[2](x), g.lower(x), g.upper(x)});
        }
        s.push_back(design_json(d, c.scenario.subcarriers));
    }
    out.table("curve_export", t);
    out.sidecar("curve_export", s);
    return kOk;
}

int cmd_convergence(const Flags& f)
{
    ExperimentConfig c = resolve(f);
    if (c.users_grid.empty()) throw usage_error("users grid is empty");
    Output out = open_output(f, c, "convergence_vs_K");
    AuditTally audit;
    ConvergenceStudy st = run_convergence_vs_K(c, &audit);
    if (!std::isfinite(st.design.solution.q_total)) throw infeasible_error("Q_T is infinite for this load");
    CsvTable t({"users_per_sector", "bandwidth_hz", "subcarriers", "t", "alpha", "q_t", "mean_q", "gap_of_mean",
                "mean_abs_gap", "mean_sq_gap", "stderr", "feasible", "infeasible"});
    for (const ConvergenceRow& r : st.rows)
        t.add({(long long)r.users, r.bandwidth, (long long)r.subcarriers, r.t, r.alpha, r.q_t, r.mean_q, r.gap_of_mean,
               r.mean_abs_gap, r.mean_sq_gap, r.stderr_q, (long long)r.feasible, (long long)r.infeasible});
    out.table("convergence_vs_K", t);
    json s = design_json(st.design, st.rows.empty() ? 0 : st.rows.front().subcarriers);
    s["rbar_bits"] = st.design.rbar / kLn2;
    s["audit"] = audit_json(audit);
    out.sidecar("convergence_vs_K", s);
    return kOk;
}

int cmd_baseline(const Flags& f)
{
    ExperimentConfig c = resolve(f);
    require_rates(c);
    Output out = open_output(f, c, "baseline_comparison");
    std::vector<RateDesign> ds = designs_or_fail(c);
    AuditTally audit;
    std::vector<BaselineRow> rows = run_baseline_comparison(c, ds, &audit);
    const int n = c.scenario.subcarriers;
    CsvTable t({"rate_bps", "alpha", "q_alg3", "q_reuse1", "power_alg3_w", "power_reuse1_w", "pairs", "wins",
                "alg3_infeasible", "reuse1_infeasible", "feasible"});
    json s = json::array();
    for (const BaselineRow& r : rows) {
        t.add({r.rate_bps, r.alpha, r.q_alg3, r.q_reuse1, r.q_alg3 * n, r.q_reuse1 * n, (long long)r.pairs,
               (long long)r.wins, (long long)r.alg3_infeasible, (long long)r.reuse1_infeasible,
               (long long)r.feasible()});
        s.push_back({{"rate_bps", r.rate_bps}, {"alpha", r.alpha}, {"feasible", r.feasible()},
                     {"gain_db", r.feasible() ? 10.0 * std::log10(r.q_reuse1 / r.q_alg3) : 0.0}});
    }
    out.table("baseline_comparison", t);
    out.sidecar("baseline_comparison", {{"rates", s}, {"audit", audit_json(audit)}});
    return kOk;
}

int cmd_iterations(const Flags& f)
{
    ExperimentConfig c = resolve(f);
    require_rates(c);
    if (c.accuracies.empty()) throw usage_error("accuracy grid is empty");
    Output out = open_output(f, c, "iteration_accuracy");
    std::vector<RateDesign> ds = designs_or_fail(c);
    AuditTally audit;
    std::vector<IterationRow> rows = run_iteration_accuracy(c, ds, &audit);
    CsvTable t({"rate_bps", "accuracy", "mean_iterations", "max_iterations", "within_budget", "converged", "runs"});
    for (const IterationRow& r : rows)
        t.add({r.rate_bps, r.accuracy, r.mean_iterations, (long long)r.max_iterations, (long long)r.within_budget,
               (long long)r.converged, (long long)r.runs});
    out.table("iteration_accuracy", t);
    json s = json::array();
    for (const RateDesign& d : ds) s.push_back(design_json(d, c.scenario.subcarriers));
    out.sidecar("iteration_accuracy", {{"designs", s}, {"budget", c.iteration_budget}, {"audit", audit_json(audit)}});
    return kOk;
}

int cmd_discrete(const Flags& f)
{
    ExperimentConfig c = resolve(f);
    if (c.subcarrier_grid.empty())
        throw usage_error("discrete_rounding needs subcarrier counts (--grid subcarriers=72,192,360)");
    require_rates(c);
    Output out = open_output(f, c, "discrete_rounding");
    std::vector<RateDesign> ds = designs_or_fail(c);
    AuditTally audit;
    DiscreteStudy st = run_discrete_rounding(c, ds, &audit);
    CsvTable t({"rate_bps", "alpha", "subcarriers", "power_continuous_w", "power_discrete_w", "penalty_w",
                "relative_penalty", "valid_seeds", "below_continuous"});
    for (const DiscreteRow& r : st.rows)
        t.add({r.rate_bps, r.alpha, (long long)r.subcarriers, r.power_continuous, r.power_discrete, r.penalty,
               r.relative_penalty, (long long)r.valid, (long long)r.below});
    out.table("discrete_rounding", t);
    json s = json::array();
    for (std::size_t j = 0; j < ds.size(); ++j)
        s.push_back({{"rate_bps", ds[j].rate_bps},
                     {"draws", st.draws[j]},
                     {"excluded_flagged", st.excluded_flagged[j]},
                     {"excluded_infeasible", st.excluded_infeasible[j]}});
    out.sidecar("discrete_rounding", {{"rates", s}, {"audit", audit_json(audit)}});
    return kOk;
}

// One drawn scenario, allocated and audited; per-user CSV, iteration trace and summary.
int cmd_allocate(const Flags& f)
{
    ExperimentConfig c = resolve(f);
    require_rates(c);
    if (c.rates_bps.size() != 1) throw usage_error("allocate takes exactly one rate");
    if (f.subcarriers) {
        if (*f.subcarriers < 1) throw usage_error("--subcarriers must be >= 1");
        c.scenario.subcarriers = *f.subcarriers;
    }
    Output out = open_output(f, c, "allocate");
    NetworkScenario s = c.scenario;
    RateDesign d;
    AllocationResult r;
    s.users = sample_users(s, c.users_per_sector, bits_to_nats_per_hz(c.rates_bps[0], s.bandwidth), c.seed);
    if (f.baseline) {
        r = reuse1_baseline(s, c.ping_pong);
    } else {
        d = designs_or_fail(c).front();
        s.alpha = d.alpha;
        r = algorithm3(s, d.solution.curves, c.ping_pong);
        if (f.discrete && r.feasible()) r = discretize(r, s, DiscretizeOptions{c.fill_slack}, c.ping_pong);
    }
    json sum = allocation_summary(r, s.subcarriers);
    if (!f.baseline) sum["design"] = design_json(d, s.subcarriers);
    if (r.feasible()) {
        AuditReport a = audit_allocation(r, s, !f.discrete);
        sum["audit"] = {{"pass", a.pass()},
                        {"max_rate_deficit", a.max_rate_deficit},
                        {"max_rate_error", a.max_rate_error},
                        {"max_share_error", a.max_share_error},
                        {"power_mismatch", a.power_mismatch}};
        out.table("allocation", allocation_table(r));
        out.table("trace", trace_table(r));
    }
    out.sidecar("allocation", sum);
    if (r.status == AllocationStatus::infeasible) {
        std::cerr << "ffrsim: infeasible: " << r.message << '\n';
        return kInfeasible;
    }
    if (r.status == AllocationStatus::numeric_failure) {
        std::cerr << "ffrsim: numeric failure: " << r.message << '\n';
        return kNumeric;
    }
    return kOk;
}

void common_flags(CLI::App* a, Flags& f)
{
    a->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    a->add_option("--out", f.out, "output directory (created if missing)");
    a->add_option("--seed", f.seed, "master seed");
    a->add_option("--replicates", f.replicates, "Monte-Carlo replicates");
    a->add_option("--accuracy", f.accuracy, "ping-pong relative accuracy");
    a->add_option("--alpha", f.alpha, "fixed reuse factor instead of the optimum");
    a->add_option("--grid", f.grids, "name=v1,v2,... or name=start:stop:step; names: rates_bps, rbar_bits, users, "
                                     "accuracies, subcarriers");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Downlink power and subcarrier allocation with fractional frequency reuse"};
    app.require_subcommand(1);
    Flags f;
    std::map<CLI::App*, int (*)(const Flags&)> run;
    auto sub = [&](const char* name, const char* help, int (*fn)(const Flags&)) {
        CLI::App* a = app.add_subcommand(name, help);
        common_flags(a, f);
        run[a] = fn;
        return a;
    };
    sub("alpha_sweep", "Q_T over the reuse-factor grid and the optimal alpha per sum rate", cmd_alpha_sweep);
    sub("curve_export", "separating curves at the chosen alpha", cmd_curve_export);
    sub("convergence_vs_K", "finite-K power against Q_T with K/B fixed", cmd_convergence);
    sub("baseline_comparison", "proposed allocation against full reuse on the same draws", cmd_baseline);
    sub("iteration_accuracy", "ping-pong sweeps against the requested accuracy", cmd_iterations);
    sub("discrete_rounding", "cost of integer subcarrier counts", cmd_discrete);
    CLI::App* alloc = sub("allocate", "allocate one drawn scenario", cmd_allocate);
    alloc->add_flag("--baseline", f.baseline, "full reuse instead of the proposed allocation");
    alloc->add_flag("--discrete", f.discrete, "round sharing factors to multiples of 1/N");
    alloc->add_option("--subcarriers", f.subcarriers, "override N");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    try {
        for (auto& [a, fn] : run)
            if (a->parsed()) return fn(f);
        return kUsage;
    } catch (const usage_error& e) {
        std::cerr << "ffrsim: usage: " << e.what() << '\n';
        return kUsage;
    } catch (const config_error& e) {
        std::cerr << "ffrsim: config: " << e.what() << '\n';
        return kUsage;
    } catch (const ffr::domain_error& e) {
        std::cerr << "ffrsim: invalid argument: " << e.what() << '\n';
        return kUsage;
    } catch (const infeasible_error& e) {
        std::cerr << "ffrsim: infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "ffrsim: numeric failure: " << e.what() << '\n';
        return kNumeric;
    }
}
