#pragma once

// JSON experiment configuration. Unknown keys are rejected so that typos do not
// silently fall back to defaults. Rates and powers at this boundary are in bit/s
// and dBm; everything inside is nats and watts.

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ffr/experiments.hpp"

namespace ffr {

class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

inline void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) throw config_error(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw config_error(where + ": unknown key '" + it.key() + "'");
}

template <class T>
void take(const json& j, const char* key, T& out, const std::string& where)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw config_error(where + "." + key + ": " + e.what());
    }
}

} // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j)
{
    using detail::only_keys;
    using detail::take;
    ExperimentConfig c;
    only_keys(j, {"scenario", "alpha", "alpha_step", "asymptotic", "ping_pong", "seed", "replicates", "rates_bps",
                  "convergence", "iterations", "discrete", "curve_export"},
              "config");
    if (j.contains("scenario")) {
        const auto& s = j["scenario"];
        only_keys(s, {"radius_m", "min_distance_m", "pathloss", "noise_dbm_per_hz", "bandwidth_hz", "subcarriers",
                      "users_per_sector"},
                  "scenario");
        double radius = c.scenario.geometry.radius, eps = c.scenario.geometry.epsilon;
        take(s, "radius_m", radius, "scenario");
        take(s, "min_distance_m", eps, "scenario");
        try {
            c.scenario.geometry = SectorGeometry(radius, eps);
        } catch (const std::exception& e) {
            throw config_error(e.what());
        }
        if (s.contains("pathloss")) {
            const auto& p = s["pathloss"];
            only_keys(p, {"model", "loss_at_1m_db", "exponent"}, "scenario.pathloss");
            std::string model = "freespace";
            take(p, "model", model, "scenario.pathloss");
            if (model == "freespace") {
                if (p.contains("loss_at_1m_db") || p.contains("exponent"))
                    throw config_error("scenario.pathloss: freespace takes no parameters");
                c.scenario.pathloss = PathLossModel::free_space();
            } else if (model == "power_law") {
                double l0 = 100.04, ex = 2.0;
                take(p, "loss_at_1m_db", l0, "scenario.pathloss");
                take(p, "exponent", ex, "scenario.pathloss");
                try {
                    c.scenario.pathloss = PathLossModel::power_law(std::pow(10.0, -l0 / 10.0), ex);
                } catch (const std::exception& e) {
                    throw config_error(e.what());
                }
            } else {
                throw config_error("scenario.pathloss.model: expected 'freespace' or 'power_law'");
            }
        }
        double n0 = -170.0;
        if (s.contains("noise_dbm_per_hz")) {
            take(s, "noise_dbm_per_hz", n0, "scenario");
            c.scenario.noise_density = dbm_per_hz_to_watts_per_hz(n0);
        }
        take(s, "bandwidth_hz", c.scenario.bandwidth, "scenario");
        take(s, "subcarriers", c.scenario.subcarriers, "scenario");
        take(s, "users_per_sector", c.users_per_sector, "scenario");
        if (!(c.scenario.bandwidth > 0.0)) throw config_error("scenario.bandwidth_hz must be positive");
        if (c.scenario.subcarriers < 1) throw config_error("scenario.subcarriers must be >= 1");
        if (c.users_per_sector < 1) throw config_error("scenario.users_per_sector must be >= 1");
    }
    if (j.contains("alpha") && !j["alpha"].is_null()) {
        double a = 0.0;
        take(j, "alpha", a, "config");
        if (!(a >= 0.0 && a <= 1.0)) throw config_error("alpha must lie in [0, 1]");
        c.alpha = a;
    }
    take(j, "alpha_step", c.alpha_step, "config");
    if (!(c.alpha_step > 0.0 && c.alpha_step <= 1.0)) throw config_error("alpha_step must lie in (0, 1]");
    if (j.contains("asymptotic")) {
        const auto& a = j["asymptotic"];
        only_keys(a, {"grid_points", "floor_ratio", "refine_bits", "force_full_grid", "full_grid_points",
                      "quad_order", "curve_samples", "curve_check"},
                  "asymptotic");
        auto& o = c.asymptotic;
        take(a, "grid_points", o.grid_points, "asymptotic");
        take(a, "floor_ratio", o.floor_ratio, "asymptotic");
        take(a, "refine_bits", o.refine_bits, "asymptotic");
        take(a, "force_full_grid", o.force_full_grid, "asymptotic");
        take(a, "full_grid_points", o.full_grid_points, "asymptotic");
        take(a, "quad_order", o.solver.quad.order, "asymptotic");
        take(a, "curve_samples", o.curve_samples, "asymptotic");
        take(a, "curve_check", o.curve_check, "asymptotic");
        if (o.grid_points < 2 || o.full_grid_points < 1 || o.curve_samples < 2)
            throw config_error("asymptotic: grid sizes too small");
    }
    if (j.contains("ping_pong")) {
        const auto& p = j["ping_pong"];
        only_keys(p, {"accuracy", "max_iter", "divergence_factor"}, "ping_pong");
        take(p, "accuracy", c.ping_pong.accuracy, "ping_pong");
        take(p, "max_iter", c.ping_pong.max_iter, "ping_pong");
        take(p, "divergence_factor", c.ping_pong.divergence_factor, "ping_pong");
        if (!(c.ping_pong.accuracy > 0.0)) throw config_error("ping_pong.accuracy must be positive");
    }
    take(j, "seed", c.seed, "config");
    take(j, "replicates", c.replicates, "config");
    if (c.replicates < 1) throw config_error("replicates must be >= 1");
    take(j, "rates_bps", c.rates_bps, "config");
    for (double r : c.rates_bps)
        if (!(r >= 0.0)) throw config_error("rates_bps must be >= 0");
    if (j.contains("convergence")) {
        const auto& v = j["convergence"];
        only_keys(v, {"users_per_sector", "users_per_hz", "rate_per_user_bps", "subcarrier_spacing_hz"}, "convergence");
        take(v, "users_per_sector", c.users_grid, "convergence");
        take(v, "users_per_hz", c.users_per_hz, "convergence");
        take(v, "rate_per_user_bps", c.rate_per_user_bps, "convergence");
        take(v, "subcarrier_spacing_hz", c.subcarrier_spacing_hz, "convergence");
        if (!(c.users_per_hz > 0.0) || !(c.subcarrier_spacing_hz > 0.0))
            throw config_error("convergence: t and the subcarrier spacing must be positive");
    }
    if (j.contains("iterations")) {
        const auto& v = j["iterations"];
        only_keys(v, {"accuracies", "budget"}, "iterations");
        take(v, "accuracies", c.accuracies, "iterations");
        take(v, "budget", c.iteration_budget, "iterations");
    }
    if (j.contains("discrete")) {
        const auto& v = j["discrete"];
        only_keys(v, {"subcarriers", "fill_slack", "max_draw_factor"}, "discrete");
        take(v, "subcarriers", c.subcarrier_grid, "discrete");
        take(v, "fill_slack", c.fill_slack, "discrete");
        take(v, "max_draw_factor", c.max_draw_factor, "discrete");
    }
    if (j.contains("curve_export")) {
        const auto& v = j["curve_export"];
        only_keys(v, {"samples"}, "curve_export");
        take(v, "samples", c.curve_samples, "curve_export");
        if (c.curve_samples < 2) throw config_error("curve_export.samples must be >= 2");
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config '" + path + "': " + e.what());
    }
    return parse_config(j);
}

/// The fully resolved configuration, defaults included.
inline nlohmann::json to_json(const ExperimentConfig& c)
{
    nlohmann::json j;
    nlohmann::json pl;
    if (c.scenario.pathloss.name == "freespace") {
        pl["model"] = "freespace";
    } else {
        pl["model"] = "power_law";
        pl["loss_at_1m_db"] = -10.0 * std::log10(c.scenario.pathloss.eta);
        pl["exponent"] = c.scenario.pathloss.exponent;
    }
    j["scenario"] = {{"radius_m", c.scenario.geometry.radius},
                     {"min_distance_m", c.scenario.geometry.epsilon},
                     {"pathloss", pl},
                     {"noise_dbm_per_hz", 10.0 * std::log10(c.scenario.noise_density) + 30.0},
                     {"bandwidth_hz", c.scenario.bandwidth},
                     {"subcarriers", c.scenario.subcarriers},
                     {"users_per_sector", c.users_per_sector}};
    j["alpha"] = c.alpha ? nlohmann::json(*c.alpha) : nlohmann::json(nullptr);
    j["alpha_step"] = c.alpha_step;
    const auto& o = c.asymptotic;
    j["asymptotic"] = {{"grid_points", o.grid_points},         {"floor_ratio", o.floor_ratio},
                       {"refine_bits", o.refine_bits},         {"force_full_grid", o.force_full_grid},
                       {"full_grid_points", o.full_grid_points}, {"quad_order", o.solver.quad.order},
                       {"curve_samples", o.curve_samples},     {"curve_check", o.curve_check}};
    j["ping_pong"] = {{"accuracy", c.ping_pong.accuracy},
                      {"max_iter", c.ping_pong.max_iter},
                      {"divergence_factor", c.ping_pong.divergence_factor}};
    j["seed"] = c.seed;
    j["replicates"] = c.replicates;
    j["rates_bps"] = c.rates_bps;
    j["convergence"] = {{"users_per_sector", c.users_grid},
                        {"users_per_hz", c.users_per_hz},
                        {"rate_per_user_bps", c.rate_per_user_bps},
                        {"subcarrier_spacing_hz", c.subcarrier_spacing_hz}};
    j["iterations"] = {{"accuracies", c.accuracies}, {"budget", c.iteration_budget}};
    j["discrete"] = {{"subcarriers", c.subcarrier_grid},
                     {"fill_slack", c.fill_slack},
                     {"max_draw_factor", c.max_draw_factor}};
    j["curve_export"] = {{"samples", c.curve_samples}};
    return j;
}

} // namespace ffr
