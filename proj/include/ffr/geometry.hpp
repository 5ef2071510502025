#pragma once

// Three-sector geometry. Every cell has its own local frame: base station at the
// origin, sector {x in [-D, D], max(|x|/sqrt3, eps) <= y <= (2D - |x|)/sqrt3}.
// The three sectors meet at M = (0, 2D/sqrt3); cell c+1 is the image of cell c
// under a +120 degree rotation about M. Seen from any cell, the "next" base
// station sits at (D, sqrt3 D) and the "previous" one at (-D, sqrt3 D).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ffr/errors.hpp"

namespace ffr {

inline constexpr double kSqrt3 = 1.7320508075688772935;
inline constexpr double kLn2 = 0.69314718055994530942;
inline constexpr int kCells = 3;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double norm(Point p) { return std::hypot(p.x, p.y); }

/// Cells other than c, in the order (next, previous).
inline std::array<int, 2> neighbors(int c) { return {(c + 1) % kCells, (c + 2) % kCells}; }

inline const char* cell_name(int c)
{
    static const char* names[] = {"A", "B", "C"};
    return names[c];
}

struct SectorGeometry {
    double radius = 1000.0;  ///< D, meters
    double epsilon = 1.0;    ///< minimum ordinate, meters

    SectorGeometry() = default;
    SectorGeometry(double d, double eps) : radius(d), epsilon(eps)
    {
        if (!(d > 0.0) || !(eps > 0.0) || eps >= 2.0 * d / kSqrt3)
            throw domain_error("SectorGeometry: need D > 0 and 0 < eps < 2D/sqrt3");
    }

    double lower(double x) const { return std::max(std::fabs(x) / kSqrt3, epsilon); }
    double upper(double x) const { return (2.0 * radius - std::fabs(x)) / kSqrt3; }

    /// Area of the rhombus sector (the epsilon strip is negligible and ignored).
    double area() const { return 2.0 * radius * radius / kSqrt3; }

    bool contains(Point p, double tol = 0.0) const
    {
        double t = tol * radius;
        return p.x >= -radius - t && p.x <= radius + t && p.y >= lower(p.x) - t && p.y <= upper(p.x) + t;
    }

    Point meeting_point() const { return {0.0, 2.0 * radius / kSqrt3}; }
    Point next_station() const { return {radius, kSqrt3 * radius}; }
    Point prev_station() const { return {-radius, kSqrt3 * radius}; }
    Point station(int slot) const { return slot == 0 ? next_station() : prev_station(); }

    /// Local point of cell c expressed in cell A's frame.
    Point to_global(int cell, Point p) const
    {
        const double ang = 2.0 * M_PI / 3.0 * cell;
        const Point m = meeting_point();
        const double dx = p.x - m.x, dy = p.y - m.y;
        return {m.x + dx * std::cos(ang) - dy * std::sin(ang), m.y + dx * std::sin(ang) + dy * std::cos(ang)};
    }
};

/// rho(d) = eta * d^-s. Free space at 2.4 GHz: loss(dB) = 20 log10 d + 100.04.
struct PathLossModel {
    double eta = std::pow(10.0, -10.004);
    double exponent = 2.0;
    std::string name = "freespace";

    static PathLossModel free_space() { return PathLossModel{}; }
    static PathLossModel power_law(double eta, double s)
    {
        if (!(eta > 0.0) || !(s > 0.0)) throw domain_error("PathLossModel: eta and s must be positive");
        return PathLossModel{eta, s, "power_law"};
    }

    double gain(double distance) const
    {
        if (!(distance > 0.0)) throw domain_error("path_gain: distance must be positive");
        return eta * std::pow(distance, -exponent);
    }
    double loss_db(double distance) const { return -10.0 * std::log10(gain(distance)); }
};

inline double path_gain(const PathLossModel& m, double distance) { return m.gain(distance); }

inline double dbm_per_hz_to_watts_per_hz(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double bits_to_nats_per_hz(double bps, double bandwidth) { return bps * kLn2 / bandwidth; }
inline double nats_per_hz_to_bits(double r, double bandwidth) { return r * bandwidth / kLn2; }

/// Channel statistics seen at one position of a cell-local frame.
struct ChannelGains {
    double direct = 0.0;               ///< rho toward the serving station
    std::array<double, 2> cross{};     ///< rho toward (next, previous) stations
};

struct User {
    int cell = 0;
    Point pos;
    double rate = 0.0; ///< R_k, nats/s/Hz
    ChannelGains gains;
};

using UserSet = std::array<std::vector<User>, kCells>;

struct NetworkScenario {
    SectorGeometry geometry;
    PathLossModel pathloss;
    double noise_density = dbm_per_hz_to_watts_per_hz(-170.0); ///< N0, W/Hz
    double bandwidth = 5e6;                                    ///< B, Hz
    int subcarriers = 512;                                     ///< N
    double alpha = 0.5;
    UserSet users;

    /// Per-subcarrier noise variance sigma^2 = N0 * B / N.
    double noise_var() const { return noise_density * bandwidth / subcarriers; }
    double protected_share() const { return (1.0 - alpha) / 3.0; }

    ChannelGains channel(Point p) const
    {
        ChannelGains g;
        g.direct = pathloss.gain(norm(p));
        for (int s = 0; s < 2; ++s) {
            Point b = geometry.station(s);
            g.cross[s] = pathloss.gain(std::hypot(p.x - b.x, p.y - b.y));
        }
        return g;
    }

    User make_user(int cell, Point p, double rate) const
    {
        User u;
        u.cell = cell;
        u.pos = p;
        u.rate = rate;
        u.gains = channel(p);
        return u;
    }

    std::size_t user_count() const { return users[0].size() + users[1].size() + users[2].size(); }
};

/// g2 = rho / sigma^2.
inline double gnr(const NetworkScenario& s, Point p) { return s.pathloss.gain(norm(p)) / s.noise_var(); }

/// g1 = rho / (sigma^2 + rho'_next Q_next + rho'_prev Q_prev).
inline double ginr(const ChannelGains& g, double noise_var, double q_next, double q_prev)
{
    if (q_next < 0.0 || q_prev < 0.0) throw domain_error("ginr: interference powers must be >= 0");
    return g.direct / (noise_var + g.cross[0] * q_next + g.cross[1] * q_prev);
}

inline double ginr(const NetworkScenario& s, Point p, double q_next, double q_prev)
{
    return ginr(s.channel(p), s.noise_var(), q_next, q_prev);
}

/// SplitMix64 step; used to derive independent replicate seeds from a master seed.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t index)
{
    std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Uniform point in the sector (rejection from the bounding box).
template <class Rng>
Point sample_point(const SectorGeometry& g, Rng& rng)
{
    std::uniform_real_distribution<double> ux(-g.radius, g.radius);
    std::uniform_real_distribution<double> uy(0.0, 2.0 * g.radius / kSqrt3);
    for (;;) {
        Point p{ux(rng), uy(rng)};
        if (p.y >= g.lower(p.x) && p.y <= g.upper(p.x)) return p;
    }
}

/// Draws `count` users per cell, uniformly over the sector, each with rate sum_rate/count.
/// Rates are given as a per-cell sum in nats/s/Hz.
inline UserSet sample_users(const NetworkScenario& s, int count, double sum_rate, std::uint64_t seed)
{
    if (count < 1) throw domain_error("sample_users: count must be >= 1");
    std::mt19937_64 rng(seed);
    UserSet out;
    for (int c = 0; c < kCells; ++c) {
        out[c].reserve(count);
        for (int k = 0; k < count; ++k) out[c].push_back(s.make_user(c, sample_point(s.geometry, rng), sum_rate / count));
    }
    return out;
}

/// Abscissa of line i (0-based) out of `lines` equispaced vertical lines.
inline double line_abscissa(const SectorGeometry& g, int lines, int i)
{
    return -g.radius + (i + 0.5) * 2.0 * g.radius / lines;
}

inline int line_index(const SectorGeometry& g, int lines, double x)
{
    int i = int(std::floor((x + g.radius) / (2.0 * g.radius) * lines));
    return std::clamp(i, 0, lines - 1);
}

/// Moves every user onto the nearest of `lines` equispaced lines perpendicular to the
/// axis joining the interfering stations (x = const in the local frame); y is then
/// clamped into the sector. Gains are recomputed.
inline UserSet align_users_on_lines(const NetworkScenario& s, const UserSet& users, int lines)
{
    if (lines < 1) throw domain_error("align_users_on_lines: need at least one line");
    UserSet out = users;
    for (auto& cell : out) {
        for (auto& u : cell) {
            double x = line_abscissa(s.geometry, lines, line_index(s.geometry, lines, u.pos.x));
            double y = std::clamp(u.pos.y, s.geometry.lower(x), s.geometry.upper(x));
            u = s.make_user(u.cell, {x, y}, u.rate);
        }
    }
    return out;
}

} // namespace ffr
