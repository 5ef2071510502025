#pragma once

// CSV tables with a commented config header, plus JSON sidecars. Numbers are printed with
// a fixed "%.12g" so reruns produce identical bytes.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ffr/pipeline.hpp"

namespace ffr {

inline std::string fmt_num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

class CsvTable {
public:
    using Cell = std::variant<double, long long, std::string>;

    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<Cell> row)
    {
        if (row.size() != header_.size()) throw std::logic_error("CsvTable: row width differs from header");
        rows_.push_back(std::move(row));
    }

    std::size_t size() const { return rows_.size(); }

    /// `comment` is pretty-printed after "# " on each line, above the header row.
    std::string str(const nlohmann::json& comment) const
    {
        std::ostringstream o;
        std::istringstream lines(comment.dump(2));
        for (std::string l; std::getline(lines, l);) o << "# " << l << '\n';
        for (std::size_t i = 0; i < header_.size(); ++i) o << (i ? "," : "") << header_[i];
        o << '\n';
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) o << ',';
                std::visit(
                    [&](const auto& v) {
                        using T = std::decay_t<decltype(v)>;
                        if constexpr (std::is_same_v<T, double>)
                            o << fmt_num(v);
                        else
                            o << v;
                    },
                    r[i]);
            }
            o << '\n';
        }
        return o.str();
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<Cell>> rows_;
};

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << text;
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// AllocationResult

/// One row per user. Powers are per occupied subcarrier, in watts.
inline CsvTable allocation_table(const AllocationResult& r)
{
    CsvTable t({"cell", "user", "gamma1", "gamma2", "p1_w", "p2_w", "flagged"});
    for (int c = 0; c < kCells; ++c)
        for (std::size_t k = 0; k < r.users[c].size(); ++k) {
            const UserAllocation& u = r.users[c][k];
            t.add({std::string(cell_name(c)), (long long)k, u.gamma1, u.gamma2, u.p1, u.p2,
                   (long long)u.flagged});
        }
    return t;
}

inline CsvTable trace_table(const AllocationResult& r)
{
    CsvTable t({"iter", "q1_A", "q1_B", "q1_C", "max_rel_change"});
    for (const TraceRow& row : r.trace) t.add({(long long)row.iter, row.q[0], row.q[1], row.q[2], row.max_rel_change});
    return t;
}

/// Per-cell aggregates. `subcarriers` converts the per-subcarrier figure Q to station watts.
inline nlohmann::json allocation_summary(const AllocationResult& r, int subcarriers)
{
    nlohmann::json j;
    j["status"] = to_string(r.status);
    if (!r.message.empty()) j["message"] = r.message;
    j["alpha"] = r.alpha;
    j["q_total"] = r.total;
    j["power_total_w"] = r.total * subcarriers;
    j["iterations"] = r.iterations;
    j["polish_iterations"] = r.polish_iterations;
    j["flagged_users"] = r.flagged;
    nlohmann::json cells = nlohmann::json::array();
    for (int c = 0; c < kCells; ++c) {
        const CellAllocation& a = r.cells[c];
        cells.push_back({{"cell", cell_name(c)},
                         {"users", r.users[c].size()},
                         {"beta1", a.beta1},
                         {"beta2", a.beta2},
                         {"q1", a.q1},
                         {"q2", a.q2},
                         {"reused_band_used", a.reused_used},
                         {"protected_band_used", a.protected_used}});
    }
    j["cells"] = cells;
    return j;
}

} // namespace ffr
