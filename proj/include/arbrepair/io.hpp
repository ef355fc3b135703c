#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "arbrepair/constraints.hpp"
#include "arbrepair/errors.hpp"
#include "arbrepair/market.hpp"
#include "arbrepair/repair.hpp"
#include "arbrepair/stress.hpp"

namespace arbrepair {

struct snapshot {
    std::vector<option_quote> quotes;
    std::vector<curve_point> curves;
};

constexpr const char* snapshot_header = "expiry,strike,mid,bid,ask,forward,discount";
constexpr const char* repair_header =
    "expiry,strike,mid,bid,ask,forward,discount,mid_repaired,perturbation,effective";

// the file format's precision: 12 significant digits, stable under rereads
inline std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

namespace iodetail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() &&
           (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            return fields;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

inline double parse_number(std::string_view field, const std::string& where, const char* column) {
    double value = 0.0;
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || end != field.data() + field.size() || !std::isfinite(value))
        throw error(errc::parse_error, where + ": bad number '" + std::string(field) +
                                           "' in column " + column);
    return value;
}

inline std::optional<double> parse_optional(std::string_view field, const std::string& where,
                                            const char* column) {
    if (field.empty()) return {};
    return parse_number(field, where, column);
}

} // namespace iodetail

// One quote per line under a fixed header; bid and ask may be left empty.
// Every line repeats its expiry's forward and discount, which therefore have
// to agree across lines of the same expiry.
inline snapshot read_snapshot(std::istream& in, const std::string& name = "<stream>") {
    std::string line;
    if (!std::getline(in, line) || iodetail::trim(line) != snapshot_header)
        throw error(errc::parse_error, name + ": expected header '" +
                                           std::string(snapshot_header) + "'");

    snapshot snap;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (iodetail::trim(line).empty()) continue;
        const std::string where = name + " line " + std::to_string(lineno);

        const auto fields = iodetail::split(line);
        if (fields.size() != 7)
            throw error(errc::parse_error, where + ": expected 7 fields, got " +
                                               std::to_string(fields.size()));

        option_quote q;
        q.expiry = iodetail::parse_number(fields[0], where, "expiry");
        q.strike = iodetail::parse_number(fields[1], where, "strike");
        q.mid = iodetail::parse_number(fields[2], where, "mid");
        q.bid = iodetail::parse_optional(fields[3], where, "bid");
        q.ask = iodetail::parse_optional(fields[4], where, "ask");
        const double forward = iodetail::parse_number(fields[5], where, "forward");
        const double discount = iodetail::parse_number(fields[6], where, "discount");
        snap.quotes.push_back(q);

        bool found = false;
        for (const auto& cp : snap.curves) {
            if (std::abs(cp.expiry - q.expiry) > 1e-12) continue;
            if (std::abs(cp.forward - forward) > 1e-12 * std::max(1.0, std::abs(cp.forward)) ||
                std::abs(cp.discount - discount) > 1e-12)
                throw error(errc::parse_error,
                            where + ": forward/discount disagree with an earlier line of expiry " +
                                format_number(q.expiry));
            found = true;
            break;
        }
        if (!found) snap.curves.push_back({q.expiry, discount, forward});
    }
    if (snap.quotes.empty()) throw error(errc::parse_error, name + ": no quotes");
    return snap;
}

inline snapshot read_snapshot_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error(errc::io_error, "cannot open " + path);
    return read_snapshot(in, path);
}

namespace iodetail {

inline const curve_point& curve_for(const snapshot& snap, double expiry) {
    for (const auto& cp : snap.curves)
        if (std::abs(cp.expiry - expiry) <= 1e-12) return cp;
    throw error(errc::missing_curve, "no curve point for expiry " + format_number(expiry));
}

inline void write_quote_fields(std::ostream& out, const option_quote& q, const curve_point& cp) {
    out << format_number(q.expiry) << ',' << format_number(q.strike) << ','
        << format_number(q.mid) << ',';
    if (q.bid) out << format_number(*q.bid);
    out << ',';
    if (q.ask) out << format_number(*q.ask);
    out << ',' << format_number(cp.forward) << ',' << format_number(cp.discount);
}

} // namespace iodetail

inline void write_snapshot(std::ostream& out, const snapshot& snap) {
    out << snapshot_header << '\n';
    for (const auto& q : snap.quotes) {
        iodetail::write_quote_fields(out, q, iodetail::curve_for(snap, q.expiry));
        out << '\n';
    }
}

inline void write_snapshot_file(const std::string& path, const snapshot& snap) {
    std::ofstream out(path);
    if (!out) throw error(errc::io_error, "cannot write " + path);
    write_snapshot(out, snap);
}

// Snapshot columns plus the repair: premium after repair, the normalized
// perturbation that produced it, and whether it escaped the quoted band.
// Rows keep the input quote order.
inline void write_repair_csv(std::ostream& out, const snapshot& snap,
                             const normalized_surface& surf, const repair_result& res) {
    std::vector<int> var_of_quote(snap.quotes.size(), -1);
    const auto nodes = surf.variable_nodes();
    for (std::size_t j = 0; j < nodes.size(); ++j)
        var_of_quote[surf.slices[nodes[j].first].nodes[nodes[j].second].quote_index] =
            static_cast<int>(j);

    out << repair_header << '\n';
    for (std::size_t qi = 0; qi < snap.quotes.size(); ++qi) {
        const int j = var_of_quote[qi];
        const auto& node = surf.slices[nodes[j].first].nodes[nodes[j].second];
        const auto& slice = surf.slices[nodes[j].first];
        const double eps = res.epsilon[j];
        const bool effective = eps > node.ask_spread + perturbation_zero_tol ||
                               eps < -(node.bid_spread + perturbation_zero_tol);
        iodetail::write_quote_fields(out, snap.quotes[qi],
                                     iodetail::curve_for(snap, snap.quotes[qi].expiry));
        out << ',' << format_number(res.repaired[j] * slice.discount * slice.forward) << ','
            << format_number(eps) << ',' << (effective ? 1 : 0) << '\n';
    }
}

inline void write_repair_csv_file(const std::string& path, const snapshot& snap,
                                  const normalized_surface& surf, const repair_result& res) {
    std::ofstream out(path);
    if (!out) throw error(errc::io_error, "cannot write " + path);
    write_repair_csv(out, snap, surf, res);
}

// ---- json report shapes ----

inline nlohmann::json system_json(const normalized_surface& surf, const constraint_system& sys) {
    nlohmann::json kinds;
    for (int k = 0; k < num_constraint_kinds; ++k)
        kinds[constraint_kind_name(static_cast<constraint_kind>(k))] = sys.kind_counts[k];
    return {{"quotes", surf.num_quotes},
            {"expiries", surf.slices.size()},
            {"rows", sys.rows.size()},
            {"kinds", kinds}};
}

inline nlohmann::json violations_json(const violation_report& rep) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& v : rep.violations)
        rows.push_back({{"row", v.row},
                        {"kind", constraint_kind_name(v.kind)},
                        {"residual", v.residual}});
    return {{"total", rep.total},
            {"worst_residual", rep.worst_residual},
            {"calendar_fraction", rep.calendar_fraction},
            {"rows", rows}};
}

inline nlohmann::json portfolios_json(const std::vector<arbitrage_portfolio>& ports) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : ports) {
        nlohmann::json legs = nlohmann::json::array();
        for (const auto& leg : p.legs)
            legs.push_back({{"quote", leg.quote_index},
                            {"side", leg.buy ? "buy" : "sell"},
                            {"weight", leg.weight},
                            {"price", leg.price}});
        out.push_back({{"row", p.row},
                       {"kind", constraint_kind_name(p.kind)},
                       {"immediate_profit", p.immediate_profit},
                       {"legs", legs}});
    }
    return out;
}

inline nlohmann::json detect_report(const normalized_surface& surf, const constraint_system& sys,
                                    const violation_report& rep,
                                    const std::vector<arbitrage_portfolio>& ports,
                                    double tolerance) {
    return {{"command", "detect"},
            {"tolerance", tolerance},
            {"system", system_json(surf, sys)},
            {"violations", violations_json(rep)},
            {"portfolios", portfolios_json(ports)}};
}

inline nlohmann::json repair_report(const snapshot& snap, const normalized_surface& surf,
                                    const constraint_system& sys, const violation_report& before,
                                    const repair_result& res, const repair_config& cfg) {
    const auto nodes = surf.variable_nodes();
    std::vector<int> var_of_quote(snap.quotes.size(), -1);
    for (std::size_t j = 0; j < nodes.size(); ++j)
        var_of_quote[surf.slices[nodes[j].first].nodes[nodes[j].second].quote_index] =
            static_cast<int>(j);

    nlohmann::json quotes = nlohmann::json::array();
    for (std::size_t qi = 0; qi < snap.quotes.size(); ++qi) {
        const int j = var_of_quote[qi];
        const auto& node = surf.slices[nodes[j].first].nodes[nodes[j].second];
        const auto& slice = surf.slices[nodes[j].first];
        quotes.push_back(
            {{"quote", qi},
             {"expiry", snap.quotes[qi].expiry},
             {"strike", snap.quotes[qi].strike},
             {"mid", snap.quotes[qi].mid},
             {"mid_repaired", res.repaired[j] * slice.discount * slice.forward},
             {"perturbation", res.epsilon[j]},
             {"effective", res.epsilon[j] > node.ask_spread + perturbation_zero_tol ||
                               res.epsilon[j] < -(node.bid_spread + perturbation_zero_tol)}});
    }
    return {{"command", "repair"},
            {"objective", repair_objective_name(cfg.objective)},
            {"tolerance", cfg.feasibility_tol},
            {"system", system_json(surf, sys)},
            {"violations_before",
             {{"total", before.total},
              {"worst_residual", before.worst_residual},
              {"calendar_fraction", before.calendar_fraction}}},
            {"result",
             {{"objective_value", res.objective_value},
              {"delta0", res.delta0},
              {"n_perturbed", res.n_perturbed},
              {"n_effective", res.n_effective},
              {"min_residual", res.min_residual},
              {"lp_iterations", res.lp_iterations}}},
            {"quotes", quotes}};
}

inline nlohmann::json stress_report(const normalized_surface& surf, const constraint_system& sys,
                                    const stress_config& cfg, const stress_summary& sum) {
    nlohmann::json trials = nlohmann::json::array();
    for (std::size_t t = 0; t < sum.detail.size(); ++t) {
        const auto& trial = sum.detail[t];
        trials.push_back({{"trial", t},
                          {"violations", trial.violations},
                          {"lambda_hat", trial.lambda_hat},
                          {"objective_value", trial.objective_value},
                          {"n_perturbed", trial.n_perturbed},
                          {"n_effective", trial.n_effective}});
    }
    return {{"command", "stress"},
            {"config",
             {{"lambda", cfg.lambda},
              {"sigma", cfg.sigma},
              {"trials", cfg.trials},
              {"seed", cfg.seed},
              {"rescale_bands", cfg.rescale_bands},
              {"objective", repair_objective_name(cfg.repair.objective)}}},
            {"system", system_json(surf, sys)},
            {"summary",
             {{"mean_lambda_hat", sum.mean_lambda_hat},
              {"mean_objective", sum.mean_objective}}},
            {"log_ratios", sum.log_ratios},
            {"trials", trials}};
}

} // namespace arbrepair
