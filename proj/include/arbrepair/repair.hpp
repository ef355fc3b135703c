#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "arbrepair/constraints.hpp"
#include "arbrepair/errors.hpp"
#include "arbrepair/lp.hpp"
#include "arbrepair/market.hpp"

namespace arbrepair {

enum class repair_objective { l1, l1ba };

inline const char* repair_objective_name(repair_objective o) {
    return o == repair_objective::l1 ? "l1" : "l1ba";
}

struct repair_config {
    repair_objective objective = repair_objective::l1;
    double feasibility_tol = 1e-9;    // allowed residual slack after repair
    double delta0_override = 0.0;     // 0 picks min(1/N, smallest half-spread)
    solve_options lp;
};

// perturbations smaller than this count as zero when summarizing a repair
constexpr double perturbation_zero_tol = 1e-7;

struct repair_result {
    std::vector<double> epsilon;      // per variable, normalized units
    std::vector<double> repaired;     // prices + epsilon
    double objective_value = 0.0;
    double delta0 = 0.0;              // 0 when the plain l1 objective ran
    double min_residual = 0.0;        // worst row residual at the repaired prices
    int n_perturbed = 0;
    int n_effective = 0;              // perturbations that escape the quoted spread
    int lp_iterations = 0;
};

inline int count_perturbed(std::span<const double> epsilon) {
    int n = 0;
    for (double e : epsilon)
        if (std::abs(e) > perturbation_zero_tol) ++n;
    return n;
}

inline int count_effective(std::span<const double> epsilon, std::span<const double> ask_spread,
                           std::span<const double> bid_spread) {
    int n = 0;
    for (std::size_t j = 0; j < epsilon.size(); ++j)
        if (epsilon[j] > ask_spread[j] + perturbation_zero_tol ||
            epsilon[j] < -(bid_spread[j] + perturbation_zero_tol))
            ++n;
    return n;
}

// Base slope scale of the spread-aware objective: small enough that staying
// inside every quoted band is always cheaper than leaving any of them.
inline double compute_delta0(std::span<const double> ask_spread,
                             std::span<const double> bid_spread, double override_value = 0.0) {
    double narrowest = lp_infinity;
    for (double s : ask_spread) narrowest = std::min(narrowest, s);
    for (double s : bid_spread) narrowest = std::min(narrowest, s);
    if (override_value != 0.0) {
        if (!(override_value > 0.0) || override_value > narrowest)
            throw error(errc::invalid_argument,
                        "delta0 must lie in (0, " + std::to_string(narrowest) + "]");
        return override_value;
    }
    return std::min(1.0 / static_cast<double>(ask_spread.size()), narrowest);
}

inline double compute_delta0(const normalized_surface& surf, double override_value = 0.0) {
    return compute_delta0(surf.ask_spreads(), surf.bid_spreads(), override_value);
}

namespace repdetail {

// bound minus row value: positive entries are the violated rows
inline std::vector<double> shortfall(const constraint_system& sys,
                                     std::span<const double> prices) {
    std::vector<double> r(sys.rows.size());
    for (std::size_t i = 0; i < sys.rows.size(); ++i) r[i] = -sys.rows[i].residual(prices);
    return r;
}

inline std::vector<std::vector<std::pair<int, double>>> transpose(const constraint_system& sys) {
    std::vector<std::vector<std::pair<int, double>>> cols(sys.num_variables);
    for (std::size_t i = 0; i < sys.rows.size(); ++i) {
        const auto& row = sys.rows[i];
        for (int t = 0; t < row.num_terms; ++t)
            cols[row.terms[t].variable].emplace_back(static_cast<int>(i),
                                                     row.terms[t].coefficient);
    }
    return cols;
}

inline lp_solution run(linear_program& lp, const solve_options& opt, const char* what) {
    auto sol = solve(lp, opt);
    if (sol.status != solve_status::optimal)
        throw error(errc::solver_failure,
                    std::string(what) + " solve ended " + solve_status_name(sol.status));
    return sol;
}

// Minimal total perturbation. Perturbing is a convex piecewise-linear cost,
// so instead of doubling the variable count we solve the dual: one variable
// per constraint row, one range row per quote. The dual starts feasible at
// zero and its basis stays as small as the quote count; the perturbations
// come back as the multipliers of the range rows, sign flipped.
inline repair_result solve_l1(const constraint_system& sys, std::span<const double> r,
                              const solve_options& opt) {
    const int nrows = static_cast<int>(sys.rows.size());
    const auto cols = transpose(sys);

    linear_program lp;
    lp.resize(nrows);
    for (int i = 0; i < nrows; ++i) {
        lp.objective[i] = -r[i];
        lp.lower_bounds[i] = 0.0;
    }
    for (const auto& col : cols) lp.add_row(col, -1.0, 1.0);

    auto sol = run(lp, opt, "perturbation");
    repair_result out;
    out.lp_iterations = sol.iterations;
    out.epsilon.resize(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) out.epsilon[j] = -sol.row_duals[j];
    for (double e : out.epsilon) out.objective_value += std::abs(e);
    return out;
}

// Spread-aware variant: moving within the quoted band costs delta0 per full
// half-spread, leaving it costs like the plain objective. The piecewise cost
// splits each perturbation into a banded and an outside part, and the dual
// again keeps one variable per constraint row plus a bounded correction pair
// per quote, three rows per quote in total.
inline repair_result solve_l1ba(const constraint_system& sys, std::span<const double> r,
                                std::span<const double> ask_spread,
                                std::span<const double> bid_spread, double delta0,
                                const solve_options& opt) {
    const int nrows = static_cast<int>(sys.rows.size());
    const int nvars = sys.num_variables;
    const auto cols = transpose(sys);

    linear_program lp;
    lp.resize(nrows + 2 * nvars);
    for (int i = 0; i < nrows; ++i) {
        lp.objective[i] = -r[i];
        lp.lower_bounds[i] = 0.0;
    }
    const int nu = nrows;          // multipliers of the ask-side band caps
    const int mu = nrows + nvars;  // multipliers of the bid-side band caps
    for (int j = 0; j < nvars; ++j) {
        lp.objective[nu + j] = ask_spread[j];
        lp.objective[mu + j] = bid_spread[j];
        lp.lower_bounds[nu + j] = 0.0;
        lp.lower_bounds[mu + j] = 0.0;
    }

    std::vector<std::pair<int, double>> terms;
    for (int j = 0; j < nvars; ++j) {
        terms = cols[j];
        terms.emplace_back(nu + j, -1.0);
        lp.add_row(terms, -lp_infinity, delta0 / ask_spread[j]);   // banded upward move

        terms = cols[j];
        for (auto& t : terms) t.second = -t.second;
        terms.emplace_back(mu + j, -1.0);
        lp.add_row(terms, -lp_infinity, delta0 / bid_spread[j]);   // banded downward move

        lp.add_row(cols[j], -1.0, 1.0);                            // moves beyond the band
    }

    auto sol = run(lp, opt, "spread-aware perturbation");
    repair_result out;
    out.lp_iterations = sol.iterations;
    out.delta0 = delta0;
    out.epsilon.resize(nvars);
    for (int j = 0; j < nvars; ++j) {
        const double up_in = -sol.row_duals[3 * j];
        const double down_in = -sol.row_duals[3 * j + 1];
        const double outside = -sol.row_duals[3 * j + 2];
        out.epsilon[j] = up_in - down_in + outside;
    }
    for (int j = 0; j < nvars; ++j) {
        const double e = out.epsilon[j];
        if (e >= 0.0)
            out.objective_value += e <= ask_spread[j] ? delta0 / ask_spread[j] * e
                                                      : delta0 + (e - ask_spread[j]);
        else
            out.objective_value += -e <= bid_spread[j] ? delta0 / bid_spread[j] * -e
                                                       : delta0 + (-e - bid_spread[j]);
    }
    return out;
}

} // namespace repdetail

// Repair against explicit prices and half-spreads; the surface accessors are
// the usual source, but stress runs swap in perturbed prices with the same
// constraint matrix.
inline repair_result repair(const constraint_system& sys, std::span<const double> prices,
                            std::span<const double> ask_spread,
                            std::span<const double> bid_spread, const repair_config& cfg = {}) {
    if (sys.num_variables != static_cast<int>(prices.size()) ||
        prices.size() != ask_spread.size() || prices.size() != bid_spread.size())
        throw error(errc::dimension_mismatch, "constraint system does not match price vector");

    const auto r = repdetail::shortfall(sys, prices);
    const bool violated =
        std::any_of(r.begin(), r.end(), [&](double v) { return v > cfg.feasibility_tol; });

    repair_result out;
    if (!violated) {
        out.epsilon.assign(prices.size(), 0.0);
        if (cfg.objective == repair_objective::l1ba)
            out.delta0 = compute_delta0(ask_spread, bid_spread, cfg.delta0_override);
    } else if (cfg.objective == repair_objective::l1) {
        out = repdetail::solve_l1(sys, r, cfg.lp);
    } else {
        const double delta0 = compute_delta0(ask_spread, bid_spread, cfg.delta0_override);
        out = repdetail::solve_l1ba(sys, r, ask_spread, bid_spread, delta0, cfg.lp);
    }

    out.repaired.resize(prices.size());
    for (std::size_t j = 0; j < prices.size(); ++j) out.repaired[j] = prices[j] + out.epsilon[j];

    out.min_residual = lp_infinity;
    for (const auto& row : sys.rows)
        out.min_residual = std::min(out.min_residual, row.residual(out.repaired));
    if (sys.rows.empty()) out.min_residual = 0.0;
    if (out.min_residual < -cfg.feasibility_tol)
        throw error(errc::solver_failure, "repaired prices violate a row by " +
                                              std::to_string(-out.min_residual));

    out.n_perturbed = count_perturbed(out.epsilon);
    out.n_effective = count_effective(out.epsilon, ask_spread, bid_spread);
    return out;
}

inline repair_result repair(const constraint_system& sys, const normalized_surface& surf,
                            const repair_config& cfg = {}) {
    return repair(sys, surf.prices(), surf.ask_spreads(), surf.bid_spreads(), cfg);
}

struct portfolio_leg {
    int quote_index = -1;
    bool buy = false;
    double weight = 0.0;      // contracts per unit notional of the strategy
    double price = 0.0;       // normalized execution price: ask when buying, bid when selling
};

struct arbitrage_portfolio {
    int row = -1;
    constraint_kind kind = constraint_kind::outright;
    double immediate_profit = 0.0;   // normalized cash received when executing
    std::vector<portfolio_leg> legs;
};

// Rows whose worst-case value over the quoted bands still falls short of the
// bound are arbitrage at touch prices: buy the positive legs at the ask,
// sell the negative ones at the bid, and the row guarantees the bound at
// expiry while the cash collected now exceeds it. Sorted by profit, best
// first. Moneyness-0 legs settle at their pinned price inside the bound.
inline std::vector<arbitrage_portfolio> extract_executable_arbitrage(
    const constraint_system& sys, const normalized_surface& surf, double tolerance = 1e-9) {
    const auto prices = surf.prices();
    const auto ask = surf.ask_spreads();
    const auto bid = surf.bid_spreads();
    const auto nodes = surf.variable_nodes();

    std::vector<arbitrage_portfolio> found;
    for (std::size_t i = 0; i < sys.rows.size(); ++i) {
        const auto& row = sys.rows[i];
        double extremal = 0.0;
        for (int t = 0; t < row.num_terms; ++t) {
            const auto& term = row.terms[t];
            extremal += term.coefficient >= 0.0
                            ? term.coefficient * (prices[term.variable] + ask[term.variable])
                            : term.coefficient * (prices[term.variable] - bid[term.variable]);
        }
        if (extremal >= row.bound - tolerance) continue;

        arbitrage_portfolio p;
        p.row = static_cast<int>(i);
        p.kind = row.kind;
        p.immediate_profit = row.bound - extremal;
        for (int t = 0; t < row.num_terms; ++t) {
            const auto& term = row.terms[t];
            const auto& node = surf.slices[nodes[term.variable].first]
                                   .nodes[nodes[term.variable].second];
            portfolio_leg leg;
            leg.quote_index = node.quote_index;
            leg.buy = term.coefficient >= 0.0;
            leg.weight = std::abs(term.coefficient);
            leg.price = leg.buy ? node.price + node.ask_spread : node.price - node.bid_spread;
            p.legs.push_back(leg);
        }
        found.push_back(std::move(p));
    }
    std::stable_sort(found.begin(), found.end(),
                     [](const arbitrage_portfolio& a, const arbitrage_portfolio& b) {
                         return a.immediate_profit > b.immediate_profit;
                     });
    return found;
}

} // namespace arbrepair
