#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "arbrepair/errors.hpp"

namespace arbrepair {

// One traded call quote. Premiums are in currency units, expiry is a year
// fraction. bid/ask are optional; when absent the spread floor applies during
// normalization.
struct option_quote {
    double expiry = 0.0;
    double strike = 0.0;
    double mid = 0.0;
    std::optional<double> bid;
    std::optional<double> ask;
};

// Discount factor and forward for one expiry.
struct curve_point {
    double expiry = 0.0;
    double discount = 1.0;
    double forward = 0.0;
};

// Node on the normalized grid: strike as forward moneyness, price as a
// fraction of discounted forward. Each expiry carries a synthetic node at
// moneyness 0 with price 1 (the forward itself), which anchors the small-strike
// end of the constraint families.
struct surface_node {
    double moneyness = 0.0;
    double price = 0.0;
    double bid_spread = 0.0;   // mid - bid, normalized; 0 on the synthetic node
    double ask_spread = 0.0;   // ask - mid, normalized
    bool augmented = false;
    int quote_index = -1;      // index into the input quote vector, -1 if augmented
};

struct expiry_slice {
    double expiry = 0.0;
    double discount = 1.0;
    double forward = 0.0;
    std::vector<surface_node> nodes;   // nodes[0] is the augmented node, rest sorted by moneyness

    int num_real() const { return static_cast<int>(nodes.size()) - 1; }
};

// Normalized option surface. Real (non-augmented) nodes are numbered
// expiry-major, strike-ascending; that numbering is the variable order used by
// the constraint system and the repair LPs.
struct normalized_surface {
    std::vector<expiry_slice> slices;
    int num_quotes = 0;               // real nodes across all slices
    std::vector<int> first_variable;  // per slice, variable index of nodes[1]

    int variable_index(int slice, int node) const {
        return first_variable[slice] + node - 1;
    }

    std::vector<double> prices() const {
        std::vector<double> c(num_quotes);
        for (std::size_t i = 0; i < slices.size(); ++i)
            for (int j = 1; j < static_cast<int>(slices[i].nodes.size()); ++j)
                c[variable_index(static_cast<int>(i), j)] = slices[i].nodes[j].price;
        return c;
    }

    std::vector<double> bid_spreads() const {
        std::vector<double> d(num_quotes);
        for (std::size_t i = 0; i < slices.size(); ++i)
            for (int j = 1; j < static_cast<int>(slices[i].nodes.size()); ++j)
                d[variable_index(static_cast<int>(i), j)] = slices[i].nodes[j].bid_spread;
        return d;
    }

    std::vector<double> ask_spreads() const {
        std::vector<double> d(num_quotes);
        for (std::size_t i = 0; i < slices.size(); ++i)
            for (int j = 1; j < static_cast<int>(slices[i].nodes.size()); ++j)
                d[variable_index(static_cast<int>(i), j)] = slices[i].nodes[j].ask_spread;
        return d;
    }

    // quote index -> (slice, node); inverse of the variable numbering
    std::vector<std::pair<int, int>> variable_nodes() const {
        std::vector<std::pair<int, int>> out(num_quotes);
        for (std::size_t i = 0; i < slices.size(); ++i)
            for (int j = 1; j < static_cast<int>(slices[i].nodes.size()); ++j)
                out[variable_index(static_cast<int>(i), j)] = {static_cast<int>(i), j};
        return out;
    }
};

struct repaired_quote {
    int quote_index = -1;
    double premium = 0.0;
};

namespace detail {

constexpr double expiry_match_tol = 1e-12;
constexpr double spread_floor = 1e-8;

inline bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

} // namespace detail

// Normalize a set of call quotes against their forward/discount curves.
// Quotes are grouped by expiry (matched within 1e-12), strikes sorted
// ascending, and each slice gets the synthetic moneyness-0 node prepended.
// Duplicate strikes within an expiry are a hard error: silently averaging or
// dropping quotes would hide data problems the repair is meant to surface.
inline normalized_surface normalize_surface(const std::vector<option_quote>& quotes,
                                            const std::vector<curve_point>& curves) {
    if (quotes.empty())
        throw error(errc::invalid_argument, "no quotes supplied");

    for (std::size_t q = 0; q < quotes.size(); ++q) {
        const auto& it = quotes[q];
        const std::string tag = "quote " + std::to_string(q);
        if (!detail::finite_positive(it.expiry))
            throw error(errc::non_positive_input, tag + ": expiry must be positive");
        if (!detail::finite_positive(it.strike))
            throw error(errc::non_positive_input, tag + ": strike must be positive");
        if (!std::isfinite(it.mid) || it.mid < 0.0)
            throw error(errc::non_positive_input, tag + ": mid must be non-negative");
        if (it.bid && (!std::isfinite(*it.bid) || *it.bid < 0.0))
            throw error(errc::non_positive_input, tag + ": bid must be non-negative");
        if (it.ask && (!std::isfinite(*it.ask) || *it.ask < 0.0))
            throw error(errc::non_positive_input, tag + ": ask must be non-negative");
        if (it.bid && *it.bid > it.mid)
            throw error(errc::crossed_quote, tag + ": bid above mid");
        if (it.ask && *it.ask < it.mid)
            throw error(errc::crossed_quote, tag + ": ask below mid");
    }

    std::vector<int> order(quotes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (quotes[a].expiry != quotes[b].expiry) return quotes[a].expiry < quotes[b].expiry;
        return quotes[a].strike < quotes[b].strike;
    });

    normalized_surface surf;
    std::size_t pos = 0;
    while (pos < order.size()) {
        const double expiry = quotes[order[pos]].expiry;
        std::size_t end = pos;
        while (end < order.size() && quotes[order[end]].expiry - expiry <= detail::expiry_match_tol)
            ++end;

        const curve_point* curve = nullptr;
        for (const auto& cp : curves)
            if (std::abs(cp.expiry - expiry) <= detail::expiry_match_tol) { curve = &cp; break; }
        if (!curve)
            throw error(errc::missing_curve, "no curve point for expiry " + std::to_string(expiry));
        if (!std::isfinite(curve->discount) || curve->discount <= 0.0 || curve->discount > 1.0)
            throw error(errc::non_positive_input,
                        "discount must lie in (0,1] at expiry " + std::to_string(expiry));
        if (!detail::finite_positive(curve->forward))
            throw error(errc::non_positive_input,
                        "forward must be positive at expiry " + std::to_string(expiry));

        expiry_slice slice;
        slice.expiry = expiry;
        slice.discount = curve->discount;
        slice.forward = curve->forward;
        const double df = curve->discount * curve->forward;

        surface_node anchor;
        anchor.moneyness = 0.0;
        anchor.price = 1.0;
        anchor.augmented = true;
        slice.nodes.push_back(anchor);

        for (std::size_t p = pos; p < end; ++p) {
            const auto& q = quotes[order[p]];
            surface_node n;
            n.moneyness = q.strike / curve->forward;
            n.price = q.mid / df;
            n.bid_spread = q.bid ? (q.mid - *q.bid) / df : detail::spread_floor;
            n.ask_spread = q.ask ? (*q.ask - q.mid) / df : detail::spread_floor;
            if (n.bid_spread <= 0.0) n.bid_spread = detail::spread_floor;
            if (n.ask_spread <= 0.0) n.ask_spread = detail::spread_floor;
            n.quote_index = order[p];
            slice.nodes.push_back(n);
        }

        for (std::size_t j = 2; j < slice.nodes.size(); ++j) {
            const double prev = slice.nodes[j - 1].moneyness;
            const double cur = slice.nodes[j].moneyness;
            if (cur - prev < 1e-12 * std::max(1.0, cur))
                throw error(errc::duplicate_strike,
                            "quotes " + std::to_string(slice.nodes[j - 1].quote_index) + " and " +
                                std::to_string(slice.nodes[j].quote_index) +
                                " share expiry/strike " + std::to_string(expiry) + "/" +
                                std::to_string(cur * curve->forward));
        }

        surf.first_variable.push_back(surf.num_quotes);
        surf.num_quotes += slice.num_real();
        surf.slices.push_back(std::move(slice));
        pos = end;
    }
    return surf;
}

// Map repaired normalized prices back to currency premiums, keyed by the
// original quote index.
inline std::vector<repaired_quote> denormalize_prices(const normalized_surface& surf,
                                                      const std::vector<double>& prices) {
    if (static_cast<int>(prices.size()) != surf.num_quotes)
        throw error(errc::dimension_mismatch,
                    "expected " + std::to_string(surf.num_quotes) + " prices, got " +
                        std::to_string(prices.size()));
    std::vector<repaired_quote> out;
    out.reserve(prices.size());
    for (std::size_t i = 0; i < surf.slices.size(); ++i) {
        const auto& s = surf.slices[i];
        const double df = s.discount * s.forward;
        for (int j = 1; j < static_cast<int>(s.nodes.size()); ++j)
            out.push_back({s.nodes[j].quote_index,
                           prices[surf.variable_index(static_cast<int>(i), j)] * df});
    }
    std::sort(out.begin(), out.end(),
              [](const repaired_quote& a, const repaired_quote& b) {
                  return a.quote_index < b.quote_index;
              });
    return out;
}

} // namespace arbrepair
