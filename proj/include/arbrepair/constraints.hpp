#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "arbrepair/errors.hpp"
#include "arbrepair/market.hpp"

namespace arbrepair {

enum class constraint_kind : int {
    outright = 0,                    // last-strike call price stays non-negative
    vertical_spread_lower,           // adjacent call spread within an expiry
    vertical_spread_upper_at_zero,   // first spread against the moneyness-0 node, capped at 1
    vertical_butterfly,              // adjacent butterfly within an expiry
    calendar_spread,                 // same strike, longer expiry dominates
    calendar_vertical_spread,        // longer-expiry node against the straddling anchor
    calendar_butterfly_absolute,     // calendar butterfly with one wing on the anchor expiry
    calendar_butterfly_relative,     // calendar butterfly with both wings on longer expiries
};

constexpr int num_constraint_kinds = 8;

inline const char* constraint_kind_name(constraint_kind k) {
    switch (k) {
        case constraint_kind::outright:                      return "outright";
        case constraint_kind::vertical_spread_lower:         return "vertical_spread_lower";
        case constraint_kind::vertical_spread_upper_at_zero: return "vertical_spread_upper_at_zero";
        case constraint_kind::vertical_butterfly:            return "vertical_butterfly";
        case constraint_kind::calendar_spread:               return "calendar_spread";
        case constraint_kind::calendar_vertical_spread:      return "calendar_vertical_spread";
        case constraint_kind::calendar_butterfly_absolute:   return "calendar_butterfly_absolute";
        case constraint_kind::calendar_butterfly_relative:   return "calendar_butterfly_relative";
    }
    return "unknown";
}

inline bool is_calendar_kind(constraint_kind k) {
    return k == constraint_kind::calendar_spread ||
           k == constraint_kind::calendar_vertical_spread ||
           k == constraint_kind::calendar_butterfly_absolute ||
           k == constraint_kind::calendar_butterfly_relative;
}

struct node_ref {
    int slice = -1;
    int node = -1;
};

struct constraint_term {
    int variable = -1;
    double coefficient = 0.0;
};

// One linear inequality sum(coefficient * price) >= bound over the real
// nodes. Contributions of the moneyness-0 nodes (price pinned at 1) are
// folded into the bound, so a row never has more than three terms.
struct constraint_row {
    constraint_kind kind = constraint_kind::outright;
    std::array<constraint_term, 3> terms{};
    int num_terms = 0;
    double bound = 0.0;
    node_ref anchor;                  // (i*, j*) of the generating family

    void add_term(int variable, double coefficient) {
        terms[num_terms++] = {variable, coefficient};
    }

    double residual(std::span<const double> prices) const {
        double acc = -bound;
        for (int t = 0; t < num_terms; ++t) acc += terms[t].coefficient * prices[terms[t].variable];
        return acc;
    }
};

struct constraint_system {
    std::vector<constraint_row> rows;
    int num_variables = 0;
    std::array<int, num_constraint_kinds> kind_counts{};

    int count(constraint_kind k) const { return kind_counts[static_cast<int>(k)]; }
};

struct build_options {
    double strike_match_tol = 1e-9;   // moneyness matching across expiries
};

// Slope of the chord through two grid nodes, price over moneyness.
inline double beta(const normalized_surface& surf, node_ref a, node_ref b) {
    const auto& na = surf.slices[a.slice].nodes[a.node];
    const auto& nb = surf.slices[b.slice].nodes[b.node];
    const double dk = na.moneyness - nb.moneyness;
    if (dk == 0.0)
        throw error(errc::equal_strikes, "slope through equal strikes is undefined");
    return (na.price - nb.price) / dk;
}

namespace condetail {

struct keyed_row {
    std::array<int, 7> key{};   // kind, then family indices, then sub-family
    constraint_row row;
};

inline void finalize(std::vector<keyed_row>& keyed, constraint_system& sys) {
    std::sort(keyed.begin(), keyed.end(),
              [](const keyed_row& a, const keyed_row& b) { return a.key < b.key; });
    sys.rows.reserve(keyed.size());
    for (auto& kr : keyed) {
        ++sys.kind_counts[static_cast<int>(kr.row.kind)];
        sys.rows.push_back(kr.row);
    }
}

} // namespace condetail

// Build the reduced inequality system: per-expiry outrights, adjacent
// vertical spreads (with the unit cap on the spread against the moneyness-0
// node) and adjacent butterflies, plus the cross-expiry families anchored on
// each strike: equal-strike calendar spreads, calendar vertical spreads over
// the straddling interval, and the two calendar butterfly layouts. Rows are
// scaled by strike gaps so coefficients stay affine in the prices; a price
// vector satisfying every row is arbitrage-free, and the row set is small
// (linear in N per expiry pair) rather than the cubic full enumeration.
inline constraint_system build_constraints(const normalized_surface& surf,
                                           const build_options& opt = {}) {
    const double tol = opt.strike_match_tol;
    const int m = static_cast<int>(surf.slices.size());

    constraint_system sys;
    sys.num_variables = surf.num_quotes;
    std::vector<condetail::keyed_row> keyed;

    auto var = [&](int i, int j) { return surf.variable_index(i, j); };
    auto k_of = [&](int i, int j) { return surf.slices[i].nodes[j].moneyness; };

    auto push = [&](constraint_kind kind, constraint_row row, std::array<int, 6> fam) {
        row.kind = kind;
        keyed.push_back({{static_cast<int>(kind), fam[0], fam[1], fam[2], fam[3], fam[4], fam[5]},
                         row});
    };

    // three-node butterfly centered on x, wings l/r; the moneyness-0 node can
    // only ever appear as the left wing
    auto butterfly_row = [&](constraint_kind kind, node_ref l, node_ref x, node_ref r,
                             std::array<int, 6> fam) {
        const double gl = k_of(x.slice, x.node) - k_of(l.slice, l.node);
        const double gr = k_of(r.slice, r.node) - k_of(x.slice, x.node);
        constraint_row row;
        row.anchor = x;
        if (surf.slices[l.slice].nodes[l.node].augmented) {
            row.add_term(var(x.slice, x.node), -(gl + gr));
            row.add_term(var(r.slice, r.node), gl);
            row.bound = -gr;
        } else {
            row.add_term(var(l.slice, l.node), gr);
            row.add_term(var(x.slice, x.node), -(gl + gr));
            row.add_term(var(r.slice, r.node), gl);
            row.bound = 0.0;
        }
        push(kind, row, fam);
    };

    for (int i = 0; i < m; ++i) {
        const int n = surf.slices[i].num_real();

        {   // outright: last strike keeps a non-negative price
            constraint_row row;
            row.anchor = {i, n};
            row.add_term(var(i, n), 1.0);
            row.bound = 0.0;
            push(constraint_kind::outright, row, {i, n, 0, 0, 0, 0});
        }

        for (int j = 1; j <= n; ++j) {   // adjacent spreads are decreasing
            constraint_row row;
            row.anchor = {i, j};
            if (j == 1) {
                row.add_term(var(i, 1), -1.0);
                row.bound = -1.0;
            } else {
                row.add_term(var(i, j - 1), 1.0);
                row.add_term(var(i, j), -1.0);
                row.bound = 0.0;
            }
            push(constraint_kind::vertical_spread_lower, row, {i, j, 0, 0, 0, 0});
        }

        {   // the spread against the moneyness-0 node is at most 1
            constraint_row row;
            row.anchor = {i, 1};
            row.add_term(var(i, 1), 1.0);
            row.bound = 1.0 - k_of(i, 1);
            push(constraint_kind::vertical_spread_upper_at_zero, row, {i, 1, 0, 0, 0, 0});
        }

        for (int j = 1; j + 1 <= n; ++j)   // adjacent butterflies are convex
            butterfly_row(constraint_kind::vertical_butterfly, {i, j - 1}, {i, j}, {i, j + 1},
                          {i, j, 0, 0, 0, 0});
    }

    // equal strikes across expiries: group every node by moneyness
    {
        struct entry { double k; int slice; int node; };
        std::vector<entry> all;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < static_cast<int>(surf.slices[i].nodes.size()); ++j)
                all.push_back({k_of(i, j), i, j});
        std::sort(all.begin(), all.end(), [](const entry& a, const entry& b) {
            if (a.k != b.k) return a.k < b.k;
            return a.slice < b.slice;
        });
        std::size_t lo = 0;
        while (lo < all.size()) {
            std::size_t hi = lo + 1;
            while (hi < all.size() && all[hi].k - all[lo].k <= tol) ++hi;
            for (std::size_t p = lo; p < hi; ++p) {
                for (std::size_t q = p + 1; q < hi; ++q) {
                    const entry& a = all[p];
                    const entry& b = all[q];
                    if (a.slice == b.slice) continue;
                    const bool a_aug = surf.slices[a.slice].nodes[a.node].augmented;
                    const bool b_aug = surf.slices[b.slice].nodes[b.node].augmented;
                    if (a_aug && b_aug) continue;   // both prices pinned at 1
                    const entry& first = a.slice < b.slice ? a : b;
                    const entry& second = a.slice < b.slice ? b : a;
                    constraint_row row;
                    row.anchor = {first.slice, first.node};
                    if (surf.slices[second.slice].nodes[second.node].augmented) {
                        row.add_term(var(first.slice, first.node), -1.0);
                        row.bound = -1.0;
                    } else if (surf.slices[first.slice].nodes[first.node].augmented) {
                        row.add_term(var(second.slice, second.node), 1.0);
                        row.bound = 1.0;
                    } else {
                        row.add_term(var(second.slice, second.node), 1.0);
                        row.add_term(var(first.slice, first.node), -1.0);
                        row.bound = 0.0;
                    }
                    push(constraint_kind::calendar_spread, row,
                         {first.slice, first.node, second.slice, second.node, 0, 0});
                }
            }
            lo = hi;
        }
    }

    // nodes of longer expiries falling strictly inside an anchor interval
    // (lo, hi); anything matching a boundary within tol belongs to the
    // equal-strike family instead
    auto inside = [&](int anchor_slice, double klo, double khi) {
        std::vector<node_ref> found;
        for (int i = anchor_slice + 1; i < m; ++i)
            for (int j = 1; j <= surf.slices[i].num_real(); ++j) {
                const double k = k_of(i, j);
                if (k <= klo + tol || k >= khi - tol) continue;
                found.push_back({i, j});
            }
        return found;
    };
    auto beyond = [&](int anchor_slice, double klo) {
        std::vector<node_ref> found;
        for (int i = anchor_slice + 1; i < m; ++i)
            for (int j = 1; j <= surf.slices[i].num_real(); ++j)
                if (k_of(i, j) > klo + tol) found.push_back({i, j});
        return found;
    };

    for (int is = 0; is < m; ++is) {
        const int n = surf.slices[is].num_real();

        for (int js = 1; js <= n; ++js) {
            const auto hood = inside(is, k_of(is, js - 1), k_of(is, js));

            // longer-expiry nodes inside the interval dominate the anchor price
            for (const auto& nr : hood) {
                constraint_row row;
                row.anchor = {is, js};
                row.add_term(var(nr.slice, nr.node), 1.0);
                row.add_term(var(is, js), -1.0);
                row.bound = 0.0;
                push(constraint_kind::calendar_vertical_spread, row,
                     {is, js, nr.slice, nr.node, 0, 0});
            }

            // calendar butterflies with one wing on the anchor expiry
            if (js <= n - 1)
                for (const auto& nr : hood)
                    butterfly_row(constraint_kind::calendar_butterfly_absolute, nr, {is, js},
                                  {is, js + 1}, {is, js, nr.slice, nr.node, 0, 0});
            if (js >= 2)
                for (const auto& nr : hood)
                    butterfly_row(constraint_kind::calendar_butterfly_absolute, {is, js - 2},
                                  {is, js - 1}, nr, {is, js, nr.slice, nr.node, 0, 1});
        }

        const auto tail = beyond(is, k_of(is, n));
        for (const auto& nr : tail)
            butterfly_row(constraint_kind::calendar_butterfly_absolute, {is, n - 1}, {is, n},
                          nr, {is, n, nr.slice, nr.node, 0, 2});

        // calendar butterflies with both wings on longer expiries
        for (int js = 1; js <= n; ++js) {
            const auto left = inside(is, k_of(is, js - 1), k_of(is, js));
            if (left.empty()) continue;
            const auto right = js < n ? inside(is, k_of(is, js), k_of(is, js + 1))
                                      : beyond(is, k_of(is, n));
            for (const auto& l : left)
                for (const auto& r : right)
                    butterfly_row(constraint_kind::calendar_butterfly_relative, l, {is, js}, r,
                                  {is, js, l.slice, l.node, r.slice, r.node});
        }
    }

    condetail::finalize(keyed, sys);
    return sys;
}

struct violation {
    int row = -1;          // index into constraint_system::rows, -1 for enumerated strategies
    constraint_kind kind = constraint_kind::outright;
    double residual = 0.0;
};

struct violation_report {
    int total = 0;
    std::array<int, num_constraint_kinds> per_kind{};
    double worst_residual = 0.0;
    double calendar_fraction = 0.0;
    std::vector<violation> violations;

    void add(int row, constraint_kind kind, double residual) {
        ++total;
        ++per_kind[static_cast<int>(kind)];
        worst_residual = std::min(worst_residual, residual);
        violations.push_back({row, kind, residual});
    }

    void close() {
        if (total == 0) return;
        int cal = 0;
        for (int k = 0; k < num_constraint_kinds; ++k)
            if (is_calendar_kind(static_cast<constraint_kind>(k))) cal += per_kind[k];
        calendar_fraction = static_cast<double>(cal) / total;
    }
};

inline violation_report detect_violations(const constraint_system& sys,
                                          std::span<const double> prices,
                                          double tolerance = 1e-9) {
    if (static_cast<int>(prices.size()) != sys.num_variables)
        throw error(errc::dimension_mismatch, "price vector does not match constraint system");
    violation_report rep;
    for (std::size_t r = 0; r < sys.rows.size(); ++r) {
        const double res = sys.rows[r].residual(prices);
        if (res < -tolerance) rep.add(static_cast<int>(r), sys.rows[r].kind, res);
    }
    rep.close();
    return rep;
}

// Exhaustive check of every admissible spread and butterfly over the
// augmented grid, in slope form, plus outright non-negativity. Cubic in the
// node count, so only suitable as ground truth for moderate grids: if the
// reduced system passes, this must pass too.
inline violation_report enumerate_full_cousot(const normalized_surface& surf,
                                              std::span<const double> prices,
                                              double tolerance = 1e-9) {
    if (static_cast<int>(prices.size()) != surf.num_quotes)
        throw error(errc::dimension_mismatch, "price vector does not match surface");
    const int m = static_cast<int>(surf.slices.size());
    const double ktol = 1e-9;

    auto k_of = [&](int i, int j) { return surf.slices[i].nodes[j].moneyness; };
    auto c_of = [&](int i, int j) {
        return surf.slices[i].nodes[j].augmented ? 1.0
                                                 : prices[surf.variable_index(i, j)];
    };
    auto nodes_of = [&](int i) { return static_cast<int>(surf.slices[i].nodes.size()); };

    violation_report rep;

    for (int i = 0; i < m; ++i)
        for (int j = 1; j < nodes_of(i); ++j)
            if (c_of(i, j) < -tolerance)
                rep.add(-1, constraint_kind::outright, c_of(i, j));

    // spreads: sell the shorter-expiry higher strike, buy the longer-expiry lower one
    for (int i1 = 0; i1 < m; ++i1)
        for (int i2 = i1; i2 < m; ++i2)
            for (int j1 = 0; j1 < nodes_of(i1); ++j1)
                for (int j2 = 0; j2 < nodes_of(i2); ++j2) {
                    if (i1 == i2 && j1 == j2) continue;
                    const double dk = k_of(i1, j1) - k_of(i2, j2);
                    if (std::abs(dk) <= ktol) {
                        if (i1 == i2) continue;
                        if (j1 == 0 && j2 == 0) continue;
                        const double s = c_of(i2, j2) - c_of(i1, j1);
                        if (s < -tolerance) rep.add(-1, constraint_kind::calendar_spread, s);
                    } else if (dk > 0.0) {
                        const double s = (c_of(i2, j2) - c_of(i1, j1)) / dk;
                        if (i1 == i2) {
                            if (s < -tolerance)
                                rep.add(-1, constraint_kind::vertical_spread_lower, s);
                            if (s > 1.0 + tolerance)
                                rep.add(-1, constraint_kind::vertical_spread_upper_at_zero,
                                        1.0 - s);
                        } else if (s < -tolerance) {
                            rep.add(-1, constraint_kind::calendar_vertical_spread, s);
                        }
                    }
                }

    // butterflies: center on the shortest expiry of the triple
    for (int i = 0; i < m; ++i)
        for (int j = 1; j < nodes_of(i); ++j) {
            const double kx = k_of(i, j);
            const double cx = c_of(i, j);
            for (int i1 = i; i1 < m; ++i1)
                for (int j1 = 0; j1 < nodes_of(i1); ++j1) {
                    if (kx - k_of(i1, j1) <= ktol) continue;
                    const double bl = (cx - c_of(i1, j1)) / (kx - k_of(i1, j1));
                    for (int i2 = i; i2 < m; ++i2)
                        for (int j2 = 1; j2 < nodes_of(i2); ++j2) {
                            if (k_of(i2, j2) - kx <= ktol) continue;
                            const double br = (c_of(i2, j2) - cx) / (k_of(i2, j2) - kx);
                            const double b = br - bl;
                            if (b >= -tolerance) continue;
                            constraint_kind kind;
                            if (i1 == i && i2 == i)
                                kind = constraint_kind::vertical_butterfly;
                            else if (i1 > i && i2 > i)
                                kind = constraint_kind::calendar_butterfly_relative;
                            else
                                kind = constraint_kind::calendar_butterfly_absolute;
                            rep.add(-1, kind, b);
                        }
                }
        }

    rep.close();
    return rep;
}

} // namespace arbrepair
