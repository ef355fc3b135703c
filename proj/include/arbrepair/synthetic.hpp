#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "arbrepair/black_scholes.hpp"
#include "arbrepair/market.hpp"

namespace arbrepair {

// Flat-volatility market generator for synthetic baselines and tests.
// Strikes are placed FX-style at fixed z-scores of the terminal standard
// deviation, so different tenors produce interleaved moneyness grids like
// real listed surfaces do.
struct synthetic_config {
    double vol = 0.2;
    std::vector<double> tenors = {1.0 / 52, 2.0 / 52, 1.0 / 12, 2.0 / 12, 0.25, 1.0 / 3,
                                  0.5,      0.75,     1.0,      1.25,     1.5,  1.75,
                                  2.0};
    std::vector<double> zscores = {-1.7, -1.28, -0.84, -0.44, 0.0, 0.44, 0.84, 1.28, 1.7};
    double spot = 1.05;        // forward at T=0+
    double drift = 0.01;       // forward curve growth rate
    double rate = 0.02;        // flat discounting
    double spread_frac = 0.0;  // proportional half-spread; 0 leaves bid/ask unset
};

struct synthetic_market {
    std::vector<option_quote> quotes;
    std::vector<curve_point> curves;
};

inline synthetic_market make_flat_vol_market(const synthetic_config& cfg = {}) {
    synthetic_market out;
    for (double t : cfg.tenors) {
        const double forward = cfg.spot * std::exp(cfg.drift * t);
        const double discount = std::exp(-cfg.rate * t);
        out.curves.push_back({t, discount, forward});
        const double stdev = cfg.vol * std::sqrt(t);
        for (double z : cfg.zscores) {
            option_quote q;
            q.expiry = t;
            q.strike = forward * std::exp(stdev * z);
            q.mid = black_premium(q.strike, t, cfg.vol, forward, discount);
            if (cfg.spread_frac > 0.0) {
                q.bid = q.mid * (1.0 - cfg.spread_frac);
                q.ask = q.mid * (1.0 + cfg.spread_frac);
            }
            out.quotes.push_back(q);
        }
    }
    return out;
}

} // namespace arbrepair
