#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "arbrepair/constraints.hpp"
#include "arbrepair/errors.hpp"
#include "arbrepair/market.hpp"
#include "arbrepair/repair.hpp"

namespace arbrepair {

struct stress_config {
    double lambda = 0.25;        // fraction of quotes shocked per trial
    double sigma = 1.0;          // scale of the lognormal shocks
    std::uint64_t seed = 0;
    int trials = 20;
    bool rescale_bands = false;  // scale a shocked quote's half-spreads along with it
    double detect_tol = 1e-9;
    repair_config repair;
};

namespace stressdetail {

inline std::uint64_t splitmix(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t s = a;
    s = splitmix(s) ^ b;
    s = splitmix(s) ^ c;
    return splitmix(s);
}

inline double to_unit(std::uint64_t bits) {   // (0, 1]
    return static_cast<double>((bits >> 11) + 1) * 0x1p-53;
}

inline double standard_normal(std::uint64_t key) {
    const double u1 = to_unit(splitmix(key));
    const double u2 = to_unit(splitmix(key));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

} // namespace stressdetail

struct noise_outcome {
    std::vector<double> noisy;     // prices with the shocks applied
    std::vector<double> factor;    // multiplier per price, 1 where untouched
    std::vector<int> shocked;      // indices hit, ascending
};

// Multiplies ceil(lambda * n) distinct prices by exp(sigma * Z). Which
// indices are hit depends on (seed, trial) only; the shock at an index
// depends on (seed, trial, index) only, so enlarging lambda keeps the shocks
// already present and adds new ones.
inline noise_outcome inject_noise(std::span<const double> prices, double lambda, double sigma,
                                  std::uint64_t seed, int trial) {
    if (!(lambda >= 0.0) || lambda > 1.0)
        throw error(errc::invalid_argument, "lambda must lie in [0, 1]");
    if (!(sigma >= 0.0)) throw error(errc::invalid_argument, "sigma must be non-negative");

    const int n = static_cast<int>(prices.size());
    const int count = static_cast<int>(std::ceil(lambda * n));

    noise_outcome out;
    out.noisy.assign(prices.begin(), prices.end());
    out.factor.assign(prices.size(), 1.0);

    std::vector<int> order(prices.size());
    std::iota(order.begin(), order.end(), 0);
    std::uint64_t shuffle_state =
        stressdetail::mix(seed, static_cast<std::uint64_t>(trial), 1ull << 40);
    for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[stressdetail::splitmix(shuffle_state) %
                                  static_cast<std::uint64_t>(i + 1)]);

    out.shocked.assign(order.begin(), order.begin() + count);
    std::sort(out.shocked.begin(), out.shocked.end());
    for (int j : out.shocked) {
        const std::uint64_t key =
            stressdetail::mix(seed, static_cast<std::uint64_t>(trial),
                              static_cast<std::uint64_t>(j));
        out.factor[j] = std::exp(sigma * stressdetail::standard_normal(key));
        out.noisy[j] = prices[j] * out.factor[j];
    }
    return out;
}

struct stress_trial {
    std::vector<double> noisy;
    std::vector<double> repaired;
    std::vector<int> shocked;
    int violations = 0;          // rows the shocked prices break
    double lambda_hat = 0.0;     // fraction of prices the repair moved
    double objective_value = 0.0;
    int n_perturbed = 0;
    int n_effective = 0;
};

struct stress_summary {
    int trials = 0;
    double mean_lambda_hat = 0.0;
    double mean_objective = 0.0;
    std::vector<double> log_ratios;   // log(repaired / shocked) where the repair moved
    std::vector<stress_trial> detail;
};

// Shocks an arbitrage-free surface repeatedly and reports how much of the
// damage the repair finds again. The constraint matrix never changes across
// trials, only the shortfall side does.
inline stress_summary run_stress(const constraint_system& sys, const normalized_surface& surf,
                                 const stress_config& cfg = {}) {
    if (cfg.trials < 1) throw error(errc::invalid_argument, "trials must be positive");
    const auto prices = surf.prices();
    const auto baseline = detect_violations(sys, prices, cfg.detect_tol);
    if (baseline.total > 0)
        throw error(errc::input_not_arbitrage_free,
                    "stress needs an arbitrage-free baseline, found " +
                        std::to_string(baseline.total) + " violated rows");

    const auto base_ask = surf.ask_spreads();
    const auto base_bid = surf.bid_spreads();
    const int n = surf.num_quotes;

    stress_summary sum;
    sum.trials = cfg.trials;
    for (int t = 0; t < cfg.trials; ++t) {
        auto noise = inject_noise(prices, cfg.lambda, cfg.sigma, cfg.seed, t);

        auto ask = base_ask;
        auto bid = base_bid;
        if (cfg.rescale_bands)
            for (int j = 0; j < n; ++j) {
                ask[j] *= noise.factor[j];
                bid[j] *= noise.factor[j];
            }

        auto res = repair(sys, noise.noisy, ask, bid, cfg.repair);

        stress_trial trial;
        trial.violations = detect_violations(sys, noise.noisy, cfg.detect_tol).total;
        trial.lambda_hat = static_cast<double>(res.n_perturbed) / n;
        trial.objective_value = res.objective_value;
        trial.n_perturbed = res.n_perturbed;
        trial.n_effective = res.n_effective;
        for (int j = 0; j < n; ++j)
            if (std::abs(res.epsilon[j]) > perturbation_zero_tol && res.repaired[j] > 0.0 &&
                noise.noisy[j] > 0.0)
                sum.log_ratios.push_back(std::log(res.repaired[j] / noise.noisy[j]));
        trial.noisy = std::move(noise.noisy);
        trial.repaired = std::move(res.repaired);
        trial.shocked = std::move(noise.shocked);

        sum.mean_lambda_hat += trial.lambda_hat;
        sum.mean_objective += trial.objective_value;
        sum.detail.push_back(std::move(trial));
    }
    sum.mean_lambda_hat /= cfg.trials;
    sum.mean_objective /= cfg.trials;
    return sum;
}

} // namespace arbrepair
