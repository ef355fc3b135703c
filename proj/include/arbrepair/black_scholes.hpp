#pragma once

#include <cmath>

#include "arbrepair/errors.hpp"

namespace arbrepair {

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Forward Black call price in normalized units: strike as forward moneyness,
// price as a fraction of the discounted forward. k = 0 prices the forward
// itself, worth exactly 1.
inline double black_call(double moneyness, double expiry, double vol) {
    if (moneyness < 0.0 || expiry <= 0.0 || vol <= 0.0)
        throw error(errc::invalid_argument, "black_call needs k >= 0, T > 0, vol > 0");
    if (moneyness == 0.0) return 1.0;
    const double stdev = vol * std::sqrt(expiry);
    const double d1 = -std::log(moneyness) / stdev + 0.5 * stdev;
    const double d2 = d1 - stdev;
    return normal_cdf(d1) - moneyness * normal_cdf(d2);
}

// Currency premium of the same call.
inline double black_premium(double strike, double expiry, double vol,
                            double forward, double discount) {
    return discount * forward * black_call(strike / forward, expiry, vol);
}

} // namespace arbrepair
