#pragma once

#include <stdexcept>
#include <string>

namespace arbrepair {

enum class errc {
    missing_curve,
    duplicate_strike,
    non_positive_input,
    crossed_quote,
    dimension_mismatch,
    equal_strikes,
    solver_failure,
    input_not_arbitrage_free,
    invalid_argument,
    parse_error,
    io_error,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::missing_curve:            return "missing_curve";
        case errc::duplicate_strike:         return "duplicate_strike";
        case errc::non_positive_input:       return "non_positive_input";
        case errc::crossed_quote:            return "crossed_quote";
        case errc::dimension_mismatch:       return "dimension_mismatch";
        case errc::equal_strikes:            return "equal_strikes";
        case errc::solver_failure:           return "solver_failure";
        case errc::input_not_arbitrage_free: return "input_not_arbitrage_free";
        case errc::invalid_argument:         return "invalid_argument";
        case errc::parse_error:              return "parse_error";
        case errc::io_error:                 return "io_error";
    }
    return "unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const { return code_; }

private:
    errc code_;
};

} // namespace arbrepair
