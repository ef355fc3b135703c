#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "arbrepair/market.hpp"
#include "arbrepair/synthetic.hpp"

using namespace arbrepair;

namespace {

std::vector<option_quote> two_expiry_quotes() {
    // deliberately unsorted
    return {
        {0.5, 120.0, 2.0, std::nullopt, std::nullopt},
        {0.25, 90.0, 13.0, 12.5, 13.5},
        {0.5, 80.0, 22.0, std::nullopt, std::nullopt},
        {0.25, 110.0, 3.0, 2.8, 3.2},
    };
}

std::vector<curve_point> two_expiry_curves() {
    return {{0.25, 0.99, 100.0}, {0.5, 0.98, 101.0}};
}

} // namespace

TEST_CASE("normalization scales by discounted forward and sorts the grid", "[market]") {
    const auto surf = normalize_surface(two_expiry_quotes(), two_expiry_curves());

    REQUIRE(surf.slices.size() == 2);
    REQUIRE(surf.num_quotes == 4);

    const auto& s0 = surf.slices[0];
    REQUIRE(s0.expiry == 0.25);
    REQUIRE(s0.nodes.size() == 3);
    REQUIRE(s0.nodes[0].augmented);
    REQUIRE(s0.nodes[0].moneyness == 0.0);
    REQUIRE(s0.nodes[0].price == 1.0);
    REQUIRE(s0.nodes[1].moneyness == Catch::Approx(0.9));
    REQUIRE(s0.nodes[1].price == Catch::Approx(13.0 / (0.99 * 100.0)));
    REQUIRE(s0.nodes[2].moneyness == Catch::Approx(1.1));

    const auto& s1 = surf.slices[1];
    REQUIRE(s1.nodes[1].moneyness == Catch::Approx(80.0 / 101.0));
    REQUIRE(s1.nodes[2].moneyness == Catch::Approx(120.0 / 101.0));

    // variable numbering is expiry-major, strike-ascending
    REQUIRE(surf.variable_index(0, 1) == 0);
    REQUIRE(surf.variable_index(0, 2) == 1);
    REQUIRE(surf.variable_index(1, 1) == 2);
    REQUIRE(surf.variable_index(1, 2) == 3);

    // quote mapping survives the sort
    REQUIRE(s0.nodes[1].quote_index == 1);
    REQUIRE(s0.nodes[2].quote_index == 3);
    REQUIRE(s1.nodes[1].quote_index == 2);
    REQUIRE(s1.nodes[2].quote_index == 0);
}

TEST_CASE("spreads normalize like prices, with a floor when absent", "[market]") {
    const auto surf = normalize_surface(two_expiry_quotes(), two_expiry_curves());
    const auto& s0 = surf.slices[0];
    const double df = 0.99 * 100.0;
    REQUIRE(s0.nodes[1].bid_spread == Catch::Approx(0.5 / df));
    REQUIRE(s0.nodes[1].ask_spread == Catch::Approx(0.5 / df));

    // quotes without bid/ask fall back to the floor
    const auto& s1 = surf.slices[1];
    REQUIRE(s1.nodes[1].bid_spread == 1e-8);
    REQUIRE(s1.nodes[1].ask_spread == 1e-8);
}

TEST_CASE("degenerate bid=ask=mid gets the spread floor too", "[market]") {
    std::vector<option_quote> quotes = {{1.0, 100.0, 5.0, 5.0, 5.0}};
    std::vector<curve_point> curves = {{1.0, 1.0, 100.0}};
    const auto surf = normalize_surface(quotes, curves);
    REQUIRE(surf.slices[0].nodes[1].bid_spread == 1e-8);
    REQUIRE(surf.slices[0].nodes[1].ask_spread == 1e-8);
}

TEST_CASE("thirteen by nine synthetic market normalizes to 117 quotes", "[market]") {
    const auto mkt = make_flat_vol_market();
    const auto surf = normalize_surface(mkt.quotes, mkt.curves);
    REQUIRE(surf.num_quotes == 117);
    REQUIRE(surf.slices.size() == 13);
    for (const auto& s : surf.slices) {
        REQUIRE(s.nodes.size() == 10);
        for (std::size_t j = 1; j < s.nodes.size(); ++j)
            REQUIRE(s.nodes[j].moneyness > s.nodes[j - 1].moneyness);
    }
}

TEST_CASE("missing curve is reported", "[market]") {
    auto curves = two_expiry_curves();
    curves.pop_back();
    REQUIRE_THROWS_MATCHES(normalize_surface(two_expiry_quotes(), curves), error,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("missing_curve")));
}

TEST_CASE("duplicate strikes within an expiry are a hard error", "[market]") {
    auto quotes = two_expiry_quotes();
    quotes.push_back({0.25, 90.0, 12.9, std::nullopt, std::nullopt});
    try {
        normalize_surface(quotes, two_expiry_curves());
        FAIL("expected duplicate_strike");
    } catch (const error& e) {
        REQUIRE(e.code() == errc::duplicate_strike);
        // the offending quote indices are part of the message
        REQUIRE(std::string(e.what()).find("1") != std::string::npos);
        REQUIRE(std::string(e.what()).find("4") != std::string::npos);
    }
}

TEST_CASE("crossed and non-positive inputs are rejected", "[market]") {
    const auto curves = two_expiry_curves();
    auto check = [&](option_quote q, errc expected) {
        try {
            normalize_surface({q}, curves);
            FAIL("expected error");
        } catch (const error& e) {
            REQUIRE(e.code() == expected);
        }
    };
    check({0.25, 90.0, 13.0, 13.5, 14.0}, errc::crossed_quote);       // bid above mid
    check({0.25, 90.0, 13.0, 12.0, 12.5}, errc::crossed_quote);       // ask below mid
    check({-0.25, 90.0, 13.0, {}, {}}, errc::non_positive_input);     // negative expiry
    check({0.25, 0.0, 13.0, {}, {}}, errc::non_positive_input);       // zero strike
    check({0.25, 90.0, -1.0, {}, {}}, errc::non_positive_input);      // negative mid

    REQUIRE_THROWS_AS(normalize_surface({{0.25, 90.0, 13.0, {}, {}}},
                                        std::vector<curve_point>{{0.25, 1.5, 100.0}}),
                      error);   // discount above 1
    REQUIRE_THROWS_AS(normalize_surface({{0.25, 90.0, 13.0, {}, {}}},
                                        std::vector<curve_point>{{0.25, 0.99, -100.0}}),
                      error);   // negative forward
}

TEST_CASE("denormalization round-trips premiums", "[market]") {
    const auto mkt = make_flat_vol_market();
    const auto surf = normalize_surface(mkt.quotes, mkt.curves);
    const auto back = denormalize_prices(surf, surf.prices());
    REQUIRE(back.size() == mkt.quotes.size());
    for (const auto& rq : back)
        REQUIRE(rq.premium ==
                Catch::Approx(mkt.quotes[rq.quote_index].mid).epsilon(1e-12));
}
