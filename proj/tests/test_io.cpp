#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "arbrepair/cli.hpp"
#include "arbrepair/io.hpp"
#include "arbrepair/market.hpp"
#include "arbrepair/repair.hpp"
#include "arbrepair/synthetic.hpp"

using namespace arbrepair;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;

namespace {

struct temp_dir {
    std::filesystem::path path;
    temp_dir() {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() /
               ("arbrepair-test-" + std::to_string(rd()));
        std::filesystem::create_directory(path);
    }
    ~temp_dir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

// swallow the cli's stdout/stderr so test output stays readable
struct capture_streams {
    std::ostringstream out, err;
    std::streambuf* old_out;
    std::streambuf* old_err;
    capture_streams()
        : old_out(std::cout.rdbuf(out.rdbuf())), old_err(std::cerr.rdbuf(err.rdbuf())) {}
    ~capture_streams() {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
    }
};

snapshot awkward_snapshot() {
    snapshot snap;
    snap.curves = {{0.25, 0.998, 101.25}, {1.0 / 3.0, 0.99, 100.0}};
    snap.quotes = {{0.25, 80.0, 21.0 + 1.0 / 3.0, 21.1, 21.5},
                   {0.25, 123.456789, 0.0001234, {}, {}},
                   {1.0 / 3.0, 100.0, 7.125, 7.0, {}},
                   {1.0 / 3.0, 1e2 + 1e-7, 7.124, {}, 7.3}};
    return snap;
}

// two expiries of three strikes with one butterfly and one calendar violation
std::string bad_snapshot_csv() {
    return "expiry,strike,mid,bid,ask,forward,discount\n"
           "0.5,90,14.2,14.0,14.4,100,0.99\n"
           "0.5,100,8.0,7.8,8.2,100,0.99\n"
           "0.5,110,9.0,8.8,9.2,100,0.99\n"
           "1,90,16.1,15.9,16.3,100,0.98\n"
           "1,100,10.3,10.1,10.5,100,0.98\n"
           "1,110,6.2,6.0,6.4,100,0.98\n";
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("snapshot csv round-trips bitwise", "[io]") {
    auto snap = awkward_snapshot();

    std::ostringstream first;
    write_snapshot(first, snap);

    std::istringstream back(first.str());
    auto reread = read_snapshot(back, "round-trip");
    REQUIRE(reread.quotes.size() == snap.quotes.size());
    REQUIRE(reread.curves.size() == snap.curves.size());
    CHECK(reread.quotes[1].bid == std::nullopt);
    CHECK(reread.quotes[1].ask == std::nullopt);
    CHECK(reread.quotes[2].bid == 7.0);
    CHECK(reread.quotes[2].ask == std::nullopt);

    // the writer's 12 significant digits are the file's precision; once
    // through the reader, a second write must reproduce the bytes exactly
    std::ostringstream second;
    write_snapshot(second, reread);
    CHECK(first.str() == second.str());
}

TEST_CASE("snapshot reader tolerates padding, crlf, and blank lines", "[io]") {
    std::istringstream in(
        "expiry,strike,mid,bid,ask,forward,discount\r\n"
        "\n"
        " 0.5 , 100 ,\t8.0, , ,100,0.99\r\n"
        "\n");
    auto snap = read_snapshot(in);
    REQUIRE(snap.quotes.size() == 1);
    CHECK(snap.quotes[0].strike == 100.0);
    CHECK(snap.quotes[0].mid == 8.0);
    CHECK_FALSE(snap.quotes[0].bid.has_value());
    CHECK(snap.curves.size() == 1);
}

TEST_CASE("snapshot reader reports what broke and where", "[io]") {
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return read_snapshot(in, "mem.csv");
    };
    const std::string header = "expiry,strike,mid,bid,ask,forward,discount\n";

    CHECK_THROWS_MATCHES(parse("expiry,strike,mid\n"), error,
                         MessageMatches(ContainsSubstring("expected header")));
    CHECK_THROWS_MATCHES(parse(header), error,
                         MessageMatches(ContainsSubstring("no quotes")));
    CHECK_THROWS_MATCHES(parse(header + "0.5,100,8.0,,,100\n"), error,
                         MessageMatches(ContainsSubstring("mem.csv line 2") &&
                                        ContainsSubstring("expected 7 fields, got 6")));
    CHECK_THROWS_MATCHES(parse(header + "0.5,100,8.0,,,100,0.99\n0.5,abc,7.0,,,100,0.99\n"),
                         error,
                         MessageMatches(ContainsSubstring("mem.csv line 3") &&
                                        ContainsSubstring("bad number 'abc'") &&
                                        ContainsSubstring("column strike")));
    CHECK_THROWS_MATCHES(parse(header + "0.5,100,inf,,,100,0.99\n"), error,
                         MessageMatches(ContainsSubstring("column mid")));
    // same expiry must quote one forward and one discount
    CHECK_THROWS_MATCHES(parse(header + "0.5,100,8.0,,,100,0.99\n0.5,110,5.0,,,101,0.99\n"),
                         error,
                         MessageMatches(ContainsSubstring("mem.csv line 3") &&
                                        ContainsSubstring("forward/discount disagree")));
    CHECK_THROWS_MATCHES(parse(header + "0.5,100,8.0,,,100,0.99\n0.5,110,5.0,,,100,0.98\n"),
                         error,
                         MessageMatches(ContainsSubstring("forward/discount disagree")));
}

TEST_CASE("repair csv keeps input rows and describes each perturbation", "[io]") {
    // deliberately interleaved input order; the writer must not resort it
    std::vector<option_quote> quotes = {{0.25, 2.0, 0.4, {}, {}}, {0.25, 1.0, 0.3, {}, {}}};
    std::vector<curve_point> curves = {{0.25, 1.0, 1.0}};
    snapshot snap{quotes, curves};
    auto surf = normalize_surface(snap.quotes, snap.curves);
    auto sys = build_constraints(surf);
    auto res = repair(sys, surf);
    REQUIRE(res.objective_value == Catch::Approx(0.1).margin(1e-8));

    std::ostringstream out;
    write_repair_csv(out, snap, surf, res);
    std::istringstream lines(out.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == repair_header);

    // quote 0 is strike 2.0, which normalizes after quote 1; columns still
    // line up with the input because rows are keyed by quote, not variable
    const auto nodes = surf.variable_nodes();
    for (std::size_t qi = 0; qi < quotes.size(); ++qi) {
        REQUIRE(std::getline(lines, line));
        const auto fields = iodetail::split(line);
        REQUIRE(fields.size() == 10);
        CHECK(std::string(fields[1]) == format_number(quotes[qi].strike));
        int var = -1;
        for (std::size_t j = 0; j < nodes.size(); ++j)
            if (surf.slices[nodes[j].first].nodes[nodes[j].second].quote_index ==
                static_cast<int>(qi))
                var = static_cast<int>(j);
        REQUIRE(var >= 0);
        CHECK(std::string(fields[8]) == format_number(res.epsilon[var]));
        const double repaired_mid = iodetail::parse_number(fields[7], "test", "mid_repaired");
        CHECK(repaired_mid ==
              Catch::Approx(quotes[qi].mid + res.epsilon[var]).margin(1e-12));
        // no quoted band, so any real movement escapes the floor width
        CHECK(std::string(fields[9]) ==
              (std::abs(res.epsilon[var]) > perturbation_zero_tol ? "1" : "0"));
    }
    CHECK_FALSE(std::getline(lines, line));
}

TEST_CASE("json reports carry the run shape and are deterministic", "[io]") {
    std::istringstream in(bad_snapshot_csv());
    auto snap = read_snapshot(in);
    auto surf = normalize_surface(snap.quotes, snap.curves);
    auto sys = build_constraints(surf);
    auto rep = detect_violations(sys, surf.prices());
    auto ports = extract_executable_arbitrage(sys, surf);

    auto dj = detect_report(surf, sys, rep, ports, 1e-9);
    CHECK(dj["command"] == "detect");
    CHECK(dj["system"]["quotes"] == 6);
    CHECK(dj["system"]["rows"] == sys.rows.size());
    CHECK(dj["system"]["kinds"].size() == num_constraint_kinds);
    CHECK(dj["violations"]["total"] == rep.total);
    CHECK(dj["violations"]["rows"].size() == rep.violations.size());
    REQUIRE(dj["portfolios"].size() == ports.size());
    REQUIRE(!ports.empty());
    CHECK(dj["portfolios"][0]["legs"].size() == ports[0].legs.size());
    CHECK(dj["portfolios"][0]["immediate_profit"] == ports[0].immediate_profit);

    repair_config rc;
    rc.objective = repair_objective::l1ba;
    auto res = repair(sys, surf, rc);
    auto rj = repair_report(snap, surf, sys, rep, res, rc);
    CHECK(rj["objective"] == "l1ba");
    CHECK(rj["result"]["delta0"] == res.delta0);
    CHECK(rj["result"]["n_perturbed"] == res.n_perturbed);
    REQUIRE(rj["quotes"].size() == snap.quotes.size());
    CHECK(rj["quotes"][3]["strike"] == 90.0);
    CHECK(rj["quotes"][3]["expiry"] == 1.0);

    // rebuilding the same report yields the same bytes
    auto rj2 = repair_report(snap, surf, sys, rep, res, rc);
    CHECK(rj.dump(2) == rj2.dump(2));
}

TEST_CASE("cli detect and repair run the whole loop through files", "[cli]") {
    temp_dir dir;
    write_file(dir.file("bad.csv"), bad_snapshot_csv());
    capture_streams io;

    CHECK(run_cli({"detect", dir.file("bad.csv"), "--report", dir.file("det.json")}) == 2);
    CHECK_THAT(io.out.str(), ContainsSubstring("violated rows"));
    auto det = nlohmann::json::parse(read_file(dir.file("det.json")));
    CHECK(det["violations"]["total"].get<int>() > 0);
    CHECK(!det["portfolios"].empty());

    CHECK(run_cli({"repair", dir.file("bad.csv"), "--objective", "l1ba", "--out",
                   dir.file("fixed.csv"), "--report", dir.file("rep.json")}) == 0);
    auto rep = nlohmann::json::parse(read_file(dir.file("rep.json")));
    CHECK(rep["result"]["n_perturbed"].get<int>() > 0);
    CHECK(rep["violations_before"]["total"].get<int>() > 0);

    // feed the repaired mids back through detect: arbitrage is gone
    auto fixed = nlohmann::json::parse(read_file(dir.file("rep.json")))["quotes"];
    std::istringstream orig(bad_snapshot_csv());
    auto snap = read_snapshot(orig);
    for (const auto& q : fixed)
        snap.quotes[q["quote"].get<int>()].mid = q["mid_repaired"].get<double>();
    for (auto& q : snap.quotes) {
        q.bid.reset();
        q.ask.reset();
    }
    write_snapshot_file(dir.file("refed.csv"), snap);
    CHECK(run_cli({"detect", dir.file("refed.csv")}) == 0);
    CHECK_THAT(io.out.str(), ContainsSubstring("no arbitrage"));

    // the repaired csv itself keeps the input row count and order
    auto lines = read_file(dir.file("fixed.csv"));
    CHECK_THAT(lines, ContainsSubstring(repair_header));
    CHECK(std::count(lines.begin(), lines.end(), '\n') == 7);
}

TEST_CASE("cli maps misuse and failures to exit 1", "[cli]") {
    temp_dir dir;
    capture_streams io;

    CHECK(run_cli({"detect", dir.file("missing.csv")}) == 1);
    CHECK_THAT(io.err.str(), ContainsSubstring("cannot open"));
    CHECK(run_cli({"repair"}) == 1);                       // missing positional
    CHECK(run_cli({"repair", "x.csv", "--objective", "l3"}) == 1);
    CHECK(run_cli({"frobnicate"}) == 1);
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({}) == 1);                               // a subcommand is required

    // l1ba needs quoted bands unless explicitly waived
    write_file(dir.file("nospread.csv"),
               "expiry,strike,mid,bid,ask,forward,discount\n"
               "0.5,90,14.2,,,100,0.99\n"
               "0.5,110,5.0,,,100,0.99\n");
    CHECK(run_cli({"repair", dir.file("nospread.csv"), "--objective", "l1ba"}) == 1);
    CHECK_THAT(io.err.str(), ContainsSubstring("--allow-missing-spreads"));
    CHECK(run_cli({"repair", dir.file("nospread.csv"), "--objective", "l1ba",
                   "--allow-missing-spreads"}) == 0);
}

TEST_CASE("cli stress shocks a clean snapshot and summarizes", "[cli]") {
    temp_dir dir;
    auto mkt = make_flat_vol_market(synthetic_config{});
    write_snapshot_file(dir.file("clean.csv"), snapshot{mkt.quotes, mkt.curves});
    capture_streams io;

    CHECK(run_cli({"stress", dir.file("clean.csv"), "--trials", "3", "--lambda", "0.2",
                   "--sigma", "0.4", "--seed", "11", "--report", dir.file("st.json")}) == 0);
    auto st = nlohmann::json::parse(read_file(dir.file("st.json")));
    CHECK(st["config"]["trials"] == 3);
    CHECK(st["trials"].size() == 3);
    CHECK(st["summary"]["mean_lambda_hat"].get<double>() > 0.0);

    // a snapshot that is already in violation cannot anchor a stress run
    write_file(dir.file("bad.csv"), bad_snapshot_csv());
    CHECK(run_cli({"stress", dir.file("bad.csv"), "--trials", "2"}) == 1);
    CHECK_THAT(io.err.str(), ContainsSubstring("arbitrage"));
}

TEST_CASE("cli timeseries sweeps a directory into a summary csv", "[cli]") {
    temp_dir dir;
    std::filesystem::create_directory(dir.path / "snaps");
    auto in_snaps = [&](const std::string& name) {
        return (dir.path / "snaps" / name).string();
    };
    auto mkt = make_flat_vol_market(synthetic_config{});
    write_snapshot_file(in_snaps("2024-01-02.csv"), snapshot{mkt.quotes, mkt.curves});
    write_file(in_snaps("2024-01-01.csv"), bad_snapshot_csv());
    write_file(in_snaps("2024-01-03.csv"), "not,a,snapshot\n");
    write_file(in_snaps("notes.txt"), "ignored\n");
    capture_streams io;

    CHECK(run_cli({"timeseries", (dir.path / "snaps").string(), "--jobs", "3", "--out",
                   dir.file("summary.csv")}) == 0);
    std::istringstream sum(read_file(dir.file("summary.csv")));
    std::string line;
    std::getline(sum, line);
    CHECK(line == "snapshot,n_perturbed,n_effective,n_portfolios,status");

    std::vector<std::string> rows;
    while (std::getline(sum, line)) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    CHECK_THAT(rows[0], ContainsSubstring("2024-01-01.csv"));
    CHECK_THAT(rows[0], ContainsSubstring(",ok"));
    CHECK_THAT(rows[1], ContainsSubstring("2024-01-02.csv,0,0,0,ok"));
    // the broken file becomes a status note, commas flattened so the csv stays a csv
    CHECK_THAT(rows[2], ContainsSubstring("2024-01-03.csv,,,,"));
    CHECK(std::count(rows[2].begin(), rows[2].end(), ',') == 4);

    // same sweep on one thread, printed to stdout, gives the same rows
    CHECK(run_cli({"timeseries", (dir.path / "snaps").string()}) == 0);
    for (const auto& row : rows) CHECK_THAT(io.out.str(), ContainsSubstring(row));

    std::filesystem::create_directory(dir.path / "empty");
    CHECK(run_cli({"timeseries", (dir.path / "empty").string()}) == 1);
    CHECK_THAT(io.err.str(), ContainsSubstring("no csv snapshots"));
}
