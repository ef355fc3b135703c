#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "arbrepair/constraints.hpp"
#include "arbrepair/errors.hpp"
#include "arbrepair/io.hpp"
#include "arbrepair/market.hpp"
#include "arbrepair/repair.hpp"
#include "arbrepair/stress.hpp"

namespace arbrepair {

namespace clidetail {

struct loaded_snapshot {
    snapshot snap;
    normalized_surface surf;
    constraint_system sys;
};

inline loaded_snapshot load(const std::string& path) {
    loaded_snapshot out;
    out.snap = read_snapshot_file(path);
    out.surf = normalize_surface(out.snap.quotes, out.snap.curves);
    out.sys = build_constraints(out.surf);
    return out;
}

inline void write_report(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw error(errc::io_error, "cannot write " + path);
    out << j.dump(2) << '\n';
}

inline repair_objective objective_from(const std::string& name) {
    return name == "l1ba" ? repair_objective::l1ba : repair_objective::l1;
}

inline void require_spreads(const snapshot& snap, bool allow_missing) {
    if (allow_missing) return;
    for (std::size_t qi = 0; qi < snap.quotes.size(); ++qi)
        if (!snap.quotes[qi].bid || !snap.quotes[qi].ask)
            throw error(errc::invalid_argument,
                        "quote " + std::to_string(qi) +
                            " has no bid/ask; the l1ba objective weights by spread width, pass "
                            "--allow-missing-spreads to use floor widths instead");
}

inline int run_detect(const std::string& file, double tol, const std::string& report_path) {
    auto in = load(file);
    auto rep = detect_violations(in.sys, in.surf.prices(), tol);
    auto ports = extract_executable_arbitrage(in.sys, in.surf, tol);

    std::cout << "quotes " << in.surf.num_quotes << ", expiries " << in.surf.slices.size()
              << ", rows " << in.sys.rows.size() << '\n';
    if (rep.total == 0) {
        std::cout << "no arbitrage at tolerance " << format_number(tol) << '\n';
    } else {
        std::cout << rep.total << " violated rows, worst residual "
                  << format_number(rep.worst_residual) << ", calendar fraction "
                  << format_number(rep.calendar_fraction) << '\n';
        std::cout << ports.size() << " portfolios executable at touch prices";
        if (!ports.empty())
            std::cout << ", best profit " << format_number(ports[0].immediate_profit);
        std::cout << '\n';
    }
    if (!report_path.empty())
        write_report(report_path, detect_report(in.surf, in.sys, rep, ports, tol));
    return rep.total > 0 ? 2 : 0;
}

inline int run_repair(const std::string& file, double tol, const std::string& objective,
                      double delta0, bool allow_missing, const std::string& out_path,
                      const std::string& report_path) {
    auto in = load(file);

    repair_config cfg;
    cfg.objective = objective_from(objective);
    cfg.feasibility_tol = tol;
    cfg.delta0_override = delta0;
    if (cfg.objective == repair_objective::l1ba) require_spreads(in.snap, allow_missing);

    auto before = detect_violations(in.sys, in.surf.prices(), tol);
    auto res = repair(in.sys, in.surf, cfg);

    std::cout << "quotes " << in.surf.num_quotes << ", rows " << in.sys.rows.size() << ", "
              << before.total << " violated\n";
    std::cout << "objective " << objective << " moved " << res.n_perturbed << " quotes ("
              << res.n_effective << " beyond their spread), cost "
              << format_number(res.objective_value) << '\n';
    if (!out_path.empty()) write_repair_csv_file(out_path, in.snap, in.surf, res);
    if (!report_path.empty())
        write_report(report_path, repair_report(in.snap, in.surf, in.sys, before, res, cfg));
    return 0;
}

inline int run_stress_cmd(const std::string& file, double tol, const std::string& objective,
                          double lambda, double sigma, int trials, std::uint64_t seed,
                          bool rescale_bands, const std::string& report_path) {
    auto in = load(file);

    stress_config cfg;
    cfg.lambda = lambda;
    cfg.sigma = sigma;
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.rescale_bands = rescale_bands;
    cfg.detect_tol = tol;
    cfg.repair.objective = objective_from(objective);
    cfg.repair.feasibility_tol = tol;

    auto sum = run_stress(in.sys, in.surf, cfg);
    std::cout << trials << " trials on " << in.surf.num_quotes << " quotes, lambda "
              << format_number(lambda) << ", sigma " << format_number(sigma) << '\n';
    std::cout << "mean recovered fraction " << format_number(sum.mean_lambda_hat)
              << ", mean cost " << format_number(sum.mean_objective) << '\n';
    if (!report_path.empty())
        write_report(report_path, stress_report(in.surf, in.sys, cfg, sum));
    return 0;
}

struct series_row {
    std::string name;
    std::string counts;   // empty on failure
    std::string status;
};

inline series_row process_series_file(const std::filesystem::path& path, double tol,
                                      repair_objective objective) {
    series_row row;
    row.name = path.filename().string();
    try {
        auto in = load(path.string());
        repair_config cfg;
        cfg.objective = objective;
        cfg.feasibility_tol = tol;
        auto res = repair(in.sys, in.surf, cfg);
        auto ports = extract_executable_arbitrage(in.sys, in.surf, tol);
        row.counts = std::to_string(res.n_perturbed) + ',' + std::to_string(res.n_effective) +
                     ',' + std::to_string(ports.size());
        row.status = "ok";
    } catch (const std::exception& e) {
        row.counts = ",,";
        std::string message = e.what();
        std::replace(message.begin(), message.end(), ',', ';');
        row.status = message;
    }
    return row;
}

inline int run_timeseries(const std::string& dir, double tol, const std::string& objective,
                          int jobs, const std::string& out_path) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    if (files.empty()) throw error(errc::io_error, "no csv snapshots in " + dir);
    std::sort(files.begin(), files.end());

    const auto obj = objective_from(objective);
    std::vector<series_row> rows(files.size());
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(files.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < files.size(); ++i)
            rows[i] = process_series_file(files[i], tol, obj);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < files.size(); i = next.fetch_add(1))
                    rows[i] = process_series_file(files[i], tol, obj);
            });
        for (auto& t : pool) t.join();
    }

    std::ofstream file_out;
    if (!out_path.empty()) {
        file_out.open(out_path);
        if (!file_out) throw error(errc::io_error, "cannot write " + out_path);
    }
    std::ostream& out = out_path.empty() ? std::cout : file_out;
    out << "snapshot,n_perturbed,n_effective,n_portfolios,status\n";
    for (const auto& row : rows) out << row.name << ',' << row.counts << ',' << row.status << '\n';
    return 0;
}

} // namespace clidetail

// Entry point shared by the binary and the tests; args exclude the program
// name. Exit codes: 0 clean, 1 operational failure, 2 arbitrage detected.
inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"detect and repair static arbitrage in option quote snapshots", "arbrepair"};
    app.require_subcommand(1);

    std::string d_file, d_report;
    double d_tol = 1e-9;
    auto* detect = app.add_subcommand("detect", "check a snapshot for arbitrage");
    detect->add_option("snapshot", d_file, "snapshot csv")->required();
    detect->add_option("--tol", d_tol, "violation tolerance");
    detect->add_option("--report", d_report, "write a json report to this path");

    std::string r_file, r_out, r_report, r_objective = "l1";
    double r_tol = 1e-9, r_delta0 = 0.0;
    bool r_allow_missing = false;
    auto* rep = app.add_subcommand("repair", "perturb quotes minimally to remove arbitrage");
    rep->add_option("snapshot", r_file, "snapshot csv")->required();
    rep->add_option("--tol", r_tol, "violation tolerance");
    rep->add_option("--objective", r_objective, "perturbation cost: l1 or l1ba")
        ->check(CLI::IsMember({"l1", "l1ba"}));
    rep->add_option("--delta0", r_delta0, "override the l1ba band cost scale");
    rep->add_flag("--allow-missing-spreads", r_allow_missing,
                  "let l1ba fall back to floor widths on quotes without bid/ask");
    rep->add_option("--out", r_out, "write the repaired snapshot csv here");
    rep->add_option("--report", r_report, "write a json report to this path");

    std::string s_file, s_report, s_objective = "l1";
    double s_tol = 1e-9, s_lambda = 0.25, s_sigma = 1.0;
    int s_trials = 20;
    std::uint64_t s_seed = 0;
    bool s_rescale = false;
    auto* stress = app.add_subcommand("stress", "shock a clean snapshot and re-repair it");
    stress->add_option("snapshot", s_file, "snapshot csv")->required();
    stress->add_option("--tol", s_tol, "violation tolerance");
    stress->add_option("--objective", s_objective, "perturbation cost: l1 or l1ba")
        ->check(CLI::IsMember({"l1", "l1ba"}));
    stress->add_option("--lambda", s_lambda, "fraction of quotes shocked per trial");
    stress->add_option("--sigma", s_sigma, "lognormal shock scale");
    stress->add_option("--trials", s_trials, "number of trials");
    stress->add_option("--seed", s_seed, "rng seed");
    stress->add_flag("--rescale-bands", s_rescale, "scale shocked quotes' spreads with them");
    stress->add_option("--report", s_report, "write a json report to this path");

    std::string t_dir, t_out, t_objective = "l1";
    double t_tol = 1e-9;
    int t_jobs = 1;
    auto* series = app.add_subcommand("timeseries", "repair every snapshot csv in a directory");
    series->add_option("directory", t_dir, "directory of snapshot csv files")->required();
    series->add_option("--tol", t_tol, "violation tolerance");
    series->add_option("--objective", t_objective, "perturbation cost: l1 or l1ba")
        ->check(CLI::IsMember({"l1", "l1ba"}));
    series->add_option("--jobs", t_jobs, "worker threads");
    series->add_option("--out", t_out, "write the summary csv here instead of stdout");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*detect) return clidetail::run_detect(d_file, d_tol, d_report);
        if (*rep)
            return clidetail::run_repair(r_file, r_tol, r_objective, r_delta0, r_allow_missing,
                                         r_out, r_report);
        if (*stress)
            return clidetail::run_stress_cmd(s_file, s_tol, s_objective, s_lambda, s_sigma,
                                             s_trials, s_seed, s_rescale, s_report);
        if (*series) return clidetail::run_timeseries(t_dir, t_tol, t_objective, t_jobs, t_out);
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace arbrepair
