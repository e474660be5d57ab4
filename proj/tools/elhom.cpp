// Command-line front end: cell, solve, rates, verify.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "elhom/cell.hpp"
#include "elhom/harness.hpp"

namespace fs = std::filesystem;
using namespace elhom;

namespace {

void write_text(const fs::path &p, const std::string &text) {
    std::error_code ec;
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoFailure("cannot write " + p.string());
    f << text;
}

int run_cell(const std::string &config, const std::string &coefficient, const std::string &params,
             Index n, const std::string &out) {
    ExperimentConfig cfg;
    if (!config.empty()) cfg = load_config(config);
    if (!coefficient.empty()) cfg.coefficient = coefficient;
    if (!params.empty()) cfg.coefficient_params = nlohmann::json::parse(params);
    if (n > 0) cfg.cell_n = n;
    const auto field = make_coefficient<2>(cfg.coefficient, cfg.coefficient_params);
    const auto p = run_cell_pipeline<2>(field, cfg.cell_n, {}, cfg.preconditioner);
    nlohmann::json j = cell_json<2>(p);
    j["coefficient"] = cfg.coefficient;
    j["coefficient_params"] = cfg.coefficient_params;
    const std::string text = j.dump(2) + "\n";
    if (out.empty()) std::cout << text;
    else write_text(out, text);
    return p.report.all_pass() ? 0 : 1;
}

int run_solve(const std::string &config, const std::string &out_dir, const std::string &format) {
    const ExperimentConfig cfg = load_config(config);
    const SingleSolve s = run_single_solve(cfg);
    const fs::path dir(out_dir);
    if (format == "binary") {
        fs::create_directories(dir);
        std::ofstream f(dir / "solution.bin", std::ios::binary);
        if (!f) throw IoFailure("cannot write " + (dir / "solution.bin").string());
        f.write(reinterpret_cast<const char *>(s.solution.u.data()),
                static_cast<std::streamsize>(s.solution.u.size() * sizeof(double)));
    } else {
        write_text(dir / "solution.csv", nodal_table_csv(s));
    }
    nlohmann::json stats = solve_stats_json(s);
    stats["format"] = format;
    write_text(dir / "stats.json", stats.dump(2) + "\n");
    std::cout << stats.dump(2) << "\n";
    return 0;
}

int run_rates(const std::string &config, const std::string &out_dir, long long seed, int threads,
              bool no_plot) {
    ExperimentConfig cfg = load_config(config);
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (threads > 0) cfg.threads = threads;
    if (no_plot) cfg.plot = false;
    const RateStudy study = run_rate_study(cfg);
    emit_report(study, out_dir);
    for (const auto &r : study.reports)
        std::printf("eps=%-10g err_L2=%.4e err_H1_w=%.4e weighted=%.4e interior=%.4e cert=%.2e %s\n",
                    r.epsilon, r.err_L2_u0, r.err_H1_w, r.err_weighted, r.err_interior,
                    r.richardson_cert, r.status.c_str());
    for (const auto &f : study.fits) {
        if (f.fitted)
            std::printf("%-13s slope=%.4f r2=%.4f label=%s", f.channel.c_str(), f.fit.slope,
                        f.fit.r_squared, f.label.c_str());
        else
            std::printf("%-13s slope=n/a label=%s", f.channel.c_str(), f.label.c_str());
        if (f.has_window)
            std::printf(" window=[%.2f, %.2f] %s", f.window[0], f.window[1],
                        f.window_pass ? "PASS" : "FAIL");
        std::printf("\n");
    }
    std::printf("cell identities: %s\n", study.cell_identities_pass ? "PASS" : "FAIL");
    std::printf("overall: %s\n", study.all_pass ? "PASS" : "FAIL");
    return study.all_pass ? 0 : 1;
}

int run_verify(long long seed, const std::string &out_dir) {
    const auto checks = run_verification(seed < 0 ? 0 : static_cast<std::uint64_t>(seed));
    bool ok = true;
    nlohmann::json j = nlohmann::json::array();
    for (const auto &c : checks) {
        std::printf("%-44s %-4s value=%.3e tol=%.1e\n", c.name.c_str(), c.pass ? "PASS" : "FAIL",
                    c.value, c.tol);
        ok = ok && c.pass;
        j.push_back({{"name", c.name}, {"value", c.value}, {"tol", c.tol}, {"pass", c.pass}});
    }
    if (!out_dir.empty()) write_text(fs::path(out_dir) / "verify.json", j.dump(2) + "\n");
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Periodic homogenization of 2D linear elasticity"};
    app.require_subcommand(1);

    std::string config, out_dir = ".", coefficient, params, out, format = "csv";
    Index n = 0;
    long long seed = -1;
    int threads = 0;
    bool no_plot = false;

    auto *cell = app.add_subcommand("cell", "correctors, homogenized tensor and cell identities");
    cell->add_option("--config", config, "experiment config file");
    cell->add_option("--coefficient", coefficient, "catalog name");
    cell->add_option("--params", params, "coefficient parameters as JSON");
    cell->add_option("-n,--cell-n", n, "cell grid size");
    cell->add_option("-o,--out", out, "output JSON path (stdout if omitted)");

    auto *solve = app.add_subcommand("solve", "one oscillating or homogenized solve");
    solve->add_option("--config", config, "experiment config file")->required();
    solve->add_option("--out-dir", out_dir, "output directory");
    solve->add_option("--format", format, "csv or binary")->check(CLI::IsMember({"csv", "binary"}));

    auto *rates = app.add_subcommand("rates", "epsilon sweep and rate fits");
    rates->add_option("--config", config, "experiment config file")->required();
    rates->add_option("--out-dir", out_dir, "output directory");
    rates->add_option("--seed", seed, "seed recorded with the run");
    rates->add_option("--threads", threads, "concurrent epsilon runs");
    rates->add_flag("--no-plot", no_plot, "skip the SVG plot");

    auto *verify = app.add_subcommand("verify", "oracle agreement suite");
    verify->add_option("--seed", seed, "seed for the Korn probe");
    verify->add_option("--out-dir", out, "write verify.json here");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*cell) return run_cell(config, coefficient, params, n, out);
        if (*solve) return run_solve(config, out_dir, format);
        if (*rates) return run_rates(config, out_dir, seed, threads, no_plot);
        if (*verify) return run_verify(seed, out);
    } catch (const Error &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const nlohmann::json::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
