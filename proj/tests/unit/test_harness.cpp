#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "elhom/harness.hpp"

using namespace elhom;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path &p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string &name) {
    const fs::path p = fs::temp_directory_path() / ("elhom_test_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.cell_n = 16;
    c.k = 8;
    c.epsilons = {0.125, 0.0625, 0.03125};
    c.richardson = false;
    c.plot = false;
    return c;
}

// Synthetic study with error = C eps^p per channel.
RateStudy synthetic(const std::vector<std::string> &status) {
    RateStudy s;
    s.cell_identities_pass = true;
    double eps = 0.125;
    for (const auto &st : status) {
        TwoScaleReport r;
        r.epsilon = eps;
        r.err_L2_u0 = 0.3 * eps;
        r.err_H1_w = 0.8 * std::sqrt(eps);
        r.err_weighted = 0.1 * eps;
        r.err_interior = 0.2 * eps;
        r.status = st;
        s.reports.push_back(r);
        RunStamp stamp;
        stamp.epsilon = eps;
        stamp.u0_norm = 1.0;
        s.stamps.push_back(stamp);
        eps /= 2;
    }
    return s;
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("config parsing") {
    const auto c = parse_config(
        "# comment\n"
        "coefficient = \"checkerboard\"\n"
        "coefficient_params = {\"contrast\": 3}\n"
        "epsilons = [0.25, 0.125, 0.0625]\n"
        "dirichlet = [\"left\"]\n"
        "windows = {\"err_L2_u0\": [0.9, 1.1], \"err_H1_w\": null}\n"
        "\n"
        "k = 12\n");
    CHECK(c.coefficient == "checkerboard");
    CHECK(c.coefficient_params.at("contrast") == 3);
    CHECK(c.epsilons.size() == 3u);
    CHECK(c.k == 12);
    CHECK(c.windows.size() == 1u);
    CHECK(c.windows.at("err_L2_u0")[1] == 1.1);
    CHECK(parse_config("neumann = true\n").dirichlet.empty());

    CHECK_THROWS_AS(parse_config("colour = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("k = \"eight\"\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("k = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("epsilons = [0.1, 0.05]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("epsilons = [0.0625, 0.125]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("epsilons = []\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("dirichlet = []\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("dirichlet = [\"front\"]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("windows = {\"err_L2_u0\": [1.2, 0.8]}\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("windows = {\"speed\": [0, 1]}\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("mollifier = \"gauss\"\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("just text\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/elhom.conf"), IoFailure);
}

TEST_CASE("rate fits") {
    const auto one = fit_rate({{0.5, 1.5}, {0.25, 0.75}, {0.125, 0.375}});
    CHECK(one.slope == doctest::Approx(1.0));
    CHECK(one.intercept == doctest::Approx(std::log(3.0)));
    CHECK(one.r_squared == doctest::Approx(1.0));
    const auto half = fit_rate({{0.5, std::sqrt(0.5)}, {0.25, 0.5}, {0.125, std::sqrt(0.125)}, {0.0625, 0.25}});
    CHECK(half.slope == doctest::Approx(0.5));
    CHECK(half.residuals.size() == 4u);
    CHECK_THROWS_AS(fit_rate({{0.5, 1.0}, {0.25, 0.5}}), FitUnderdetermined);
    CHECK_THROWS_AS(fit_rate({{0.5, 1.0}, {0.5, 0.5}, {0.5, 0.2}}), FitUnderdetermined);
    CHECK_THROWS_AS(fit_rate({{0.5, 1.0}, {0.25, 0.0}, {0.125, 0.2}}), NonpositiveError);
    const auto noisy = fit_rate({{0.5, 1.0}, {0.25, 0.6}, {0.125, 0.2}});
    CHECK(noisy.r_squared >= 0.0);
    CHECK(noisy.r_squared <= 1.0);
}

TEST_CASE("window gating on synthetic studies") {
    auto s = synthetic({"ok", "ok", "ok", "ok"});
    fit_study(s);
    CHECK(s.all_pass);
    CHECK(s.fits.size() == kRateChannels.size());
    for (const auto &f : s.fits) CHECK(f.label == "ok");

    auto gap = synthetic({"ok", "failed: SolverDiverged", "ok", "ok"});
    fit_study(gap);
    CHECK(gap.all_pass);
    CHECK(gap.fits[0].excluded == std::vector<double>{0.0625});

    auto thin = synthetic({"ok", "failed: x", "failed: y", "ok"});
    fit_study(thin);
    CHECK_FALSE(thin.all_pass);
    CHECK(thin.fits[0].label == "underdetermined");

    auto shaky = synthetic({"ok", "ok", "ok", "ok"});
    shaky.stamps[2].richardson_pass = false;
    fit_study(shaky);
    CHECK_FALSE(shaky.all_pass);
    CHECK(shaky.fits[0].label == "unreliable");

    auto steep = synthetic({"ok", "ok", "ok", "ok"});
    for (auto &r : steep.reports) r.err_L2_u0 = r.epsilon * r.epsilon;
    fit_study(steep);
    CHECK_FALSE(steep.all_pass);
    CHECK(steep.fits[0].fitted);
    CHECK_FALSE(steep.fits[0].window_pass);
    CHECK(steep.fits[1].window_pass);

    auto bad_cell = synthetic({"ok", "ok", "ok"});
    bad_cell.cell_identities_pass = false;
    fit_study(bad_cell);
    CHECK_FALSE(bad_cell.all_pass);
}

TEST_CASE("empty study emits a header-only CSV and no plot") {
    RateStudy s;
    s.config.plot = false;
    fit_study(s);
    CHECK(s.fits.empty());
    const fs::path dir = scratch("empty");
    emit_report(s, dir.string());
    CHECK(slurp(dir / "rates.csv") == TwoScaleReport::csv_header() + "\n");
    const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(j.at("channels").empty());
    CHECK(j.at("plot") == false);
    CHECK(j.at("all_pass") == false);
    CHECK_FALSE(fs::exists(dir / "rates.svg"));
    fs::remove_all(dir);
}

TEST_CASE("constant coefficients are floor-dominated") {
    auto c = small_config();
    c.coefficient = "constant";
    c.coefficient_params = nlohmann::json::object();
    const auto s = run_rate_study(c);
    CHECK(s.cell_identities_pass);
    for (const auto &r : s.reports) CHECK(r.err_L2_u0 == 0.0);
    for (const auto &f : s.fits) CHECK(f.label == "floor-dominated");
    CHECK_FALSE(s.all_pass);
}

TEST_CASE("laminate study is deterministic and plots") {
    auto c = small_config();
    c.plot = true;
    const auto a = run_rate_study(c);
    c.threads = 3;
    const auto b = run_rate_study(c);
    CHECK(render_csv(a.reports) == render_csv(b.reports));
    CHECK(a.summary().dump() != "");
    nlohmann::json ja = a.summary(), jb = b.summary();
    ja["config"].erase("threads");
    jb["config"].erase("threads");
    CHECK(ja.dump() == jb.dump());
    for (const auto &r : a.reports) {
        CHECK(r.status == "ok");
        CHECK(r.err_L2_u0 > 0.0);
        CHECK(r.err_H1_w > 0.0);
    }
    const std::string svg = render_svg(a);
    CHECK(svg.rfind("<svg", 0) == 0);
    const fs::path dir = scratch("plot");
    emit_report(a, dir.string());
    CHECK(fs::exists(dir / "rates.svg"));
    fs::remove_all(dir);
}

TEST_CASE("small Neumann study") {
    auto c = small_config();
    c.neumann = true;
    c.dirichlet.clear();
    const auto s = run_rate_study(c);
    for (std::size_t i = 0; i < s.reports.size(); ++i) {
        CHECK(s.reports[i].status == "ok");
        CHECK(s.reports[i].ortho_residual <= 1e-10);
        CHECK(s.stamps[i].compatibility.size() == 3u);
    }
    CHECK(s.summary().at("runs").at(0).contains("compatibility"));
}

TEST_CASE("manufactured field derivatives") {
    const auto u = ManufacturedField<2>::standard();
    const Point<2> x(0.3, 0.7);
    const double d = 1e-6;
    Mat<2> fd;
    for (int i = 0; i < 2; ++i) {
        Point<2> p = x, m = x;
        p[i] += d;
        m[i] -= d;
        fd.col(i) = (u.value(p) - u.value(m)) / (2 * d);
    }
    CHECK((fd - u.gradient(x)).norm() <= 1e-8);
    // body force against a difference of the flux
    const auto a = isotropic_tensor<2>(1.0, 2.0);
    Vec<2> div = Vec<2>::Zero();
    for (int i = 0; i < 2; ++i) {
        Point<2> p = x, m = x;
        p[i] += 1e-4;
        m[i] -= 1e-4;
        div += (a.apply(u.gradient(p)).col(i) - a.apply(u.gradient(m)).col(i)) / 2e-4;
    }
    CHECK((u.body_force(a, x) + div).norm() <= 1e-6);
    const Face right{0, 1};
    CHECK((u.traction(a, x, right) - a.apply(u.gradient(x)).col(0)).norm() <= 1e-14);
}

TEST_CASE("explicit data recipe") {
    ExperimentConfig c;
    c.data = {{"recipe", "explicit"}, {"F", {0.0, -1.0}}, {"g", {{"top", {0.5, 0.0}}}}};
    const auto a = isotropic_tensor<2>(1.0, 1.0);
    const auto s = make_problem(c, 0.25, [a](const Point<2> &) { return a; }, a);
    CHECK(s.mode == ProblemMode::mixed);
    CHECK(s.body_force(Point<2>(0.1, 0.1))[1] == -1.0);
    CHECK(s.traction(Point<2>(0.5, 1.0), Face{1, 1})[0] == 0.5);
    CHECK(s.traction(Point<2>(1.0, 0.5), Face{0, 1}).norm() == 0.0);
    c.data = {{"recipe", "explicit"}, {"F", {1.0}}};
    CHECK_THROWS_AS(make_problem(c, 0.25, [a](const Point<2> &) { return a; }, a), ConfigError);
}

TEST_CASE("single solve output") {
    auto c = small_config();
    c.epsilon = 0.125;
    const auto s = run_single_solve(c);
    const std::string csv = nodal_table_csv(s);
    CHECK(csv.rfind("x,y,u1,u2\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == s.mesh.node_count() + 1);
    const auto j = solve_stats_json(s);
    CHECK(j.contains("iterations"));
}

}
