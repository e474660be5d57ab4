#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "elhom/cell.hpp"
#include "elhom/fem.hpp"
#include "elhom/twoscale.hpp"

namespace elhom {

/// amplitude * sin(k . x + phase) (or cos) in one displacement component.
template <int D>
struct PlaneWaveTerm {
    int component = 0;
    double amplitude = 0.0;
    Vec<D> wave = Vec<D>::Zero();
    double phase = 0.0;
    bool sine = true;
};

/// Smooth target displacement U with analytic derivatives.
template <int D>
struct ManufacturedField {
    std::vector<PlaneWaveTerm<D>> terms;

    static ManufacturedField standard();
    Vec<D> value(const Point<D> &x) const;
    Mat<D> gradient(const Point<D> &x) const;
    /// -div(a grad U) for a constant tensor a
    Vec<D> body_force(const Tensor4<D> &a, const Point<D> &x) const;
    /// (a grad U) n on a face
    Vec<D> traction(const Tensor4<D> &a, const Point<D> &x, const Face &f) const;
};

struct ExperimentConfig {
    std::string coefficient = "laminate";
    nlohmann::json coefficient_params = nlohmann::json::object({{"contrast", 5.0}});
    std::array<double, 2> lower{0.0, 0.0};
    std::array<double, 2> upper{1.0, 1.0};
    std::vector<std::string> dirichlet{"left", "bottom"};
    bool neumann = false;
    /// {"recipe": "manufactured"} or {"recipe": "explicit", "F": [..], "f": [..], "g": {face: [..]}}
    nlohmann::json data = nlohmann::json::object({{"recipe", "manufactured"}});
    std::vector<double> epsilons{0.125, 0.0625, 0.03125, 0.015625};
    Index cell_n = 256;
    int k = 16;  // h = eps / k
    std::string mollifier = "bump";
    double interior_margin = 0.25;
    double solver_tol = 1e-10;
    double compat_tol = 1e-6;
    std::string preconditioner = "multigrid";
    bool richardson = true;
    double richardson_fraction = 0.1;
    /// errors below floor_relative * ||u0||_L2 count as discretisation floor
    double floor_relative = 1e-8;
    double orthogonality_tol = 1e-10;
    /// channel -> [lo, hi]; channels without a window are reported, not gated
    std::map<std::string, std::array<double, 2>> windows{{"err_L2_u0", {0.85, 1.15}},
                                                         {"err_H1_w", {0.40, 0.70}},
                                                         {"err_weighted", {0.80, 1.20}},
                                                         {"err_interior", {0.80, 1.20}}};
    std::string csv = "rates.csv";
    std::string json = "summary.json";
    std::string svg = "rates.svg";
    bool plot = true;
    std::uint64_t seed = 0;
    int threads = 1;
    /// single-solve settings for the `solve` subcommand
    double epsilon = 0.125;
    bool homogenized = false;

    /// Checks the invariants: dyadic strictly decreasing epsilons, k >= 8, ...
    void validate() const;
    nlohmann::json to_json() const;
};

/// Parse `key = <JSON value>` lines; '#' starts a comment line.
ExperimentConfig parse_config(const std::string &text);
ExperimentConfig load_config(const std::string &path);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<double> residuals;
};

/// Least squares on (log eps, log error). FitUnderdetermined below three
/// points, NonpositiveError for nonpositive entries.
RateFit fit_rate(const std::vector<std::pair<double, double>> &points);

struct ChannelFit {
    std::string channel;
    bool fitted = false;
    RateFit fit;
    /// "ok", "unreliable", "floor-dominated" or "underdetermined"
    std::string label;
    bool has_window = false;
    std::array<double, 2> window{0.0, 0.0};
    bool window_pass = false;
    std::vector<double> excluded;  // epsilons left out of the fit
};

struct RunStamp {
    double epsilon = 0.0;
    int iterations_u0 = 0;
    int iterations_ueps = 0;
    std::vector<double> compatibility;  // Neumann only
    bool richardson_pass = true;
    double u0_norm = 0.0;
};

struct RateStudy {
    ExperimentConfig config;
    Tensor4<2> a_hat;
    nlohmann::json cell_identities;
    bool cell_identities_pass = false;
    std::vector<TwoScaleReport> reports;
    std::vector<RunStamp> stamps;
    std::vector<ChannelFit> fits;
    bool all_pass = false;

    nlohmann::json summary() const;
};

extern const std::vector<std::string> kRateChannels;

/// Value of a report channel by name.
double channel_value(const TwoScaleReport &r, const std::string &channel);

/// Problem spec on the configured domain for coefficient `coeff` and the
/// data recipe built from the homogenised tensor.
MixedProblemSpec<2> make_problem(const ExperimentConfig &cfg, double h,
                                 MixedProblemSpec<2>::TensorFn coeff, const Tensor4<2> &a_hat);

/// Sweep over the configured epsilons. A failed epsilon is recorded in its
/// report status and excluded from the fits.
RateStudy run_rate_study(const ExperimentConfig &cfg);

/// Fit every channel and apply the windows; fills study.fits and all_pass.
void fit_study(RateStudy &study);

/// Write CSV, JSON summary and (optionally) SVG into `out_dir`.
void emit_report(const RateStudy &study, const std::string &out_dir);

std::string render_csv(const std::vector<TwoScaleReport> &reports);
std::string render_svg(const RateStudy &study);

struct SingleSolve {
    Mesh<2> mesh;
    DiscreteSolution<2> solution;
    double epsilon = 0.0;
    bool homogenized = false;
    Tensor4<2> a_hat;
};

/// One L_eps (or L_0) solve with the configured data and epsilon.
SingleSolve run_single_solve(const ExperimentConfig &cfg);
std::string nodal_table_csv(const SingleSolve &s);
nlohmann::json solve_stats_json(const SingleSolve &s);

struct CheckResult {
    std::string name;
    double value = 0.0;
    double tol = 0.0;
    bool pass = false;
};

/// Oracle-agreement suite of the `verify` subcommand.
std::vector<CheckResult> run_verification(std::uint64_t seed);

} // namespace elhom
