#include "elhom/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include "elhom/oracles.hpp"

namespace elhom {

const std::vector<std::string> kRateChannels{"err_L2_u0", "err_H1_w", "err_weighted",
                                             "err_interior"};

template <int D>
ManufacturedField<D> ManufacturedField<D>::standard() {
    static_assert(D == 2, "the standard target is two-dimensional");
    ManufacturedField<D> m;
    m.terms = {{0, 0.5, Vec<D>(1.3, 0.7), 0.3, true},
               {1, 0.4, Vec<D>(0.9, -1.1), 0.2, false},
               {1, 0.3, Vec<D>(0.5, 1.2), 0.0, true}};
    return m;
}

template <int D>
Vec<D> ManufacturedField<D>::value(const Point<D> &x) const {
    Vec<D> v = Vec<D>::Zero();
    for (const auto &t : terms) {
        const double a = t.wave.dot(x) + t.phase;
        v[t.component] += t.amplitude * (t.sine ? std::sin(a) : std::cos(a));
    }
    return v;
}

template <int D>
Mat<D> ManufacturedField<D>::gradient(const Point<D> &x) const {
    Mat<D> g = Mat<D>::Zero();
    for (const auto &t : terms) {
        const double a = t.wave.dot(x) + t.phase;
        const double d = t.amplitude * (t.sine ? std::cos(a) : -std::sin(a));
        g.row(t.component) += d * t.wave.transpose();
    }
    return g;
}

template <int D>
Vec<D> ManufacturedField<D>::body_force(const Tensor4<D> &a, const Point<D> &x) const {
    Vec<D> f = Vec<D>::Zero();
    for (const auto &t : terms) {
        const double ph = t.wave.dot(x) + t.phase;
        // second derivative d_i d_j U_beta = -amp k_i k_j trig
        const double s = -t.amplitude * (t.sine ? std::sin(ph) : std::cos(ph));
        for (int al = 0; al < D; ++al)
            for (int i = 0; i < D; ++i)
                for (int j = 0; j < D; ++j) f[al] -= a(i, j, al, t.component) * t.wave[i] * t.wave[j] * s;
    }
    return f;
}

template <int D>
Vec<D> ManufacturedField<D>::traction(const Tensor4<D> &a, const Point<D> &x, const Face &f) const {
    const Mat<D> g = gradient(x);
    const Vec<D> n = DomainSpec<D>::normal(f);
    Vec<D> s = Vec<D>::Zero();
    for (int al = 0; al < D; ++al)
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j)
                for (int be = 0; be < D; ++be) s[al] += a(i, j, al, be) * g(be, j) * n[i];
    return s;
}

template struct ManufacturedField<2>;

namespace {

bool is_dyadic(double eps) {
    if (!(eps > 0.0) || eps > 1.0) return false;
    const double m = -std::log2(eps);
    return std::abs(m - std::round(m)) < 1e-12;
}

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string sanitize(std::string s) {
    for (char &c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

} // namespace

void ExperimentConfig::validate() const {
    if (epsilons.empty()) throw ConfigError("epsilons must not be empty");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!is_dyadic(epsilons[i]))
            throw ConfigError("epsilon " + std::to_string(epsilons[i]) + " is not 2^-m");
        if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
            throw ConfigError("epsilons must be strictly decreasing");
    }
    if (!is_dyadic(epsilon)) throw ConfigError("epsilon must be 2^-m");
    if (k < 8) throw ConfigError("k = eps / h must be at least 8");
    if (mollifier != "bump") throw ConfigError("unknown mollifier '" + mollifier + "'");
    if (!(interior_margin > 0.0)) throw ConfigError("interior_margin must be positive");
    if (!(solver_tol > 0.0)) throw ConfigError("solver_tol must be positive");
    if (!neumann && dirichlet.empty())
        throw ConfigError("give at least one Dirichlet edge or set neumann = true");
    for (const auto &d : dirichlet) face_from_name(d);
    for (const auto &[name, w] : windows) {
        if (std::find(kRateChannels.begin(), kRateChannels.end(), name) == kRateChannels.end())
            throw ConfigError("unknown rate channel '" + name + "'");
        if (!(w[0] < w[1])) throw ConfigError("window for " + name + " must satisfy lo < hi");
    }
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (!(richardson_fraction > 0.0)) throw ConfigError("richardson_fraction must be positive");
    const std::string recipe = data.value("recipe", std::string("manufactured"));
    if (recipe != "manufactured" && recipe != "explicit")
        throw ConfigError("unknown data recipe '" + recipe + "'");
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json w = nlohmann::json::object();
    for (const auto &[name, v] : windows) w[name] = {v[0], v[1]};
    return {{"coefficient", coefficient},
            {"coefficient_params", coefficient_params},
            {"domain", {{"lower", lower}, {"upper", upper}}},
            {"dirichlet", neumann ? std::vector<std::string>{} : dirichlet},
            {"neumann", neumann},
            {"data", data},
            {"epsilons", epsilons},
            {"cell_n", cell_n},
            {"k", k},
            {"mollifier", mollifier},
            {"interior_margin", interior_margin},
            {"solver_tol", solver_tol},
            {"compat_tol", compat_tol},
            {"preconditioner", preconditioner},
            {"richardson", richardson},
            {"richardson_fraction", richardson_fraction},
            {"floor_relative", floor_relative},
            {"orthogonality_tol", orthogonality_tol},
            {"windows", w},
            {"plot", plot},
            {"seed", seed},
            {"threads", threads}};
}

ExperimentConfig parse_config(const std::string &text) {
    ExperimentConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        nlohmann::json v;
        try {
            v = nlohmann::json::parse(trim(t.substr(eq + 1)));
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError("line " + std::to_string(lineno) + ": bad value for " + key);
        }
        try {
            if (key == "coefficient") c.coefficient = v.get<std::string>();
            else if (key == "coefficient_params") c.coefficient_params = v;
            else if (key == "domain") {
                if (v.is_object()) {
                    c.lower = v.at("lower").get<std::array<double, 2>>();
                    c.upper = v.at("upper").get<std::array<double, 2>>();
                } else {
                    c.lower = v.at(0).get<std::array<double, 2>>();
                    c.upper = v.at(1).get<std::array<double, 2>>();
                }
            } else if (key == "dirichlet") c.dirichlet = v.get<std::vector<std::string>>();
            else if (key == "neumann") c.neumann = v.get<bool>();
            else if (key == "data") c.data = v;
            else if (key == "epsilons") c.epsilons = v.get<std::vector<double>>();
            else if (key == "cell_n") c.cell_n = v.get<Index>();
            else if (key == "k") c.k = v.get<int>();
            else if (key == "mollifier") c.mollifier = v.get<std::string>();
            else if (key == "interior_margin") c.interior_margin = v.get<double>();
            else if (key == "solver_tol") c.solver_tol = v.get<double>();
            else if (key == "compat_tol") c.compat_tol = v.get<double>();
            else if (key == "preconditioner") c.preconditioner = v.get<std::string>();
            else if (key == "richardson") c.richardson = v.get<bool>();
            else if (key == "richardson_fraction") c.richardson_fraction = v.get<double>();
            else if (key == "floor_relative") c.floor_relative = v.get<double>();
            else if (key == "orthogonality_tol") c.orthogonality_tol = v.get<double>();
            else if (key == "windows") {
                c.windows.clear();
                for (const auto &[name, w] : v.items())
                    if (!w.is_null()) c.windows[name] = w.get<std::array<double, 2>>();
            } else if (key == "csv") c.csv = v.get<std::string>();
            else if (key == "json") c.json = v.get<std::string>();
            else if (key == "svg") c.svg = v.get<std::string>();
            else if (key == "plot") c.plot = v.get<bool>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "threads") c.threads = v.get<int>();
            else if (key == "epsilon") c.epsilon = v.get<double>();
            else if (key == "homogenized") c.homogenized = v.get<bool>();
            else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError("line " + std::to_string(lineno) + ": wrong type for " + key);
        }
    }
    if (c.neumann) c.dirichlet.clear();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw IoFailure("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

RateFit fit_rate(const std::vector<std::pair<double, double>> &points) {
    if (points.size() < 3)
        throw FitUnderdetermined(std::to_string(points.size()) + " points, need at least 3");
    const double n = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0;
    std::vector<double> xs, ys;
    for (const auto &[e, err] : points) {
        if (!(e > 0.0) || !(err > 0.0))
            throw NonpositiveError("rate fit needs positive epsilon and error");
        xs.push_back(std::log(e));
        ys.push_back(std::log(err));
        sx += xs.back();
        sy += ys.back();
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw FitUnderdetermined("all epsilons coincide");
    RateFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (f.intercept + f.slope * xs[i]);
        f.residuals.push_back(r);
        ss_res += r * r;
    }
    f.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return f;
}

double channel_value(const TwoScaleReport &r, const std::string &channel) {
    if (channel == "err_L2_u0") return r.err_L2_u0;
    if (channel == "err_H1_w") return r.err_H1_w;
    if (channel == "err_weighted") return r.err_weighted;
    if (channel == "err_interior") return r.err_interior;
    if (channel == "layer_L2_w") return r.layer_L2_w;
    if (channel == "layer_H1_w") return r.layer_H1_w;
    throw ConfigError("unknown channel '" + channel + "'");
}

MixedProblemSpec<2> make_problem(const ExperimentConfig &cfg, double h,
                                 MixedProblemSpec<2>::TensorFn coeff, const Tensor4<2> &a_hat) {
    MixedProblemSpec<2> s;
    const DomainSpec<2> dom(Point<2>(cfg.lower[0], cfg.lower[1]), Point<2>(cfg.upper[0], cfg.upper[1]));
    const BoundaryPartition part =
        cfg.neumann ? BoundaryPartition::neumann() : BoundaryPartition::from_names(cfg.dirichlet);
    s.mesh = build_mesh<2>(dom, h, part);
    if (cfg.neumann) s.mode = ProblemMode::neumann;
    else s.mode = part.dirichlet.size() == 4 ? ProblemMode::dirichlet : ProblemMode::mixed;
    s.coeff = std::move(coeff);
    s.preconditioner = cfg.preconditioner;
    const std::string recipe = cfg.data.value("recipe", std::string("manufactured"));
    if (recipe == "manufactured") {
        const auto u = ManufacturedField<2>::standard();
        s.body_force = [u, a_hat](const Point<2> &x) { return u.body_force(a_hat, x); };
        s.dirichlet_data = [u](const Point<2> &x) { return u.value(x); };
        s.traction = [u, a_hat](const Point<2> &x, const Face &f) { return u.traction(a_hat, x, f); };
    } else {
        auto vec = [&](const char *key) {
            const auto v = cfg.data.value(key, std::vector<double>{0.0, 0.0});
            if (v.size() != 2) throw ConfigError(std::string("data.") + key + " needs two entries");
            return Vec<2>(v[0], v[1]);
        };
        const Vec<2> body = vec("F"), wall = vec("f");
        std::map<std::string, Vec<2>> g;
        if (cfg.data.contains("g"))
            for (const auto &[face, v] : cfg.data.at("g").items()) {
                face_from_name(face);
                const auto a = v.get<std::vector<double>>();
                if (a.size() != 2) throw ConfigError("data.g entries need two values");
                g[face] = Vec<2>(a[0], a[1]);
            }
        s.body_force = [body](const Point<2> &) { return body; };
        s.dirichlet_data = [wall](const Point<2> &) { return wall; };
        s.traction = [g](const Point<2> &, const Face &f) {
            const auto it = g.find(face_name(f));
            return it == g.end() ? Vec<2>(Vec<2>::Zero()) : it->second;
        };
    }
    return s;
}

namespace {

DiscreteSolution<2> solve_problem(const MixedProblemSpec<2> &s, const ExperimentConfig &cfg) {
    return s.mode == ProblemMode::neumann ? solve_neumann(s, cfg.solver_tol, cfg.compat_tol)
                                          : solve_mixed(s, cfg.solver_tol);
}

struct EpsRun {
    TwoScaleReport report;
    RunStamp stamp;
};

EpsRun run_one(const ExperimentConfig &cfg, const CoefficientField<2> &field,
               const CellPipeline<2> &cell, double eps) {
    EpsRun run;
    run.stamp.epsilon = eps;
    run.report.epsilon = eps;
    const double h = eps / cfg.k;
    run.report.h = h;
    const Tensor4<2> a_hat = cell.a_hat.a_hat;
    auto hom = [a_hat](const Point<2> &) { return a_hat; };
    auto osc = [&field, eps](const Point<2> &x) { return field.evaluate(Point<2>(x / eps)); };
    try {
        const MixedProblemSpec<2> s0 = make_problem(cfg, h, hom, a_hat);
        const MixedProblemSpec<2> se = make_problem(cfg, h, osc, a_hat);
        if (cfg.neumann) run.stamp.compatibility = compatibility_check(se, cfg.compat_tol).residuals;
        const DiscreteSolution<2> u0 = solve_problem(s0, cfg);
        const DiscreteSolution<2> ue = solve_problem(se, cfg);
        run.stamp.iterations_u0 = u0.stats.iterations;
        run.stamp.iterations_ueps = ue.stats.iterations;
        run.report = two_scale_report<2>(s0.mesh, ue.u, u0.u, cell.chi, eps, cfg.interior_margin);
        run.stamp.u0_norm = l2_norm<2>(s0.mesh.grid, u0.u, 2);
        if (cfg.neumann)
            run.report.ortho_residual = std::max(u0.orthogonality_residual, ue.orthogonality_residual);
        if (cfg.richardson) {
            // (2h, h) pair of the difference u_eps - u0
            const MixedProblemSpec<2> c0 = make_problem(cfg, 2.0 * h, hom, a_hat);
            const MixedProblemSpec<2> ce = make_problem(cfg, 2.0 * h, osc, a_hat);
            const Field dc = solve_problem(ce, cfg).u - solve_problem(c0, cfg).u;
            run.report.richardson_cert =
                richardson_estimate<2>(c0.mesh, dc, s0.mesh, Field(ue.u - u0.u), 2);
            run.stamp.richardson_pass =
                run.report.richardson_cert <= cfg.richardson_fraction * run.report.err_L2_u0;
        }
        if (cfg.neumann && run.report.ortho_residual > cfg.orthogonality_tol)
            run.report.status = "orthogonality-exceeded";
    } catch (const Error &e) {
        run.report.status = "failed: " + sanitize(e.what());
    }
    return run;
}

} // namespace

void fit_study(RateStudy &study) {
    const ExperimentConfig &cfg = study.config;
    study.fits.clear();
    bool pass = study.cell_identities_pass;
    if (study.reports.empty()) {
        study.all_pass = false;
        return;
    }
    double scale = 0.0;
    for (const auto &s : study.stamps) scale = std::max(scale, s.u0_norm);
    for (const auto &channel : kRateChannels) {
        ChannelFit cf;
        cf.channel = channel;
        const auto w = cfg.windows.find(channel);
        cf.has_window = w != cfg.windows.end();
        if (cf.has_window) cf.window = w->second;
        std::vector<std::pair<double, double>> pts;
        bool unreliable = false;
        double largest = 0.0;
        for (std::size_t i = 0; i < study.reports.size(); ++i) {
            const auto &r = study.reports[i];
            if (r.status.rfind("failed", 0) == 0) {
                cf.excluded.push_back(r.epsilon);
                continue;
            }
            const double v = channel_value(r, channel);
            largest = std::max(largest, v);
            pts.emplace_back(r.epsilon, v);
            if (!study.stamps[i].richardson_pass) unreliable = true;
        }
        if (largest <= cfg.floor_relative * scale) {
            cf.label = "floor-dominated";
        } else {
            try {
                cf.fit = fit_rate(pts);
                cf.fitted = true;
                cf.label = unreliable ? "unreliable" : "ok";
            } catch (const FitUnderdetermined &) {
                cf.label = "underdetermined";
            } catch (const NonpositiveError &) {
                cf.label = "floor-dominated";
            }
        }
        cf.window_pass = cf.has_window && cf.fitted && cf.label == "ok" &&
                         cf.fit.slope >= cf.window[0] && cf.fit.slope <= cf.window[1];
        if (cf.has_window && !cf.window_pass) pass = false;
        study.fits.push_back(cf);
    }
    study.all_pass = pass;
}

RateStudy run_rate_study(const ExperimentConfig &cfg) {
    cfg.validate();
    RateStudy study;
    study.config = cfg;
    const CoefficientField<2> field = make_coefficient<2>(cfg.coefficient, cfg.coefficient_params);
    CellTolerances tol;
    const CellPipeline<2> cell = run_cell_pipeline<2>(field, cfg.cell_n, tol, cfg.preconditioner);
    study.a_hat = cell.a_hat.a_hat;
    study.cell_identities = cell.report.to_json();
    study.cell_identities_pass = cell.report.all_pass();
    std::vector<EpsRun> runs(cfg.epsilons.size());
    const std::size_t batch = static_cast<std::size_t>(cfg.threads);
    for (std::size_t start = 0; start < runs.size(); start += batch) {
        const std::size_t stop = std::min(runs.size(), start + batch);
        if (stop - start == 1) {
            runs[start] = run_one(cfg, field, cell, cfg.epsilons[start]);
            continue;
        }
        std::vector<std::future<EpsRun>> jobs;
        for (std::size_t i = start; i < stop; ++i)
            jobs.push_back(std::async(std::launch::async, run_one, std::cref(cfg), std::cref(field),
                                      std::cref(cell), cfg.epsilons[i]));
        for (std::size_t i = start; i < stop; ++i) runs[i] = jobs[i - start].get();
    }
    for (auto &r : runs) {
        study.reports.push_back(r.report);
        study.stamps.push_back(r.stamp);
    }
    fit_study(study);
    return study;
}

nlohmann::json RateStudy::summary() const {
    nlohmann::json channels = nlohmann::json::object();
    for (const auto &f : fits) {
        nlohmann::json c = {{"label", f.label},
                            {"fitted", f.fitted},
                            {"excluded", f.excluded},
                            {"window_pass", f.window_pass}};
        if (f.fitted) {
            c["slope"] = f.fit.slope;
            c["intercept"] = f.fit.intercept;
            c["r2"] = f.fit.r_squared;
            c["residuals"] = f.fit.residuals;
        } else {
            c["slope"] = nullptr;
            c["r2"] = nullptr;
        }
        c["window"] = f.has_window ? nlohmann::json{f.window[0], f.window[1]} : nlohmann::json();
        channels[f.channel] = c;
    }
    nlohmann::json runs = nlohmann::json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        nlohmann::json r = reports[i].to_json();
        r["iterations_u0"] = stamps[i].iterations_u0;
        r["iterations_ueps"] = stamps[i].iterations_ueps;
        r["richardson_pass"] = stamps[i].richardson_pass;
        if (config.neumann) r["compatibility"] = stamps[i].compatibility;
        runs.push_back(r);
    }
    return {{"config", config.to_json()},
            {"a_hat", tensor_to_json<2>(a_hat)},
            {"cell_identities", cell_identities},
            {"cell_identities_pass", cell_identities_pass},
            {"channels", channels},
            {"runs", runs},
            {"plot", config.plot},
            {"all_pass", all_pass}};
}

std::string render_csv(const std::vector<TwoScaleReport> &reports) {
    std::string out = TwoScaleReport::csv_header() + "\n";
    for (const auto &r : reports) out += r.csv_row() + "\n";
    return out;
}

std::string render_svg(const RateStudy &study) {
    constexpr double kW = 640, kH = 480, kL = 70, kR = 150, kT = 30, kB = 50;
    const char *colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto &r : study.reports) {
        if (r.status.rfind("failed", 0) == 0) continue;
        xmin = std::min(xmin, std::log10(r.epsilon));
        xmax = std::max(xmax, std::log10(r.epsilon));
        for (const auto &c : kRateChannels) {
            const double v = channel_value(r, c);
            if (v <= 0.0) continue;
            ymin = std::min(ymin, std::log10(v));
            ymax = std::max(ymax, std::log10(v));
        }
    }
    std::string s;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\">\n", kW, kH);
    s += buf;
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!(xmax >= xmin) || !(ymax >= ymin)) return s + "</svg>\n";
    if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
    if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }
    const double pad_y = 0.05 * (ymax - ymin);
    ymin -= pad_y;
    ymax += pad_y;
    auto px = [&](double lx) { return kL + (lx - xmin) / (xmax - xmin) * (kW - kL - kR); };
    auto py = [&](double ly) { return kH - kB - (ly - ymin) / (ymax - ymin) * (kH - kT - kB); };
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"black\"/>\n",
                  kL, kT, kW - kL - kR, kH - kT - kB);
    s += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">log10 epsilon</text>\n",
                  0.5 * (kL + kW - kR), kH - 12);
    s += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"16\" y=\"%.1f\" transform=\"rotate(-90 16 %.1f)\" text-anchor=\"middle\">log10 error</text>\n",
                  0.5 * (kT + kH - kB), 0.5 * (kT + kH - kB));
    s += buf;
    // reference slopes through the centre of the data
    const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
    const double guides[] = {0.5, 1.0};
    for (double slope : guides) {
        const double dx = 0.5 * (xmax - xmin);
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n",
                      px(cx - dx), py(cy - slope * dx), px(cx + dx), py(cy + slope * dx));
        s += buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" fill=\"gray\" font-size=\"11\">slope %.1f</text>\n",
                      px(cx + dx) + 4, py(cy + slope * dx), slope);
        s += buf;
    }
    for (std::size_t c = 0; c < kRateChannels.size(); ++c) {
        std::string pts;
        for (const auto &r : study.reports) {
            if (r.status.rfind("failed", 0) == 0) continue;
            const double v = channel_value(r, kRateChannels[c]);
            if (v <= 0.0) continue;
            std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(std::log10(r.epsilon)), py(std::log10(v)));
            pts += buf;
            std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"%s\"/>\n",
                          px(std::log10(r.epsilon)), py(std::log10(v)), colors[c]);
            s += buf;
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(colors[c]) + "\" points=\"" + pts + "\"/>\n";
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" fill=\"%s\" font-size=\"12\">%s</text>\n",
                      kW - kR + 10, kT + 16.0 * (c + 1), colors[c], kRateChannels[c].c_str());
        s += buf;
    }
    return s + "</svg>\n";
}

namespace {

void write_file(const std::filesystem::path &p, const std::string &text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoFailure("cannot write " + p.string());
    f << text;
    if (!f) throw IoFailure("write failed for " + p.string());
}

} // namespace

void emit_report(const RateStudy &study, const std::string &out_dir) {
    const std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoFailure("cannot create " + dir.string());
    write_file(dir / study.config.csv, render_csv(study.reports));
    write_file(dir / study.config.json, study.summary().dump(2) + "\n");
    if (study.config.plot) write_file(dir / study.config.svg, render_svg(study));
}

SingleSolve run_single_solve(const ExperimentConfig &cfg) {
    cfg.validate();
    const CoefficientField<2> field = make_coefficient<2>(cfg.coefficient, cfg.coefficient_params);
    const CellPipeline<2> cell = run_cell_pipeline<2>(field, cfg.cell_n, {}, cfg.preconditioner);
    SingleSolve out;
    out.epsilon = cfg.epsilon;
    out.homogenized = cfg.homogenized;
    out.a_hat = cell.a_hat.a_hat;
    const Tensor4<2> a_hat = out.a_hat;
    const double eps = cfg.epsilon;
    MixedProblemSpec<2>::TensorFn coeff;
    if (cfg.homogenized) coeff = [a_hat](const Point<2> &) { return a_hat; };
    else coeff = [&field, eps](const Point<2> &x) { return field.evaluate(Point<2>(x / eps)); };
    const MixedProblemSpec<2> s = make_problem(cfg, eps / cfg.k, coeff, a_hat);
    out.mesh = s.mesh;
    out.solution = solve_problem(s, cfg);
    return out;
}

std::string nodal_table_csv(const SingleSolve &s) {
    std::string out = "x,y,u1,u2\n";
    char buf[160];
    for (Index i = 0; i < s.mesh.node_count(); ++i) {
        const Point<2> x = s.mesh.node(i);
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", x[0], x[1],
                      s.solution.u[2 * i], s.solution.u[2 * i + 1]);
        out += buf;
    }
    return out;
}

nlohmann::json solve_stats_json(const SingleSolve &s) {
    return {{"epsilon", s.epsilon},
            {"h", s.mesh.h},
            {"homogenized", s.homogenized},
            {"nodes", s.mesh.node_count()},
            {"iterations", s.solution.stats.iterations},
            {"residual", s.solution.stats.residual},
            {"weak_residual", s.solution.weak_residual},
            {"orthogonality_residual", s.solution.orthogonality_residual},
            {"a_hat", tensor_to_json<2>(s.a_hat)}};
}

std::vector<CheckResult> run_verification(std::uint64_t seed) {
    std::vector<CheckResult> out;
    auto add = [&](const std::string &name, double value, double tol) {
        out.push_back({name, value, tol, value <= tol});
    };
    // constant coefficients: correctors vanish and A_hat = A
    {
        const Tensor4<2> a = isotropic_tensor<2>(1.0, 1.0);
        const auto p = run_cell_pipeline<2>(CoefficientField<2>::constant(a), 16);
        const double dev = (p.a_hat.a_hat - a).max_abs();
        add("constant.corrector_max", p.chi.max_abs(), 1e-10);
        add("constant.a_hat_deviation", dev, 1e-12);
        add("constant.b_max", p.b.max_abs(), 1e-12);
    }
    // laminates against the closed-form oracle
    for (Index n : {Index(64), Index(256)}) {
        const auto field = make_coefficient<2>("laminate", {{"contrast", 5.0}});
        const auto p = run_cell_pipeline<2>(field, n);
        const auto o = laminate_cell_oracle(LaminateProfile<2>::from_field(field));
        const double rel = (p.a_hat.a_hat - o.a_hat).max_abs() / o.a_hat.max_abs();
        add("laminate.n" + std::to_string(n) + ".relative_deviation", rel, n >= 256 ? 5e-3 : 2e-2);
    }
    {
        const auto field = make_coefficient<2>("laminate", {{"contrast", 5.0}, {"scalar", true}});
        const auto p = run_cell_pipeline<2>(field, 64);
        const double hm = harmonic_mean({1.0, 5.0}, {0.5, 0.5});
        add("scalar_laminate.harmonic_mean", std::abs(p.a_hat.a_hat(0, 0, 0, 0) - hm) / hm, 2e-2);
    }
    // FEM order from nested Richardson pairs on a constant-coefficient problem
    {
        ExperimentConfig cfg;
        cfg.dirichlet = {"left", "right", "bottom", "top"};
        const Tensor4<2> a = isotropic_tensor<2>(1.0, 1.0);
        auto coeff = [a](const Point<2> &) { return a; };
        const auto r1 = fine_reference(make_problem(cfg, 1.0 / 16, coeff, a), 2, 1e-11);
        const auto r2 = fine_reference(make_problem(cfg, 1.0 / 32, coeff, a), 2, 1e-11);
        const double order = std::log2(r1.estimate / r2.estimate);
        add("fem.richardson_order_deviation", std::abs(order - 2.0), 0.2);
    }
    // Neumann compatibility gate
    {
        ExperimentConfig cfg;
        cfg.neumann = true;
        cfg.data = {{"recipe", "explicit"}, {"F", {1.0, 0.0}}};
        const Tensor4<2> a = isotropic_tensor<2>(1.0, 1.0);
        const auto s = make_problem(cfg, 1.0 / 8, [a](const Point<2> &) { return a; }, a);
        const auto c = compatibility_check(s, cfg.compat_tol);
        add("neumann.incompatible_rejected", c.pass ? 1.0 : 0.0, 0.0);
    }
    // Korn probe stays bounded under refinement
    {
        const DomainSpec<2> dom(Point<2>(0, 0), Point<2>(1, 1));
        const auto part = BoundaryPartition::from_names({"left", "bottom"});
        const double k8 = korn_probe(build_mesh<2>(dom, 1.0 / 8, part), 20, seed);
        const double k32 = korn_probe(build_mesh<2>(dom, 1.0 / 32, part), 20, seed);
        add("korn.refinement_growth", std::max(k8, k32) / std::min(k8, k32), 2.0);
    }
    return out;
}

} // namespace elhom
