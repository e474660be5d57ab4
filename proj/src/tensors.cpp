#include "elhom/tensors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace elhom {

template <int D>
Mat<D> Tensor4<D>::apply(const Mat<D> &grad) const {
    Mat<D> flux = Mat<D>::Zero();
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
            for (int al = 0; al < D; ++al)
                for (int be = 0; be < D; ++be)
                    flux(al, i) += (*this)(i, j, al, be) * grad(be, j);
    return flux;
}

template <int D>
double Tensor4<D>::energy(const Mat<D> &xi) const {
    return (apply(xi).array() * xi.array()).sum();
}

template <int D>
double Tensor4<D>::max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::abs(v));
    return m;
}

template <int D>
std::vector<SymmetryViolation> validate_symmetries(const Tensor4<D> &t, double tol) {
    std::vector<SymmetryViolation> out;
    auto check = [&](int identity, std::array<int, 4> idx, std::array<int, 4> p) {
        const double v = t(idx[0], idx[1], idx[2], idx[3]);
        const double w = t(p[0], p[1], p[2], p[3]);
        if (std::abs(v - w) > tol) out.push_back({identity, idx, p, v, w});
    };
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
            for (int al = 0; al < D; ++al)
                for (int be = 0; be < D; ++be) {
                    check(0, {i, j, al, be}, {j, i, be, al});
                    check(1, {i, j, al, be}, {al, j, i, be});
                    check(2, {i, j, al, be}, {i, be, al, j});
                }
    return out;
}

template <int D>
double symmetry_residual(const Tensor4<D> &t, unsigned identities) {
    double r = 0.0;
    for (const auto &v : validate_symmetries(t, 0.0))
        if (identities & (1u << v.identity)) r = std::max(r, std::abs(v.value - v.partner_value));
    return r;
}

EllipticityBounds::EllipticityBounds(double k1, double k2) : kappa1(k1), kappa2(k2) {
    if (!(k1 > 0.0) || !(k1 <= k2))
        throw NonElliptic("bounds require 0 < kappa1 <= kappa2, got kappa1=" +
                          std::to_string(k1) + " kappa2=" + std::to_string(k2));
}

template <int D>
ElasticityTensor<D> isotropic_tensor(double lambda, double mu) {
    if (!(mu > 0.0) || !(lambda + 2.0 * mu / D > 0.0))
        throw InvalidModuli("need mu > 0 and lambda + 2 mu / d > 0 (lambda=" +
                            std::to_string(lambda) + ", mu=" + std::to_string(mu) + ")");
    ElasticityTensor<D> a;
    auto delta = [](int p, int q) { return p == q ? 1.0 : 0.0; };
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
            for (int al = 0; al < D; ++al)
                for (int be = 0; be < D; ++be)
                    a(i, j, al, be) = lambda * delta(i, al) * delta(j, be) +
                                      mu * (delta(i, j) * delta(al, be) +
                                            delta(i, be) * delta(j, al));
    return a;
}

template <int D>
Tensor4<D> scalar_surrogate_tensor(double a) {
    if (!(a > 0.0)) throw InvalidModuli("scalar surrogate needs a > 0");
    Tensor4<D> t;
    for (int i = 0; i < D; ++i)
        for (int al = 0; al < D; ++al) t(i, i, al, al) = a;
    return t;
}

template <int D>
EllipticityBounds exact_bounds(const Tensor4<D> &t) {
    constexpr int n = D * D;
    Eigen::Matrix<double, n, n> form;
    // row/col index alpha * D + i  <->  xi(alpha, i)
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
            for (int al = 0; al < D; ++al)
                for (int be = 0; be < D; ++be) form(al * D + i, be * D + j) = t(i, j, al, be);
    Eigen::Matrix<double, n, n> sym = 0.5 * (form + form.transpose());

    constexpr int m = D * (D + 1) / 2;
    Eigen::Matrix<double, n, m> basis = Eigen::Matrix<double, n, m>::Zero();
    int col = 0;
    for (int k = 0; k < D; ++k)
        for (int l = k; l < D; ++l, ++col) {
            if (k == l) {
                basis(k * D + k, col) = 1.0;
            } else {
                basis(k * D + l, col) = std::numbers::sqrt2 / 2.0;
                basis(l * D + k, col) = std::numbers::sqrt2 / 2.0;
            }
        }
    Eigen::Matrix<double, m, m> restricted = basis.transpose() * sym * basis;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, n, n>> full(sym);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, m, m>> symmetric(restricted);
    const double k1 = symmetric.eigenvalues().minCoeff() / 4.0;
    const double k2 = full.eigenvalues().maxCoeff();
    if (!(k1 > 0.0))
        throw NonElliptic("tensor is not elliptic on symmetric matrices (kappa1=" +
                          std::to_string(k1) + ")");
    return {k1, k2};
}

std::string to_string(CoefficientKind kind) {
    switch (kind) {
    case CoefficientKind::constant: return "constant";
    case CoefficientKind::laminate: return "laminate";
    case CoefficientKind::checkerboard: return "checkerboard";
    case CoefficientKind::smooth_trigonometric: return "smooth";
    }
    return "unknown";
}

double wrap_cell(double y) {
    // (-1/2, 1/2]
    double w = y - std::floor(y + 0.5);
    if (w == -0.5) w = 0.5;
    return w;
}

namespace {

template <int D>
EllipticityBounds phase_bounds(const std::vector<Tensor4<D>> &phases) {
    double k1 = std::numeric_limits<double>::infinity();
    double k2 = 0.0;
    for (const auto &p : phases) {
        const EllipticityBounds b = exact_bounds(p);
        k1 = std::min(k1, b.kappa1);
        k2 = std::max(k2, b.kappa2);
    }
    return {k1, k2};
}

EllipticityBounds isotropic_range_bounds(int d, double lmin, double lmax, double mmin,
                                         double mmax) {
    // symmetric quotient eigenvalues: 2 mu (deviatoric), d lambda + 2 mu (spherical)
    const double k1 = std::min(2.0 * mmin, d * lmin + 2.0 * mmin) / 4.0;
    const double k2 = std::max(2.0 * mmax, d * lmax + 2.0 * mmax);
    return {k1, k2};
}

} // namespace

template <int D>
CoefficientField<D> CoefficientField<D>::constant(const Tensor4<D> &a) {
    CoefficientField f;
    f.kind_ = CoefficientKind::constant;
    f.phases_ = {a};
    f.bounds_ = exact_bounds(a);
    return f;
}

template <int D>
CoefficientField<D> CoefficientField<D>::laminate(int direction, std::vector<Tensor4<D>> phases,
                                                  std::vector<double> breakpoints) {
    if (direction < 0 || direction >= D) throw ConfigError("laminate direction out of range");
    if (phases.empty() || phases.size() != breakpoints.size())
        throw ConfigError("laminate needs one breakpoint per phase");
    for (std::size_t p = 0; p < breakpoints.size(); ++p) {
        if (breakpoints[p] < -0.5 || breakpoints[p] >= 0.5)
            throw ConfigError("laminate breakpoints must lie in [-1/2, 1/2)");
        if (p > 0 && !(breakpoints[p] > breakpoints[p - 1]))
            throw ConfigError("laminate breakpoints must be strictly increasing");
    }
    CoefficientField f;
    f.kind_ = CoefficientKind::laminate;
    f.direction_ = direction;
    f.bounds_ = phase_bounds(phases);
    f.phases_ = std::move(phases);
    f.breakpoints_ = std::move(breakpoints);
    return f;
}

template <int D>
CoefficientField<D> CoefficientField<D>::laminate_contrast(int direction, double lambda, double mu,
                                                           double contrast) {
    if (!(contrast > 0.0)) throw InvalidModuli("contrast must be positive");
    auto f = laminate(direction,
                      {isotropic_tensor<D>(lambda, mu),
                       isotropic_tensor<D>(contrast * lambda, contrast * mu)},
                      {-0.5, 0.0});
    f.lambda_ = lambda;
    f.mu_ = mu;
    f.param_ = contrast;
    return f;
}

template <int D>
CoefficientField<D> CoefficientField<D>::checkerboard(double lambda, double mu, double contrast) {
    if (!(contrast > 0.0)) throw InvalidModuli("contrast must be positive");
    CoefficientField f;
    f.kind_ = CoefficientKind::checkerboard;
    f.phases_ = {isotropic_tensor<D>(lambda, mu),
                 isotropic_tensor<D>(contrast * lambda, contrast * mu)};
    f.bounds_ = phase_bounds(f.phases_);
    f.breakpoints_ = {-0.5, 0.0};
    f.lambda_ = lambda;
    f.mu_ = mu;
    f.param_ = contrast;
    return f;
}

template <int D>
CoefficientField<D> CoefficientField<D>::smooth_trigonometric(double lambda, double mu,
                                                              double amplitude) {
    if (!(std::abs(amplitude) < 1.0)) throw InvalidModuli("smooth field needs |amplitude| < 1");
    const double a = std::abs(amplitude);
    const double lmin = lambda >= 0.0 ? lambda * (1.0 - a) : lambda * (1.0 + a);
    const double lmax = lambda >= 0.0 ? lambda * (1.0 + a) : lambda * (1.0 - a);
    // every sampled value must itself be a valid isotropic tensor
    (void)isotropic_tensor<D>(lmin, mu * (1.0 - a));
    CoefficientField f;
    f.kind_ = CoefficientKind::smooth_trigonometric;
    f.lambda_ = lambda;
    f.mu_ = mu;
    f.param_ = amplitude;
    f.bounds_ = isotropic_range_bounds(D, lmin, lmax, mu * (1.0 - a), mu * (1.0 + a));
    return f;
}

template <int D>
Tensor4<D> CoefficientField<D>::evaluate(const Point<D> &y) const {
    switch (kind_) {
    case CoefficientKind::constant: return phases_[0];
    case CoefficientKind::laminate: {
        const double t0 = breakpoints_.front();
        // wrap into (t0, t0 + 1]
        double s = y[direction_] - t0;
        s = s - std::ceil(s) + 1.0;
        s += t0;
        std::size_t p = 0;
        while (p + 1 < breakpoints_.size() && breakpoints_[p + 1] < s) ++p;
        return phases_[p];
    }
    case CoefficientKind::checkerboard: {
        int parity = 0;
        for (int k = 0; k < D; ++k) parity += wrap_cell(y[k]) > 0.0 ? 1 : 0;
        return phases_[parity % 2];
    }
    case CoefficientKind::smooth_trigonometric: {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        double m = std::sin(two_pi * y[0]);
        for (int k = 1; k < D; ++k) m *= std::cos(two_pi * y[k]);
        const double l = lambda_ * (1.0 + param_ * std::cos(two_pi * y[0]));
        const double mu = mu_ * (1.0 + param_ * m);
        Tensor4<D> a;
        auto delta = [](int p, int q) { return p == q ? 1.0 : 0.0; };
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j)
                for (int al = 0; al < D; ++al)
                    for (int be = 0; be < D; ++be)
                        a(i, j, al, be) = l * delta(i, al) * delta(j, be) +
                                          mu * (delta(i, j) * delta(al, be) +
                                                delta(i, be) * delta(j, al));
        return a;
    }
    }
    return {};
}

template <int D>
bool CoefficientField<D>::on_discontinuity(const Point<D> &y, double tol) const {
    auto near_break = [&](double coord) {
        for (double t : breakpoints_) {
            const double d = coord - t;
            if (std::abs(d - std::round(d)) <= tol) return true;
        }
        return false;
    };
    switch (kind_) {
    case CoefficientKind::laminate: return near_break(y[direction_]);
    case CoefficientKind::checkerboard:
        for (int k = 0; k < D; ++k)
            if (near_break(y[k])) return true;
        return false;
    default: return false;
    }
}

template <int D>
ProbeResult ellipticity_probe(const CoefficientField<D> &field, int sample_count,
                              std::uint64_t seed) {
    if (sample_count < 1) throw ConfigError("ellipticity_probe needs sample_count >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    ProbeResult r{std::numeric_limits<double>::infinity(), 0.0};
    for (int s = 0; s < sample_count; ++s) {
        Point<D> y;
        for (int k = 0; k < D; ++k) y[k] = unif(rng);
        const Tensor4<D> a = field.evaluate(y);
        Mat<D> xi;
        for (int p = 0; p < D; ++p)
            for (int q = 0; q < D; ++q) xi(p, q) = gauss(rng);
        Mat<D> sym = 0.5 * (xi + xi.transpose());
        if (sym.norm() == 0.0 || xi.norm() == 0.0) continue;
        sym /= sym.norm();
        xi /= xi.norm();
        const double q1 = a.energy(sym) / (sym + sym.transpose()).squaredNorm();
        if (!(q1 > 0.0))
            throw NonElliptic("symmetric quotient " + std::to_string(q1) + " at sample " +
                              std::to_string(s));
        r.kappa1_est = std::min(r.kappa1_est, q1);
        r.kappa2_est = std::max(r.kappa2_est, a.energy(xi));
    }
    return r;
}

template <int D>
CoefficientField<D> make_coefficient(const std::string &name, const nlohmann::json &given) {
    const nlohmann::json params = given.is_null() ? nlohmann::json::object() : given;
    if (!params.is_object()) throw ConfigError("coefficient parameters must be a JSON object");
    const double lambda = params.value("lambda", 1.0);
    const double mu = params.value("mu", 1.0);
    if (name == "constant") return CoefficientField<D>::constant(isotropic_tensor<D>(lambda, mu));
    if (name == "laminate") {
        const int dir = params.value("direction", 1) - 1;
        const double contrast = params.value("contrast", 5.0);
        if (params.value("scalar", false)) {
            const double a = params.value("a", 1.0);
            return CoefficientField<D>::laminate(
                dir, {scalar_surrogate_tensor<D>(a), scalar_surrogate_tensor<D>(contrast * a)},
                {-0.5, 0.0});
        }
        return CoefficientField<D>::laminate_contrast(dir, lambda, mu, contrast);
    }
    if (name == "checkerboard")
        return CoefficientField<D>::checkerboard(lambda, mu, params.value("contrast", 5.0));
    if (name == "smooth")
        return CoefficientField<D>::smooth_trigonometric(lambda, mu,
                                                         params.value("amplitude", 0.5));
    throw ConfigError("unknown coefficient '" + name + "'");
}

template <int D>
nlohmann::json tensor_to_json(const Tensor4<D> &t) {
    nlohmann::json entries = nlohmann::json::array();
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
            for (int al = 0; al < D; ++al)
                for (int be = 0; be < D; ++be)
                    entries.push_back({{"i", i + 1},
                                       {"j", j + 1},
                                       {"alpha", al + 1},
                                       {"beta", be + 1},
                                       {"value", t(i, j, al, be)}});
    return {{"d", D}, {"entries", entries}};
}

template <int D>
Tensor4<D> tensor_from_json(const nlohmann::json &j) {
    if (j.at("d").get<int>() != D) throw ConfigError("tensor dimension mismatch");
    Tensor4<D> t;
    for (const auto &e : j.at("entries"))
        t(e.at("i").get<int>() - 1, e.at("j").get<int>() - 1, e.at("alpha").get<int>() - 1,
          e.at("beta").get<int>() - 1) = e.at("value").get<double>();
    return t;
}

#define ELHOM_INSTANTIATE(D)                                                                   \
    template class Tensor4<D>;                                                                 \
    template class CoefficientField<D>;                                                        \
    template std::vector<SymmetryViolation> validate_symmetries<D>(const Tensor4<D> &, double); \
    template double symmetry_residual<D>(const Tensor4<D> &, unsigned);                        \
    template ElasticityTensor<D> isotropic_tensor<D>(double, double);                          \
    template Tensor4<D> scalar_surrogate_tensor<D>(double);                                    \
    template EllipticityBounds exact_bounds<D>(const Tensor4<D> &);                            \
    template ProbeResult ellipticity_probe<D>(const CoefficientField<D> &, int, std::uint64_t); \
    template CoefficientField<D> make_coefficient<D>(const std::string &, const nlohmann::json &); \
    template nlohmann::json tensor_to_json<D>(const Tensor4<D> &);                             \
    template Tensor4<D> tensor_from_json<D>(const nlohmann::json &);

ELHOM_INSTANTIATE(2)
ELHOM_INSTANTIATE(3)

} // namespace elhom
