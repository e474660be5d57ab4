#include <doctest.h>

#include <cmath>
#include <random>

#include "elhom/twoscale.hpp"

using namespace elhom;

namespace {

const DomainSpec<2> kUnit(Point<2>(0, 0), Point<2>(1, 1));

double bump_raw(double r) {
    const double s = 4.0 * r * r;
    return s < 1.0 ? std::exp(-1.0 / (1.0 - s)) : 0.0;
}

PaddedField<2> random_padded(Index cells, Index pad, int nc, std::uint64_t seed) {
    const auto m = build_mesh<2>(kUnit, 1.0 / static_cast<double>(cells));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    PaddedField<2> u = extend<2>(m, Field::Zero(m.node_count() * nc), nc, pad);
    for (Index i = 0; i < u.values.size(); ++i) u.values[i] = g(rng);
    return u;
}

Field nodal_scalar(const Mesh<2> &m, double (*f)(double, double)) {
    Field u(m.node_count());
    for (Index i = 0; i < m.node_count(); ++i) {
        const Point<2> x = m.node(i);
        u[i] = f(x[0], x[1]);
    }
    return u;
}

} // namespace

TEST_SUITE("twoscale") {

TEST_CASE("mollifier has unit mass, compact support and is even") {
    const Mollifier<2> phi;
    constexpr int n = 1200;
    double mass = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const Point<2> z(-0.5 + (a + 0.5) / n, -0.5 + (b + 0.5) / n);
            mass += phi(z) / (double(n) * n);
        }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(phi.profile(0.5) == 0.0);
    CHECK(phi.profile(0.7) == 0.0);
    CHECK(phi.profile(0.49) > 0.0);
    CHECK(phi(Point<2>(0.1, -0.2)) == phi(Point<2>(-0.1, 0.2)));
    CHECK(phi.scaled(Point<2>(0.01, 0.0), 0.1) == doctest::Approx(100.0 * phi.profile(0.1)));
}

TEST_CASE("stencil weights are nonnegative, symmetric and sum to one") {
    const SmoothingOperator<2> op(1.0 / 8, 1.0 / 128);
    CHECK(op.radius() == 8);
    double sum = 0.0;
    for (std::size_t k = 0; k < op.weights().size(); ++k) {
        CHECK(op.weights()[k] > 0.0);
        sum += op.weights()[k];
        const auto &o = op.offsets()[k];
        CHECK(std::max(std::abs(o[0]), std::abs(o[1])) <= op.radius());
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    // Riemann sum of the scaled bump at 16 points per diameter
    CHECK(op.raw_sum() == doctest::Approx(1.0).epsilon(1e-3));
    // mirror pairs
    for (std::size_t k = 0; k < op.offsets().size(); ++k)
        CHECK(op.weights()[k] == doctest::Approx(op.weights()[op.offsets().size() - 1 - k]));
    CHECK(SmoothingOperator<2>(0.01, 0.1).weights().size() == 1u);
}

TEST_CASE("constants and affine fields are fixed points") {
    const auto m = build_mesh<2>(kUnit, 1.0 / 32);
    const SmoothingOperator<2> op(1.0 / 4, 1.0 / 32);
    const auto c = extend<2>(m, Field::Constant(m.node_count(), 2.5), 1, op.radius());
    CHECK((op.smooth(c).values.array() - 2.5).abs().maxCoeff() <= 1e-13);
    // affine data on a padded box, no reflection involved
    PaddedField<2> u = c;
    for (Index i = 0; i < u.grid.node_count(); ++i) {
        const Point<2> x = u.grid.node_coord(i);
        u.values[i] = 0.3 * x[0] - 1.7 * x[1] + 0.2;
    }
    const auto su = op.smooth(u);
    double worst = 0.0;
    for (Index i = 0; i < su.grid.node_count(); ++i) {
        const Point<2> x = su.grid.node_coord(i);
        worst = std::max(worst, std::abs(su.values[i] - (0.3 * x[0] - 1.7 * x[1] + 0.2)));
    }
    CHECK(worst <= 1e-13);
}

TEST_CASE("smoothing is an l2 contraction") {
    const SmoothingOperator<2> op(1.0 / 8, 1.0 / 64);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto u = random_padded(16, op.radius() + 2, 2, s);
        const auto su = op.smooth(u);
        CHECK(su.values.norm() <= u.values.norm());
        CHECK(su.pad == u.pad - op.radius());
    }
}

TEST_CASE("smoothing commutes with differences") {
    const SmoothingOperator<2> op(1.0 / 8, 1.0 / 64);
    const auto u = random_padded(16, op.radius() + 3, 1, 42);
    const auto a = padded_gradient(op.smooth(u));
    const auto b = op.smooth(padded_gradient(u));
    REQUIRE(a.values.size() == b.values.size());
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() <= 1e-10 * b.values.cwiseAbs().maxCoeff());
}

TEST_CASE("smoothing of a plane wave matches the mollifier transform") {
    const double eps = 1.0 / 8, h = 1.0 / 128;
    const auto m = build_mesh<2>(kUnit, h);
    const SmoothingOperator<2> op(eps, h);
    PaddedField<2> u = extend<2>(m, Field::Zero(m.node_count()), 1, op.radius());
    for (Index i = 0; i < u.grid.node_count(); ++i)
        u.values[i] = std::sin(2 * M_PI * u.grid.node_coord(i)[0]);
    const Field su = mollify(op, m, u);
    // transform int phi(z) cos(2 pi eps z_1) dz by dense quadrature
    constexpr int n = 1200;
    double num = 0.0, den = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double z1 = -0.5 + (a + 0.5) / n, z2 = -0.5 + (b + 0.5) / n;
            const double w = bump_raw(std::hypot(z1, z2));
            num += w * std::cos(2 * M_PI * eps * z1);
            den += w;
        }
    const double mhat = num / den;
    double worst = 0.0;
    for (Index i = 0; i < m.node_count(); ++i)
        worst = std::max(worst, std::abs(su[i] - mhat * std::sin(2 * M_PI * m.node(i)[0])));
    CHECK(worst <= 1e-5);
    CHECK(mhat < 1.0);
}

TEST_CASE("defect ratio of a plane wave stays below pi") {
    for (double eps : {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}) {
        const double h = eps / 8;
        const auto m = build_mesh<2>(kUnit, h);
        const SmoothingOperator<2> op(eps, h);
        const Field u = nodal_scalar(m, [](double a, double) { return std::sin(2 * M_PI * a); });
        const double r = smoothing_defect_ratio<2>(op, m, extend<2>(m, u, 1, op.radius() + 1));
        CHECK(r > 0.0);
        CHECK(r <= M_PI);
    }
}

TEST_CASE("even reflection") {
    const auto m = build_mesh<2>(kUnit, 0.25);
    const auto c = extend<2>(m, Field::Constant(m.node_count() * 2, -1.0), 2, 3);
    CHECK(c.grid.cells[0] == 10);
    CHECK((c.values.array() == -1.0).all());
    const Field x = nodal_scalar(m, [](double a, double) { return a; });
    const auto e = extend<2>(m, x, 1, 6);
    for (Index i = 0; i < e.grid.node_count(); ++i) {
        const double s = e.grid.node_coord(i)[0];
        // tent map with period 2
        double r = std::fmod(std::abs(s), 2.0);
        if (r > 1.0) r = 2.0 - r;
        CHECK(e.values[i] == doctest::Approx(r).epsilon(1e-12).scale(1.0));
    }
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    Field u(m.node_count() * 2);
    for (Index i = 0; i < u.size(); ++i) u[i] = g(rng);
    CHECK(restrict_to_mesh(m, extend<2>(m, u, 2, 5)) == u);
    CHECK_THROWS_AS(padded_gradient(extend<2>(m, u, 2, 0)), InsufficientPadding);
}

TEST_CASE("extension bounded in the discrete H2 surrogate") {
    const auto m = build_mesh<2>(kUnit, 1.0 / 32);
    const Field u = nodal_scalar(m, [](double a, double b) { return std::cos(3 * a) * std::sin(2 * b + 0.4); });
    const double r = extension_ratio<2>(m, u, 1, 8);
    CHECK(r >= 1.0);
    // reflection kinks add second differences of order 1/h
    CHECK(r <= 8.0);
}

TEST_CASE("oscillatory term") {
    const auto field = make_coefficient<2>("laminate", {{"scalar", true}, {"contrast", 5.0}});
    const auto cell = run_cell_pipeline<2>(field, 64);
    const double eps = 1.0 / 4;
    const auto m = build_mesh<2>(kUnit, eps / 16);
    Field grad = Field::Zero(m.node_count() * 4);
    CHECK(oscillatory_term<2>(m, cell.chi, grad, eps).norm() == 0.0);
    for (Index i = 0; i < m.node_count(); ++i) grad[i * 4 + 0] = 1.0;  // beta = 0, j = 0
    const Field t = oscillatory_term<2>(m, cell.chi, grad, eps);
    // chi' = a_hat / a - 1 in each phase: 2/3 on (-1/2, 0], -2/3 on (0, 1/2]
    const double s = 2.0 / 3.0;
    double worst = 0.0;
    for (Index i = 0; i < m.node_count(); ++i) {
        const double y = wrap_cell(m.node(i)[0] / eps);
        const double chi = y <= 0.0 ? s * (y + 0.25) : -s * (y - 0.25);
        worst = std::max({worst, std::abs(t[2 * i] - eps * chi), std::abs(t[2 * i + 1])});
    }
    CHECK(worst <= 1e-9);

    CHECK_THROWS_AS(oscillatory_term<2>(build_mesh<2>(kUnit, 1.0 / 24), cell.chi,
                                        Field::Zero(25 * 25 * 4), 0.1),
                    ResolutionMismatch);
    CHECK_THROWS_AS(oscillatory_term<2>(build_mesh<2>(kUnit, 1.0 / 16), cell.chi,
                                        Field::Zero(17 * 17 * 4), 0.25),
                    ResolutionMismatch);

    const auto flat = run_cell_pipeline<2>(CoefficientField<2>::constant(isotropic_tensor<2>(1, 1)), 16);
    const Field u0 = nodal_scalar(m, [](double a, double b) { return a * b; });
    Field u0v(m.node_count() * 2);
    for (Index i = 0; i < m.node_count(); ++i) u0v.segment<2>(2 * i) = Vec<2>(u0[i], -u0[i]);
    CHECK(corrector_term<2>(m, u0v, flat.chi, eps).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("cutoff family") {
    const double eps = 1.0 / 8;
    const auto m = build_mesh<2>(kUnit, eps / 16);
    const auto c = build_cutoff<2>(m, eps, eps, 2 * eps);
    const Field d = distance_field(m);
    for (Index i = 0; i < m.node_count(); ++i) {
        CHECK(c.theta[i] >= 0.0);
        CHECK(c.theta[i] <= 1.0);
        if (d[i] <= eps) CHECK(c.theta[i] == 1.0);
        if (d[i] >= 2 * eps) CHECK(c.theta[i] == 0.0);
    }
    CHECK(c.theta[m.grid.node_index({24, 64})] == doctest::Approx(0.5));
    CHECK(c.gradient_bound == doctest::Approx(8.0));
    CHECK(c.observed_constant >= 1.0 - 1e-12);
    CHECK(c.observed_constant <= std::sqrt(2.0) + 1e-12);
    CHECK_THROWS_AS(build_cutoff<2>(m, eps, 0.2, 0.1), ConfigError);
}

TEST_CASE("remainder report") {
    const double eps = 1.0 / 8;
    const auto m = build_mesh<2>(kUnit, eps / 8);
    const auto flat = run_cell_pipeline<2>(CoefficientField<2>::constant(isotropic_tensor<2>(1, 1)), 16);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Field u0(m.node_count() * 2), ue(m.node_count() * 2);
    for (Index i = 0; i < u0.size(); ++i) u0[i] = g(rng);
    const auto zero = two_scale_report<2>(m, u0, u0, flat.chi, eps, 0.25);
    CHECK(zero.err_L2_u0 == 0.0);
    CHECK(zero.err_H1_w == 0.0);
    CHECK(zero.err_weighted == 0.0);
    CHECK(zero.err_interior == 0.0);
    CHECK(zero.norm_u0_H2 > 0.0);
    for (Index i = 0; i < ue.size(); ++i) ue[i] = u0[i] + g(rng);
    const auto r = two_scale_report<2>(m, ue, u0, flat.chi, eps, 0.25);
    CHECK(r.semi_interior <= r.semi_H1_w);
    CHECK(r.err_interior <= r.err_H1_w);
    CHECK(r.layer_H1_w <= r.err_H1_w);
    CHECK(r.err_weighted <= 0.5 * r.semi_H1_w);
    CHECK(r.err_L2_u0 == doctest::Approx(l2_norm<2>(m.grid, Field(ue - u0), 2)));
    CHECK_THROWS_AS(two_scale_report<2>(m, ue, u0, flat.chi, eps, 0.2), ConfigError);
    CHECK_NOTHROW(two_scale_report<2>(m, ue, u0, flat.chi, eps, 2 * eps));
    CHECK(TwoScaleReport::csv_header().find("richardson_cert") != std::string::npos);
    CHECK(r.to_json().at("status") == "ok");
}

TEST_CASE("periodic weighted bound and boundary layer") {
    const double eps = 1.0 / 8, h = eps / 16;
    const auto m = build_mesh<2>(kUnit, h);
    const SmoothingOperator<2> op(eps, h);
    const auto u = random_padded(128, layer_padding(eps, h), 2, 5);
    const CellFunction<2> one = [](const Point<2> &) { return 1.0; };
    const CellFunction<2> zero = [](const Point<2> &) { return 0.0; };
    CHECK(cell_l2_norm<2>(one, 64) == doctest::Approx(1.0));
    CHECK(periodic_weighted_bound_check<2>(one, 1.0, op, u) <= 1.0);
    CHECK(periodic_weighted_bound_check<2>(zero, 0.0, op, u) == 0.0);
    CHECK(boundary_layer_ratio<2>(zero, 0.0, op, m, u) == 0.0);
    CHECK(boundary_layer_ratio<2>(one, 1.0, op, m, u) > 0.0);
    const CellFunction<2> wave = [](const Point<2> &y) { return std::cos(2 * M_PI * y[0]); };
    CHECK(cell_l2_norm<2>(wave, 256) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-10));
    CHECK(smoothing_defect_ratio<2>(op, m, u) > 0.0);
    const auto thin = random_padded(128, op.radius() + 1, 2, 6);
    CHECK_THROWS_AS(boundary_layer_ratio<2>(one, 1.0, op, m, thin), InsufficientPadding);
    const auto bare = random_padded(128, op.radius() - 1, 2, 7);
    CHECK_THROWS_AS(op.smooth(bare), InsufficientPadding);
}

}
