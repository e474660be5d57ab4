#include <doctest.h>

#include <random>

#include "elhom/tensors.hpp"

using namespace elhom;

TEST_SUITE("tensors") {

TEST_CASE("isotropic tensors carry every symmetry") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lam(0.0, 5.0), mu(0.1, 5.0);
    for (int k = 0; k < 200; ++k) {
        const auto a = isotropic_tensor<2>(lam(rng), mu(rng));
        CHECK(validate_symmetries(a).empty());
        CHECK(symmetry_residual(a) == 0.0);
    }
    const auto a3 = isotropic_tensor<3>(1.0, 2.0);
    CHECK(validate_symmetries(a3).empty());
}

TEST_CASE("invalid moduli are rejected") {
    CHECK_THROWS_AS(isotropic_tensor<2>(1.0, 0.0), InvalidModuli);
    CHECK_THROWS_AS(isotropic_tensor<2>(-2.0, 1.0), InvalidModuli);
    CHECK_THROWS_AS(scalar_surrogate_tensor<2>(0.0), InvalidModuli);
    CHECK_THROWS_AS(EllipticityBounds(2.0, 1.0), NonElliptic);
}

TEST_CASE("symmetry violations are located") {
    auto a = isotropic_tensor<2>(1.0, 1.0);
    a(0, 1, 0, 1) += 0.5;
    const auto v = validate_symmetries(a, 1e-12);
    CHECK_FALSE(v.empty());
    CHECK(symmetry_residual(a) == doctest::Approx(0.5));
    // the scalar surrogate keeps the major symmetry only
    const auto s = scalar_surrogate_tensor<2>(2.0);
    CHECK(symmetry_residual(s, 0b001) == 0.0);
    CHECK(symmetry_residual(s, 0b010) > 0.0);
}

TEST_CASE("exact bounds of an isotropic tensor") {
    // symmetric eigenvalues 2 mu and d lambda + 2 mu
    const double lam = 0.7, mu = 1.3;
    const auto b = exact_bounds(isotropic_tensor<2>(lam, mu));
    CHECK(b.kappa1 == doctest::Approx(std::min(2 * mu, 2 * lam + 2 * mu) / 4.0));
    CHECK(b.kappa2 == doctest::Approx(std::max(2 * mu, 2 * lam + 2 * mu)));
}

TEST_CASE("exact bounds bracket sampled quotients") {
    const auto a = isotropic_tensor<2>(2.0, 0.5);
    const auto b = exact_bounds(a);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int k = 0; k < 2000; ++k) {
        Mat<2> xi;
        xi << g(rng), g(rng), g(rng), g(rng);
        const Mat<2> sym = 0.5 * (xi + xi.transpose());
        CHECK(a.energy(sym) >= b.kappa1 * (sym + sym.transpose()).squaredNorm() - 1e-12);
        CHECK(a.energy(xi) <= b.kappa2 * xi.squaredNorm() + 1e-12);
    }
}

TEST_CASE("wrap into the half-open cell") {
    CHECK(wrap_cell(0.5) == 0.5);
    CHECK(wrap_cell(-0.5) == 0.5);
    CHECK(wrap_cell(0.75) == doctest::Approx(-0.25));
    CHECK(wrap_cell(3.1) == doctest::Approx(0.1));
}

TEST_CASE("laminate phases use the left limit at interfaces") {
    const auto f = CoefficientField<2>::laminate_contrast(0, 1.0, 1.0, 5.0);
    const auto soft = isotropic_tensor<2>(1.0, 1.0);
    const auto hard = isotropic_tensor<2>(5.0, 5.0);
    CHECK(f.evaluate(Point<2>(-0.25, 0.3)) == soft);
    CHECK(f.evaluate(Point<2>(0.25, 0.3)) == hard);
    CHECK(f.evaluate(Point<2>(0.0, 0.0)) == soft);
    CHECK(f.evaluate(Point<2>(0.5, 0.0)) == hard);
    CHECK(f.evaluate(Point<2>(1.25, 7.0)) == hard);
    CHECK(f.on_discontinuity(Point<2>(0.0, 0.1)));
    CHECK_FALSE(f.on_discontinuity(Point<2>(0.2, 0.1)));
}

TEST_CASE("checkerboard alternates between quadrants") {
    const auto f = CoefficientField<2>::checkerboard(1.0, 1.0, 5.0);
    const auto a = f.evaluate(Point<2>(0.25, 0.25));
    const auto b = f.evaluate(Point<2>(-0.25, 0.25));
    const auto c = f.evaluate(Point<2>(-0.25, -0.25));
    CHECK_FALSE(a == b);
    CHECK(a == c);
    CHECK(f.evaluate(Point<2>(1.25, 0.25)) == a);
}

TEST_CASE("ellipticity probe stays inside the declared bounds") {
    for (const char *name : {"laminate", "checkerboard", "smooth"}) {
        const auto f = make_coefficient<2>(name, nlohmann::json::object());
        const auto p = ellipticity_probe(f, 500, 11);
        CHECK(p.kappa1_est >= f.declared_bounds().kappa1 * (1 - 1e-12));
        CHECK(p.kappa2_est <= f.declared_bounds().kappa2 * (1 + 1e-12));
    }
}

TEST_CASE("catalog lookups") {
    CHECK_THROWS_AS(make_coefficient<2>("honeycomb", {}), ConfigError);
    const auto s = make_coefficient<2>("laminate", {{"scalar", true}, {"contrast", 4.0}});
    CHECK(s.phases().size() == 2);
    CHECK(s.phases()[1](0, 0, 0, 0) == 4.0);
    const auto d = make_coefficient<2>("laminate", {{"direction", 2}});
    CHECK(d.direction() == 1);
}

TEST_CASE("tensor json round trip") {
    const auto a = isotropic_tensor<2>(0.3, 1.7);
    CHECK(tensor_from_json<2>(tensor_to_json<2>(a)) == a);
    const auto j = tensor_to_json<2>(a);
    CHECK(j.at("entries").size() == 16);
}

}
