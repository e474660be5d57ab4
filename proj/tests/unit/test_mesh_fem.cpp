#include <doctest.h>

#include <cmath>
#include <random>

#include "elhom/fem.hpp"
#include "elhom/harness.hpp"

using namespace elhom;

namespace {

const DomainSpec<2> kUnit(Point<2>(0, 0), Point<2>(1, 1));

MixedProblemSpec<2> manufactured(const Mesh<2> &mesh, const Tensor4<2> &a, ProblemMode mode) {
    const auto u = ManufacturedField<2>::standard();
    MixedProblemSpec<2> s;
    s.mesh = mesh;
    s.mode = mode;
    s.coeff = [a](const Point<2> &) { return a; };
    s.body_force = [u, a](const Point<2> &x) { return u.body_force(a, x); };
    s.dirichlet_data = [u](const Point<2> &x) { return u.value(x); };
    s.traction = [u, a](const Point<2> &x, const Face &f) { return u.traction(a, x, f); };
    return s;
}

// 5-point Gauss-Legendre on [0, 1]
const double kGaussX[5] = {0.046910077030668, 0.230765344947158, 0.5, 0.769234655052842,
                           0.953089922969332};
const double kGaussW[5] = {0.118463442528095, 0.239314335249683, 0.284444444444444,
                           0.239314335249683, 0.118463442528095};

} // namespace

TEST_SUITE("mesh_fem") {

TEST_CASE("mesh size must divide the sides") {
    CHECK_THROWS_AS(build_mesh<2>(kUnit, 0.3), NonconformingMeshSize);
    CHECK_THROWS_AS(build_mesh<2>(kUnit, 0.0), NonconformingMeshSize);
    const auto m = build_mesh<2>(DomainSpec<2>(Point<2>(0, 0), Point<2>(1, 0.5)), 0.125);
    CHECK(m.grid.cells[0] == 8);
    CHECK(m.grid.cells[1] == 4);
    CHECK_THROWS_AS(face_from_name("front"), ConfigError);
    CHECK(face_name(face_from_name("top")) == "top");
}

TEST_CASE("node tags follow the boundary partition") {
    const auto m = build_mesh<2>(kUnit, 0.25, BoundaryPartition::from_names({"left"}));
    CHECK(m.tags[m.grid.node_index({0, 2})] == NodeTag::dirichlet);
    CHECK(m.tags[m.grid.node_index({4, 2})] == NodeTag::neumann);
    CHECK(m.tags[m.grid.node_index({2, 2})] == NodeTag::interior);
    CHECK(m.tags[m.grid.node_index({0, 4})] == NodeTag::dirichlet);
    CHECK(m.tags[m.grid.node_index({2, 4})] == NodeTag::neumann);
}

TEST_CASE("distance field") {
    const auto m = build_mesh<2>(kUnit, 0.125);
    const Field d = distance_field(m);
    CHECK(d.maxCoeff() == doctest::Approx(0.5));
    for (Index i = 0; i < m.node_count(); ++i) {
        CHECK(d[i] == doctest::Approx(m.domain.boundary_distance(m.node(i))));
        if (m.grid.on_boundary(i)) CHECK(d[i] == 0.0);
    }
    CHECK(layer_elements(m, 0.125).size() == 28u);
}

TEST_CASE("single element stiffness matches dense quadrature") {
    const Vec<2> h(0.5, 0.25);
    const auto g = Grid<2>::box(Point<2>(0.1, -0.2), {1, 1}, h);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Tensor4<2> a;
    for (double &v : a.data()) v = uni(rng);
    const Eigen::MatrixXd c = tensor_matrix<2>(a);
    const auto op = assemble_operator<2>(
        g, 2, [&](Index, int, const Eigen::VectorXd &, Eigen::Ref<Eigen::MatrixXd> out) { out = c; });
    const Eigen::MatrixXd K = op.dense();

    // oracle: K[(n,al),(m,be)] = int a(i,j,al,be) d_j N_m d_i N_n
    auto grad_n = [&](Index node, double x, double y) {
        const Point<2> p = g.node_coord(node);
        const double sx = 1.0 - std::abs(x - p[0]) / h[0], sy = 1.0 - std::abs(y - p[1]) / h[1];
        const double dx = (p[0] > x ? 1.0 : -1.0) / h[0], dy = (p[1] > y ? 1.0 : -1.0) / h[1];
        return Vec<2>(dx * sy, sx * dy);
    };
    double worst = 0.0;
    for (Index n = 0; n < 4; ++n)
        for (Index m = 0; m < 4; ++m)
            for (int al = 0; al < 2; ++al)
                for (int be = 0; be < 2; ++be) {
                    double sum = 0.0;
                    for (int qx = 0; qx < 5; ++qx)
                        for (int qy = 0; qy < 5; ++qy) {
                            const double x = 0.1 + kGaussX[qx] * h[0], y = -0.2 + kGaussX[qy] * h[1];
                            const Vec<2> gn = grad_n(n, x, y), gm = grad_n(m, x, y);
                            double v = 0.0;
                            for (int i = 0; i < 2; ++i)
                                for (int j = 0; j < 2; ++j) v += a(i, j, al, be) * gm[j] * gn[i];
                            sum += kGaussW[qx] * kGaussW[qy] * h.prod() * v;
                        }
                    worst = std::max(worst, std::abs(sum - K(2 * n + al, 2 * m + be)));
                }
    CHECK(worst <= 1e-12);
}

TEST_CASE("affine displacements are reproduced exactly") {
    const auto a = isotropic_tensor<2>(0.7, 1.3);
    Mat<2> A;
    A << 0.3, -0.2, 0.5, 0.1;
    const Vec<2> c(0.25, -0.4);
    for (const bool with_traction : {false, true}) {
        MixedProblemSpec<2> s;
        s.mesh = build_mesh<2>(kUnit, 0.125,
                               BoundaryPartition::from_names(
                                   with_traction ? std::vector<std::string>{"left", "bottom"}
                                                 : std::vector<std::string>{"left", "right", "bottom", "top"}));
        s.mode = with_traction ? ProblemMode::mixed : ProblemMode::dirichlet;
        s.coeff = [a](const Point<2> &) { return a; };
        s.dirichlet_data = [A, c](const Point<2> &x) { return Vec<2>(A * x + c); };
        s.traction = [a, A](const Point<2> &, const Face &f) {
            return Vec<2>(a.apply(A) * DomainSpec<2>::normal(f));
        };
        const auto sol = solve_mixed(s, 1e-12);
        const Field exact = nodal_field<2>(s.mesh, s.dirichlet_data);
        CHECK((sol.u - exact).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("manufactured solution converges at second order in L2") {
    const auto a = isotropic_tensor<2>(1.0, 1.0);
    const auto u = ManufacturedField<2>::standard();
    std::vector<double> err;
    for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
        const auto mesh = build_mesh<2>(kUnit, h, BoundaryPartition::from_names({"left", "bottom"}));
        const auto sol = solve_mixed(manufactured(mesh, a, ProblemMode::mixed), 1e-12);
        const Field exact = nodal_field<2>(mesh, [u](const Point<2> &x) { return u.value(x); });
        err.push_back(l2_norm<2>(mesh.grid, Field(sol.u - exact), 2));
    }
    for (int k = 0; k + 1 < 3; ++k) {
        const double order = std::log2(err[k] / err[k + 1]);
        CHECK(order >= 1.8);
        CHECK(order <= 2.2);
    }
}

TEST_CASE("pure Neumann solutions are orthogonal to rigid motions") {
    const auto a = isotropic_tensor<2>(1.0, 1.0);
    const auto mesh = build_mesh<2>(kUnit, 1.0 / 16, BoundaryPartition::neumann());
    const auto spec = manufactured(mesh, a, ProblemMode::neumann);
    const auto cmp = compatibility_check(spec);
    CHECK(cmp.pass);
    CHECK(cmp.residuals.size() == 3u);
    const auto sol = solve_neumann(spec, 1e-11);
    CHECK(sol.orthogonality_residual <= 1e-10);
    const auto basis = rigid_body_basis(mesh);
    CHECK(basis.fields.size() == 3u);
    CHECK(rigid_orthogonality(mesh, basis, sol.u) <= 1e-10);
    // agrees with the target up to a rigid motion
    const auto u = ManufacturedField<2>::standard();
    Field exact = nodal_field<2>(mesh, [u](const Point<2> &x) { return u.value(x); });
    orthogonalize_rigid(mesh, basis, exact);
    CHECK(l2_norm<2>(mesh.grid, Field(sol.u - exact), 2) <= 5e-3 * l2_norm<2>(mesh.grid, exact, 2));
    for (size_t p = 0; p < basis.fields.size(); ++p)
        for (size_t q = 0; q < basis.fields.size(); ++q)
            CHECK(l2_inner<2>(mesh.grid, basis.fields[p], basis.fields[q], 2) ==
                  doctest::Approx(p == q ? 1.0 : 0.0).epsilon(1e-10).scale(1.0));
}

TEST_CASE("incompatible Neumann data is rejected") {
    const auto a = isotropic_tensor<2>(1.0, 1.0);
    MixedProblemSpec<2> s;
    s.mesh = build_mesh<2>(DomainSpec<2>(Point<2>(0, 0), Point<2>(1, 2)), 0.25,
                           BoundaryPartition::neumann());
    s.mode = ProblemMode::neumann;
    s.coeff = [a](const Point<2> &) { return a; };
    s.body_force = [](const Point<2> &) { return Vec<2>(0.75, 0.0); };
    const auto c = compatibility_check(s);
    CHECK_FALSE(c.pass);
    // translation residual = c |Omega|
    CHECK(c.residuals[0] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(std::abs(c.residuals[1]) <= 1e-14);
    CHECK_THROWS_AS(solve_neumann(s, 1e-10), IncompatibleData);
}

TEST_CASE("mixed problems without a Dirichlet edge are ill-posed") {
    const auto a = isotropic_tensor<2>(1.0, 1.0);
    const auto mesh = build_mesh<2>(kUnit, 0.25, BoundaryPartition::from_names({}));
    CHECK_THROWS_AS(solve_mixed(manufactured(mesh, a, ProblemMode::mixed), 1e-10), IllPosed);
    CHECK_THROWS_AS(korn_probe(mesh, 4, 0), IllPosed);
    const auto partial = build_mesh<2>(kUnit, 0.25, BoundaryPartition::from_names({"left"}));
    CHECK_THROWS_AS(solve_mixed(manufactured(partial, a, ProblemMode::dirichlet), 1e-10), IllPosed);
}

TEST_CASE("Korn ratio stays bounded under refinement") {
    const auto part = BoundaryPartition::from_names({"left", "bottom"});
    const double k8 = korn_probe(build_mesh<2>(kUnit, 1.0 / 8, part), 20, 3);
    const double k32 = korn_probe(build_mesh<2>(kUnit, 1.0 / 32, part), 20, 3);
    CHECK(k8 > 0.0);
    CHECK(std::max(k8, k32) / std::min(k8, k32) <= 2.0);
    CHECK(korn_probe(build_mesh<2>(kUnit, 1.0 / 8, part), 20, 3) == k8);
}

}
