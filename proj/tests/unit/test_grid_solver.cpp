#include <doctest.h>

#include <random>

#include "elhom/grid.hpp"
#include "elhom/solver.hpp"

using namespace elhom;

namespace {

Grid<2> unit_box(Index n) {
    return Grid<2>::box(Point<2>::Zero(), {n, n}, Vec<2>::Constant(1.0 / n));
}

QpMatrixFn constant_coef(const Tensor4<2> &a) {
    const Eigen::MatrixXd c = tensor_matrix<2>(a);
    return [c](Index, int, const Eigen::VectorXd &, Eigen::Ref<Eigen::MatrixXd> out) { out = c; };
}

Field random_field(Index size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Field f(size);
    for (Index i = 0; i < size; ++i) f[i] = g(rng);
    return f;
}

} // namespace

TEST_SUITE("grid_solver") {

TEST_CASE("node and element bookkeeping") {
    const auto g = unit_box(4);
    CHECK(g.node_count() == 25);
    CHECK(g.element_count() == 16);
    CHECK(g.node_index({2, 3}) == 17);
    CHECK(g.node_multi(17) == MultiIndex<2>{2, 3});
    CHECK(g.node_coord(17).isApprox(Point<2>(0.5, 0.75)));
    const auto nodes = g.element_nodes(g.element_count() - 1);
    CHECK(nodes[3] == g.node_count() - 1);
    const auto t = Grid<2>::torus(8);
    CHECK(t.node_count() == 64);
    CHECK(t.node_index({8, -1}) == t.node_index({0, 7}));
    CHECK(t.node_coord(0).isApprox(Point<2>(-0.5, -0.5)));
}

TEST_CASE("shape functions form a partition of unity") {
    const Q1Element<2> ref(Vec<2>(0.25, 0.5));
    for (int q = 0; q < 4; ++q) {
        CHECK(ref.value.col(q).sum() == doctest::Approx(1.0));
        CHECK(ref.grad[q].rowwise().sum().norm() < 1e-14);
    }
    CHECK(ref.weight * 4 == doctest::Approx(0.125));
}

TEST_CASE("assembled elasticity operator is symmetric with rigid kernel") {
    const auto g = unit_box(6);
    const auto op = assemble_operator<2>(g, 2, constant_coef(isotropic_tensor<2>(1.0, 1.0)));
    CHECK(op.symmetry_defect() < 1e-14);
    Field trans(g.node_count() * 2), rot(g.node_count() * 2);
    for (Index i = 0; i < g.node_count(); ++i) {
        const Point<2> x = g.node_coord(i);
        trans.segment<2>(2 * i) = Vec<2>(1.0, 0.0);
        rot.segment<2>(2 * i) = Vec<2>(-x[1], x[0]);
    }
    CHECK((op * trans).norm() < 1e-12);
    CHECK((op * rot).norm() < 1e-12);
    // energy of a non-rigid field is positive
    const Field u = random_field(op.size(), 1);
    CHECK(u.dot(op * u) > 0.0);
}

TEST_CASE("stencil application matches the dense matrix") {
    const auto g = unit_box(3);
    const auto op = assemble_operator<2>(g, 2, constant_coef(isotropic_tensor<2>(2.0, 0.5)));
    const Field u = random_field(op.size(), 2);
    CHECK(((op * u) - op.dense() * u).norm() < 1e-12 * u.norm() * op.max_abs());
}

TEST_CASE("preconditioned CG agrees with a dense solve") {
    const auto g = unit_box(8);
    auto op = assemble_operator<2>(g, 2, constant_coef(isotropic_tensor<2>(1.0, 1.0)));
    std::vector<char> fixed(op.size(), 0);
    Field values = Field::Zero(op.size());
    for (Index i = 0; i < g.node_count(); ++i)
        if (g.node_multi(i)[0] == 0) fixed[2 * i] = fixed[2 * i + 1] = 1;
    Field rhs = random_field(op.size(), 3);
    op.eliminate(fixed, values, rhs);
    const Eigen::MatrixXd dense = op.dense();
    const Field ref = dense.ldlt().solve(rhs);
    for (const char *name : {"jacobi", "multigrid"}) {
        const auto prec = make_preconditioner<2>(name, op, fixed);
        Field x = Field::Zero(op.size());
        const auto st = pcg<2>(op, rhs, x, 1e-12, *prec);
        CHECK(st.residual <= 1e-12);
        CHECK((x - ref).norm() <= 1e-9 * ref.norm());
    }
}

TEST_CASE("multigrid needs far fewer iterations than Jacobi") {
    const auto g = unit_box(64);
    auto op = assemble_operator<2>(g, 2, constant_coef(isotropic_tensor<2>(1.0, 1.0)));
    std::vector<char> fixed(op.size(), 0);
    for (Index i = 0; i < g.node_count(); ++i)
        if (g.on_boundary(i)) fixed[2 * i] = fixed[2 * i + 1] = 1;
    Field rhs = random_field(op.size(), 4);
    op.eliminate(fixed, Field::Zero(op.size()), rhs);
    Field x1 = Field::Zero(op.size()), x2 = x1;
    const auto mg = make_preconditioner<2>("multigrid", op, fixed);
    const auto jac = make_preconditioner<2>("jacobi", op, fixed);
    const int it_mg = pcg<2>(op, rhs, x1, 1e-10, *mg).iterations;
    const int it_j = pcg<2>(op, rhs, x2, 1e-10, *jac).iterations;
    CHECK(it_mg < 20);
    CHECK(it_mg * 5 < it_j);
}

TEST_CASE("singular periodic systems are solved modulo the null space") {
    const auto g = Grid<2>::torus(16);
    const auto op = assemble_operator<2>(g, 2, constant_coef(isotropic_tensor<2>(1.0, 1.0)));
    std::vector<Field> null(2, Field::Zero(op.size()));
    for (Index i = 0; i < g.node_count(); ++i) {
        null[0][2 * i] = 1.0;
        null[1][2 * i + 1] = 1.0;
    }
    null = orthonormalize(null);
    Field rhs = random_field(op.size(), 5);
    project_out(null, rhs);
    const auto prec = make_preconditioner<2>("multigrid", op, {});
    Field x = Field::Zero(op.size());
    pcg<2>(op, rhs, x, 1e-11, *prec, null);
    CHECK((op * x - rhs).norm() <= 1e-10 * rhs.norm());
    CHECK(std::abs(null[0].dot(x)) < 1e-10);
}

TEST_CASE("right-hand sides below the floor give the zero solution") {
    const auto g = unit_box(4);
    const auto op = assemble_operator<2>(g, 2, constant_coef(isotropic_tensor<2>(1.0, 1.0)));
    const auto prec = make_preconditioner<2>("jacobi", op, {});
    Field x = Field::Ones(op.size());
    const Field rhs = Field::Constant(op.size(), 1e-20);
    const auto st = pcg<2>(op, rhs, x, 1e-10, *prec, {}, 1e-16);
    CHECK(st.iterations == 0);
    CHECK(x.norm() == 0.0);
}

TEST_CASE("divergence is reported") {
    const auto g = unit_box(32);
    auto op = assemble_operator<2>(g, 2, constant_coef(isotropic_tensor<2>(1.0, 1.0)));
    std::vector<char> fixed(op.size(), 0);
    fixed[0] = fixed[1] = fixed[2] = 1;
    Field rhs = random_field(op.size(), 6);
    op.eliminate(fixed, Field::Zero(op.size()), rhs);
    const auto prec = make_preconditioner<2>("jacobi", op, fixed);
    Field x = Field::Zero(op.size());
    CHECK_THROWS_AS(pcg<2>(op, rhs, x, 1e-14, *prec, {}, 0.0, 3), SolverDiverged);
}

TEST_CASE("quadrature norms are exact for bilinear fields") {
    const auto g = unit_box(5);
    Field u(g.node_count());
    for (Index i = 0; i < g.node_count(); ++i) {
        const Point<2> x = g.node_coord(i);
        u[i] = x[0] * x[1];
    }
    // int (xy)^2 = 1/9, int |grad(xy)|^2 = 2/3
    CHECK(l2_norm<2>(g, u, 1) == doctest::Approx(std::sqrt(1.0 / 9.0)).epsilon(1e-12));
    CHECK(h1_seminorm<2>(g, u, 1) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    CHECK(interpolate<2>(g, u, 1, Point<2>(0.3, 0.7))[0] == doctest::Approx(0.21));
    CHECK(field_mean<2>(g, u, 1)[0] == doctest::Approx(0.25));
}

TEST_CASE("coarsening halves the cells") {
    const auto g = unit_box(8);
    CHECK(g.can_coarsen(2));
    const auto c = g.coarsened();
    CHECK(c.cells[0] == 4);
    CHECK(c.h[0] == doctest::Approx(0.25));
    CHECK_FALSE(unit_box(3).can_coarsen(2));
}

}
