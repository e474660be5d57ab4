#include "elhom/fem.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace elhom {

template <int D>
Field nodal_field(const Mesh<D> &mesh, const std::function<Vec<D>(const Point<D> &)> &f) {
    Field u = Field::Zero(mesh.node_count() * D);
    if (!f) return u;
    for (Index i = 0; i < mesh.node_count(); ++i) u.segment<D>(i * D) = f(mesh.node(i));
    return u;
}

template <int D>
Field assemble_traction_load(const Mesh<D> &mesh,
                             const typename MixedProblemSpec<D>::TractionFn &g, bool all_faces) {
    Field b = Field::Zero(mesh.node_count() * D);
    if (!g) return b;
    const Grid<D> &grid = mesh.grid;
    const double g0 = 0.5 - 0.5 / std::sqrt(3.0);
    const double g1 = 0.5 + 0.5 / std::sqrt(3.0);
    constexpr int kFaceQuad = ipow(2, D - 1);
    for (int axis = 0; axis < D; ++axis)
        for (int side = 0; side < 2; ++side) {
            const Face face{axis, side};
            if (!all_faces && (mesh.partition.is_dirichlet(face))) continue;
            double weight = 1.0;
            for (int t = 0; t < D; ++t)
                if (t != axis) weight *= grid.h[t];
            weight /= kFaceQuad;
            for (Index e = 0; e < grid.element_count(); ++e) {
                const MultiIndex<D> m = grid.element_multi(e);
                if (m[axis] != (side ? grid.cells[axis] - 1 : 0)) continue;
                const auto nodes = grid.element_nodes(e);
                const Point<D> lower = grid.element_lower(e);
                for (int fq = 0; fq < kFaceQuad; ++fq) {
                    Point<D> s;
                    int bitpos = 0;
                    for (int t = 0; t < D; ++t) {
                        if (t == axis) {
                            s[t] = side;
                        } else {
                            s[t] = ((fq >> bitpos) & 1) ? g1 : g0;
                            ++bitpos;
                        }
                    }
                    Point<D> x;
                    for (int t = 0; t < D; ++t) x[t] = lower[t] + s[t] * grid.h[t];
                    x[axis] = side ? mesh.domain.upper[axis] : mesh.domain.lower[axis];
                    const Vec<D> gv = g(x, face);
                    const auto vals = q1_values<D>(s);
                    for (int a = 0; a < Grid<D>::kElementNodes; ++a)
                        for (int al = 0; al < D; ++al)
                            b[nodes[a] * D + al] += weight * vals[a] * gv[al];
                }
            }
        }
    return b;
}

template <int D>
AssembledSystem<D> assemble(const MixedProblemSpec<D> &spec) {
    if (!spec.coeff) throw ConfigError("problem spec has no coefficient");
    const Mesh<D> &mesh = spec.mesh;
    AssembledSystem<D> sys;
    sys.stiffness = assemble_operator<D>(
        mesh.grid, D, [&](Index, int, const Eigen::VectorXd &x, Eigen::Ref<Eigen::MatrixXd> c) {
            c = tensor_matrix<D>(spec.coeff(Point<D>(x)));
        });
    sys.load = Field::Zero(mesh.node_count() * D);
    if (spec.body_force)
        sys.load += assemble_source_load<D>(
            mesh.grid, D, [&](Index, int, const Eigen::VectorXd &x, Eigen::Ref<Eigen::VectorXd> f) {
                f = spec.body_force(Point<D>(x));
            });
    sys.load += assemble_traction_load<D>(mesh, spec.traction,
                                          spec.mode == ProblemMode::neumann);
    sys.constrained.assign(mesh.node_count() * D, 0);
    sys.dirichlet_values = Field::Zero(mesh.node_count() * D);
    if (spec.mode != ProblemMode::neumann)
        for (Index i = 0; i < mesh.node_count(); ++i)
            if (mesh.tags[i] == NodeTag::dirichlet) {
                const Vec<D> f = spec.dirichlet_data ? spec.dirichlet_data(mesh.node(i)) : Vec<D>::Zero();
                for (int al = 0; al < D; ++al) {
                    sys.constrained[i * D + al] = 1;
                    sys.dirichlet_values[i * D + al] = f[al];
                }
            }
    return sys;
}

template <int D>
DiscreteSolution<D> solve_mixed(const MixedProblemSpec<D> &spec, double tol) {
    if (spec.mode == ProblemMode::neumann)
        throw ConfigError("solve_mixed called on a pure Neumann problem");
    if (spec.mesh.partition.dirichlet.empty())
        throw IllPosed("mixed problem needs at least one Dirichlet edge");
    if (spec.mode == ProblemMode::dirichlet) {
        for (int t = 0; t < D; ++t)
            for (int s = 0; s < 2; ++s)
                if (!spec.mesh.partition.is_dirichlet({t, s}))
                    throw IllPosed("dirichlet mode needs every edge in D");
    }
    AssembledSystem<D> sys = assemble(spec);
    Field rhs = sys.load;
    // eliminate with the true values, then solve for the homogeneous part
    sys.stiffness.eliminate(sys.constrained, sys.dirichlet_values, rhs);
    for (Index p = 0; p < rhs.size(); ++p)
        if (sys.constrained[p]) rhs[p] = 0.0;
    const auto prec = make_preconditioner<D>(spec.preconditioner, sys.stiffness, sys.constrained);
    DiscreteSolution<D> sol;
    Field x = Field::Zero(rhs.size());
    sol.stats = pcg<D>(sys.stiffness, rhs, x, tol, *prec);
    Field res = rhs - sys.stiffness * x;
    for (Index p = 0; p < rhs.size(); ++p)
        if (sys.constrained[p]) res[p] = 0.0;
    const double rn = rhs.norm();
    sol.weak_residual = rn > 0.0 ? res.norm() / rn : res.norm();
    for (Index p = 0; p < x.size(); ++p)
        if (sys.constrained[p]) x[p] = sys.dirichlet_values[p];
    sol.u = std::move(x);
    return sol;
}

template <int D>
RigidBodyBasis<D> rigid_body_basis(const Mesh<D> &mesh) {
    const Point<D> center = 0.5 * (mesh.domain.lower + mesh.domain.upper);
    std::vector<Field> raw;
    for (int a = 0; a < D; ++a) {
        Vec<D> e = Vec<D>::Zero();
        e[a] = 1.0;
        raw.push_back(nodal_field<D>(mesh, [e](const Point<D> &) { return e; }));
    }
    for (int a = 0; a < D; ++a)
        for (int b = a + 1; b < D; ++b)
            raw.push_back(nodal_field<D>(mesh, [&, a, b](const Point<D> &x) {
                Vec<D> v = Vec<D>::Zero();
                v[a] = -(x[b] - center[b]);
                v[b] = x[a] - center[a];
                return v;
            }));
    RigidBodyBasis<D> basis;
    for (auto &v : raw) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto &u : basis.fields) v -= l2_inner<D>(mesh.grid, u, v, D) * u;
        v /= l2_norm<D>(mesh.grid, v, D);
        basis.fields.push_back(v);
    }
    return basis;
}

template <int D>
void orthogonalize_rigid(const Mesh<D> &mesh, const RigidBodyBasis<D> &basis, Field &u) {
    for (int pass = 0; pass < 2; ++pass)
        for (const auto &phi : basis.fields) u -= l2_inner<D>(mesh.grid, phi, u, D) * phi;
}

template <int D>
double rigid_orthogonality(const Mesh<D> &mesh, const RigidBodyBasis<D> &basis, const Field &u) {
    double m = 0.0;
    for (const auto &phi : basis.fields) m = std::max(m, std::abs(l2_inner<D>(mesh.grid, phi, u, D)));
    return m;
}

namespace {

/// Nodal interpolants of translations and rotations, unnormalised; their
/// dot product with a load vector is the exact quadrature integral.
template <int D>
std::vector<Field> raw_rigid_modes(const Mesh<D> &mesh) {
    const Point<D> center = 0.5 * (mesh.domain.lower + mesh.domain.upper);
    std::vector<Field> raw;
    for (int a = 0; a < D; ++a) {
        Vec<D> e = Vec<D>::Zero();
        e[a] = 1.0;
        raw.push_back(nodal_field<D>(mesh, [e](const Point<D> &) { return e; }));
    }
    for (int a = 0; a < D; ++a)
        for (int b = a + 1; b < D; ++b)
            raw.push_back(nodal_field<D>(mesh, [&, a, b](const Point<D> &x) {
                Vec<D> v = Vec<D>::Zero();
                v[a] = -(x[b] - center[b]);
                v[b] = x[a] - center[a];
                return v;
            }));
    return raw;
}

} // namespace

template <int D>
CompatibilityResult compatibility_check(const MixedProblemSpec<D> &spec, double tol) {
    const Mesh<D> &mesh = spec.mesh;
    Field load = Field::Zero(mesh.node_count() * D);
    if (spec.body_force)
        load += assemble_source_load<D>(
            mesh.grid, D, [&](Index, int, const Eigen::VectorXd &x, Eigen::Ref<Eigen::VectorXd> f) {
                f = spec.body_force(Point<D>(x));
            });
    load += assemble_traction_load<D>(mesh, spec.traction, true);
    CompatibilityResult r;
    r.tol = tol;
    r.pass = true;
    for (const auto &mode : raw_rigid_modes(mesh)) {
        const double v = mode.dot(load);
        const double scale = mode.cwiseAbs().dot(load.cwiseAbs());
        r.residuals.push_back(v);
        r.relative.push_back(scale > 0.0 ? std::abs(v) / scale : 0.0);
        if (r.relative.back() > tol) r.pass = false;
    }
    return r;
}

template <int D>
DiscreteSolution<D> solve_neumann(const MixedProblemSpec<D> &spec, double tol, double tol_compat) {
    if (spec.mode != ProblemMode::neumann) throw ConfigError("solve_neumann needs neumann mode");
    const CompatibilityResult compat = compatibility_check(spec, tol_compat);
    if (!compat.pass) {
        std::string msg = "compatibility residuals";
        for (double v : compat.residuals) msg += " " + std::to_string(v);
        throw IncompatibleData(msg + " exceed " + std::to_string(tol_compat));
    }
    AssembledSystem<D> sys = assemble(spec);
    const std::vector<Field> null = orthonormalize(raw_rigid_modes(spec.mesh));
    const auto prec = make_preconditioner<D>(spec.preconditioner, sys.stiffness, {});
    DiscreteSolution<D> sol;
    Field rhs = sys.load;
    project_out(null, rhs);
    Field x = Field::Zero(rhs.size());
    sol.stats = pcg<D>(sys.stiffness, rhs, x, tol, *prec, null);
    Field res = rhs - sys.stiffness * x;
    project_out(null, res);
    const double rn = rhs.norm();
    sol.weak_residual = rn > 0.0 ? res.norm() / rn : res.norm();
    const RigidBodyBasis<D> basis = rigid_body_basis(spec.mesh);
    orthogonalize_rigid(spec.mesh, basis, x);
    sol.orthogonality_residual = rigid_orthogonality(spec.mesh, basis, x);
    sol.u = std::move(x);
    return sol;
}

template <int D>
double korn_ratio(const Mesh<D> &mesh, const Field &u) {
    const Q1Element<D> ref(mesh.grid.h);
    double l2 = 0.0, grad = 0.0, sym = 0.0;
    for (Index e = 0; e < mesh.element_count(); ++e)
        for (int q = 0; q < Grid<D>::kQuadPoints; ++q) {
            const Eigen::MatrixXd g = qp_gradient<D>(mesh.grid, ref, u, D, e, q);
            l2 += ref.weight * qp_value<D>(mesh.grid, ref, u, D, e, q).squaredNorm();
            grad += ref.weight * g.squaredNorm();
            sym += ref.weight * (g + g.transpose()).squaredNorm();
        }
    return std::sqrt(l2 + grad) / std::sqrt(sym);
}

template <int D>
double korn_probe(const Mesh<D> &mesh, int trial_count, std::uint64_t seed) {
    if (mesh.partition.dirichlet.empty()) throw IllPosed("korn probe needs a Dirichlet edge");
    if (trial_count < 1) throw ConfigError("korn probe needs trial_count >= 1");
    constexpr int kControl = 5;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Vec<D> ext = mesh.domain.extent();
    double worst = 0.0;
    for (int trial = 0; trial < trial_count; ++trial) {
        // random bilinear field on a coarse control grid
        const Grid<D> control =
            Grid<D>::box(mesh.domain.lower, [] {
                MultiIndex<D> c;
                c.fill(kControl - 1);
                return c;
            }(), Vec<D>(ext / static_cast<double>(kControl - 1)));
        Field coarse(control.node_count() * D);
        for (Index k = 0; k < coarse.size(); ++k) coarse[k] = gauss(rng);
        Field u(mesh.node_count() * D);
        for (Index i = 0; i < mesh.node_count(); ++i) {
            const Point<D> x = mesh.node(i);
            double cut = 1.0;
            for (const Face &f : mesh.partition.dirichlet) {
                const double d = f.side ? mesh.domain.upper[f.axis] - x[f.axis]
                                        : x[f.axis] - mesh.domain.lower[f.axis];
                cut *= d / ext[f.axis];
            }
            u.segment<D>(i * D) = cut * interpolate<D>(control, coarse, D, x);
        }
        worst = std::max(worst, korn_ratio(mesh, u));
    }
    return worst;
}

template Field nodal_field<2>(const Mesh<2> &, const std::function<Vec<2>(const Point<2> &)> &);
template Field assemble_traction_load<2>(const Mesh<2> &,
                                         const MixedProblemSpec<2>::TractionFn &, bool);
template AssembledSystem<2> assemble<2>(const MixedProblemSpec<2> &);
template DiscreteSolution<2> solve_mixed<2>(const MixedProblemSpec<2> &, double);
template DiscreteSolution<2> solve_neumann<2>(const MixedProblemSpec<2> &, double, double);
template CompatibilityResult compatibility_check<2>(const MixedProblemSpec<2> &, double);
template RigidBodyBasis<2> rigid_body_basis<2>(const Mesh<2> &);
template void orthogonalize_rigid<2>(const Mesh<2> &, const RigidBodyBasis<2> &, Field &);
template double rigid_orthogonality<2>(const Mesh<2> &, const RigidBodyBasis<2> &, const Field &);
template double korn_probe<2>(const Mesh<2> &, int, std::uint64_t);
template double korn_ratio<2>(const Mesh<2> &, const Field &);

} // namespace elhom
