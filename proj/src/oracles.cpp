#include "elhom/oracles.hpp"

#include <cmath>

namespace elhom {

template <int D>
LaminateProfile<D> LaminateProfile<D>::from_field(const CoefficientField<D> &field) {
    if (field.kind() == CoefficientKind::constant)
        return {0, {field.evaluate(Point<D>::Zero())}, {-0.5}};
    if (field.kind() != CoefficientKind::laminate)
        throw ConfigError("coefficient is not a laminate");
    return {field.direction(), field.phases(), field.breakpoints()};
}

template <int D>
std::vector<double> LaminateProfile<D>::volume_fractions() const {
    const std::size_t p = phases.size();
    if (p == 0 || breakpoints.size() != p) throw ConfigError("laminate needs one breakpoint per phase");
    std::vector<double> f(p);
    for (std::size_t k = 0; k < p; ++k) {
        const double next = k + 1 < p ? breakpoints[k + 1] : breakpoints[0] + 1.0;
        f[k] = next - breakpoints[k];
        if (!(f[k] > 0.0)) throw ConfigError("laminate breakpoints must increase");
    }
    return f;
}

template <int D>
LaminateOracle<D> laminate_cell_oracle(const LaminateProfile<D> &profile) {
    const int d = profile.direction;
    const std::vector<double> frac = profile.volume_fractions();
    const std::size_t np = profile.phases.size();
    std::vector<Mat<D>> minv(np);
    Mat<D> mean_minv = Mat<D>::Zero();
    for (std::size_t p = 0; p < np; ++p) {
        Mat<D> m;
        for (int a = 0; a < D; ++a)
            for (int g = 0; g < D; ++g) m(a, g) = profile.phases[p](d, d, a, g);
        const Eigen::FullPivLU<Mat<D>> lu(m);
        if (!lu.isInvertible() || std::abs(m.determinant()) <= 1e-14 * std::pow(m.norm(), D))
            throw SingularBlock("phase " + std::to_string(p) + " has a singular normal block");
        minv[p] = lu.inverse();
        mean_minv += frac[p] * minv[p];
    }
    const Mat<D> harmonic = mean_minv.inverse();
    LaminateOracle<D> out;
    out.chi_slope.resize(np);
    for (int j = 0; j < D; ++j) {
        std::vector<Mat<D>> n(np);
        Mat<D> mean_mn = Mat<D>::Zero();
        for (std::size_t p = 0; p < np; ++p) {
            for (int a = 0; a < D; ++a)
                for (int b = 0; b < D; ++b) n[p](a, b) = profile.phases[p](d, j, a, b);
            mean_mn += frac[p] * minv[p] * n[p];
        }
        const Mat<D> c = harmonic * mean_mn;
        for (std::size_t p = 0; p < np; ++p) out.chi_slope[p][j] = minv[p] * (c - n[p]);
    }
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
            for (int a = 0; a < D; ++a)
                for (int b = 0; b < D; ++b) {
                    double s = 0.0;
                    for (std::size_t p = 0; p < np; ++p) {
                        double v = profile.phases[p](i, j, a, b);
                        for (int g = 0; g < D; ++g)
                            v += profile.phases[p](i, d, a, g) * out.chi_slope[p][j](g, b);
                        s += frac[p] * v;
                    }
                    out.a_hat(i, j, a, b) = s;
                }
    return out;
}

double harmonic_mean(const std::vector<double> &values, const std::vector<double> &fractions) {
    if (values.size() != fractions.size() || values.empty())
        throw ConfigError("harmonic mean needs matching values and fractions");
    double s = 0.0, w = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!(values[k] > 0.0)) throw SingularBlock("harmonic mean of a nonpositive value");
        s += fractions[k] / values[k];
        w += fractions[k];
    }
    return w / s;
}

template <int D>
Field restrict_nodes(const Mesh<D> &coarse_mesh, const Mesh<D> &fine_mesh, const Field &fine,
                     int nc) {
    MultiIndex<D> ratio;
    for (int t = 0; t < D; ++t) {
        if (fine_mesh.grid.cells[t] % coarse_mesh.grid.cells[t] != 0)
            throw ConfigError("fine mesh does not nest the coarse mesh");
        ratio[t] = fine_mesh.grid.cells[t] / coarse_mesh.grid.cells[t];
    }
    Field out(coarse_mesh.node_count() * nc);
    for (Index i = 0; i < coarse_mesh.node_count(); ++i) {
        MultiIndex<D> m = coarse_mesh.grid.node_multi(i);
        for (int t = 0; t < D; ++t) m[t] *= ratio[t];
        out.segment(i * nc, nc) = fine.segment(fine_mesh.grid.node_index(m) * nc, nc);
    }
    return out;
}

template <int D>
double richardson_estimate(const Mesh<D> &coarse_mesh, const Field &coarse, const Mesh<D> &fine_mesh,
                           const Field &fine, int refinement) {
    if (refinement < 2) return 0.0;
    const Field diff = restrict_nodes(coarse_mesh, fine_mesh, fine, D) - coarse;
    return l2_norm<D>(coarse_mesh.grid, diff, D) / (refinement * refinement - 1.0);
}

template <int D>
FineReference<D> fine_reference(const MixedProblemSpec<D> &spec, int refinement, double tol,
                                Index max_dofs) {
    if (refinement != 1 && refinement != 2 && refinement != 4)
        throw ConfigError("refinement must be 1, 2 or 4");
    auto solve = [&](const MixedProblemSpec<D> &s) {
        return s.mode == ProblemMode::neumann ? solve_neumann(s, tol) : solve_mixed(s, tol);
    };
    FineReference<D> ref;
    ref.refinement = refinement;
    Index dofs = D;
    for (int t = 0; t < D; ++t) dofs *= spec.mesh.grid.cells[t] * refinement + 1;
    if (dofs > max_dofs)
        throw ResolutionBudgetExceeded(std::to_string(dofs) + " DOFs exceed the budget of " +
                                       std::to_string(max_dofs));
    ref.coarse = solve(spec);
    if (refinement == 1) {
        ref.fine = ref.coarse;
        ref.fine_mesh = spec.mesh;
        return ref;
    }
    MixedProblemSpec<D> fine = spec;
    fine.mesh = build_mesh<D>(spec.mesh.domain, spec.mesh.h / refinement, spec.mesh.partition);
    ref.fine = solve(fine);
    ref.fine_mesh = fine.mesh;
    ref.estimate = richardson_estimate(spec.mesh, ref.coarse.u, fine.mesh, ref.fine.u, refinement);
    ref.informative = true;
    return ref;
}

template struct LaminateProfile<2>;
template LaminateOracle<2> laminate_cell_oracle<2>(const LaminateProfile<2> &);
template Field restrict_nodes<2>(const Mesh<2> &, const Mesh<2> &, const Field &, int);
template double richardson_estimate<2>(const Mesh<2> &, const Field &, const Mesh<2> &,
                                       const Field &, int);
template FineReference<2> fine_reference<2>(const MixedProblemSpec<2> &, int, double, Index);

} // namespace elhom
