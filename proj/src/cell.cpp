#include "elhom/cell.hpp"

#include <algorithm>
#include <cmath>

namespace elhom {

template <int D>
CellGrid<D>::CellGrid(Index n_) : n(n_) {
    if (n < 16 || (n & (n - 1)) != 0)
        throw ConfigError("cell grid needs n a power of two >= 16, got " + std::to_string(n));
}

namespace {

template <int D>
QpMatrixFn coefficient_matrix_fn(const CoefficientField<D> &field) {
    return [&field](Index, int, const Eigen::VectorXd &x, Eigen::Ref<Eigen::MatrixXd> c) {
        c = tensor_matrix<D>(field.evaluate(Point<D>(x)));
    };
}

/// Right-hand sides below this fraction of their unassembled scale are
/// cancellation noise and count as zero.
constexpr double kNoiseFloor = 1e-13;

/// -int A e_j^beta : grad v, the corrector right-hand side.
template <int D>
Field corrector_rhs(const Grid<D> &g, const CoefficientField<D> &field, int j, int beta,
                    double *scale = nullptr) {
    return -assemble_flux_load<D>(
        g, D,
        [&](Index, int, const Eigen::VectorXd &x, Eigen::Ref<Eigen::MatrixXd> s) {
            const Tensor4<D> a = field.evaluate(Point<D>(x));
            for (int al = 0; al < D; ++al)
                for (int i = 0; i < D; ++i) s(al, i) = a(i, j, al, beta);
        },
        scale);
}

double relative(double r, double rhs, double scale) {
    const double denom = rhs > kNoiseFloor * scale ? rhs : scale;
    return denom > 0.0 ? r / denom : r;
}

template <int D>
std::vector<Field> constant_modes(const Grid<D> &g, int nc) {
    std::vector<Field> modes;
    for (int c = 0; c < nc; ++c) {
        Field v = Field::Zero(g.node_count() * nc);
        for (Index p = 0; p < g.node_count(); ++p) v[p * nc + c] = 1.0;
        modes.push_back(v);
    }
    return orthonormalize(modes);
}

template <int D>
Mat<D> unit_strain(int j, int beta) {
    Mat<D> e = Mat<D>::Zero();
    e(beta, j) = 1.0;
    return e;
}

} // namespace

template <int D>
Vec<D> CorrectorSet<D>::value(int j, int beta, const Point<D> &y) const {
    return interpolate<D>(grid, chi[j][beta], D, y);
}

template <int D>
double CorrectorSet<D>::max_mean() const {
    double m = 0.0;
    for (int j = 0; j < D; ++j)
        for (int be = 0; be < D; ++be)
            m = std::max(m, field_mean<D>(grid, chi[j][be], D).cwiseAbs().maxCoeff());
    return m;
}

template <int D>
double CorrectorSet<D>::max_abs() const {
    double m = 0.0;
    for (int j = 0; j < D; ++j)
        for (int be = 0; be < D; ++be)
            if (chi[j][be].size() > 0) m = std::max(m, chi[j][be].cwiseAbs().maxCoeff());
    return m;
}

template <int D>
double FluxDiscrepancy<D>::max_mean() const {
    Tensor4<D> sum;
    for (const auto &t : b) sum += t;
    sum *= 1.0 / static_cast<double>(b.size());
    return sum.max_abs();
}

template <int D>
double FluxDiscrepancy<D>::max_abs() const {
    double m = 0.0;
    for (const auto &t : b) m = std::max(m, t.max_abs());
    return m;
}

template <int D>
Field FluxCorrectorSet<D>::phi(int k, int i, int j, int alpha, int beta) const {
    static_assert(D == 2, "flux correctors are implemented in two dimensions");
    const Field &p = psi[j][alpha][beta];
    if (k == i) return Field::Zero(p.size());
    return k == 0 ? p : Field(-p);
}

bool IdentityReport::all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto &e) { return e.pass; });
}

const IdentityEntry &IdentityReport::get(const std::string &name) const {
    for (const auto &e : entries)
        if (e.name == name) return e;
    throw ConfigError("no identity named " + name);
}

nlohmann::json IdentityReport::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto &e : entries)
        j[e.name] = {{"value", e.value}, {"tol", e.tol}, {"pass", e.pass}};
    j["phi_l2_misfit"] = {{"value", phi_l2_misfit}, {"gated", false}};
    j["phi_antisymmetry"] = {{"value", phi_antisymmetry}, {"gated", false}};
    return j;
}

template <int D>
CorrectorSet<D> solve_correctors(const CoefficientField<D> &field, const CellGrid<D> &cell,
                                 double tol, const std::string &preconditioner) {
    if (!(tol > 0.0)) throw ConfigError("corrector tolerance must be positive");
    CorrectorSet<D> out;
    out.grid = cell.grid();
    const Grid<D> &g = out.grid;
    const StencilOperator<D> op = assemble_operator<D>(g, D, coefficient_matrix_fn(field));
    const auto prec = make_preconditioner<D>(preconditioner, op, {});
    const auto modes = constant_modes(g, D);
    const Q1Element<D> ref(g.h);
    for (int j = 0; j < D; ++j)
        for (int be = 0; be < D; ++be) {
            double scale = 0.0;
            const Field rhs = corrector_rhs(g, field, j, be, &scale);
            Field x = Field::Zero(op.size());
            out.stats[j][be] = pcg<D>(op, rhs, x, tol, *prec, modes, kNoiseFloor * scale);
            out.chi[j][be] = x;
            auto &gr = out.grad[j][be];
            gr.resize(g.element_count() * Grid<D>::kQuadPoints);
            for (Index e = 0; e < g.element_count(); ++e)
                for (int q = 0; q < Grid<D>::kQuadPoints; ++q)
                    gr[e * Grid<D>::kQuadPoints + q] = qp_gradient<D>(g, ref, x, D, e, q);
        }
    return out;
}

namespace {

/// Bit mask of the symmetry identities every coefficient value satisfies.
template <int D>
unsigned field_identities(const CoefficientField<D> &field, const Grid<D> &g) {
    unsigned mask = 0b111;
    auto drop = [&](const Tensor4<D> &a) {
        for (const auto &v : validate_symmetries(a, 1e-12 * a.max_abs())) mask &= ~(1u << v.identity);
    };
    if (!field.phases().empty()) {
        for (const auto &a : field.phases()) drop(a);
        return mask;
    }
    const Q1Element<D> ref(g.h);
    for (Index e = 0; e < g.element_count(); ++e)
        drop(field.evaluate(ref.quad_point(g.element_lower(e), 0)));
    return mask;
}

} // namespace

template <int D>
HomogenizedTensor<D> homogenized_tensor(const CoefficientField<D> &field,
                                        const CorrectorSet<D> &chi, double tol_sym) {
    const Grid<D> &g = chi.grid;
    const Q1Element<D> ref(g.h);
    Tensor4<D> sum;
    for (Index e = 0; e < g.element_count(); ++e) {
        const Point<D> lower = g.element_lower(e);
        for (int q = 0; q < Grid<D>::kQuadPoints; ++q) {
            const Tensor4<D> a = field.evaluate(ref.quad_point(lower, q));
            for (int j = 0; j < D; ++j)
                for (int be = 0; be < D; ++be) {
                    const Mat<D> s = a.apply(unit_strain<D>(j, be) + chi.gradient(j, be, e, q));
                    for (int i = 0; i < D; ++i)
                        for (int al = 0; al < D; ++al) sum(i, j, al, be) += s(al, i);
                }
        }
    }
    sum *= 1.0 / static_cast<double>(g.element_count() * Grid<D>::kQuadPoints);
    HomogenizedTensor<D> out;
    out.a_hat = sum;
    const double scale = sum.max_abs();
    // A_hat inherits exactly the identities the coefficient satisfies
    out.symmetry_residual =
        scale > 0.0 ? symmetry_residual(sum, field_identities(field, g)) / scale : 0.0;
    if (out.symmetry_residual > tol_sym)
        throw SymmetryResidualExceeded("relative residual " + std::to_string(out.symmetry_residual) +
                                       " > " + std::to_string(tol_sym));
    out.certified_bounds = exact_bounds(sum);
    return out;
}

template <int D>
FluxDiscrepancy<D> flux_discrepancy(const CoefficientField<D> &field, const CorrectorSet<D> &chi,
                                    const HomogenizedTensor<D> &a_hat) {
    FluxDiscrepancy<D> out;
    out.grid = chi.grid;
    const Grid<D> &g = chi.grid;
    const Q1Element<D> ref(g.h);
    out.b.resize(g.element_count() * Grid<D>::kQuadPoints);
    for (Index e = 0; e < g.element_count(); ++e) {
        const Point<D> lower = g.element_lower(e);
        for (int q = 0; q < Grid<D>::kQuadPoints; ++q) {
            const Tensor4<D> a = field.evaluate(ref.quad_point(lower, q));
            Tensor4<D> bq = a_hat.a_hat;
            for (int j = 0; j < D; ++j)
                for (int be = 0; be < D; ++be) {
                    const Mat<D> s = a.apply(unit_strain<D>(j, be) + chi.gradient(j, be, e, q));
                    for (int i = 0; i < D; ++i)
                        for (int al = 0; al < D; ++al) bq(i, j, al, be) -= s(al, i);
                }
            out.b[e * Grid<D>::kQuadPoints + q] = bq;
        }
    }
    return out;
}

template <int D>
double divergence_residual(const CoefficientField<D> &field, const FluxDiscrepancy<D> &b) {
    const Grid<D> &g = b.grid;
    double worst = 0.0;
    for (int j = 0; j < D; ++j)
        for (int be = 0; be < D; ++be) {
            const Field div = assemble_flux_load<D>(
                g, D, [&](Index e, int q, const Eigen::VectorXd &, Eigen::Ref<Eigen::MatrixXd> s) {
                    const Tensor4<D> &t = b.at(e, q);
                    for (int al = 0; al < D; ++al)
                        for (int i = 0; i < D; ++i) s(al, i) = t(i, j, al, be);
                });
            double scale = 0.0;
            const double ref = corrector_rhs(g, field, j, be, &scale).norm();
            worst = std::max(worst, relative(div.norm(), ref, scale));
        }
    return worst;
}

template <int D>
FluxCorrectorSet<D> solve_flux_correctors(const FluxDiscrepancy<D> &b, const CellGrid<D> &cell,
                                          double tol, double divergence, double tol_div,
                                          const std::string &preconditioner) {
    static_assert(D == 2, "flux correctors are implemented in two dimensions");
    if (divergence > tol_div)
        throw DivergenceResidualTooLarge("divergence residual " + std::to_string(divergence) +
                                         " > " + std::to_string(tol_div));
    FluxCorrectorSet<D> out;
    out.grid = cell.grid();
    const Grid<D> &g = out.grid;
    const StencilOperator<D> lap = assemble_operator<D>(
        g, 1, [](Index, int, const Eigen::VectorXd &, Eigen::Ref<Eigen::MatrixXd> c) {
            c.setIdentity();
        });
    const auto prec = make_preconditioner<D>(preconditioner, lap, {});
    const auto modes = constant_modes(g, 1);
    const Q1Element<D> ref(g.h);
    double mis = 0.0, bn = 0.0;
    for (int j = 0; j < D; ++j)
        for (int al = 0; al < D; ++al)
            for (int be = 0; be < D; ++be) {
                // least squares for (-d_2 psi, d_1 psi) = (b_1j, b_2j):
                // int grad psi . grad v = int (b_2j d_1 v - b_1j d_2 v)
                double scale = 0.0;
                const Field rhs = assemble_flux_load<D>(
                    g, 1,
                    [&](Index e, int q, const Eigen::VectorXd &, Eigen::Ref<Eigen::MatrixXd> s) {
                        const Tensor4<D> &t = b.at(e, q);
                        s(0, 0) = t(1, j, al, be);
                        s(0, 1) = -t(0, j, al, be);
                    },
                    &scale);
                Field x = Field::Zero(lap.size());
                pcg<D>(lap, rhs, x, tol, *prec, modes, kNoiseFloor * scale);
                Field res = rhs - lap * x;
                project_out(modes, res);
                out.max_potential_residual = std::max(out.max_potential_residual,
                                                      relative(res.norm(), rhs.norm(), scale));

                for (Index e = 0; e < g.element_count(); ++e)
                    for (int q = 0; q < Grid<D>::kQuadPoints; ++q) {
                        const Eigen::MatrixXd gp = qp_gradient<D>(g, ref, x, 1, e, q);
                        const Tensor4<D> &t = b.at(e, q);
                        const double d0 = -gp(0, 1) - t(0, j, al, be);
                        const double d1 = gp(0, 0) - t(1, j, al, be);
                        mis += ref.weight * (d0 * d0 + d1 * d1);
                        bn += ref.weight * (t(0, j, al, be) * t(0, j, al, be) +
                                            t(1, j, al, be) * t(1, j, al, be));
                    }
                out.psi[j][al][be] = x;
            }
    // aggregated over (j, alpha, beta) so identically vanishing components
    // do not turn roundoff into O(1) ratios
    out.l2_misfit = bn > 0.0 ? std::sqrt(mis / bn) : std::sqrt(mis);
    return out;
}

template <int D>
double corrector_residual(const CoefficientField<D> &field, const CorrectorSet<D> &chi) {
    const Grid<D> &g = chi.grid;
    const StencilOperator<D> op = assemble_operator<D>(g, D, coefficient_matrix_fn(field));
    const auto modes = constant_modes(g, D);
    double worst = 0.0;
    for (int j = 0; j < D; ++j)
        for (int be = 0; be < D; ++be) {
            double scale = 0.0;
            Field rhs = corrector_rhs(g, field, j, be, &scale);
            project_out(modes, rhs);
            Field res = rhs - op * chi.chi[j][be];
            project_out(modes, res);
            worst = std::max(worst, relative(res.norm(), rhs.norm(), scale));
        }
    return worst;
}

template <int D>
IdentityReport verify_cell_identities(const CoefficientField<D> &field, const CorrectorSet<D> &chi,
                                      const HomogenizedTensor<D> &a_hat,
                                      const FluxDiscrepancy<D> &b, const FluxCorrectorSet<D> &phi,
                                      const CellTolerances &tol) {
    IdentityReport r;
    auto add = [&](const std::string &name, double v, double t) {
        r.entries.push_back({name, v, t, v <= t});
    };
    add("corrector_equation", corrector_residual(field, chi), tol.equation);
    add("corrector_mean", chi.max_mean(), tol.mean);
    add("a_hat_symmetry", a_hat.symmetry_residual, tol.symmetry);
    add("b_mean", b.max_mean(), tol.b_mean);
    add("b_divergence", divergence_residual(field, b), tol.divergence);
    add("phi_potential", phi.max_potential_residual, tol.potential);
    r.phi_l2_misfit = phi.l2_misfit;
    double anti = 0.0;
    for (int k = 0; k < D; ++k)
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j)
                for (int al = 0; al < D; ++al)
                    for (int be = 0; be < D; ++be)
                        anti = std::max(anti, (phi.phi(k, i, j, al, be) + phi.phi(i, k, j, al, be))
                                                  .cwiseAbs()
                                                  .maxCoeff());
    r.phi_antisymmetry = anti;
    return r;
}

template <int D>
CellPipeline<D> run_cell_pipeline(const CoefficientField<D> &field, Index n,
                                  const CellTolerances &tol, const std::string &preconditioner) {
    const CellGrid<D> cell(n);
    CellPipeline<D> p;
    p.chi = solve_correctors(field, cell, tol.solve, preconditioner);
    p.a_hat = homogenized_tensor(field, p.chi, tol.symmetry);
    p.b = flux_discrepancy(field, p.chi, p.a_hat);
    const double div = divergence_residual(field, p.b);
    p.phi = solve_flux_correctors(p.b, cell, tol.solve, div, tol.divergence, preconditioner);
    p.report = verify_cell_identities(field, p.chi, p.a_hat, p.b, p.phi, tol);
    return p;
}

template <int D>
nlohmann::json cell_json(const CellPipeline<D> &p) {
    nlohmann::json j;
    for (int i = 0; i < D; ++i)
        for (int jj = 0; jj < D; ++jj)
            for (int al = 0; al < D; ++al)
                for (int be = 0; be < D; ++be)
                    j["a_hat[" + std::to_string(i + 1) + "][" + std::to_string(jj + 1) + "][" +
                      std::to_string(al + 1) + "][" + std::to_string(be + 1) + "]"] =
                        p.a_hat.a_hat(i, jj, al, be);
    j["kappa1"] = p.a_hat.certified_bounds.kappa1;
    j["kappa2"] = p.a_hat.certified_bounds.kappa2;
    j["residuals"] = p.report.to_json();
    j["n"] = p.chi.grid.cells[0];
    nlohmann::json its = nlohmann::json::array();
    for (int jj = 0; jj < D; ++jj)
        for (int be = 0; be < D; ++be) its.push_back(p.chi.stats[jj][be].iterations);
    j["corrector_iterations"] = its;
    return j;
}

template struct CellGrid<2>;
template struct CorrectorSet<2>;
template struct FluxDiscrepancy<2>;
template struct FluxCorrectorSet<2>;
template CorrectorSet<2> solve_correctors<2>(const CoefficientField<2> &, const CellGrid<2> &,
                                             double, const std::string &);
template HomogenizedTensor<2> homogenized_tensor<2>(const CoefficientField<2> &,
                                                    const CorrectorSet<2> &, double);
template FluxDiscrepancy<2> flux_discrepancy<2>(const CoefficientField<2> &,
                                                const CorrectorSet<2> &,
                                                const HomogenizedTensor<2> &);
template double divergence_residual<2>(const CoefficientField<2> &, const FluxDiscrepancy<2> &);
template FluxCorrectorSet<2> solve_flux_correctors<2>(const FluxDiscrepancy<2> &,
                                                      const CellGrid<2> &, double, double, double,
                                                      const std::string &);
template double corrector_residual<2>(const CoefficientField<2> &, const CorrectorSet<2> &);
template IdentityReport verify_cell_identities<2>(const CoefficientField<2> &,
                                                  const CorrectorSet<2> &,
                                                  const HomogenizedTensor<2> &,
                                                  const FluxDiscrepancy<2> &,
                                                  const FluxCorrectorSet<2> &,
                                                  const CellTolerances &);
template CellPipeline<2> run_cell_pipeline<2>(const CoefficientField<2> &, Index,
                                              const CellTolerances &, const std::string &);
template nlohmann::json cell_json<2>(const CellPipeline<2> &);

} // namespace elhom
