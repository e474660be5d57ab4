#pragma once

#include <nlohmann/json.hpp>

#include <functional>
#include <string>
#include <vector>

#include "elhom/cell.hpp"
#include "elhom/mesh.hpp"

namespace elhom {

/// Radial bump exp(-1/(1 - |2x|^2)) on |x| < 1/2, scaled to unit integral.
template <int D>
class Mollifier {
public:
    Mollifier();

    /// Normalised profile as a function of |x|.
    double profile(double r) const;
    double operator()(const Point<D> &x) const { return profile(x.norm()); }
    /// phi_eps(x) = eps^-D phi(x / eps)
    double scaled(const Point<D> &x, double eps) const;
    /// Integral of the unnormalised bump (the normalisation constant).
    double raw_mass() const { return mass_; }

private:
    double mass_ = 1.0;
};

/// Uniform box grid extending a mesh by `pad` cells on every side.
template <int D>
struct PaddedField {
    Grid<D> grid;
    Index pad = 0;
    int nc = 1;
    Field values;

    double h() const { return grid.h[0]; }
    /// Padded node index of a node of the unpadded box with `cells`.
    Index inner_node(const MultiIndex<D> &m) const;
};

/// Discrete convolution with phi_eps on a grid of spacing h. The stencil
/// covers |k|_inf <= ceil(eps / 2h) and is renormalised to unit sum.
template <int D>
class SmoothingOperator {
public:
    SmoothingOperator(double eps, double h, const Mollifier<D> &phi = {});

    double epsilon() const { return eps_; }
    double spacing() const { return h_; }
    Index radius() const { return radius_; }
    const std::vector<std::array<int, D>> &offsets() const { return offsets_; }
    const std::vector<double> &weights() const { return weights_; }
    /// Sum of phi_eps(kh) h^D before renormalisation.
    double raw_sum() const { return raw_sum_; }

    /// S_eps u on the nodes whose stencil fits: the result has pad - radius.
    PaddedField<D> smooth(const PaddedField<D> &u) const;

private:
    double eps_;
    double h_;
    Index radius_;
    std::vector<std::array<int, D>> offsets_;
    std::vector<double> weights_;
    double raw_sum_ = 0.0;
};

/// Even reflection of a nodal field across every face of the mesh box.
template <int D>
PaddedField<D> extend(const Mesh<D> &mesh, const Field &u, int nc, Index pad);

/// Values on the nodes of the unpadded box.
template <int D>
Field restrict_to_mesh(const Mesh<D> &mesh, const PaddedField<D> &u);

/// Central-difference gradient, components alpha * D + i; pad shrinks by one.
template <int D>
PaddedField<D> padded_gradient(const PaddedField<D> &u);

/// S_eps u restricted to the mesh; InsufficientPadding if the stencil
/// leaves the padded grid.
template <int D>
Field mollify(const SmoothingOperator<D> &op, const Mesh<D> &mesh, const PaddedField<D> &u);

/// Discrete H^2 surrogate: nodal quadrature of |u|^2, |grad u|^2 and all
/// second differences (interior nodes for the latter).
template <int D>
double h2_surrogate(const Grid<D> &grid, const Field &u, int nc);

/// H^2 surrogate of the reflected extension over the padded box divided by
/// the surrogate over the mesh.
template <int D>
double extension_ratio(const Mesh<D> &mesh, const Field &u, int nc, Index pad);

/// Nodal eps * sum_{j,beta} chi_j^beta(x / eps) V(beta, j)(x), where `grad`
/// stores V with components beta * D + j.
template <int D>
Field oscillatory_term(const Mesh<D> &mesh, const CorrectorSet<D> &chi, const Field &grad,
                       double eps);

/// eps chi^eps S_eps grad u0~ for a nodal u0 on the mesh.
template <int D>
Field corrector_term(const Mesh<D> &mesh, const Field &u0, const CorrectorSet<D> &chi, double eps,
                     const Mollifier<D> &phi = {});

template <int D>
struct CutoffFamily {
    Field theta;  // nodal
    double inner = 0.0;
    double outer = 0.0;
    double gradient_bound = 0.0;   // 1 / (outer - inner)
    double observed_constant = 0.0;  // eps * max elementwise |grad theta|
};

/// theta = 1 for delta <= inner, 0 for delta >= outer, linear in between.
template <int D>
CutoffFamily<D> build_cutoff(const Mesh<D> &mesh, double eps, double inner, double outer);

struct TwoScaleReport {
    double epsilon = 0.0;
    double h = 0.0;
    double err_L2_u0 = 0.0;
    double err_H1_w = 0.0;
    double err_weighted = 0.0;
    double err_interior = 0.0;
    double norm_u0_H2 = 0.0;
    double layer_L2_w = 0.0;
    double layer_H1_w = 0.0;
    double richardson_cert = 0.0;
    double ortho_residual = 0.0;
    std::string status = "ok";
    /// seminorm parts, used for the subdomain consistency check
    double semi_H1_w = 0.0;
    double semi_interior = 0.0;

    static std::string csv_header();
    std::string csv_row() const;
    nlohmann::json to_json() const;
};

/// Norms of w = u_eps - u0 - term. Interior norm over elements with centroid
/// distance > interior_margin; layer norms over centroid distance < 2 eps.
template <int D>
TwoScaleReport remainder_report(const Mesh<D> &mesh, const Field &u_eps, const Field &u0,
                                const Field &term, double eps, double interior_margin);

template <int D>
TwoScaleReport two_scale_report(const Mesh<D> &mesh, const Field &u_eps, const Field &u0,
                                const CorrectorSet<D> &chi, double eps, double interior_margin,
                                const Mollifier<D> &phi = {});

/// Periodic cell function of y in [-1/2, 1/2]^D.
template <int D>
using CellFunction = std::function<double(const Point<D> &)>;

/// ||f||_L2(Q) by the midpoint rule on samples^D points.
template <int D>
double cell_l2_norm(const CellFunction<D> &f, int samples = 512);

/// ||f^eps S_eps u||_L2 / (||f||_L2(Q) ||u||_L2); nodal quadrature over the
/// nodes where S_eps u is defined, against the whole padded grid for u.
template <int D>
double periodic_weighted_bound_check(const CellFunction<D> &f, double f_norm,
                                     const SmoothingOperator<D> &op, const PaddedField<D> &u);

/// ||S_eps u - u||_L2(Omega) / (eps ||grad u||_L2(Omega)), nodal quadrature.
template <int D>
double smoothing_defect_ratio(const SmoothingOperator<D> &op, const Mesh<D> &mesh,
                              const PaddedField<D> &u);

/// int over {dist(x, boundary) < eps} of |f^eps|^2 |S_eps u|^2 divided by
/// eps ||f||^2 ||u||_H1 ||u||_L2, the u norms taken over the padded grid.
template <int D>
double boundary_layer_ratio(const CellFunction<D> &f, double f_norm,
                            const SmoothingOperator<D> &op, const Mesh<D> &mesh,
                            const PaddedField<D> &u);

/// Padding (cells) needed for the boundary-layer ratio.
Index layer_padding(double eps, double h);

} // namespace elhom
