#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <vector>

#include "elhom/common.hpp"
#include "elhom/tensors.hpp"

namespace elhom {

/// Uniform tensor-product grid of Q1 elements. Node ordering is
/// lexicographic with axis 0 fastest. A periodic grid identifies the last
/// element layer with the first (n nodes and n elements per axis); a box
/// grid has cells+1 nodes per axis.
template <int D>
struct Grid {
    static constexpr int kElementNodes = ipow(2, D);
    static constexpr int kQuadPoints = ipow(2, D);

    MultiIndex<D> cells{};
    Point<D> origin = Point<D>::Zero();
    Vec<D> h = Vec<D>::Ones();
    bool periodic = false;

    static Grid box(const Point<D> &lower, const MultiIndex<D> &cells, const Vec<D> &h);
    /// Torus over [-1/2, 1/2]^D with n nodes per axis.
    static Grid torus(Index n);

    Index nodes_along(int axis) const { return periodic ? cells[axis] : cells[axis] + 1; }
    Index node_count() const;
    Index element_count() const;
    Index node_stride(int axis) const;

    Index node_index(const MultiIndex<D> &m) const;
    MultiIndex<D> node_multi(Index node) const;
    Point<D> node_coord(Index node) const;
    MultiIndex<D> element_multi(Index e) const;
    Point<D> element_lower(Index e) const;
    Point<D> element_centroid(Index e) const;
    std::array<Index, kElementNodes> element_nodes(Index e) const;
    double element_volume() const;
    bool on_boundary(Index node) const;

    /// Coarse grid with every other node; valid when can_coarsen().
    bool can_coarsen(Index min_cells) const;
    Grid coarsened() const;
};

/// Reference Q1 element data for 2^D Gauss points on a cell of size h.
template <int D>
struct Q1Element {
    static constexpr int kNodes = ipow(2, D);
    static constexpr int kQuad = ipow(2, D);

    explicit Q1Element(const Vec<D> &h);

    /// Local offsets of node a and quadrature point q in reference coordinates.
    static int bit(int a, int axis) { return (a >> axis) & 1; }
    Point<D> quad_point(const Point<D> &lower, int q) const;

    Vec<D> h;
    double weight = 0.0;                                   // per Gauss point
    Eigen::Matrix<double, kNodes, kQuad> value;            // N_a(x_q)
    std::array<Eigen::Matrix<double, D, kNodes>, kQuad> grad;  // dN_a/dx_i (i, a)
};

/// Shape values at an arbitrary local coordinate s in [0,1]^D.
template <int D>
Eigen::Matrix<double, ipow(2, D), 1> q1_values(const Point<D> &s);

/// Nodal field with nc components per node.
using Field = Eigen::VectorXd;

/// Block 3^D-point stencil operator acting on nodal fields with nc
/// components. Entries for neighbours outside a box grid are ignored.
template <int D>
class StencilOperator {
public:
    static constexpr int kSlots = ipow(3, D);
    static constexpr int kCenter = (kSlots - 1) / 2;

    StencilOperator() = default;
    StencilOperator(const Grid<D> &grid, int ncomp);

    const Grid<D> &grid() const { return grid_; }
    int ncomp() const { return nc_; }
    Index size() const { return grid_.node_count() * nc_; }

    double &at(Index node, int slot, int c, int c2) {
        return v_[((node * kSlots + slot) * nc_ + c) * nc_ + c2];
    }
    double at(Index node, int slot, int c, int c2) const {
        return v_[((node * kSlots + slot) * nc_ + c) * nc_ + c2];
    }
    const double *row_block(Index node) const { return &v_[node * kSlots * nc_ * nc_]; }

    static int slot_of(const std::array<int, D> &offset);
    static std::array<int, D> offset_of(int slot);
    static int mirror(int slot) { return kSlots - 1 - slot; }

    /// Neighbour node indices of `node` for every slot (-1 outside a box).
    void neighbours(Index node, std::array<Index, kSlots> &out) const;

    void apply(const Field &x, Field &y) const;
    Field operator*(const Field &x) const {
        Field y(size());
        apply(x, y);
        return y;
    }

    /// Remove constrained DOFs: rhs -= A x_c, zero constrained rows and
    /// columns, unit diagonal, rhs_c = values_c.
    void eliminate(const std::vector<char> &constrained, const Field &values, Field &rhs);

    /// max |A_pq - A_qp| / max |A|
    double symmetry_defect() const;
    Eigen::MatrixXd dense() const;
    double max_abs() const;

private:
    Grid<D> grid_;
    int nc_ = 1;
    std::vector<double> v_;
};

/// Coefficient matrix at a Gauss point, indexed (alpha*D + i, beta*D + j);
/// flux S(alpha, i) = C(alpha*D+i, beta*D+j) G(beta, j).
using QpMatrixFn =
    std::function<void(Index element, int q, const Eigen::VectorXd &x, Eigen::Ref<Eigen::MatrixXd> c)>;
/// Flux at a Gauss point, nc x D.
using QpFluxFn =
    std::function<void(Index element, int q, const Eigen::VectorXd &x, Eigen::Ref<Eigen::MatrixXd> s)>;
/// Source density at a Gauss point, nc entries.
using QpSourceFn =
    std::function<void(Index element, int q, const Eigen::VectorXd &x, Eigen::Ref<Eigen::VectorXd> f)>;

template <int D>
Eigen::MatrixXd tensor_matrix(const Tensor4<D> &a);

/// Element matrix for one cell given per-Gauss-point coefficient matrices.
template <int D>
Eigen::MatrixXd element_matrix(const Q1Element<D> &ref, int nc,
                               const std::vector<Eigen::MatrixXd> &coef);

template <int D>
StencilOperator<D> assemble_operator(const Grid<D> &grid, int nc, const QpMatrixFn &coef);

/// b[a, alpha] += sum_q w S(alpha, i) dN_a/dx_i. `local_norm` receives the
/// Euclidean norm of the unassembled element contributions, a scale that does
/// not suffer from cancellation.
template <int D>
Field assemble_flux_load(const Grid<D> &grid, int nc, const QpFluxFn &flux,
                         double *local_norm = nullptr);

/// b[a, alpha] += sum_q w F_alpha N_a
template <int D>
Field assemble_source_load(const Grid<D> &grid, int nc, const QpSourceFn &source);

/// Gradient of the Q1 interpolant of u at Gauss point q of element e, nc x D.
template <int D>
Eigen::MatrixXd qp_gradient(const Grid<D> &grid, const Q1Element<D> &ref, const Field &u, int nc,
                            Index e, int q);
template <int D>
Eigen::VectorXd qp_value(const Grid<D> &grid, const Q1Element<D> &ref, const Field &u, int nc,
                         Index e, int q);

/// Q1 interpolation at an arbitrary point (wrapped on periodic grids).
template <int D>
Eigen::VectorXd interpolate(const Grid<D> &grid, const Field &u, int nc, const Point<D> &x);

/// Exact L2 inner product / norms of Q1 interpolants by Gauss quadrature.
template <int D>
double l2_inner(const Grid<D> &grid, const Field &u, const Field &v, int nc);
template <int D>
double l2_norm(const Grid<D> &grid, const Field &u, int nc);
template <int D>
double h1_seminorm(const Grid<D> &grid, const Field &u, int nc);

/// Nodal mean of each component over the grid by Gauss quadrature.
template <int D>
Eigen::VectorXd field_mean(const Grid<D> &grid, const Field &u, int nc);

} // namespace elhom
