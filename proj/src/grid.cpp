#include "elhom/grid.hpp"

#include <algorithm>
#include <cmath>

namespace elhom {

template <int D>
Grid<D> Grid<D>::box(const Point<D> &lower, const MultiIndex<D> &cells, const Vec<D> &h) {
    Grid g;
    g.cells = cells;
    g.origin = lower;
    g.h = h;
    g.periodic = false;
    return g;
}

template <int D>
Grid<D> Grid<D>::torus(Index n) {
    Grid g;
    g.cells.fill(n);
    g.origin = Point<D>::Constant(-0.5);
    g.h = Vec<D>::Constant(1.0 / static_cast<double>(n));
    g.periodic = true;
    return g;
}

template <int D>
Index Grid<D>::node_count() const {
    Index n = 1;
    for (int t = 0; t < D; ++t) n *= nodes_along(t);
    return n;
}

template <int D>
Index Grid<D>::element_count() const {
    Index n = 1;
    for (int t = 0; t < D; ++t) n *= cells[t];
    return n;
}

template <int D>
Index Grid<D>::node_stride(int axis) const {
    Index s = 1;
    for (int t = 0; t < axis; ++t) s *= nodes_along(t);
    return s;
}

template <int D>
Index Grid<D>::node_index(const MultiIndex<D> &m) const {
    Index idx = 0, stride = 1;
    for (int t = 0; t < D; ++t) {
        Index mt = m[t];
        if (periodic) mt = ((mt % cells[t]) + cells[t]) % cells[t];
        idx += mt * stride;
        stride *= nodes_along(t);
    }
    return idx;
}

template <int D>
MultiIndex<D> Grid<D>::node_multi(Index node) const {
    MultiIndex<D> m;
    for (int t = 0; t < D; ++t) {
        m[t] = node % nodes_along(t);
        node /= nodes_along(t);
    }
    return m;
}

template <int D>
Point<D> Grid<D>::node_coord(Index node) const {
    const MultiIndex<D> m = node_multi(node);
    Point<D> x;
    for (int t = 0; t < D; ++t) x[t] = origin[t] + static_cast<double>(m[t]) * h[t];
    return x;
}

template <int D>
MultiIndex<D> Grid<D>::element_multi(Index e) const {
    MultiIndex<D> m;
    for (int t = 0; t < D; ++t) {
        m[t] = e % cells[t];
        e /= cells[t];
    }
    return m;
}

template <int D>
Point<D> Grid<D>::element_lower(Index e) const {
    const MultiIndex<D> m = element_multi(e);
    Point<D> x;
    for (int t = 0; t < D; ++t) x[t] = origin[t] + static_cast<double>(m[t]) * h[t];
    return x;
}

template <int D>
Point<D> Grid<D>::element_centroid(Index e) const {
    return element_lower(e) + 0.5 * h;
}

template <int D>
std::array<Index, Grid<D>::kElementNodes> Grid<D>::element_nodes(Index e) const {
    const MultiIndex<D> m = element_multi(e);
    std::array<Index, kElementNodes> out;
    for (int a = 0; a < kElementNodes; ++a) {
        MultiIndex<D> n = m;
        for (int t = 0; t < D; ++t) n[t] += (a >> t) & 1;
        out[a] = node_index(n);
    }
    return out;
}

template <int D>
double Grid<D>::element_volume() const {
    return h.prod();
}

template <int D>
bool Grid<D>::on_boundary(Index node) const {
    if (periodic) return false;
    const MultiIndex<D> m = node_multi(node);
    for (int t = 0; t < D; ++t)
        if (m[t] == 0 || m[t] == cells[t]) return true;
    return false;
}

template <int D>
bool Grid<D>::can_coarsen(Index min_cells) const {
    for (int t = 0; t < D; ++t)
        if (cells[t] % 2 != 0 || cells[t] / 2 < min_cells) return false;
    return true;
}

template <int D>
Grid<D> Grid<D>::coarsened() const {
    Grid g = *this;
    for (int t = 0; t < D; ++t) g.cells[t] = cells[t] / 2;
    g.h = 2.0 * h;
    return g;
}

template <int D>
Q1Element<D>::Q1Element(const Vec<D> &h_) : h(h_) {
    weight = h.prod() / static_cast<double>(kQuad);
    const double g0 = 0.5 - 0.5 / std::sqrt(3.0);
    const double g1 = 0.5 + 0.5 / std::sqrt(3.0);
    for (int q = 0; q < kQuad; ++q) {
        Point<D> s;
        for (int t = 0; t < D; ++t) s[t] = bit(q, t) ? g1 : g0;
        for (int a = 0; a < kNodes; ++a) {
            double v = 1.0;
            for (int t = 0; t < D; ++t) v *= bit(a, t) ? s[t] : 1.0 - s[t];
            value(a, q) = v;
            for (int i = 0; i < D; ++i) {
                double g = (bit(a, i) ? 1.0 : -1.0) / h[i];
                for (int t = 0; t < D; ++t)
                    if (t != i) g *= bit(a, t) ? s[t] : 1.0 - s[t];
                grad[q](i, a) = g;
            }
        }
    }
}

template <int D>
Point<D> Q1Element<D>::quad_point(const Point<D> &lower, int q) const {
    const double g0 = 0.5 - 0.5 / std::sqrt(3.0);
    const double g1 = 0.5 + 0.5 / std::sqrt(3.0);
    Point<D> x;
    for (int t = 0; t < D; ++t) x[t] = lower[t] + (bit(q, t) ? g1 : g0) * h[t];
    return x;
}

template <int D>
Eigen::Matrix<double, ipow(2, D), 1> q1_values(const Point<D> &s) {
    Eigen::Matrix<double, ipow(2, D), 1> v;
    for (int a = 0; a < ipow(2, D); ++a) {
        double p = 1.0;
        for (int t = 0; t < D; ++t) p *= ((a >> t) & 1) ? s[t] : 1.0 - s[t];
        v[a] = p;
    }
    return v;
}

template <int D>
StencilOperator<D>::StencilOperator(const Grid<D> &grid, int ncomp)
    : grid_(grid), nc_(ncomp),
      v_(static_cast<std::size_t>(grid.node_count() * kSlots * ncomp * ncomp), 0.0) {
    if (grid.periodic)
        for (int t = 0; t < D; ++t)
            if (grid.cells[t] < 3) throw ConfigError("periodic stencil needs >= 3 nodes per axis");
}

template <int D>
int StencilOperator<D>::slot_of(const std::array<int, D> &offset) {
    int s = 0, p = 1;
    for (int t = 0; t < D; ++t) {
        s += (offset[t] + 1) * p;
        p *= 3;
    }
    return s;
}

template <int D>
std::array<int, D> StencilOperator<D>::offset_of(int slot) {
    std::array<int, D> o;
    for (int t = 0; t < D; ++t) {
        o[t] = slot % 3 - 1;
        slot /= 3;
    }
    return o;
}

template <int D>
void StencilOperator<D>::neighbours(Index node, std::array<Index, kSlots> &out) const {
    const MultiIndex<D> m = grid_.node_multi(node);
    bool interior = true;
    for (int t = 0; t < D; ++t)
        if (m[t] == 0 || m[t] == grid_.nodes_along(t) - 1) interior = false;
    if (interior) {
        for (int s = 0; s < kSlots; ++s) {
            const auto o = offset_of(s);
            Index idx = node;
            for (int t = 0; t < D; ++t) idx += o[t] * grid_.node_stride(t);
            out[s] = idx;
        }
        return;
    }
    for (int s = 0; s < kSlots; ++s) {
        const auto o = offset_of(s);
        MultiIndex<D> n = m;
        bool inside = true;
        for (int t = 0; t < D; ++t) {
            n[t] += o[t];
            if (!grid_.periodic && (n[t] < 0 || n[t] > grid_.cells[t])) inside = false;
        }
        out[s] = inside ? grid_.node_index(n) : -1;
    }
}

template <int D>
void StencilOperator<D>::apply(const Field &x, Field &y) const {
    y.resize(size());
    const Index nn = grid_.node_count();
    std::array<Index, kSlots> nb;
    for (Index node = 0; node < nn; ++node) {
        neighbours(node, nb);
        const double *blk = row_block(node);
        for (int c = 0; c < nc_; ++c) {
            double acc = 0.0;
            for (int s = 0; s < kSlots; ++s) {
                if (nb[s] < 0) continue;
                const double *row = blk + (s * nc_ + c) * nc_;
                const double *xs = x.data() + nb[s] * nc_;
                for (int c2 = 0; c2 < nc_; ++c2) acc += row[c2] * xs[c2];
            }
            y[node * nc_ + c] = acc;
        }
    }
}

template <int D>
void StencilOperator<D>::eliminate(const std::vector<char> &constrained, const Field &values,
                                   Field &rhs) {
    Field lift = Field::Zero(size());
    for (Index p = 0; p < size(); ++p)
        if (constrained[p]) lift[p] = values[p];
    rhs -= (*this) * lift;
    const Index nn = grid_.node_count();
    std::array<Index, kSlots> nb;
    for (Index node = 0; node < nn; ++node) {
        neighbours(node, nb);
        for (int s = 0; s < kSlots; ++s) {
            if (nb[s] < 0) continue;
            for (int c = 0; c < nc_; ++c)
                for (int c2 = 0; c2 < nc_; ++c2)
                    if (constrained[node * nc_ + c] || constrained[nb[s] * nc_ + c2])
                        at(node, s, c, c2) = 0.0;
        }
        for (int c = 0; c < nc_; ++c)
            if (constrained[node * nc_ + c]) {
                at(node, kCenter, c, c) = 1.0;
                rhs[node * nc_ + c] = values[node * nc_ + c];
            }
    }
}

template <int D>
double StencilOperator<D>::symmetry_defect() const {
    const Index nn = grid_.node_count();
    std::array<Index, kSlots> nb;
    double defect = 0.0;
    for (Index node = 0; node < nn; ++node) {
        neighbours(node, nb);
        for (int s = 0; s < kSlots; ++s) {
            if (nb[s] < 0) continue;
            for (int c = 0; c < nc_; ++c)
                for (int c2 = 0; c2 < nc_; ++c2)
                    defect = std::max(defect, std::abs(at(node, s, c, c2) -
                                                       at(nb[s], mirror(s), c2, c)));
        }
    }
    const double scale = max_abs();
    return scale > 0.0 ? defect / scale : defect;
}

template <int D>
Eigen::MatrixXd StencilOperator<D>::dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size(), size());
    const Index nn = grid_.node_count();
    std::array<Index, kSlots> nb;
    for (Index node = 0; node < nn; ++node) {
        neighbours(node, nb);
        for (int s = 0; s < kSlots; ++s) {
            if (nb[s] < 0) continue;
            for (int c = 0; c < nc_; ++c)
                for (int c2 = 0; c2 < nc_; ++c2)
                    m(node * nc_ + c, nb[s] * nc_ + c2) += at(node, s, c, c2);
        }
    }
    return m;
}

template <int D>
double StencilOperator<D>::max_abs() const {
    double m = 0.0;
    for (double v : v_) m = std::max(m, std::abs(v));
    return m;
}

template <int D>
Eigen::MatrixXd tensor_matrix(const Tensor4<D> &a) {
    Eigen::MatrixXd c(D * D, D * D);
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
            for (int al = 0; al < D; ++al)
                for (int be = 0; be < D; ++be) c(al * D + i, be * D + j) = a(i, j, al, be);
    return c;
}

template <int D>
Eigen::MatrixXd element_matrix(const Q1Element<D> &ref, int nc,
                               const std::vector<Eigen::MatrixXd> &coef) {
    constexpr int nn = Q1Element<D>::kNodes;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(nn * nc, nn * nc);
    // B(alpha*D+i, a*nc+alpha') = delta dN_a/dx_i
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(nc * D, nn * nc);
    for (int q = 0; q < Q1Element<D>::kQuad; ++q) {
        b.setZero();
        for (int a = 0; a < nn; ++a)
            for (int al = 0; al < nc; ++al)
                for (int i = 0; i < D; ++i) b(al * D + i, a * nc + al) = ref.grad[q](i, a);
        k.noalias() += ref.weight * b.transpose() * coef[q] * b;
    }
    return k;
}

template <int D>
StencilOperator<D> assemble_operator(const Grid<D> &grid, int nc, const QpMatrixFn &coef) {
    StencilOperator<D> op(grid, nc);
    const Q1Element<D> ref(grid.h);
    constexpr int nn = Q1Element<D>::kNodes;
    std::vector<Eigen::MatrixXd> cq(Q1Element<D>::kQuad, Eigen::MatrixXd(nc * D, nc * D));
    for (Index e = 0; e < grid.element_count(); ++e) {
        const Point<D> lower = grid.element_lower(e);
        for (int q = 0; q < Q1Element<D>::kQuad; ++q) {
            const Eigen::VectorXd x = ref.quad_point(lower, q);
            coef(e, q, x, cq[q]);
        }
        const Eigen::MatrixXd k = element_matrix<D>(ref, nc, cq);
        const auto nodes = grid.element_nodes(e);
        for (int a = 0; a < nn; ++a)
            for (int b = 0; b < nn; ++b) {
                std::array<int, D> off;
                for (int t = 0; t < D; ++t) off[t] = Q1Element<D>::bit(b, t) - Q1Element<D>::bit(a, t);
                const int s = StencilOperator<D>::slot_of(off);
                for (int c = 0; c < nc; ++c)
                    for (int c2 = 0; c2 < nc; ++c2)
                        op.at(nodes[a], s, c, c2) += k(a * nc + c, b * nc + c2);
            }
    }
    return op;
}

template <int D>
Field assemble_flux_load(const Grid<D> &grid, int nc, const QpFluxFn &flux,
                         double *local_norm) {
    Field b = Field::Zero(grid.node_count() * nc);
    const Q1Element<D> ref(grid.h);
    Eigen::MatrixXd s(nc, D);
    Eigen::MatrixXd local(Q1Element<D>::kNodes, nc);
    double acc = 0.0;
    for (Index e = 0; e < grid.element_count(); ++e) {
        const Point<D> lower = grid.element_lower(e);
        const auto nodes = grid.element_nodes(e);
        local.setZero();
        for (int q = 0; q < Q1Element<D>::kQuad; ++q) {
            const Eigen::VectorXd x = ref.quad_point(lower, q);
            flux(e, q, x, s);
            for (int a = 0; a < Q1Element<D>::kNodes; ++a)
                for (int al = 0; al < nc; ++al) {
                    double v = 0.0;
                    for (int i = 0; i < D; ++i) v += s(al, i) * ref.grad[q](i, a);
                    local(a, al) += ref.weight * v;
                }
        }
        for (int a = 0; a < Q1Element<D>::kNodes; ++a)
            for (int al = 0; al < nc; ++al) b[nodes[a] * nc + al] += local(a, al);
        acc += local.squaredNorm();
    }
    if (local_norm) *local_norm = std::sqrt(acc);
    return b;
}

template <int D>
Field assemble_source_load(const Grid<D> &grid, int nc, const QpSourceFn &source) {
    Field b = Field::Zero(grid.node_count() * nc);
    const Q1Element<D> ref(grid.h);
    Eigen::VectorXd f(nc);
    for (Index e = 0; e < grid.element_count(); ++e) {
        const Point<D> lower = grid.element_lower(e);
        const auto nodes = grid.element_nodes(e);
        for (int q = 0; q < Q1Element<D>::kQuad; ++q) {
            const Eigen::VectorXd x = ref.quad_point(lower, q);
            source(e, q, x, f);
            for (int a = 0; a < Q1Element<D>::kNodes; ++a)
                for (int al = 0; al < nc; ++al)
                    b[nodes[a] * nc + al] += ref.weight * f[al] * ref.value(a, q);
        }
    }
    return b;
}

template <int D>
Eigen::MatrixXd qp_gradient(const Grid<D> &grid, const Q1Element<D> &ref, const Field &u, int nc,
                            Index e, int q) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nc, D);
    const auto nodes = grid.element_nodes(e);
    for (int a = 0; a < Q1Element<D>::kNodes; ++a)
        for (int al = 0; al < nc; ++al)
            for (int i = 0; i < D; ++i) g(al, i) += u[nodes[a] * nc + al] * ref.grad[q](i, a);
    return g;
}

template <int D>
Eigen::VectorXd qp_value(const Grid<D> &grid, const Q1Element<D> &ref, const Field &u, int nc,
                         Index e, int q) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(nc);
    const auto nodes = grid.element_nodes(e);
    for (int a = 0; a < Q1Element<D>::kNodes; ++a)
        for (int al = 0; al < nc; ++al) v[al] += u[nodes[a] * nc + al] * ref.value(a, q);
    return v;
}

template <int D>
Eigen::VectorXd interpolate(const Grid<D> &grid, const Field &u, int nc, const Point<D> &x) {
    MultiIndex<D> m;
    Point<D> s;
    for (int t = 0; t < D; ++t) {
        double r = (x[t] - grid.origin[t]) / grid.h[t];
        if (grid.periodic) {
            const double n = static_cast<double>(grid.cells[t]);
            r = r - n * std::floor(r / n);
        }
        double f = std::floor(r);
        if (!grid.periodic) f = std::clamp(f, 0.0, static_cast<double>(grid.cells[t] - 1));
        m[t] = static_cast<Index>(f);
        if (grid.periodic && m[t] >= grid.cells[t]) m[t] -= grid.cells[t];
        s[t] = r - f;
    }
    const auto w = q1_values<D>(s);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(nc);
    for (int a = 0; a < ipow(2, D); ++a) {
        MultiIndex<D> n = m;
        for (int t = 0; t < D; ++t) n[t] += (a >> t) & 1;
        const Index node = grid.node_index(n);
        for (int c = 0; c < nc; ++c) v[c] += w[a] * u[node * nc + c];
    }
    return v;
}

template <int D>
double l2_inner(const Grid<D> &grid, const Field &u, const Field &v, int nc) {
    const Q1Element<D> ref(grid.h);
    double acc = 0.0;
    for (Index e = 0; e < grid.element_count(); ++e)
        for (int q = 0; q < Q1Element<D>::kQuad; ++q)
            acc += ref.weight *
                   qp_value<D>(grid, ref, u, nc, e, q).dot(qp_value<D>(grid, ref, v, nc, e, q));
    return acc;
}

template <int D>
double l2_norm(const Grid<D> &grid, const Field &u, int nc) {
    return std::sqrt(std::max(0.0, l2_inner<D>(grid, u, u, nc)));
}

template <int D>
double h1_seminorm(const Grid<D> &grid, const Field &u, int nc) {
    const Q1Element<D> ref(grid.h);
    double acc = 0.0;
    for (Index e = 0; e < grid.element_count(); ++e)
        for (int q = 0; q < Q1Element<D>::kQuad; ++q)
            acc += ref.weight * qp_gradient<D>(grid, ref, u, nc, e, q).squaredNorm();
    return std::sqrt(acc);
}

template <int D>
Eigen::VectorXd field_mean(const Grid<D> &grid, const Field &u, int nc) {
    const Q1Element<D> ref(grid.h);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(nc);
    for (Index e = 0; e < grid.element_count(); ++e)
        for (int q = 0; q < Q1Element<D>::kQuad; ++q)
            acc += ref.weight * qp_value<D>(grid, ref, u, nc, e, q);
    return acc / (ref.weight * Q1Element<D>::kQuad * static_cast<double>(grid.element_count()));
}

#define ELHOM_INSTANTIATE(D)                                                                   \
    template struct Grid<D>;                                                                   \
    template struct Q1Element<D>;                                                              \
    template class StencilOperator<D>;                                                         \
    template Eigen::Matrix<double, ipow(2, D), 1> q1_values<D>(const Point<D> &);              \
    template Eigen::MatrixXd tensor_matrix<D>(const Tensor4<D> &);                             \
    template Eigen::MatrixXd element_matrix<D>(const Q1Element<D> &, int,                      \
                                               const std::vector<Eigen::MatrixXd> &);          \
    template StencilOperator<D> assemble_operator<D>(const Grid<D> &, int, const QpMatrixFn &); \
    template Field assemble_flux_load<D>(const Grid<D> &, int, const QpFluxFn &, double *);              \
    template Field assemble_source_load<D>(const Grid<D> &, int, const QpSourceFn &);          \
    template Eigen::MatrixXd qp_gradient<D>(const Grid<D> &, const Q1Element<D> &,             \
                                            const Field &, int, Index, int);                   \
    template Eigen::VectorXd qp_value<D>(const Grid<D> &, const Q1Element<D> &, const Field &, \
                                         int, Index, int);                                     \
    template Eigen::VectorXd interpolate<D>(const Grid<D> &, const Field &, int,               \
                                            const Point<D> &);                                 \
    template double l2_inner<D>(const Grid<D> &, const Field &, const Field &, int);           \
    template double l2_norm<D>(const Grid<D> &, const Field &, int);                           \
    template double h1_seminorm<D>(const Grid<D> &, const Field &, int);                       \
    template Eigen::VectorXd field_mean<D>(const Grid<D> &, const Field &, int);

ELHOM_INSTANTIATE(2)

} // namespace elhom
