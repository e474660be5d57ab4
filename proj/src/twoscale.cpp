#include "elhom/twoscale.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace elhom {

namespace {

double bump(double r) {
    const double s = 4.0 * r * r;
    return s < 1.0 ? std::exp(-1.0 / (1.0 - s)) : 0.0;
}

template <int D>
double cell_volume_weight(double h) {
    return std::pow(h, D);
}

template <int D>
Grid<D> shrunk(const Grid<D> &g, Index by) {
    MultiIndex<D> cells;
    for (int t = 0; t < D; ++t) cells[t] = g.cells[t] - 2 * by;
    Point<D> lower = g.origin;
    for (int t = 0; t < D; ++t) lower[t] += static_cast<double>(by) * g.h[t];
    return Grid<D>::box(lower, cells, g.h);
}

template <int D>
MultiIndex<D> shifted(MultiIndex<D> m, Index by) {
    for (int t = 0; t < D; ++t) m[t] += by;
    return m;
}

} // namespace

template <int D>
Mollifier<D>::Mollifier() {
    // radial integral omega_D int_0^{1/2} bump(r) r^{D-1} dr, composite Simpson
    constexpr int kIntervals = 200000;
    const double a = 0.0, b = 0.5, step = (b - a) / kIntervals;
    double acc = 0.0;
    for (int k = 0; k <= kIntervals; ++k) {
        const double r = a + k * step;
        const double w = (k == 0 || k == kIntervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        acc += w * bump(r) * std::pow(r, D - 1);
    }
    const double sphere = 2.0 * std::pow(M_PI, 0.5 * D) / std::tgamma(0.5 * D);
    mass_ = sphere * acc * step / 3.0;
}

template <int D>
double Mollifier<D>::profile(double r) const {
    return bump(r) / mass_;
}

template <int D>
double Mollifier<D>::scaled(const Point<D> &x, double eps) const {
    return profile(x.norm() / eps) / std::pow(eps, D);
}

template <int D>
Index PaddedField<D>::inner_node(const MultiIndex<D> &m) const {
    return grid.node_index(shifted<D>(m, pad));
}

template <int D>
SmoothingOperator<D>::SmoothingOperator(double eps, double h, const Mollifier<D> &phi)
    : eps_(eps), h_(h) {
    if (!(eps > 0.0) || !(h > 0.0)) throw ConfigError("smoothing needs eps > 0 and h > 0");
    radius_ = static_cast<Index>(std::ceil(eps / (2.0 * h) - 1e-9));
    const Index width = 2 * radius_ + 1;
    Index total = 1;
    for (int t = 0; t < D; ++t) total *= width;
    const double vol = cell_volume_weight<D>(h);
    for (Index k = 0; k < total; ++k) {
        std::array<int, D> off;
        Point<D> x;
        Index rest = k;
        for (int t = 0; t < D; ++t) {
            off[t] = static_cast<int>(rest % width - radius_);
            rest /= width;
            x[t] = off[t] * h;
        }
        const double w = phi.scaled(x, eps) * vol;
        if (w <= 0.0) continue;
        offsets_.push_back(off);
        weights_.push_back(w);
        raw_sum_ += w;
    }
    if (weights_.empty()) {
        // eps below the grid scale: the identity
        offsets_.push_back({});
        weights_.push_back(1.0);
        raw_sum_ = 1.0;
        return;
    }
    for (double &w : weights_) w /= raw_sum_;
}

template <int D>
PaddedField<D> SmoothingOperator<D>::smooth(const PaddedField<D> &u) const {
    if (u.pad < radius_)
        throw InsufficientPadding("padding of " + std::to_string(u.pad) +
                                  " cells is below the stencil radius " + std::to_string(radius_));
    PaddedField<D> out;
    out.grid = shrunk(u.grid, radius_);
    out.pad = u.pad - radius_;
    out.nc = u.nc;
    out.values = Field::Zero(out.grid.node_count() * u.nc);
    std::vector<Index> lin(offsets_.size());
    for (std::size_t k = 0; k < offsets_.size(); ++k) {
        Index s = 0;
        for (int t = 0; t < D; ++t) s += offsets_[k][t] * u.grid.node_stride(t);
        lin[k] = s;
    }
    const int nc = u.nc;
    for (Index i = 0; i < out.grid.node_count(); ++i) {
        const Index src = u.grid.node_index(shifted<D>(out.grid.node_multi(i), radius_));
        for (int c = 0; c < nc; ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < lin.size(); ++k) acc += weights_[k] * u.values[(src + lin[k]) * nc + c];
            out.values[i * nc + c] = acc;
        }
    }
    return out;
}

template <int D>
PaddedField<D> extend(const Mesh<D> &mesh, const Field &u, int nc, Index pad) {
    if (pad < 0) throw ConfigError("padding must be nonnegative");
    const Grid<D> &g = mesh.grid;
    PaddedField<D> out;
    MultiIndex<D> cells;
    Point<D> lower;
    for (int t = 0; t < D; ++t) {
        cells[t] = g.cells[t] + 2 * pad;
        lower[t] = g.origin[t] - static_cast<double>(pad) * g.h[t];
    }
    out.grid = Grid<D>::box(lower, cells, g.h);
    out.pad = pad;
    out.nc = nc;
    out.values.resize(out.grid.node_count() * nc);
    for (Index i = 0; i < out.grid.node_count(); ++i) {
        MultiIndex<D> m = out.grid.node_multi(i);
        for (int t = 0; t < D; ++t) {
            Index k = m[t] - pad;
            const Index n = g.cells[t];
            while (k < 0 || k > n) k = k < 0 ? -k : 2 * n - k;
            m[t] = k;
        }
        out.values.segment(i * nc, nc) = u.segment(g.node_index(m) * nc, nc);
    }
    return out;
}

template <int D>
Field restrict_to_mesh(const Mesh<D> &mesh, const PaddedField<D> &u) {
    const int nc = u.nc;
    Field out(mesh.node_count() * nc);
    for (Index i = 0; i < mesh.node_count(); ++i)
        out.segment(i * nc, nc) = u.values.segment(u.inner_node(mesh.grid.node_multi(i)) * nc, nc);
    return out;
}

template <int D>
PaddedField<D> padded_gradient(const PaddedField<D> &u) {
    if (u.pad < 1) throw InsufficientPadding("gradient needs at least one padding cell");
    PaddedField<D> out;
    out.grid = shrunk(u.grid, 1);
    out.pad = u.pad - 1;
    out.nc = u.nc * D;
    out.values.resize(out.grid.node_count() * out.nc);
    const int nc = u.nc;
    for (Index i = 0; i < out.grid.node_count(); ++i) {
        const Index src = u.grid.node_index(shifted<D>(out.grid.node_multi(i), 1));
        for (int t = 0; t < D; ++t) {
            const Index s = u.grid.node_stride(t);
            const double inv = 0.5 / u.grid.h[t];
            for (int a = 0; a < nc; ++a)
                out.values[i * out.nc + a * D + t] =
                    (u.values[(src + s) * nc + a] - u.values[(src - s) * nc + a]) * inv;
        }
    }
    return out;
}

template <int D>
Field mollify(const SmoothingOperator<D> &op, const Mesh<D> &mesh, const PaddedField<D> &u) {
    return restrict_to_mesh(mesh, op.smooth(u));
}

template <int D>
double h2_surrogate(const Grid<D> &grid, const Field &u, int nc) {
    const double vol = cell_volume_weight<D>(grid.h[0]);
    double acc = 0.0;
    for (Index i = 0; i < grid.node_count(); ++i) {
        const MultiIndex<D> m = grid.node_multi(i);
        std::array<bool, D> inner;
        for (int t = 0; t < D; ++t) inner[t] = m[t] > 0 && m[t] < grid.cells[t];
        for (int c = 0; c < nc; ++c) {
            auto val = [&](Index node) { return u[node * nc + c]; };
            double s = val(i) * val(i);
            for (int t = 0; t < D; ++t) {
                const Index st = grid.node_stride(t);
                const double ht = grid.h[t];
                double d;
                if (inner[t]) d = (val(i + st) - val(i - st)) / (2.0 * ht);
                else if (m[t] == 0) d = (val(i + st) - val(i)) / ht;
                else d = (val(i) - val(i - st)) / ht;
                s += d * d;
                if (inner[t]) {
                    const double dd = (val(i + st) - 2.0 * val(i) + val(i - st)) / (ht * ht);
                    s += dd * dd;
                }
                for (int r = t + 1; r < D; ++r) {
                    if (!inner[t] || !inner[r]) continue;
                    const Index sr = grid.node_stride(r);
                    const double dd = (val(i + st + sr) - val(i + st - sr) - val(i - st + sr) +
                                       val(i - st - sr)) /
                                      (4.0 * ht * grid.h[r]);
                    s += 2.0 * dd * dd;
                }
            }
            acc += vol * s;
        }
    }
    return std::sqrt(acc);
}

template <int D>
double extension_ratio(const Mesh<D> &mesh, const Field &u, int nc, Index pad) {
    const PaddedField<D> ext = extend(mesh, u, nc, pad);
    const double inner = h2_surrogate(mesh.grid, u, nc);
    return inner > 0.0 ? h2_surrogate(ext.grid, ext.values, nc) / inner : 0.0;
}

template <int D>
Field oscillatory_term(const Mesh<D> &mesh, const CorrectorSet<D> &chi, const Field &grad,
                       double eps) {
    const double h = mesh.h;
    const double k = eps / h;
    if (std::abs(k - std::round(k)) > 1e-9 * k)
        throw ResolutionMismatch("eps / h = " + std::to_string(k) + " is not an integer");
    if (std::round(k) < 8.0)
        throw ResolutionMismatch("h = " + std::to_string(h) + " exceeds eps / 8");
    constexpr int kGrad = D * D;
    Field out = Field::Zero(mesh.node_count() * D);
    for (Index i = 0; i < mesh.node_count(); ++i) {
        const Point<D> y = mesh.node(i) / eps;
        Vec<D> acc = Vec<D>::Zero();
        for (int j = 0; j < D; ++j)
            for (int beta = 0; beta < D; ++beta) {
                const double v = grad[i * kGrad + beta * D + j];
                if (v != 0.0) acc += v * chi.value(j, beta, y);
            }
        out.segment<D>(i * D) = eps * acc;
    }
    return out;
}

template <int D>
Field corrector_term(const Mesh<D> &mesh, const Field &u0, const CorrectorSet<D> &chi, double eps,
                     const Mollifier<D> &phi) {
    const SmoothingOperator<D> op(eps, mesh.h, phi);
    const PaddedField<D> ext = extend(mesh, u0, D, op.radius() + 1);
    const Field smoothed = mollify(op, mesh, padded_gradient(ext));
    return oscillatory_term(mesh, chi, smoothed, eps);
}

template <int D>
CutoffFamily<D> build_cutoff(const Mesh<D> &mesh, double eps, double inner, double outer) {
    if (!(inner > 0.0) || !(outer > inner)) throw ConfigError("cutoff needs 0 < inner < outer");
    CutoffFamily<D> c;
    c.inner = inner;
    c.outer = outer;
    c.gradient_bound = 1.0 / (outer - inner);
    const Field delta = distance_field(mesh);
    c.theta.resize(delta.size());
    for (Index i = 0; i < delta.size(); ++i)
        c.theta[i] = std::clamp((outer - delta[i]) / (outer - inner), 0.0, 1.0);
    const Q1Element<D> ref(mesh.grid.h);
    double g = 0.0;
    for (Index e = 0; e < mesh.element_count(); ++e)
        for (int q = 0; q < Grid<D>::kQuadPoints; ++q)
            g = std::max(g, qp_gradient<D>(mesh.grid, ref, c.theta, 1, e, q).norm());
    c.observed_constant = eps * g;
    return c;
}

std::string TwoScaleReport::csv_header() {
    return "epsilon,h,err_L2_u0,err_H1_w,err_weighted,err_interior,norm_u0_H2,layer_L2_w,"
           "layer_H1_w,richardson_cert,ortho_residual,status";
}

std::string TwoScaleReport::csv_row() const {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,",
                  epsilon, h, err_L2_u0, err_H1_w, err_weighted, err_interior, norm_u0_H2,
                  layer_L2_w, layer_H1_w, richardson_cert, ortho_residual);
    return buf + status;
}

nlohmann::json TwoScaleReport::to_json() const {
    return {{"epsilon", epsilon},
            {"h", h},
            {"err_L2_u0", err_L2_u0},
            {"err_H1_w", err_H1_w},
            {"err_weighted", err_weighted},
            {"err_interior", err_interior},
            {"norm_u0_H2", norm_u0_H2},
            {"layer_L2_w", layer_L2_w},
            {"layer_H1_w", layer_H1_w},
            {"richardson_cert", richardson_cert},
            {"ortho_residual", ortho_residual},
            {"status", status}};
}

template <int D>
TwoScaleReport remainder_report(const Mesh<D> &mesh, const Field &u_eps, const Field &u0,
                                const Field &term, double eps, double interior_margin) {
    constexpr int kN = Grid<D>::kElementNodes;
    const Q1Element<D> ref(mesh.grid.h);
    const Field diff = u_eps - u0;
    const Field w = diff - term;
    double l2_diff = 0.0, l2_w = 0.0, semi = 0.0, weighted = 0.0;
    double int_l2 = 0.0, int_semi = 0.0, lay_l2 = 0.0, lay_semi = 0.0;
    Eigen::Matrix<double, D, kN> W, U;
    for (Index e = 0; e < mesh.element_count(); ++e) {
        const auto nodes = mesh.element(e);
        for (int a = 0; a < kN; ++a) {
            W.col(a) = w.template segment<D>(nodes[a] * D);
            U.col(a) = diff.template segment<D>(nodes[a] * D);
        }
        const double delta = mesh.domain.boundary_distance(mesh.grid.element_centroid(e));
        double e_l2 = 0.0, e_semi = 0.0;
        for (int q = 0; q < Grid<D>::kQuadPoints; ++q) {
            l2_diff += ref.weight * (U * ref.value.col(q)).squaredNorm();
            e_l2 += ref.weight * (W * ref.value.col(q)).squaredNorm();
            e_semi += ref.weight * (W * ref.grad[q].transpose()).squaredNorm();
        }
        l2_w += e_l2;
        semi += e_semi;
        weighted += delta * delta * e_semi;
        if (delta > interior_margin) {
            int_l2 += e_l2;
            int_semi += e_semi;
        }
        if (delta < 2.0 * eps) {
            lay_l2 += e_l2;
            lay_semi += e_semi;
        }
    }
    TwoScaleReport r;
    r.epsilon = eps;
    r.h = mesh.h;
    r.err_L2_u0 = std::sqrt(l2_diff);
    r.err_H1_w = std::sqrt(l2_w + semi);
    r.err_weighted = std::sqrt(weighted);
    r.err_interior = std::sqrt(int_l2 + int_semi);
    r.layer_L2_w = std::sqrt(lay_l2);
    r.layer_H1_w = std::sqrt(lay_l2 + lay_semi);
    r.semi_H1_w = std::sqrt(semi);
    r.semi_interior = std::sqrt(int_semi);
    r.norm_u0_H2 = h2_surrogate(mesh.grid, u0, D);
    return r;
}

template <int D>
TwoScaleReport two_scale_report(const Mesh<D> &mesh, const Field &u_eps, const Field &u0,
                                const CorrectorSet<D> &chi, double eps, double interior_margin,
                                const Mollifier<D> &phi) {
    if (interior_margin < 2.0 * eps * (1.0 - 1e-12))
        throw ConfigError("interior margin must be at least 2 eps");
    const Field term = corrector_term(mesh, u0, chi, eps, phi);
    return remainder_report(mesh, u_eps, u0, term, eps, interior_margin);
}

template <int D>
double cell_l2_norm(const CellFunction<D> &f, int samples) {
    Index total = 1;
    for (int t = 0; t < D; ++t) total *= samples;
    double acc = 0.0;
    for (Index k = 0; k < total; ++k) {
        Point<D> y;
        Index rest = k;
        for (int t = 0; t < D; ++t) {
            y[t] = -0.5 + (static_cast<double>(rest % samples) + 0.5) / samples;
            rest /= samples;
        }
        const double v = f(y);
        acc += v * v;
    }
    return std::sqrt(acc / static_cast<double>(total));
}

namespace {

template <int D>
Point<D> cell_point(const Point<D> &x, double eps) {
    Point<D> y;
    for (int t = 0; t < D; ++t) y[t] = wrap_cell(x[t] / eps);
    return y;
}

template <int D>
double nodal_l2(const Grid<D> &grid, const Field &u) {
    return std::sqrt(cell_volume_weight<D>(grid.h[0]) * u.squaredNorm());
}

} // namespace

template <int D>
double periodic_weighted_bound_check(const CellFunction<D> &f, double f_norm,
                                     const SmoothingOperator<D> &op, const PaddedField<D> &u) {
    if (f_norm == 0.0) return 0.0;
    const PaddedField<D> su = op.smooth(u);
    const double vol = cell_volume_weight<D>(op.spacing());
    double acc = 0.0;
    for (Index i = 0; i < su.grid.node_count(); ++i) {
        const double fv = f(cell_point<D>(su.grid.node_coord(i), op.epsilon()));
        acc += vol * fv * fv * su.values.segment(i * su.nc, su.nc).squaredNorm();
    }
    const double un = nodal_l2(u.grid, u.values);
    return un > 0.0 ? std::sqrt(acc) / (f_norm * un) : 0.0;
}

template <int D>
double smoothing_defect_ratio(const SmoothingOperator<D> &op, const Mesh<D> &mesh,
                              const PaddedField<D> &u) {
    const Field su = mollify(op, mesh, u);
    const Field u_in = restrict_to_mesh(mesh, u);
    const Field g = restrict_to_mesh(mesh, padded_gradient(u));
    const double gn = nodal_l2(mesh.grid, g);
    return gn > 0.0 ? nodal_l2(mesh.grid, Field(su - u_in)) / (op.epsilon() * gn) : 0.0;
}

template <int D>
double boundary_layer_ratio(const CellFunction<D> &f, double f_norm,
                            const SmoothingOperator<D> &op, const Mesh<D> &mesh,
                            const PaddedField<D> &u) {
    if (f_norm == 0.0) return 0.0;
    const double eps = op.epsilon();
    const PaddedField<D> su = op.smooth(u);
    if (static_cast<double>(su.pad) * op.spacing() < eps * (1.0 - 1e-12))
        throw InsufficientPadding("boundary layer of width eps leaves the padded grid");
    const double vol = cell_volume_weight<D>(op.spacing());
    double acc = 0.0;
    for (Index i = 0; i < su.grid.node_count(); ++i) {
        const Point<D> x = su.grid.node_coord(i);
        if (mesh.domain.boundary_distance(x) >= eps) continue;
        const double fv = f(cell_point<D>(x, eps));
        acc += vol * fv * fv * su.values.segment(i * su.nc, su.nc).squaredNorm();
    }
    const double l2 = nodal_l2(u.grid, u.values);
    const PaddedField<D> g = padded_gradient(u);
    const double h1 = std::sqrt(l2 * l2 + std::pow(nodal_l2(g.grid, g.values), 2));
    const double den = eps * f_norm * f_norm * h1 * l2;
    return den > 0.0 ? acc / den : 0.0;
}

Index layer_padding(double eps, double h) {
    return static_cast<Index>(std::ceil(eps / (2.0 * h) - 1e-9) + std::ceil(eps / h - 1e-9)) + 2;
}

template class Mollifier<2>;
template struct PaddedField<2>;
template class SmoothingOperator<2>;
template PaddedField<2> extend<2>(const Mesh<2> &, const Field &, int, Index);
template Field restrict_to_mesh<2>(const Mesh<2> &, const PaddedField<2> &);
template PaddedField<2> padded_gradient<2>(const PaddedField<2> &);
template Field mollify<2>(const SmoothingOperator<2> &, const Mesh<2> &, const PaddedField<2> &);
template double h2_surrogate<2>(const Grid<2> &, const Field &, int);
template double extension_ratio<2>(const Mesh<2> &, const Field &, int, Index);
template Field oscillatory_term<2>(const Mesh<2> &, const CorrectorSet<2> &, const Field &, double);
template Field corrector_term<2>(const Mesh<2> &, const Field &, const CorrectorSet<2> &, double,
                                 const Mollifier<2> &);
template CutoffFamily<2> build_cutoff<2>(const Mesh<2> &, double, double, double);
template TwoScaleReport remainder_report<2>(const Mesh<2> &, const Field &, const Field &,
                                            const Field &, double, double);
template TwoScaleReport two_scale_report<2>(const Mesh<2> &, const Field &, const Field &,
                                            const CorrectorSet<2> &, double, double,
                                            const Mollifier<2> &);
template double cell_l2_norm<2>(const CellFunction<2> &, int);
template double periodic_weighted_bound_check<2>(const CellFunction<2> &, double,
                                                 const SmoothingOperator<2> &,
                                                 const PaddedField<2> &);
template double smoothing_defect_ratio<2>(const SmoothingOperator<2> &, const Mesh<2> &,
                                          const PaddedField<2> &);
template double boundary_layer_ratio<2>(const CellFunction<2> &, double,
                                        const SmoothingOperator<2> &, const Mesh<2> &,
                                        const PaddedField<2> &);

} // namespace elhom
