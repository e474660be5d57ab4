#include "elhom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace elhom {

std::string face_name(const Face &f) {
    static const char *names[2][2] = {{"left", "right"}, {"bottom", "top"}};
    if (f.axis < 2) return names[f.axis][f.side];
    return "axis" + std::to_string(f.axis) + (f.side ? "+" : "-");
}

Face face_from_name(const std::string &name) {
    if (name == "left") return {0, 0};
    if (name == "right") return {0, 1};
    if (name == "bottom") return {1, 0};
    if (name == "top") return {1, 1};
    throw ConfigError("unknown edge '" + name + "'");
}

template <int D>
DomainSpec<D>::DomainSpec(const Point<D> &lo, const Point<D> &hi) : lower(lo), upper(hi) {
    for (int t = 0; t < D; ++t)
        if (!(upper[t] > lower[t])) throw ConfigError("domain sides must be positive");
}

template <int D>
double DomainSpec<D>::boundary_measure() const {
    const Vec<D> e = extent();
    double m = 0.0;
    for (int t = 0; t < D; ++t) m += 2.0 * e.prod() / e[t];
    return m;
}

template <int D>
Vec<D> DomainSpec<D>::normal(const Face &f) {
    Vec<D> n = Vec<D>::Zero();
    n[f.axis] = f.side ? 1.0 : -1.0;
    return n;
}

template <int D>
double DomainSpec<D>::boundary_distance(const Point<D> &x) const {
    bool inside = true;
    for (int t = 0; t < D; ++t)
        if (x[t] < lower[t] || x[t] > upper[t]) inside = false;
    if (inside) {
        double d = std::numeric_limits<double>::infinity();
        for (int t = 0; t < D; ++t) d = std::min({d, x[t] - lower[t], upper[t] - x[t]});
        return d;
    }
    double s = 0.0;
    for (int t = 0; t < D; ++t) {
        const double o = std::max({lower[t] - x[t], 0.0, x[t] - upper[t]});
        s += o * o;
    }
    return std::sqrt(s);
}

BoundaryPartition BoundaryPartition::from_names(const std::vector<std::string> &names) {
    BoundaryPartition p;
    for (const auto &n : names) {
        const Face f = face_from_name(n);
        if (!p.is_dirichlet(f)) p.dirichlet.push_back(f);
    }
    return p;
}

BoundaryPartition BoundaryPartition::neumann() {
    BoundaryPartition p;
    p.pure_neumann = true;
    return p;
}

bool BoundaryPartition::is_dirichlet(const Face &f) const {
    return std::find(dirichlet.begin(), dirichlet.end(), f) != dirichlet.end();
}

template <int D>
std::vector<Face> Mesh<D>::node_faces(Index node) const {
    std::vector<Face> out;
    const MultiIndex<D> m = grid.node_multi(node);
    for (int t = 0; t < D; ++t) {
        if (m[t] == 0) out.push_back({t, 0});
        if (m[t] == grid.cells[t]) out.push_back({t, 1});
    }
    return out;
}

template <int D>
Mesh<D> build_mesh(const DomainSpec<D> &domain, double h, const BoundaryPartition &partition) {
    if (!(h > 0.0)) throw NonconformingMeshSize("h must be positive");
    if (partition.pure_neumann && !partition.dirichlet.empty())
        throw ConfigError("a pure Neumann partition cannot list Dirichlet edges");
    Mesh<D> mesh;
    mesh.domain = domain;
    mesh.h = h;
    mesh.partition = partition;
    MultiIndex<D> cells;
    for (int t = 0; t < D; ++t) {
        const double r = domain.extent()[t] / h;
        const double k = std::round(r);
        if (k < 1.0 || std::abs(r - k) > 1e-9 * std::max(1.0, r))
            throw NonconformingMeshSize("side " + std::to_string(domain.extent()[t]) +
                                        " is not a multiple of h = " + std::to_string(h));
        cells[t] = static_cast<Index>(k);
    }
    mesh.grid = Grid<D>::box(domain.lower, cells, Vec<D>::Constant(h));
    mesh.tags.assign(mesh.grid.node_count(), NodeTag::interior);
    for (Index i = 0; i < mesh.grid.node_count(); ++i) {
        const auto faces = mesh.node_faces(i);
        if (faces.empty()) continue;
        mesh.tags[i] = NodeTag::neumann;
        for (const auto &f : faces)
            if (partition.is_dirichlet(f)) mesh.tags[i] = NodeTag::dirichlet;
    }
    return mesh;
}

template <int D>
Field distance_field(const Mesh<D> &mesh) {
    Field d(mesh.node_count());
    for (Index i = 0; i < mesh.node_count(); ++i) {
        const MultiIndex<D> m = mesh.grid.node_multi(i);
        // integer bookkeeping keeps boundary nodes at exactly zero
        Index k = std::numeric_limits<Index>::max();
        for (int t = 0; t < D; ++t) k = std::min({k, m[t], mesh.grid.cells[t] - m[t]});
        d[i] = static_cast<double>(k) * mesh.h;
    }
    return d;
}

template <int D>
std::vector<Index> layer_elements(const Mesh<D> &mesh, double width) {
    if (!(width > 0.0)) throw ConfigError("layer width must be positive");
    std::vector<Index> out;
    for (Index e = 0; e < mesh.element_count(); ++e)
        if (mesh.domain.boundary_distance(mesh.grid.element_centroid(e)) < width) out.push_back(e);
    return out;
}

template struct DomainSpec<2>;
template struct Mesh<2>;
template Mesh<2> build_mesh<2>(const DomainSpec<2> &, double, const BoundaryPartition &);
template Field distance_field<2>(const Mesh<2> &);
template std::vector<Index> layer_elements<2>(const Mesh<2> &, double);

} // namespace elhom
