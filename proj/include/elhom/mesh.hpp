#pragma once

#include <string>
#include <vector>

#include "elhom/grid.hpp"

namespace elhom {

/// A face of the box: axis and side (0 lower, 1 upper). In two dimensions
/// the faces are named left/right (axis 0) and bottom/top (axis 1).
struct Face {
    int axis = 0;
    int side = 0;
    bool operator==(const Face &) const = default;
};

std::string face_name(const Face &f);
Face face_from_name(const std::string &name);

template <int D>
struct DomainSpec {
    Point<D> lower = Point<D>::Zero();
    Point<D> upper = Point<D>::Ones();

    DomainSpec() = default;
    DomainSpec(const Point<D> &lo, const Point<D> &hi);
    Vec<D> extent() const { return upper - lower; }
    double volume() const { return extent().prod(); }
    double boundary_measure() const;
    /// Outward unit normal of a face.
    static Vec<D> normal(const Face &f);
    /// dist(x, boundary) for any x (inside or outside).
    double boundary_distance(const Point<D> &x) const;
};

struct BoundaryPartition {
    std::vector<Face> dirichlet;
    bool pure_neumann = false;

    static BoundaryPartition from_names(const std::vector<std::string> &dirichlet_names);
    static BoundaryPartition neumann();
    bool is_dirichlet(const Face &f) const;
};

enum class NodeTag : char { interior, dirichlet, neumann };

template <int D>
struct Mesh {
    DomainSpec<D> domain;
    double h = 0.0;
    Grid<D> grid;
    BoundaryPartition partition;
    std::vector<NodeTag> tags;

    Index node_count() const { return grid.node_count(); }
    Index element_count() const { return grid.element_count(); }
    Point<D> node(Index i) const { return grid.node_coord(i); }
    std::array<Index, Grid<D>::kElementNodes> element(Index e) const {
        return grid.element_nodes(e);
    }
    /// Faces of the box the node lies on.
    std::vector<Face> node_faces(Index node) const;
};

/// Uniform mesh; throws NonconformingMeshSize unless h divides every side.
template <int D>
Mesh<D> build_mesh(const DomainSpec<D> &domain, double h, const BoundaryPartition &partition = {});

/// Exact nodal distance to the boundary.
template <int D>
Field distance_field(const Mesh<D> &mesh);

/// Elements whose centroid lies within `width` of the boundary.
template <int D>
std::vector<Index> layer_elements(const Mesh<D> &mesh, double width);

} // namespace elhom
