#pragma once

#include "biofilm/types.hpp"

#include <array>
#include <functional>

namespace biofilm {

enum class BoundaryTag { GammaMinus, GammaPlus };

/// Oriented boundary edge. (a,b) follow the adjacent triangle's orientation,
/// edge is the global edge index (also the degree-2 midpoint node), tri the
/// adjacent triangle.
struct Facet {
  int a = -1;
  int b = -1;
  int edge = -1;
  int tri = -1;
  int id = -1;  // position in Mesh::facets
  BoundaryTag tag = BoundaryTag::GammaMinus;
};

/// Conforming triangulation of a 2D slice. Vertices, triangles and the
/// unique-edge table are fixed at construction; instances are immutable
/// afterwards and safe to share across threads.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::array<int, 2>> edges;      // unique, each stored with a < b
  std::vector<std::array<int, 3>> tri_edges;  // edge ids for local edges (0,1),(1,2),(2,0)
  std::vector<Facet> facets;
  double h_mesh = 0.0;   // max edge length
  int grid_nx = 0;       // structured-grid extents when built by
  int grid_ny = 0;       // build_strip_mesh (vertex id = j*(nx+1)+i), else 0

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  /// Lagrange node count: vertices for degree 1, vertices + edge midpoints for degree 2.
  int num_nodes(int degree) const {
    return degree == 1 ? num_vertices() : num_vertices() + num_edges();
  }

  Vec2 node_position(int degree, int node) const;
  double triangle_area(int t) const;
  double total_area() const;

  /// Bounding-box extents, used as a cheap domain-diameter estimate.
  Vec2 bbox_min() const;
  Vec2 bbox_max() const;
};

/// Structured triangulation of {0 < x1 < L, 0 < x2 < h0(x1)}: a logically
/// rectangular grid graded by h0, each cell split along the same diagonal.
/// Bottom edges are tagged GammaMinus, top edges GammaPlus; lateral edges
/// take lateral_tag (GammaMinus keeps them on the clamped/Dirichlet side,
/// the default; GammaPlus makes them natural, used by some verification
/// fixtures).
Mesh build_strip_mesh(double length, const std::function<double(double)>& h0, int nx, int ny,
                      BoundaryTag lateral_tag = BoundaryTag::GammaMinus);

/// Outward unit normal of a boundary facet; orientation fixed against the
/// adjacent triangle's centroid.
Vec2 boundary_normal(const Mesh& mesh, const Facet& facet);

/// Minimum over triangles of inradius/circumradius.
double min_triangle_quality(const Mesh& mesh);

/// Invariant checks run at construction: positive areas, watertight boundary,
/// GammaMinus bottom on x2 = 0. Throws InvalidInput on violation.
void validate_mesh(const Mesh& mesh);

}  // namespace biofilm
