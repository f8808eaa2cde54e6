#include "biofilm/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace biofilm {

namespace {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

Vec2 Mesh::node_position(int degree, int node) const {
  if (degree == 1 || node < num_vertices()) return vertices[node];
  const auto& e = edges[node - num_vertices()];
  return 0.5 * (vertices[e[0]] + vertices[e[1]]);
}

double Mesh::triangle_area(int t) const {
  const auto& tri = triangles[t];
  return signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
}

double Mesh::total_area() const {
  double a = 0.0;
  for (int t = 0; t < num_triangles(); ++t) a += triangle_area(t);
  return a;
}

Vec2 Mesh::bbox_min() const {
  Vec2 m = vertices.front();
  for (const auto& v : vertices) m = m.cwiseMin(v);
  return m;
}

Vec2 Mesh::bbox_max() const {
  Vec2 m = vertices.front();
  for (const auto& v : vertices) m = m.cwiseMax(v);
  return m;
}

namespace {

// Builds the unique-edge table and per-triangle edge ids. Edges are keyed by
// the sorted vertex pair, numbered in first-appearance order so two builds of
// the same mesh are identical.
void build_edges(Mesh& mesh) {
  std::map<std::pair<int, int>, int> index;
  mesh.tri_edges.resize(mesh.triangles.size());
  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      int a = tri[k], b = tri[(k + 1) % 3];
      auto key = std::minmax(a, b);
      auto it = index.find(key);
      if (it == index.end()) {
        it = index.emplace(key, static_cast<int>(mesh.edges.size())).first;
        mesh.edges.push_back({key.first, key.second});
      }
      mesh.tri_edges[t][k] = it->second;
    }
  }
  double h = 0.0;
  for (const auto& e : mesh.edges)
    h = std::max(h, (mesh.vertices[e[0]] - mesh.vertices[e[1]]).norm());
  mesh.h_mesh = h;
}

int find_edge(const Mesh& mesh, int a, int b) {
  auto key = std::minmax(a, b);
  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      int u = tri[k], v = tri[(k + 1) % 3];
      if (std::minmax(u, v) == key) return mesh.tri_edges[t][k];
    }
  }
  return -1;
}

int adjacent_triangle(const Mesh& mesh, int a, int b) {
  auto key = std::minmax(a, b);
  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      if (std::minmax(tri[k], tri[(k + 1) % 3]) == key) return static_cast<int>(t);
    }
  }
  return -1;
}

}  // namespace

Mesh build_strip_mesh(double length, const std::function<double(double)>& h0, int nx, int ny,
                      BoundaryTag lateral_tag) {
  if (length <= 0.0) throw InvalidInput("build_strip_mesh: length must be positive");
  if (nx < 2 || ny < 2) throw InvalidInput("build_strip_mesh: nx and ny must be at least 2");

  Mesh mesh;
  mesh.grid_nx = nx;
  mesh.grid_ny = ny;
  mesh.vertices.reserve(static_cast<size_t>(nx + 1) * (ny + 1));
  std::vector<double> heights(nx + 1);
  for (int i = 0; i <= nx; ++i) {
    double x1 = length * static_cast<double>(i) / nx;
    double h = h0(x1);
    if (!(h > 0.0)) {
      std::ostringstream os;
      os << "build_strip_mesh: height profile non-positive at x1=" << x1 << " (h=" << h << ")";
      throw InvalidInput(os.str());
    }
    heights[i] = h;
  }
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      double x1 = length * static_cast<double>(i) / nx;
      double x2 = heights[i] * static_cast<double>(j) / ny;
      mesh.vertices.emplace_back(x1, x2);
    }

  mesh.triangles.reserve(static_cast<size_t>(2) * nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      mesh.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      mesh.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }

  build_edges(mesh);

  auto push_facet = [&mesh](int a, int b, BoundaryTag tag) {
    Facet f;
    f.a = a;
    f.b = b;
    f.edge = find_edge(mesh, a, b);
    f.tri = adjacent_triangle(mesh, a, b);
    f.id = static_cast<int>(mesh.facets.size());
    f.tag = tag;
    mesh.facets.push_back(f);
  };
  for (int i = 0; i < nx; ++i) push_facet(vid(i, 0), vid(i + 1, 0), BoundaryTag::GammaMinus);
  for (int j = 0; j < ny; ++j) push_facet(vid(nx, j), vid(nx, j + 1), lateral_tag);
  for (int i = 0; i < nx; ++i) push_facet(vid(i, ny), vid(i + 1, ny), BoundaryTag::GammaPlus);
  for (int j = 0; j < ny; ++j) push_facet(vid(0, j), vid(0, j + 1), lateral_tag);

  validate_mesh(mesh);
  return mesh;
}

Vec2 boundary_normal(const Mesh& mesh, const Facet& facet) {
  Vec2 a = mesh.vertices[facet.a];
  Vec2 b = mesh.vertices[facet.b];
  Vec2 e = b - a;
  double len = e.norm();
  if (len <= 0.0) throw InvalidInput("boundary_normal: zero-length facet edge");
  Vec2 n(e.y() / len, -e.x() / len);
  const auto& tri = mesh.triangles[facet.tri];
  Vec2 centroid = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
  if (n.dot(centroid - 0.5 * (a + b)) > 0.0) n = -n;
  return n;
}

double min_triangle_quality(const Mesh& mesh) {
  double q = 1.0;
  for (const auto& tri : mesh.triangles) {
    double a = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]]).norm();
    double b = (mesh.vertices[tri[2]] - mesh.vertices[tri[1]]).norm();
    double c = (mesh.vertices[tri[0]] - mesh.vertices[tri[2]]).norm();
    double s = 0.5 * (a + b + c);
    double area = std::abs(signed_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                       mesh.vertices[tri[2]]));
    double inradius = area / s;
    double circumradius = a * b * c / (4.0 * area);
    q = std::min(q, inradius / circumradius);
  }
  return q;
}

void validate_mesh(const Mesh& mesh) {
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.triangle_area(t) <= 0.0) {
      std::ostringstream os;
      os << "mesh: triangle " << t << " has non-positive signed area";
      throw InvalidInput(os.str());
    }
  }
  // Watertight boundary: every facet vertex is shared by exactly two facets.
  std::map<int, int> degree;
  for (const auto& f : mesh.facets) {
    degree[f.a]++;
    degree[f.b]++;
    if (f.edge < 0 || f.tri < 0) throw InvalidInput("mesh: facet not attached to a triangle");
  }
  for (const auto& [v, d] : degree) {
    if (d != 2) {
      std::ostringstream os;
      os << "mesh: boundary is not watertight at vertex " << v;
      throw InvalidInput(os.str());
    }
  }
  // Bottom facets must lie on x2 = 0 when tagged GammaMinus and horizontal.
  for (const auto& f : mesh.facets) {
    bool horizontal_bottom = std::abs(mesh.vertices[f.a].y()) < 1e-14 &&
                             std::abs(mesh.vertices[f.b].y()) < 1e-14;
    if (horizontal_bottom && f.tag != BoundaryTag::GammaMinus)
      throw InvalidInput("mesh: bottom facet not tagged GammaMinus");
  }
}

}  // namespace biofilm
