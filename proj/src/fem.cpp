#include "biofilm/fem.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace biofilm {

namespace {

// --- Triangle quadrature, barycentric points with weights summing to 1 ---

struct TriQuadPoint {
  Vec3 bary;
  double weight;
};

const std::vector<TriQuadPoint>& tri_rule(int degree) {
  static const std::vector<TriQuadPoint> rule3 = {
      {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0}, 1.0 / 3.0},
      {{1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0}, 1.0 / 3.0},
      {{1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}, 1.0 / 3.0},
  };
  static const std::vector<TriQuadPoint> rule7 = [] {
    const double s15 = std::sqrt(15.0);
    const double a1 = (6.0 - s15) / 21.0, w1 = (155.0 - s15) / 1200.0;
    const double a2 = (6.0 + s15) / 21.0, w2 = (155.0 + s15) / 1200.0;
    std::vector<TriQuadPoint> r;
    r.push_back({{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 9.0 / 40.0});
    r.push_back({{1.0 - 2.0 * a1, a1, a1}, w1});
    r.push_back({{a1, 1.0 - 2.0 * a1, a1}, w1});
    r.push_back({{a1, a1, 1.0 - 2.0 * a1}, w1});
    r.push_back({{1.0 - 2.0 * a2, a2, a2}, w2});
    r.push_back({{a2, 1.0 - 2.0 * a2, a2}, w2});
    r.push_back({{a2, a2, 1.0 - 2.0 * a2}, w2});
    return r;
  }();
  return degree == 1 ? rule3 : rule7;
}

// 3-point Gauss on [0,1], weights summing to 1.
struct EdgeQuadPoint {
  double s;
  double weight;
};

const std::array<EdgeQuadPoint, 3>& edge_rule() {
  static const std::array<EdgeQuadPoint, 3> rule = [] {
    const double g = 0.5 * std::sqrt(3.0 / 5.0);
    return std::array<EdgeQuadPoint, 3>{
        EdgeQuadPoint{0.5 - g, 5.0 / 18.0},
        EdgeQuadPoint{0.5, 8.0 / 18.0},
        EdgeQuadPoint{0.5 + g, 5.0 / 18.0},
    };
  }();
  return rule;
}

// --- Element geometry and Lagrange bases ---

struct ElementFrame {
  std::array<Vec2, 3> p;
  double area;
  std::array<Vec2, 3> grad_lambda;
};

ElementFrame element_frame(const Mesh& mesh, int t) {
  ElementFrame fr;
  const auto& tri = mesh.triangles[t];
  for (int k = 0; k < 3; ++k) fr.p[k] = mesh.vertices[tri[k]];
  fr.area = 0.5 * ((fr.p[1].x() - fr.p[0].x()) * (fr.p[2].y() - fr.p[0].y()) -
                   (fr.p[2].x() - fr.p[0].x()) * (fr.p[1].y() - fr.p[0].y()));
  for (int k = 0; k < 3; ++k) {
    Vec2 e = fr.p[(k + 2) % 3] - fr.p[(k + 1) % 3];
    fr.grad_lambda[k] = Vec2(-e.y(), e.x()) / (2.0 * fr.area);
  }
  return fr;
}

int local_dofs(int degree) { return degree == 1 ? 3 : 6; }

void basis_values(int degree, const Vec3& bary, double* N) {
  if (degree == 1) {
    for (int k = 0; k < 3; ++k) N[k] = bary[k];
    return;
  }
  for (int k = 0; k < 3; ++k) N[k] = bary[k] * (2.0 * bary[k] - 1.0);
  N[3] = 4.0 * bary[0] * bary[1];
  N[4] = 4.0 * bary[1] * bary[2];
  N[5] = 4.0 * bary[2] * bary[0];
}

void basis_gradients(int degree, const ElementFrame& fr, const Vec3& bary, Vec2* G) {
  if (degree == 1) {
    for (int k = 0; k < 3; ++k) G[k] = fr.grad_lambda[k];
    return;
  }
  for (int k = 0; k < 3; ++k) G[k] = (4.0 * bary[k] - 1.0) * fr.grad_lambda[k];
  G[3] = 4.0 * (bary[0] * fr.grad_lambda[1] + bary[1] * fr.grad_lambda[0]);
  G[4] = 4.0 * (bary[1] * fr.grad_lambda[2] + bary[2] * fr.grad_lambda[1]);
  G[5] = 4.0 * (bary[2] * fr.grad_lambda[0] + bary[0] * fr.grad_lambda[2]);
}

int global_node(const Mesh& mesh, int /*degree*/, int t, int local) {
  if (local < 3) return mesh.triangles[t][local];
  return mesh.num_vertices() + mesh.tri_edges[t][local - 3];
}

Vec2 physical_point(const ElementFrame& fr, const Vec3& bary) {
  return bary[0] * fr.p[0] + bary[1] * fr.p[1] + bary[2] * fr.p[2];
}

// Facet trace nodes: endpoint nodes plus, for degree 2, the midpoint node.
// Trace basis at parameter s along (a -> b).
void facet_nodes(const Mesh& mesh, const Facet& f, int degree, int* nodes, int* count) {
  nodes[0] = f.a;
  nodes[1] = f.b;
  *count = 2;
  if (degree == 2) {
    nodes[2] = mesh.num_vertices() + f.edge;
    *count = 3;
  }
}

void facet_basis(int degree, double s, double* N) {
  if (degree == 1) {
    N[0] = 1.0 - s;
    N[1] = s;
    return;
  }
  N[0] = (1.0 - s) * (1.0 - 2.0 * s);
  N[1] = s * (2.0 * s - 1.0);
  N[2] = 4.0 * s * (1.0 - s);
}

bool facet_selected(const Facet& f, BoundarySelector where) {
  switch (where) {
    case BoundarySelector::GammaMinus: return f.tag == BoundaryTag::GammaMinus;
    case BoundarySelector::GammaPlus: return f.tag == BoundaryTag::GammaPlus;
    case BoundarySelector::All: return true;
  }
  return false;
}

void rebuild_constrained(SparseSystem& sys) {
  const int n = sys.num_dofs();
  std::vector<char> fixed(n, 0);
  std::vector<double> value(n, 0.0);
  for (size_t k = 0; k < sys.constrained_dofs.size(); ++k) {
    fixed[sys.constrained_dofs[k]] = 1;
    value[sys.constrained_dofs[k]] = sys.constrained_values[k];
  }
  sys.rhs = sys.rhs_unconstrained;
  std::vector<Triplet> kept;
  kept.reserve(sys.triplets.size() + sys.constrained_dofs.size());
  for (const auto& tr : sys.triplets) {
    if (fixed[tr.row()]) continue;
    if (fixed[tr.col()]) {
      sys.rhs[tr.row()] -= tr.value() * value[tr.col()];
      continue;
    }
    kept.push_back(tr);
  }
  for (int d : sys.constrained_dofs) {
    kept.emplace_back(d, d, 1.0);
    sys.rhs[d] = value[d];
  }
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(kept.begin(), kept.end());
  sys.matrix.makeCompressed();
}

void add_constraints(SparseSystem& sys, const Mesh& mesh, BoundarySelector where,
                     const std::function<VecX(const Vec2&)>& value, int comps) {
  std::map<int, double> wanted;
  for (size_t k = 0; k < sys.constrained_dofs.size(); ++k)
    wanted[sys.constrained_dofs[k]] = sys.constrained_values[k];
  for (const auto& f : mesh.facets) {
    if (!facet_selected(f, where)) continue;
    int nodes[3], count;
    facet_nodes(mesh, f, sys.degree, nodes, &count);
    for (int i = 0; i < count; ++i) {
      Vec2 x = mesh.node_position(sys.degree, nodes[i]);
      VecX v = value(x);
      for (int c = 0; c < comps; ++c) {
        int dof = comps * nodes[i] + c;
        auto it = wanted.find(dof);
        if (it != wanted.end()) {
          if (std::abs(it->second - v[c]) > 1e-12 * (1.0 + std::abs(v[c]))) {
            std::ostringstream os;
            os << "apply_dirichlet: conflicting values at node " << nodes[i] << " component "
               << c << " (" << it->second << " vs " << v[c] << ")";
            throw InvalidInput(os.str());
          }
        } else {
          wanted[dof] = v[c];
        }
      }
    }
  }
  sys.constrained_dofs.clear();
  sys.constrained_values.resize(static_cast<Eigen::Index>(wanted.size()));
  int k = 0;
  for (const auto& [dof, v] : wanted) {
    sys.constrained_dofs.push_back(dof);
    sys.constrained_values[k++] = v;
  }
  rebuild_constrained(sys);
}

}  // namespace

// --- Field ---

Field Field::on(const Mesh& other) const {
  if (other.num_nodes(degree) != mesh->num_nodes(degree))
    throw InvalidInput("Field::on: meshes have different node counts");
  Field f = *this;
  f.mesh = &other;
  return f;
}

Field make_field(const Mesh& mesh, FieldRank rank, int degree) {
  Field f;
  f.mesh = &mesh;
  f.rank = rank;
  f.degree = degree;
  f.coeffs = VecX::Zero(static_cast<Eigen::Index>(mesh.num_nodes(degree)) * f.components());
  return f;
}

Field interpolate(const Mesh& mesh, int degree, const std::function<double(const Vec2&)>& fn) {
  Field f = make_field(mesh, FieldRank::Scalar, degree);
  for (int n = 0; n < f.num_nodes(); ++n) f.coeffs[n] = fn(mesh.node_position(degree, n));
  return f;
}

Field interpolate(const Mesh& mesh, int degree, const std::function<Vec2(const Vec2&)>& fn) {
  Field f = make_field(mesh, FieldRank::Vector2, degree);
  for (int n = 0; n < f.num_nodes(); ++n) {
    Vec2 v = fn(mesh.node_position(degree, n));
    f.coeffs[2 * n] = v.x();
    f.coeffs[2 * n + 1] = v.y();
  }
  return f;
}

double eval_scalar(const Field& f, int tri, const Vec3& bary) {
  double N[6];
  basis_values(f.degree, bary, N);
  double v = 0.0;
  for (int i = 0; i < local_dofs(f.degree); ++i)
    v += N[i] * f.coeffs[global_node(*f.mesh, f.degree, tri, i)];
  return v;
}

Vec2 eval_vector(const Field& f, int tri, const Vec3& bary) {
  double N[6];
  basis_values(f.degree, bary, N);
  Vec2 v = Vec2::Zero();
  for (int i = 0; i < local_dofs(f.degree); ++i) {
    int n = global_node(*f.mesh, f.degree, tri, i);
    v.x() += N[i] * f.coeffs[2 * n];
    v.y() += N[i] * f.coeffs[2 * n + 1];
  }
  return v;
}

Vec2 eval_scalar_gradient(const Field& f, int tri, const Vec3& bary) {
  ElementFrame fr = element_frame(*f.mesh, tri);
  Vec2 G[6];
  basis_gradients(f.degree, fr, bary, G);
  Vec2 g = Vec2::Zero();
  for (int i = 0; i < local_dofs(f.degree); ++i)
    g += G[i] * f.coeffs[global_node(*f.mesh, f.degree, tri, i)];
  return g;
}

Mat2 eval_vector_gradient(const Field& f, int tri, const Vec3& bary) {
  ElementFrame fr = element_frame(*f.mesh, tri);
  Vec2 G[6];
  basis_gradients(f.degree, fr, bary, G);
  Mat2 g = Mat2::Zero();
  for (int i = 0; i < local_dofs(f.degree); ++i) {
    int n = global_node(*f.mesh, f.degree, tri, i);
    for (int c = 0; c < 2; ++c) {
      g(c, 0) += G[i].x() * f.coeffs[2 * n + c];
      g(c, 1) += G[i].y() * f.coeffs[2 * n + c];
    }
  }
  return g;
}

double eval_divergence(const Field& f, int tri, const Vec3& bary) {
  Mat2 g = eval_vector_gradient(f, tri, bary);
  return g(0, 0) + g(1, 1);
}

std::array<Mat2, 2> eval_vector_hessian(const Field& f, int tri) {
  std::array<Mat2, 2> H = {Mat2::Zero(), Mat2::Zero()};
  if (f.degree == 1) return H;
  ElementFrame fr = element_frame(*f.mesh, tri);
  // Hessians of the quadratic basis: 4 gl_i gl_i^T at vertex i,
  // 4 (gl_i gl_j^T + gl_j gl_i^T) on the edge (i, j).
  Mat2 HN[6];
  for (int k = 0; k < 3; ++k)
    HN[k] = 4.0 * fr.grad_lambda[k] * fr.grad_lambda[k].transpose();
  auto edge_h = [&fr](int i, int j) {
    return Mat2(4.0 * (fr.grad_lambda[i] * fr.grad_lambda[j].transpose() +
                       fr.grad_lambda[j] * fr.grad_lambda[i].transpose()));
  };
  HN[3] = edge_h(0, 1);
  HN[4] = edge_h(1, 2);
  HN[5] = edge_h(2, 0);
  for (int i = 0; i < 6; ++i) {
    int n = global_node(*f.mesh, 2, tri, i);
    for (int c = 0; c < 2; ++c) H[c] += f.coeffs[2 * n + c] * HN[i];
  }
  return H;
}

// --- Coefficients ---

ScalarCoeff constant_coeff(double v) {
  return [v](int, const Vec2&) { return v; };
}
VectorCoeff constant_coeff(const Vec2& v) {
  return [v](int, const Vec2&) { return v; };
}
MatrixCoeff constant_coeff(const Mat2& m) {
  return [m](int, const Vec2&) { return m; };
}
ScalarCoeff function_coeff(std::function<double(const Vec2&)> fn) {
  return [fn = std::move(fn)](int, const Vec2& x) { return fn(x); };
}
VectorCoeff function_coeff(std::function<Vec2(const Vec2&)> fn) {
  return [fn = std::move(fn)](int, const Vec2& x) { return fn(x); };
}
MatrixCoeff function_coeff(std::function<Mat2(const Vec2&)> fn) {
  return [fn = std::move(fn)](int, const Vec2& x) { return fn(x); };
}

namespace {

Vec3 barycentric(const ElementFrame& fr, const Vec2& x) {
  // Inverse of the affine map; exact for straight triangles.
  Mat2 T;
  T.col(0) = fr.p[1] - fr.p[0];
  T.col(1) = fr.p[2] - fr.p[0];
  Vec2 ab = T.inverse() * (x - fr.p[0]);
  return Vec3(1.0 - ab.x() - ab.y(), ab.x(), ab.y());
}

}  // namespace

ScalarCoeff field_coeff(const Field& f) {
  const Field* fp = &f;
  return [fp](int tri, const Vec2& x) {
    return eval_scalar(*fp, tri, barycentric(element_frame(*fp->mesh, tri), x));
  };
}

VectorCoeff field_vector_coeff(const Field& f) {
  const Field* fp = &f;
  return [fp](int tri, const Vec2& x) {
    return eval_vector(*fp, tri, barycentric(element_frame(*fp->mesh, tri), x));
  };
}

ScalarCoeff field_divergence_coeff(const Field& f) {
  const Field* fp = &f;
  return [fp](int tri, const Vec2& x) {
    return eval_divergence(*fp, tri, barycentric(element_frame(*fp->mesh, tri), x));
  };
}

VectorCoeff field_gradient_coeff(const Field& f, double scale) {
  const Field* fp = &f;
  return [fp, scale](int tri, const Vec2& x) {
    return Vec2(scale *
                eval_scalar_gradient(*fp, tri, barycentric(element_frame(*fp->mesh, tri), x)));
  };
}

// --- Assembly ---

SparseSystem assemble_scalar(const Mesh& mesh, int degree, const MatrixCoeff& A,
                             const VectorCoeff& b, const ScalarCoeff& c_react,
                             const ScalarCoeff& f, const ScalarFormOptions& options) {
  SparseSystem sys;
  sys.rank = FieldRank::Scalar;
  sys.degree = degree;
  const int n = mesh.num_nodes(degree);
  sys.rhs_unconstrained = VecX::Zero(n);
  sys.symmetric = !static_cast<bool>(b);
  const int nd = local_dofs(degree);
  const auto& rule = tri_rule(degree);
  bool warned_indefinite = false;

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    ElementFrame fr = element_frame(mesh, t);
    double Ke[6][6] = {};
    double Fe[6] = {};
    for (const auto& qp : rule) {
      double w = qp.weight * fr.area;
      Vec2 x = physical_point(fr, qp.bary);
      double N[6];
      Vec2 G[6];
      basis_values(degree, qp.bary, N);
      basis_gradients(degree, fr, qp.bary, G);
      Mat2 Aq = A ? A(t, x) : Mat2::Zero();
      if (A && !warned_indefinite) {
        Mat2 sym = 0.5 * (Aq + Aq.transpose());
        double tr = sym.trace(), det = sym.determinant();
        if (det < -1e-14 || (tr < 0.0 && std::abs(det) > 1e-14)) {
          sys.warnings.push_back("assemble_scalar: indefinite diffusion tensor sample");
          warned_indefinite = true;
        }
      }
      Vec2 bq = b ? b(t, x) : Vec2::Zero();
      double cq = c_react ? c_react(t, x) : 0.0;
      double fq = f ? f(t, x) : 0.0;
      for (int i = 0; i < nd; ++i) {
        for (int j = 0; j < nd; ++j) {
          double v = G[i].dot(Aq * G[j]) + cq * N[i] * N[j];
          if (b) {
            v += options.convection_form == ConvectionForm::Gradient ? bq.dot(G[j]) * N[i]
                                                                     : N[j] * bq.dot(G[i]);
          }
          Ke[i][j] += w * v;
        }
        Fe[i] += w * fq * N[i];
        if (options.grad_source) Fe[i] += w * (*options.grad_source)(t, x).dot(G[i]);
      }
    }
    for (int i = 0; i < nd; ++i) {
      int gi = global_node(mesh, degree, t, i);
      sys.rhs_unconstrained[gi] += Fe[i];
      for (int j = 0; j < nd; ++j)
        sys.triplets.emplace_back(gi, global_node(mesh, degree, t, j), Ke[i][j]);
    }
  }

  if (options.robin) {
    const auto& robin = *options.robin;
    for (const auto& facet : mesh.facets) {
      if (!facet_selected(facet, robin.where)) continue;
      Vec2 nrm = boundary_normal(mesh, facet);
      double len = (mesh.vertices[facet.b] - mesh.vertices[facet.a]).norm();
      int nodes[3], count;
      facet_nodes(mesh, facet, degree, nodes, &count);
      double Kf[3][3] = {};
      double Ff[3] = {};
      int q = 0;
      for (const auto& eq : edge_rule()) {
        double wq = eq.weight * len;
        Vec2 x = mesh.vertices[facet.a] + eq.s * (mesh.vertices[facet.b] - mesh.vertices[facet.a]);
        double N[3];
        facet_basis(degree, eq.s, N);
        double beta = robin.beta ? robin.beta(facet, q, x, nrm) : 0.0;
        double load = robin.load ? (*robin.load)(facet, q, x, nrm) : 0.0;
        for (int i = 0; i < count; ++i) {
          for (int j = 0; j < count; ++j) Kf[i][j] += wq * beta * N[i] * N[j];
          Ff[i] += wq * load * N[i];
        }
        ++q;
      }
      for (int i = 0; i < count; ++i) {
        sys.rhs_unconstrained[nodes[i]] += Ff[i];
        for (int j = 0; j < count; ++j) sys.triplets.emplace_back(nodes[i], nodes[j], Kf[i][j]);
      }
    }
  }

  sys.unconstrained.resize(n, n);
  sys.unconstrained.setFromTriplets(sys.triplets.begin(), sys.triplets.end());
  sys.unconstrained.makeCompressed();
  sys.matrix = sys.unconstrained;
  sys.rhs = sys.rhs_unconstrained;
  return sys;
}

SparseSystem assemble_elasticity(const Mesh& mesh, int degree, const ElasticConstants& ec,
                                 const ElasticityLoads& loads) {
  if (!(ec.mu > 0.0) || ec.lambda < 0.0)
    throw InvalidInput("assemble_elasticity: require mu > 0 and lambda >= 0");
  SparseSystem sys;
  sys.rank = FieldRank::Vector2;
  sys.degree = degree;
  const int n = 2 * mesh.num_nodes(degree);
  sys.rhs_unconstrained = VecX::Zero(n);
  sys.symmetric = true;
  const int nd = local_dofs(degree);
  const auto& rule = tri_rule(degree);

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    ElementFrame fr = element_frame(mesh, t);
    double Ke[12][12] = {};
    double Fe[12] = {};
    for (const auto& qp : rule) {
      double w = qp.weight * fr.area;
      Vec2 x = physical_point(fr, qp.bary);
      double N[6];
      Vec2 G[6];
      basis_values(degree, qp.bary, N);
      basis_gradients(degree, fr, qp.bary, G);
      Vec2 bodyq = loads.body ? (*loads.body)(t, x) : Vec2::Zero();
      double pq = loads.pressure ? (*loads.pressure)(t, x) : 0.0;
      for (int a = 0; a < nd; ++a) {
        for (int bI = 0; bI < nd; ++bI) {
          double gg = G[a].dot(G[bI]);
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
              double v = ec.lambda * G[a][i] * G[bI][j] + ec.mu * G[a][j] * G[bI][i];
              if (i == j) v += ec.mu * gg;
              Ke[2 * a + i][2 * bI + j] += w * v;
            }
        }
        for (int i = 0; i < 2; ++i) {
          if (loads.body) Fe[2 * a + i] += w * bodyq[i] * N[a];
          if (loads.pressure) Fe[2 * a + i] += w * pq * G[a][i];
        }
      }
    }
    for (int a = 0; a < nd; ++a) {
      int ga = global_node(mesh, degree, t, a);
      for (int i = 0; i < 2; ++i) {
        sys.rhs_unconstrained[2 * ga + i] += Fe[2 * a + i];
        for (int bI = 0; bI < nd; ++bI) {
          int gb = global_node(mesh, degree, t, bI);
          for (int j = 0; j < 2; ++j)
            sys.triplets.emplace_back(2 * ga + i, 2 * gb + j, Ke[2 * a + i][2 * bI + j]);
        }
      }
    }
  }

  if (loads.traction) {
    for (const auto& facet : mesh.facets) {
      if (facet.tag != BoundaryTag::GammaPlus) continue;
      Vec2 nrm = boundary_normal(mesh, facet);
      double len = (mesh.vertices[facet.b] - mesh.vertices[facet.a]).norm();
      int nodes[3], count;
      facet_nodes(mesh, facet, degree, nodes, &count);
      double Ff[3][2] = {};
      int q = 0;
      for (const auto& eq : edge_rule()) {
        double wq = eq.weight * len;
        Vec2 x = mesh.vertices[facet.a] + eq.s * (mesh.vertices[facet.b] - mesh.vertices[facet.a]);
        double N[3];
        facet_basis(degree, eq.s, N);
        Vec2 g = (*loads.traction)(facet, q, x, nrm);
        for (int i = 0; i < count; ++i) {
          Ff[i][0] += wq * g.x() * N[i];
          Ff[i][1] += wq * g.y() * N[i];
        }
        ++q;
      }
      for (int i = 0; i < count; ++i) {
        sys.rhs_unconstrained[2 * nodes[i]] += Ff[i][0];
        sys.rhs_unconstrained[2 * nodes[i] + 1] += Ff[i][1];
      }
    }
  }

  sys.unconstrained.resize(n, n);
  sys.unconstrained.setFromTriplets(sys.triplets.begin(), sys.triplets.end());
  sys.unconstrained.makeCompressed();
  sys.matrix = sys.unconstrained;
  sys.rhs = sys.rhs_unconstrained;
  return sys;
}

// --- Dirichlet constraints ---

void apply_dirichlet(SparseSystem& system, const Mesh& mesh, BoundarySelector where,
                     const std::function<double(const Vec2&)>& value) {
  if (system.rank != FieldRank::Scalar)
    throw InvalidInput("apply_dirichlet: scalar value on a vector system");
  add_constraints(
      system, mesh, where,
      [&value](const Vec2& x) {
        VecX v(1);
        v[0] = value(x);
        return v;
      },
      1);
}

void apply_dirichlet(SparseSystem& system, const Mesh& mesh, BoundarySelector where,
                     const std::function<Vec2(const Vec2&)>& value) {
  if (system.rank != FieldRank::Vector2)
    throw InvalidInput("apply_dirichlet: vector value on a scalar system");
  add_constraints(
      system, mesh, where,
      [&value](const Vec2& x) {
        VecX v(2);
        Vec2 g = value(x);
        v[0] = g.x();
        v[1] = g.y();
        return v;
      },
      2);
}

void apply_dirichlet(SparseSystem& system, const Mesh& mesh, BoundarySelector where, double value) {
  if (system.rank == FieldRank::Scalar) {
    apply_dirichlet(system, mesh, where, [value](const Vec2&) { return value; });
  } else {
    apply_dirichlet(system, mesh, where,
                    std::function<Vec2(const Vec2&)>([value](const Vec2&) {
                      return Vec2(value, value);
                    }));
  }
}

// --- Linear solvers ---

namespace {

VecX jacobi_diagonal(const SparseMat& A) {
  VecX d = A.diagonal();
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d[i] == 0.0) d[i] = 1.0;
  return d;
}

bool conjugate_gradient(const SparseMat& A, const VecX& b, VecX& x, SolveReport& rep) {
  const double tol = 1e-10;
  const int cap = 20000;
  const double bnorm = b.norm();
  x = VecX::Zero(b.size());
  if (bnorm == 0.0) {
    rep.relative_residual = 0.0;
    return true;
  }
  VecX d = jacobi_diagonal(A);
  VecX r = b;
  VecX z = r.cwiseQuotient(d);
  VecX p = z;
  double rz = r.dot(z);
  for (int it = 0; it < cap; ++it) {
    VecX q = A * p;
    double pq = p.dot(q);
    if (pq == 0.0) break;
    double alpha = rz / pq;
    x += alpha * p;
    r -= alpha * q;
    double res = r.norm() / bnorm;
    rep.history.push_back(res);
    rep.iterations = it + 1;
    rep.relative_residual = res;
    if (res < tol) return true;
    z = r.cwiseQuotient(d);
    double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return false;
}

bool bicgstab(const SparseMat& A, const VecX& b, VecX& x, SolveReport& rep) {
  const double tol = 1e-10;
  const int cap = 20000;
  const double bnorm = b.norm();
  x = VecX::Zero(b.size());
  if (bnorm == 0.0) {
    rep.relative_residual = 0.0;
    return true;
  }
  VecX d = jacobi_diagonal(A);
  VecX r = b;
  VecX r0 = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  VecX v = VecX::Zero(b.size()), p = VecX::Zero(b.size());
  for (int it = 0; it < cap; ++it) {
    double rho_new = r0.dot(r);
    if (std::abs(rho_new) < 1e-300) return false;  // breakdown
    double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    p = r + beta * (p - omega * v);
    VecX ph = p.cwiseQuotient(d);
    v = A * ph;
    double r0v = r0.dot(v);
    if (std::abs(r0v) < 1e-300) return false;
    alpha = rho / r0v;
    VecX s = r - alpha * v;
    x += alpha * ph;
    double res = s.norm() / bnorm;
    if (res < tol) {
      rep.history.push_back(res);
      rep.iterations = it + 1;
      rep.relative_residual = res;
      return true;
    }
    VecX sh = s.cwiseQuotient(d);
    VecX tv = A * sh;
    double tt = tv.dot(tv);
    if (tt == 0.0) return false;
    omega = tv.dot(s) / tt;
    if (std::abs(omega) < 1e-300) return false;
    x += omega * sh;
    r = s - omega * tv;
    res = r.norm() / bnorm;
    rep.history.push_back(res);
    rep.iterations = it + 1;
    rep.relative_residual = res;
    if (res < tol) return true;
  }
  return false;
}

}  // namespace

VecX solve(const SparseSystem& system, SolveReport* report) {
  SolveReport rep;
  VecX x;
  bool ok = false;
  if (system.symmetric) {
    rep.method = "cg/jacobi";
    ok = conjugate_gradient(system.matrix, system.rhs, x, rep);
  } else {
    rep.method = "bicgstab/jacobi";
    ok = bicgstab(system.matrix, system.rhs, x, rep);
  }
  if (!ok) {
    // Direct fallback for stagnating Krylov iterations.
    Eigen::SparseMatrix<double> colmaj = system.matrix;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(colmaj);
    if (lu.info() == Eigen::Success) {
      x = lu.solve(system.rhs);
      double res = (system.matrix * x - system.rhs).norm() /
                   (system.rhs.norm() > 0.0 ? system.rhs.norm() : 1.0);
      rep.method += "+sparselu";
      rep.relative_residual = res;
      rep.history.push_back(res);
      ok = res < 1e-8;
    }
    if (!ok) {
      std::ostringstream os;
      os << "solve: no convergence after " << rep.iterations
         << " iterations (residual=" << rep.relative_residual << ")";
      throw SolverFailure(os.str(), rep.history);
    }
  }
  if (report) *report = std::move(rep);
  return x;
}

// --- Gradient recovery ---

Field recover_gradient(const Mesh& mesh, const Field& u) {
  if (u.rank != FieldRank::Scalar) throw InvalidInput("recover_gradient: scalar fields only");
  const int degree = u.degree;
  const int nn = mesh.num_nodes(degree);
  const int nd = local_dofs(degree);
  VecX num = VecX::Zero(2 * nn);
  VecX lump = VecX::Zero(nn);
  const auto& rule = tri_rule(2);  // exact element mass diagonals for both degrees

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    ElementFrame fr = element_frame(mesh, t);
    double mdiag[6] = {};
    double rhs[6][2] = {};
    for (const auto& qp : rule) {
      double w = qp.weight * fr.area;
      double N[6];
      basis_values(degree, qp.bary, N);
      Vec2 g = eval_scalar_gradient(u, t, qp.bary);
      for (int i = 0; i < nd; ++i) {
        mdiag[i] += w * N[i] * N[i];
        rhs[i][0] += w * g.x() * N[i];
        rhs[i][1] += w * g.y() * N[i];
      }
    }
    // Diagonal scaling: element lumped masses sum to the element area.
    double sum = 0.0;
    for (int i = 0; i < nd; ++i) sum += mdiag[i];
    double scale = fr.area / sum;
    for (int i = 0; i < nd; ++i) {
      int gi = global_node(mesh, degree, t, i);
      lump[gi] += scale * mdiag[i];
      num[2 * gi] += rhs[i][0];
      num[2 * gi + 1] += rhs[i][1];
    }
  }
  Field out = make_field(mesh, FieldRank::Vector2, degree);
  for (int i = 0; i < nn; ++i) {
    out.coeffs[2 * i] = num[2 * i] / lump[i];
    out.coeffs[2 * i + 1] = num[2 * i + 1] / lump[i];
  }
  return out;
}

// --- Norms and conversions ---

namespace {

double l2_sq(const Mesh& mesh, const Field& f, const Field* g) {
  double acc = 0.0;
  const auto& rule = tri_rule(2);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double area = mesh.triangle_area(t);
    for (const auto& qp : rule) {
      double w = qp.weight * area;
      if (f.rank == FieldRank::Scalar) {
        double v = eval_scalar(f, t, qp.bary) - (g ? eval_scalar(*g, t, qp.bary) : 0.0);
        acc += w * v * v;
      } else {
        Vec2 v = eval_vector(f, t, qp.bary) - (g ? eval_vector(*g, t, qp.bary) : Vec2::Zero());
        acc += w * v.squaredNorm();
      }
    }
  }
  return acc;
}

}  // namespace

double l2_norm(const Mesh& mesh, const Field& f) { return std::sqrt(l2_sq(mesh, f, nullptr)); }

double l2_diff(const Mesh& mesh, const Field& a, const Field& b) {
  if (a.rank != b.rank || a.degree != b.degree)
    throw InvalidInput("l2_diff: incompatible fields");
  return std::sqrt(l2_sq(mesh, a, &b));
}

double linf_norm(const Field& f) {
  return f.coeffs.size() ? f.coeffs.cwiseAbs().maxCoeff() : 0.0;
}

Field promote_to_degree2(const Mesh& mesh, const Field& f) {
  if (f.degree != 1) throw InvalidInput("promote_to_degree2: input must be degree 1");
  Field out = make_field(mesh, f.rank, 2);
  const int nv = mesh.num_vertices();
  const int c = f.components();
  for (int i = 0; i < nv; ++i)
    for (int k = 0; k < c; ++k) out.coeffs[c * i + k] = f.coeffs[c * i + k];
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const auto& ed = mesh.edges[e];
    for (int k = 0; k < c; ++k)
      out.coeffs[c * (nv + e) + k] = 0.5 * (f.coeffs[c * ed[0] + k] + f.coeffs[c * ed[1] + k]);
  }
  return out;
}

Vec3 barycentric_coords(const Mesh& mesh, int tri, const Vec2& x) {
  return barycentric(element_frame(mesh, tri), x);
}

int triangle_quadrature_points(int degree) { return static_cast<int>(tri_rule(degree).size()); }

void triangle_quadrature(int degree, int q, Vec3* bary, double* weight) {
  const auto& qp = tri_rule(degree)[q];
  *bary = qp.bary;
  *weight = qp.weight;
}

Field project_elementwise(const Mesh& mesh, int degree, const ScalarCoeff& value) {
  // Same diagonally scaled lumping as gradient recovery.
  const int nn = mesh.num_nodes(degree);
  VecX num = VecX::Zero(nn), lump = VecX::Zero(nn);
  const int nd = degree == 1 ? 3 : 6;
  const int nq = triangle_quadrature_points(2);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double area = mesh.triangle_area(t);
    double mdiag[6] = {};
    double rhs[6] = {};
    for (int q = 0; q < nq; ++q) {
      Vec3 bary;
      double wq;
      triangle_quadrature(2, q, &bary, &wq);
      double w = wq * area;
      Vec2 x = bary[0] * mesh.vertices[mesh.triangles[t][0]] +
               bary[1] * mesh.vertices[mesh.triangles[t][1]] +
               bary[2] * mesh.vertices[mesh.triangles[t][2]];
      double v = value(t, x);
      double N[6];
      if (degree == 1) {
        N[0] = bary[0];
        N[1] = bary[1];
        N[2] = bary[2];
      } else {
        for (int k = 0; k < 3; ++k) N[k] = bary[k] * (2 * bary[k] - 1);
        N[3] = 4 * bary[0] * bary[1];
        N[4] = 4 * bary[1] * bary[2];
        N[5] = 4 * bary[2] * bary[0];
      }
      for (int i = 0; i < nd; ++i) {
        mdiag[i] += w * N[i] * N[i];
        rhs[i] += w * v * N[i];
      }
    }
    double sum = 0.0;
    for (int i = 0; i < nd; ++i) sum += mdiag[i];
    double scale = area / sum;
    for (int i = 0; i < nd; ++i) {
      int gi = i < 3 ? mesh.triangles[t][i] : mesh.num_vertices() + mesh.tri_edges[t][i - 3];
      lump[gi] += scale * mdiag[i];
      num[gi] += rhs[i];
    }
  }
  Field out = make_field(mesh, FieldRank::Scalar, degree);
  for (int i = 0; i < nn; ++i) out.coeffs[i] = num[i] / lump[i];
  return out;
}

int facet_quadrature_points() { return 3; }

void facet_quadrature(const Mesh& mesh, const Facet& facet, int q, Vec2* x, double* weight) {
  const auto& eq = edge_rule()[q];
  Vec2 a = mesh.vertices[facet.a], b = mesh.vertices[facet.b];
  *x = a + eq.s * (b - a);
  *weight = eq.weight * (b - a).norm();
}

}  // namespace biofilm
