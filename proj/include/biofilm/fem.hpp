#pragma once

#include "biofilm/mesh.hpp"
#include "biofilm/types.hpp"

#include <functional>
#include <optional>

namespace biofilm {

enum class FieldRank { Scalar, Vector2 };

/// Nodal coefficient vector of a Lagrange finite-element function.
/// Degree 1 uses vertex nodes, degree 2 vertex plus edge-midpoint nodes.
/// Vector fields interleave components: dof(node, c) = 2*node + c.
struct Field {
  const Mesh* mesh = nullptr;
  FieldRank rank = FieldRank::Scalar;
  int degree = 1;
  VecX coeffs;

  int components() const { return rank == FieldRank::Scalar ? 1 : 2; }
  int num_nodes() const { return mesh->num_nodes(degree); }

  /// Same coefficients interpreted on another mesh with identical
  /// connectivity (push-forward / pullback across deformed meshes).
  Field on(const Mesh& other) const;
};

Field make_field(const Mesh& mesh, FieldRank rank, int degree);
Field interpolate(const Mesh& mesh, int degree, const std::function<double(const Vec2&)>& fn);
Field interpolate(const Mesh& mesh, int degree, const std::function<Vec2(const Vec2&)>& fn);

/// Value / gradient of a field inside triangle tri at barycentric bary.
/// Gradients are with respect to the field's mesh coordinates.
double eval_scalar(const Field& f, int tri, const Vec3& bary);
Vec2 eval_vector(const Field& f, int tri, const Vec3& bary);
Vec2 eval_scalar_gradient(const Field& f, int tri, const Vec3& bary);
Mat2 eval_vector_gradient(const Field& f, int tri, const Vec3& bary);  // (i,j) = d f_i / d x_j
double eval_divergence(const Field& f, int tri, const Vec3& bary);

/// Second derivatives of a vector field on one element (constant for
/// degree 2, zero for degree 1): out[c](j,k) = d2 f_c / dx_j dx_k.
std::array<Mat2, 2> eval_vector_hessian(const Field& f, int tri);

/// First Lame constant and shear modulus of the isotropic stress
/// sigma(u) = lambda tr(eps) I + 2 mu eps.
struct ElasticConstants {
  double lambda = 1.0;
  double mu = 1.0;
};

// --- Coefficient callables, evaluated per element at quadrature points ---

using ScalarCoeff = std::function<double(int tri, const Vec2& x)>;
using VectorCoeff = std::function<Vec2(int tri, const Vec2& x)>;
using MatrixCoeff = std::function<Mat2(int tri, const Vec2& x)>;

ScalarCoeff constant_coeff(double v);
VectorCoeff constant_coeff(const Vec2& v);
MatrixCoeff constant_coeff(const Mat2& m);
ScalarCoeff function_coeff(std::function<double(const Vec2&)> fn);
VectorCoeff function_coeff(std::function<Vec2(const Vec2&)> fn);
MatrixCoeff function_coeff(std::function<Mat2(const Vec2&)> fn);
ScalarCoeff field_coeff(const Field& f);                 // scalar field value
VectorCoeff field_vector_coeff(const Field& f);          // vector field value
ScalarCoeff field_divergence_coeff(const Field& f);      // div of a vector field
VectorCoeff field_gradient_coeff(const Field& f, double scale = 1.0);  // piecewise gradient

// Boundary coefficients additionally see the facet, the quadrature point
// index along it, and the outward normal.
using BoundaryScalarCoeff =
    std::function<double(const Facet&, int q, const Vec2& x, const Vec2& n)>;
using BoundaryVectorCoeff =
    std::function<Vec2(const Facet&, int q, const Vec2& x, const Vec2& n)>;

enum class BoundarySelector { GammaMinus, GammaPlus, All };

/// How the advection coefficient b enters the bilinear form:
///   Gradient: (b . grad u, w)     Adjoint: (u, b . grad w)
enum class ConvectionForm { Gradient, Adjoint };

struct RobinTerm {
  BoundarySelector where = BoundarySelector::All;
  BoundaryScalarCoeff beta;                  // adds  int beta u w dS
  std::optional<BoundaryScalarCoeff> load;   // adds  int load w dS  to the rhs
};

struct ScalarFormOptions {
  ConvectionForm convection_form = ConvectionForm::Gradient;
  std::optional<RobinTerm> robin;
  std::optional<VectorCoeff> grad_source;  // rhs += int G . grad w dx
};

/// Assembled linear system. The unconstrained matrix/rhs are retained for
/// residual checks; apply_dirichlet builds the constrained pair by symmetric
/// elimination (constrained columns moved to the rhs, identity rows set).
struct SparseSystem {
  SparseMat matrix;
  SparseMat unconstrained;
  VecX rhs;
  VecX rhs_unconstrained;
  std::vector<Triplet> triplets;  // element contributions, fixed order
  std::vector<int> constrained_dofs;
  VecX constrained_values;
  bool symmetric = false;
  FieldRank rank = FieldRank::Scalar;
  int degree = 1;
  std::vector<std::string> warnings;

  int num_dofs() const { return static_cast<int>(rhs.rows()); }
};

/// Bilinear form  int (grad w . A grad u + convection + c_react u w) dx with
/// rhs int f w dx, plus the optional Robin and gradient-source terms.
/// 3-point (degree 1) / 7-point (degree 2) triangle quadrature.
/// An indefinite sample of A is recorded as a warning, not an error.
/// Elements are visited in a fixed order, so two assemblies of the same
/// inputs are bitwise identical.
SparseSystem assemble_scalar(const Mesh& mesh, int degree, const MatrixCoeff& A,
                             const VectorCoeff& b, const ScalarCoeff& c_react,
                             const ScalarCoeff& f, const ScalarFormOptions& options = {});

struct ElasticityLoads {
  std::optional<VectorCoeff> body;               // rhs += int body . w dx
  std::optional<BoundaryVectorCoeff> traction;   // rhs += int_{Gamma+} traction . w dS
  std::optional<ScalarCoeff> pressure;           // rhs += int pressure div w dx
};

/// Isotropic elasticity form  int c_{jamb} d_b u_m d_a w_j dx =
/// int lambda div u div w + 2 mu eps(u):eps(w) dx.
SparseSystem assemble_elasticity(const Mesh& mesh, int degree, const ElasticConstants& ec,
                                 const ElasticityLoads& loads = {});

/// Constrain all dofs on facets matching the selector. Values are evaluated
/// at node positions. Conflicting prescribed values at a shared node are
/// rejected. May be called repeatedly to add tags.
void apply_dirichlet(SparseSystem& system, const Mesh& mesh, BoundarySelector where,
                     const std::function<double(const Vec2&)>& value);
void apply_dirichlet(SparseSystem& system, const Mesh& mesh, BoundarySelector where,
                     const std::function<Vec2(const Vec2&)>& value);
void apply_dirichlet(SparseSystem& system, const Mesh& mesh, BoundarySelector where, double value);

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> history;
  std::string method;
};

/// Symmetric systems: conjugate gradient with diagonal preconditioning to
/// relative residual 1e-10 (cap 20000). Nonsymmetric: BiCGSTAB, with a
/// sparse-LU fallback on stagnation. Throws SolverFailure (with history) if
/// nothing converges.
VecX solve(const SparseSystem& system, SolveReport* report = nullptr);

/// L2 projection of the piecewise gradient of a scalar field onto the
/// same-degree continuous space (lumped mass).
Field recover_gradient(const Mesh& mesh, const Field& u);

/// Lumped L2 projection of an elementwise quantity onto the nodal space.
Field project_elementwise(const Mesh& mesh, int degree, const ScalarCoeff& value);

// --- Field utilities ---

double l2_norm(const Mesh& mesh, const Field& f);
double l2_diff(const Mesh& mesh, const Field& a, const Field& b);
double linf_norm(const Field& f);
Field promote_to_degree2(const Mesh& mesh, const Field& f);

/// Facet quadrature description shared by assembly and boundary sampling:
/// 3-point Gauss per facet.
int facet_quadrature_points();
void facet_quadrature(const Mesh& mesh, const Facet& facet, int q, Vec2* x, double* weight);

/// Barycentric coordinates of x inside triangle tri (affine inversion).
Vec3 barycentric_coords(const Mesh& mesh, int tri, const Vec2& x);

/// Triangle rule used for the given field degree (3-point / 7-point);
/// weights sum to 1 and scale by the element area.
int triangle_quadrature_points(int degree);
void triangle_quadrature(int degree, int q, Vec3* bary, double* weight);

}  // namespace biofilm
