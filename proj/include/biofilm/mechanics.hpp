#pragma once

#include "biofilm/deformation.hpp"
#include "biofilm/expression.hpp"
#include "biofilm/fem.hpp"

namespace biofilm {

enum class MonodMode { Frozen, Live };

/// All model constants plus the exterior pressure data. p_ext and pi_ext are
/// expressions of t so their time derivatives are exact (symbolic), never
/// differenced.
struct MaterialParams {
  ElasticConstants ec{1.0, 1.0};
  double k_h = 1.0;    // hydraulic permeability
  double Pi = 0.0;     // osmotic modulus
  double xi_inf = 1.0; // mobility
  double k_s = 1.0, g_s = 1.0;  // biomass growth rate, frozen Monod factor
  double k_c = 1.0, g_c = 1.0;  // uptake rate, frozen Monod factor
  double K_s = 1.0, K_c = 1.0;  // Monod half-saturations
  double d = 1.0;               // substrate diffusivity
  double c0 = 1.0;              // substrate boundary concentration
  Expr p_ext = Expr::constant(0.0);
  Expr pi_ext = Expr::constant(0.0);
  double e_ext = 0.0;  // dilatation-rate boundary value
  double e0 = 0.0;     // dilatation-rate initial value
  MonodMode monod_mode = MonodMode::Frozen;
  bool osmotic = false;  // couple osmotic pressure into the p and Darcy solves

  double p_ext_at(double t) const { return p_ext.eval(0, 0, t); }
  double pi_ext_at(double t) const { return pi_ext.eval(0, 0, t); }
  double p_ext_rate_at(double t) const { return p_ext.derivative("t").eval(0, 0, t); }
  double pi_ext_rate_at(double t) const { return pi_ext.derivative("t").eval(0, 0, t); }

  /// Throws InvalidInput unless all rate/material constants are strictly
  /// positive (Pi may be zero) and mu > 0, lambda >= 0.
  void validate() const;
};

/// Converged mechanical bundle at one time.
struct MechState {
  Field u_s, v_s, v_f;  // degree-2 vector fields
  Field p, p_rate;      // degree-1 scalar fields
};

/// Values of a vector quantity at the Gauss points of the GammaPlus facets.
struct BoundaryField {
  int points_per_facet = 0;
  std::vector<Vec2> values;  // indexed facet.id * points_per_facet + q

  static BoundaryField zero(const Mesh& mesh);
  Vec2& at(const Facet& f, int q) { return values[f.id * points_per_facet + q]; }
  const Vec2& at(const Facet& f, int q) const { return values[f.id * points_per_facet + q]; }
  BoundaryVectorCoeff coeff() const;
  double max_norm() const;
};

BoundaryField operator+(const BoundaryField& a, const BoundaryField& b);
BoundaryField operator*(double s, const BoundaryField& a);

using ScalarBC = std::function<double(const Vec2&)>;
using BoundaryMatrixCoeff =
    std::function<Mat2(const Facet&, int q, const Vec2& x, const Vec2& n)>;

/// Boundary traction data with its spatial gradient (needed by the moving-
/// boundary correction; an empty gradient means the data is spatially
/// constant).
struct BoundaryTraction {
  BoundaryVectorCoeff value;
  BoundaryMatrixCoeff gradient;  // (i,j) = d value_i / d y_j
};

/// Weak solve of  div grad p' = (2 mu + lambda) div grad e'  with p' = bc on
/// the whole boundary.
Field solve_pressure_rate(const Mesh& mesh, const MaterialParams& mp, const Field& e_rate,
                          const ScalarBC& bc);
Field solve_pressure_rate(const Mesh& mesh, const MaterialParams& mp, const Field& e_rate,
                          double p_ext_rate);

/// Traction correction for the velocity problem on the moving top boundary,
/// obtained by differentiating sigma(u) n = g along boundary trajectories:
///   r = (V . grad) g - (V . grad) sigma(u) n - sigma(u) ndot,
///   ndot = -(I - n n^T) (grad V)^T n,
/// with sigma the stress of u_s on the boundary element, V the map velocity
/// at the current configuration and n the graph normal extended off-surface
/// as a function of x1. Expanding sigma(u) ndot reproduces the stress terms
/// sigma (grad V)^T n and -(n^T grad V n) g of the first-order shape
/// expansion. Evaluated at the GammaPlus quadrature points.
BoundaryField traction_correction(const Mesh& mesh_ref, const Mesh& mesh_t,
                                  const ElasticConstants& ec, const Field& u_s,
                                  const BoundaryTraction& g, const DeformationMap& map,
                                  double t);

/// Navier solve  mu lap v + (mu+lambda) grad div v = grad p'  with v = 0 on
/// GammaMinus and sigma(v) n = traction_rate + p' n on GammaPlus.
Field solve_velocity(const Mesh& mesh, const MaterialParams& mp, const Field& p_rate,
                     const BoundaryField& traction_rate);

/// k_h lap p = div v_s with p = p_ext on the whole boundary. In osmotic mode
/// the solve is for chi = p - Pi phi_s with chi = p_ext - pi_ext on the
/// boundary, then p = chi + Pi phi_s.
Field solve_pressure(const Mesh& mesh, const MaterialParams& mp, const Field& v_s,
                     const Field& phi_s, double t);
Field solve_pressure(const Mesh& mesh, const MaterialParams& mp, const Field& v_s,
                     const Field& phi_s, const ScalarBC& bc);

/// mu lap u + (mu+lambda) grad div u = grad p + Pi grad phi_s with u = 0 on
/// GammaMinus and sigma(u) n = g + (p + Pi phi_s) n on GammaPlus. The default
/// g is -(p_ext - pi_ext) n.
Field solve_displacement(const Mesh& mesh, const MaterialParams& mp, const Field& p,
                         const Field& phi_s, double t,
                         const BoundaryVectorCoeff& g_override = nullptr);

/// v_f = -xi_inf grad p + v_s (osmotic mode: grad of p - Pi phi_s), the
/// gradient taken through nodal recovery and promoted to degree 2.
Field darcy_fluid_velocity(const Mesh& mesh, const MaterialParams& mp, const Field& p,
                           const Field& phi_s, const Field& v_s);

/// Isotropic stress sigma = lambda tr(eps) I + 2 mu eps of a displacement
/// gradient.
Mat2 isotropic_stress(const ElasticConstants& ec, const Mat2& grad_u);

/// Default boundary traction g = -(p_ext - pi_ext) n at time t.
BoundaryVectorCoeff default_traction(const MaterialParams& mp, double t);

}  // namespace biofilm
