#pragma once

#include "biofilm/mechanics.hpp"

namespace biofilm {

/// Sign and smallness hypotheses on the fluid velocity required by the
/// stationary fraction transport: div(v_f) <= 0, v_f . n <= 0 on the
/// boundary, and ||grad v_f|| small against k_s g_s.
struct AdmissibilityReport {
  double max_div = 0.0;          // max nodal div(v_f)
  double max_flux_normal = 0.0;  // max boundary-quadrature v_f . n
  double grad_norm = 0.0;        // max-abs entry of grad v_f
  double threshold = 0.0;        // k_s g_s
  double tol_sign = 0.0;         // 1e-8 * velocity scale
  double smallness_ratio = 0.5;
  bool admissible = false;
};

AdmissibilityReport check_admissibility(const Mesh& mesh, const Field& v_f,
                                        const MaterialParams& mp);

/// One elliptic regularization step: solves
///   eps int grad(phi).grad(w) + int phi v_f.grad(w) - int_bdry phi w v_f.n
///   + k_s g_s int phi w  =  k_s g_s int w
/// with natural boundary conditions everywhere. The skew boundary term is
/// assembled exactly in this arrangement (not re-integrated by parts).
/// reaction optionally replaces the constant k_s g_s (live Monod factors).
Field solve_fraction_regularized(const Mesh& mesh, const Field& v_f, const MaterialParams& mp,
                                 double eps, bool force = false,
                                 const ScalarCoeff& reaction = nullptr);

struct FractionDiagnostics {
  std::vector<double> eps_history;
  std::vector<double> cauchy_diffs;
  double min_phi = 0.0, max_phi = 0.0;
  double grad_phi_l2 = 0.0, grad_div_vf_l2 = 0.0;
  double grad_phi_l4 = 0.0, grad_div_vf_l4 = 0.0;
  AdmissibilityReport admissibility;
};

/// Epsilon-continuation eps_k = eps0 * 2^-k with eps0 = h ||v_f||_inf +
/// k_s g_s h^2, stopped when consecutive iterates are L2-Cauchy below tol or
/// eps passes the mesh floor 1e-3 h^2. Throws ContinuationFailure if the
/// Cauchy differences grow over two consecutive steps.
std::pair<Field, FractionDiagnostics> solve_fraction(const Mesh& mesh, const Field& v_f,
                                                     const MaterialParams& mp, double tol,
                                                     bool force = false,
                                                     const ScalarCoeff& reaction = nullptr,
                                                     double eps0_scale = 1.0);

/// phi_s = 1 - phi_f, nodal.
Field solid_fraction(const Field& phi_f);

/// Lp norm of the piecewise gradient of a scalar field (p = 2 or 4).
double gradient_lp_norm(const Mesh& mesh, const Field& f, int p);

/// Lp norm of a vector field by quadrature (p = 2 or 4).
double vector_lp_norm(const Mesh& mesh, const Field& f, int p);

}  // namespace biofilm
