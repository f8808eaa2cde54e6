#include "biofilm/volume_fraction.hpp"

#include <cmath>
#include <sstream>

namespace biofilm {

namespace {

const Vec3 kVertexBary[3] = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};

}  // namespace

AdmissibilityReport check_admissibility(const Mesh& mesh, const Field& v_f,
                                        const MaterialParams& mp) {
  AdmissibilityReport rep;
  rep.threshold = mp.k_s * mp.g_s;
  double vmax = 0.0;
  for (int n = 0; n < v_f.num_nodes(); ++n)
    vmax = std::max(vmax, Vec2(v_f.coeffs[2 * n], v_f.coeffs[2 * n + 1]).norm());
  rep.tol_sign = 1e-8 * vmax;
  if (vmax < 1e-13) {
    // Roundoff-level fields count as zero.
    rep.admissible = true;
    return rep;
  }

  // Nodal divergence through the lumped projection (the raw elementwise
  // values are multi-valued at nodes).
  Field div_nodal = project_elementwise(mesh, 1, field_divergence_coeff(v_f));
  rep.max_div = div_nodal.coeffs.maxCoeff();
  double grad_norm = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (const auto& bary : kVertexBary) {
      Mat2 g = eval_vector_gradient(v_f, t, bary);
      grad_norm = std::max(grad_norm, g.cwiseAbs().maxCoeff());
    }
  }
  rep.grad_norm = grad_norm;

  double max_flux = -1e300;
  const int nq = facet_quadrature_points();
  for (const auto& facet : mesh.facets) {
    Vec2 n = boundary_normal(mesh, facet);
    for (int q = 0; q < nq; ++q) {
      Vec2 x;
      double w;
      facet_quadrature(mesh, facet, q, &x, &w);
      Vec3 bary = barycentric_coords(mesh, facet.tri, x);
      max_flux = std::max(max_flux, eval_vector(v_f, facet.tri, bary).dot(n));
    }
  }
  rep.max_flux_normal = max_flux;

  rep.admissible = rep.max_div <= rep.tol_sign && rep.max_flux_normal <= rep.tol_sign &&
                   rep.grad_norm <= rep.smallness_ratio * rep.threshold;
  return rep;
}

Field solve_fraction_regularized(const Mesh& mesh, const Field& v_f, const MaterialParams& mp,
                                 double eps, bool force, const ScalarCoeff& reaction) {
  if (!(eps > 0.0)) throw InvalidInput("solve_fraction_regularized: eps must be positive");
  if (!force) {
    AdmissibilityReport rep = check_admissibility(mesh, v_f, mp);
    if (!rep.admissible) {
      std::ostringstream os;
      os << "fraction transport: v_f violates the sign/smallness hypotheses (max div="
         << rep.max_div << ", max flux=" << rep.max_flux_normal << ", grad=" << rep.grad_norm
         << " vs threshold " << rep.threshold << "); pass force to proceed";
      throw InvalidInput(os.str());
    }
  }
  ScalarCoeff react = reaction ? reaction : constant_coeff(mp.k_s * mp.g_s);

  ScalarFormOptions opt;
  opt.convection_form = ConvectionForm::Adjoint;
  const Field* vf = &v_f;
  RobinTerm robin;
  robin.where = BoundarySelector::All;
  robin.beta = [vf](const Facet& f, int, const Vec2& x, const Vec2& n) {
    Vec3 bary = barycentric_coords(*vf->mesh, f.tri, x);
    return -eval_vector(*vf, f.tri, bary).dot(n);
  };
  opt.robin = robin;

  SparseSystem sys = assemble_scalar(mesh, 1, constant_coeff(Mat2(eps * Mat2::Identity())),
                                     field_vector_coeff(v_f), react, react, opt);
  // Solve for the deviation from the saturated state phi = 1 (exact shift:
  // the reaction terms cancel algebraically, so phi = 1 is reproduced to
  // roundoff when v_f vanishes).
  VecX ones = VecX::Ones(sys.num_dofs());
  sys.rhs_unconstrained -= sys.unconstrained * ones;
  sys.rhs = sys.rhs_unconstrained;
  Field phi = make_field(mesh, FieldRank::Scalar, 1);
  phi.coeffs = solve(sys) + ones;
  return phi;
}

std::pair<Field, FractionDiagnostics> solve_fraction(const Mesh& mesh, const Field& v_f,
                                                     const MaterialParams& mp, double tol,
                                                     bool force, const ScalarCoeff& reaction,
                                                     double eps0_scale) {
  FractionDiagnostics diag;
  diag.admissibility = check_admissibility(mesh, v_f, mp);
  if (!diag.admissibility.admissible && !force) {
    std::ostringstream os;
    os << "fraction continuation: inadmissible v_f (max div=" << diag.admissibility.max_div
       << ", max flux=" << diag.admissibility.max_flux_normal
       << ", grad=" << diag.admissibility.grad_norm << ")";
    throw InvalidInput(os.str());
  }

  double h = mesh.h_mesh;
  double vmax = linf_norm(v_f);
  double eps0 = eps0_scale * (h * vmax + mp.k_s * mp.g_s * h * h);
  double eps_floor = 1e-3 * h * h;

  Field phi = solve_fraction_regularized(mesh, v_f, mp, eps0, true, reaction);
  diag.eps_history.push_back(eps0);
  double eps = eps0;
  for (int k = 0;; ++k) {
    eps *= 0.5;
    Field next = solve_fraction_regularized(mesh, v_f, mp, eps, true, reaction);
    diag.eps_history.push_back(eps);
    double diff = l2_diff(mesh, next, phi);
    diag.cauchy_diffs.push_back(diff);
    phi = next;
    size_t m = diag.cauchy_diffs.size();
    if (m >= 3 && diag.cauchy_diffs[m - 1] > diag.cauchy_diffs[m - 2] &&
        diag.cauchy_diffs[m - 2] > diag.cauchy_diffs[m - 3]) {
      throw ContinuationFailure("fraction continuation: Cauchy differences increased twice",
                                diag.cauchy_diffs);
    }
    if (diff < tol || eps < eps_floor) break;
  }

  diag.min_phi = phi.coeffs.minCoeff();
  diag.max_phi = phi.coeffs.maxCoeff();
  diag.grad_phi_l2 = gradient_lp_norm(mesh, phi, 2);
  diag.grad_phi_l4 = gradient_lp_norm(mesh, phi, 4);
  Field div_nodal = project_elementwise(mesh, 1, field_divergence_coeff(v_f));
  Field grad_div = recover_gradient(mesh, div_nodal);
  diag.grad_div_vf_l2 = vector_lp_norm(mesh, grad_div, 2);
  diag.grad_div_vf_l4 = vector_lp_norm(mesh, grad_div, 4);
  return {phi, diag};
}

Field solid_fraction(const Field& phi_f) {
  Field phi_s = phi_f;
  phi_s.coeffs = VecX::Ones(phi_f.coeffs.size()) - phi_f.coeffs;
  return phi_s;
}

double gradient_lp_norm(const Mesh& mesh, const Field& f, int p) {
  double acc = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double area = mesh.triangle_area(t);
    // Piecewise gradient of P1 is constant; for P2 sample the 3-point rule.
    const Vec3 pts[3] = {Vec3(2.0 / 3, 1.0 / 6, 1.0 / 6), Vec3(1.0 / 6, 2.0 / 3, 1.0 / 6),
                         Vec3(1.0 / 6, 1.0 / 6, 2.0 / 3)};
    for (const auto& bary : pts) {
      double g = eval_scalar_gradient(f, t, bary).norm();
      acc += (area / 3.0) * std::pow(g, p);
    }
  }
  return std::pow(acc, 1.0 / p);
}

double vector_lp_norm(const Mesh& mesh, const Field& f, int p) {
  double acc = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double area = mesh.triangle_area(t);
    const Vec3 pts[3] = {Vec3(2.0 / 3, 1.0 / 6, 1.0 / 6), Vec3(1.0 / 6, 2.0 / 3, 1.0 / 6),
                         Vec3(1.0 / 6, 1.0 / 6, 2.0 / 3)};
    for (const auto& bary : pts) {
      double g = eval_vector(f, t, bary).norm();
      acc += (area / 3.0) * std::pow(g, p);
    }
  }
  return std::pow(acc, 1.0 / p);
}

}  // namespace biofilm
