#include "biofilm/concentration.hpp"

#include <cmath>
#include <sstream>

namespace biofilm {

double coercivity_margin(const Mesh& mesh, const Field& v_f, const MaterialParams& mp) {
  double vmax = 0.0;
  for (int n = 0; n < v_f.num_nodes(); ++n)
    vmax = std::max(vmax, Vec2(v_f.coeffs[2 * n], v_f.coeffs[2 * n + 1]).norm());
  double diam = (mesh.bbox_max() - mesh.bbox_min()).norm();
  return mp.d - diam * vmax;
}

namespace {

Field solve_shifted(const Mesh& mesh, const Field& v_f, const ScalarCoeff& reaction_source,
                    const MaterialParams& mp) {
  ScalarFormOptions opt;
  opt.convection_form = ConvectionForm::Adjoint;
  const Field* vf = &v_f;
  RobinTerm robin;
  robin.where = BoundarySelector::GammaPlus;
  robin.beta = [vf](const Facet& f, int, const Vec2& x, const Vec2& n) {
    Vec3 bary = barycentric_coords(*vf->mesh, f.tri, x);
    return eval_vector(*vf, f.tri, bary).dot(n);
  };
  opt.robin = robin;
  double c0 = mp.c0;
  VectorCoeff vf_coeff = field_vector_coeff(v_f);
  opt.grad_source = [vf_coeff, c0](int tri, const Vec2& x) { return Vec2(c0 * vf_coeff(tri, x)); };

  VectorCoeff minus_vf = [vf_coeff](int tri, const Vec2& x) { return Vec2(-vf_coeff(tri, x)); };
  SparseSystem sys = assemble_scalar(mesh, 1, constant_coeff(Mat2(mp.d * Mat2::Identity())),
                                     minus_vf, nullptr, reaction_source, opt);
  apply_dirichlet(sys, mesh, BoundarySelector::GammaMinus, 0.0);
  Field ct = make_field(mesh, FieldRank::Scalar, 1);
  ct.coeffs = solve(sys);
  return ct;
}

}  // namespace

ConcentrationResult solve_concentration(const Mesh& mesh, const Field& v_f, const Field& phi_s,
                                        const MaterialParams& mp) {
  double margin = coercivity_margin(mesh, v_f, mp);
  if (margin <= 0.0) {
    std::ostringstream os;
    os << "solve_concentration: coercivity margin " << margin
       << " is not positive (d too small against the advection field)";
    throw InvalidInput(os.str());
  }

  ConcentrationResult result;
  ScalarCoeff phis = field_coeff(phi_s);

  if (mp.monod_mode == MonodMode::Frozen) {
    double kcgc = mp.k_c * mp.g_c;
    ScalarCoeff source = [phis, kcgc](int tri, const Vec2& x) { return -kcgc * phis(tri, x); };
    Field ct = solve_shifted(mesh, v_f, source, mp);
    result.c = ct;
    result.c.coeffs.array() += mp.c0;
  } else {
    // Relinearize the saturating uptake factor around the previous iterate.
    Field c = make_field(mesh, FieldRank::Scalar, 1);
    c.coeffs.array() += mp.c0;
    for (int it = 0; it < 5; ++it) {
      ScalarCoeff prev = field_coeff(c);
      double kc = mp.k_c, Kc = mp.K_c;
      ScalarCoeff source = [phis, prev, kc, Kc](int tri, const Vec2& x) {
        double cv = std::max(prev(tri, x), 0.0);
        return -kc * (cv / (cv + Kc)) * phis(tri, x);
      };
      Field ct = solve_shifted(mesh, v_f, source, mp);
      Field next = ct;
      next.coeffs.array() += mp.c0;
      double rel = l2_diff(mesh, next, c) / std::max(l2_norm(mesh, next), 1e-300);
      result.live_changes.push_back(rel);
      c = next;
    }
    result.c = c;
  }

  result.min_nodal = result.c.coeffs.minCoeff();
  if (result.min_nodal < -1e-8 * mp.c0) {
    result.nonnegative = false;
    Eigen::Index where;
    result.c.coeffs.minCoeff(&where);
    Vec2 x = mesh.node_position(1, static_cast<int>(where));
    std::ostringstream os;
    os << "concentration: negative value " << result.min_nodal << " at node " << where << " ("
       << x.x() << "," << x.y() << "); d may be too small for the data";
    result.warning = os.str();
  }
  return result;
}

}  // namespace biofilm
