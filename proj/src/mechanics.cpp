#include "biofilm/mechanics.hpp"

#include <cmath>
#include <sstream>

namespace biofilm {

void MaterialParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) {
      std::ostringstream os;
      os << "material: " << name << " must be positive (got " << v << ")";
      throw InvalidInput(os.str());
    }
  };
  positive(ec.mu, "mu");
  if (ec.lambda < 0.0) throw InvalidInput("material: lambda must be nonnegative");
  if (Pi < 0.0) throw InvalidInput("material: Pi must be nonnegative");
  positive(k_h, "k_h");
  positive(xi_inf, "xi_inf");
  positive(k_s, "k_s");
  positive(g_s, "g_s");
  positive(k_c, "k_c");
  positive(g_c, "g_c");
  positive(K_s, "K_s");
  positive(K_c, "K_c");
  positive(d, "d");
  positive(c0, "c0");
}

BoundaryField BoundaryField::zero(const Mesh& mesh) {
  BoundaryField f;
  f.points_per_facet = facet_quadrature_points();
  f.values.assign(mesh.facets.size() * f.points_per_facet, Vec2::Zero());
  return f;
}

BoundaryVectorCoeff BoundaryField::coeff() const {
  const BoundaryField* self = this;
  return [self](const Facet& f, int q, const Vec2&, const Vec2&) { return self->at(f, q); };
}

double BoundaryField::max_norm() const {
  double m = 0.0;
  for (const auto& v : values) m = std::max(m, v.norm());
  return m;
}

BoundaryField operator+(const BoundaryField& a, const BoundaryField& b) {
  BoundaryField out = a;
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
  return out;
}

BoundaryField operator*(double s, const BoundaryField& a) {
  BoundaryField out = a;
  for (auto& v : out.values) v *= s;
  return out;
}

Mat2 isotropic_stress(const ElasticConstants& ec, const Mat2& grad_u) {
  Mat2 eps = 0.5 * (grad_u + grad_u.transpose());
  return ec.lambda * eps.trace() * Mat2::Identity() + 2.0 * ec.mu * eps;
}

BoundaryVectorCoeff default_traction(const MaterialParams& mp, double t) {
  double load = mp.p_ext_at(t) - mp.pi_ext_at(t);
  return [load](const Facet&, int, const Vec2&, const Vec2& n) { return Vec2(-load * n); };
}

namespace {

// Exact constant-value shift: solve for the zero-boundary remainder and add
// the constant back, so constant states are reproduced to roundoff.
Field solve_shifted_constant(const Mesh& mesh, SparseSystem sys, double boundary_value) {
  VecX ones = VecX::Ones(sys.num_dofs());
  sys.rhs_unconstrained -= boundary_value * (sys.unconstrained * ones);
  sys.rhs = sys.rhs_unconstrained;
  apply_dirichlet(sys, mesh, BoundarySelector::All, 0.0);
  Field out = make_field(mesh, FieldRank::Scalar, 1);
  out.coeffs = solve(sys);
  out.coeffs.array() += boundary_value;
  return out;
}

}  // namespace

Field solve_pressure_rate(const Mesh& mesh, const MaterialParams& mp, const Field& e_rate,
                          const ScalarBC& bc) {
  double coef = 2.0 * mp.ec.mu + mp.ec.lambda;
  ScalarFormOptions opt;
  opt.grad_source = field_gradient_coeff(e_rate, coef);
  SparseSystem sys =
      assemble_scalar(mesh, 1, constant_coeff(Mat2(Mat2::Identity())), nullptr, nullptr, nullptr, opt);
  apply_dirichlet(sys, mesh, BoundarySelector::All, bc);
  Field p_rate = make_field(mesh, FieldRank::Scalar, 1);
  p_rate.coeffs = solve(sys);
  return p_rate;
}

Field solve_pressure_rate(const Mesh& mesh, const MaterialParams& mp, const Field& e_rate,
                          double p_ext_rate) {
  double coef = 2.0 * mp.ec.mu + mp.ec.lambda;
  ScalarFormOptions opt;
  opt.grad_source = field_gradient_coeff(e_rate, coef);
  SparseSystem sys =
      assemble_scalar(mesh, 1, constant_coeff(Mat2(Mat2::Identity())), nullptr, nullptr, nullptr, opt);
  return solve_shifted_constant(mesh, std::move(sys), p_ext_rate);
}

BoundaryField traction_correction(const Mesh& mesh_ref, const Mesh& mesh_t,
                                  const ElasticConstants& ec, const Field& u_s,
                                  const BoundaryTraction& g, const DeformationMap& map,
                                  double t) {
  BoundaryField r = BoundaryField::zero(mesh_t);
  const int nq = facet_quadrature_points();
  for (const auto& facet : mesh_t.facets) {
    if (facet.tag != BoundaryTag::GammaPlus) continue;
    const Facet& facet_ref = mesh_ref.facets[facet.id];
    Vec2 a_ref = mesh_ref.vertices[facet_ref.a];
    Vec2 b_ref = mesh_ref.vertices[facet_ref.b];
    for (int q = 0; q < nq; ++q) {
      Vec2 x;
      double w;
      facet_quadrature(mesh_t, facet, q, &x, &w);
      // Reference point at the same facet parameter (the deformed facet is
      // the straight image of the reference one).
      Vec2 xa = mesh_t.vertices[facet.a], xb = mesh_t.vertices[facet.b];
      double s = (x - xa).norm() / (xb - xa).norm();
      Vec2 x_ref = a_ref + s * (b_ref - a_ref);

      SurfaceFrame frame = map.top_frame(x_ref.x(), t);
      Vec2 n = frame.normal;
      Vec2 V = map.velocity_current(x_ref, t);
      Mat2 GV = map.velocity_gradient_current(x_ref, t);

      Vec3 bary = barycentric_coords(mesh_t, facet.tri, x);
      Mat2 sigma = isotropic_stress(ec, eval_vector_gradient(u_s, facet.tri, bary));

      // (V . grad) g of the data.
      Vec2 transport_g = Vec2::Zero();
      if (g.gradient) transport_g = g.gradient(facet, q, x, n) * V;

      // (V . grad) sigma(u) n from the element second derivatives.
      std::array<Mat2, 2> H = eval_vector_hessian(u_s, facet.tri);
      Vec2 grad_div(H[0](0, 0) + H[1](1, 0), H[0](0, 1) + H[1](1, 1));
      Mat2 dsigma_V;  // (j, a) = V_p d_p sigma_ja
      for (int j = 0; j < 2; ++j)
        for (int a = 0; a < 2; ++a) {
          double v = 0.0;
          for (int p = 0; p < 2; ++p) {
            double d = ec.mu * (H[j](a, p) + H[a](j, p));
            if (j == a) d += ec.lambda * grad_div[p];
            v += V[p] * d;
          }
          dsigma_V(j, a) = v;
        }

      // -sigma ndot with ndot = -(I - n n^T)(grad V)^T n expands to
      // sigma (grad V)^T n - (n^T grad V n) sigma n. The discrete stress
      // trace is used throughout: in the coupled split the total boundary
      // stress is g plus the pressure part, so substituting the external
      // data alone would inject a spurious load when the two balance.
      Vec2 w_vec = GV.transpose() * n;
      r.at(facet, q) = transport_g - dsigma_V * n + sigma * w_vec - n.dot(GV * n) * (sigma * n);
    }
  }
  return r;
}

Field solve_velocity(const Mesh& mesh, const MaterialParams& mp, const Field& p_rate,
                     const BoundaryField& traction_rate) {
  ElasticityLoads loads;
  loads.pressure = field_coeff(p_rate);
  loads.traction = traction_rate.coeff();
  SparseSystem sys = assemble_elasticity(mesh, 2, mp.ec, loads);
  bool has_dirichlet = false;
  for (const auto& f : mesh.facets) has_dirichlet |= f.tag == BoundaryTag::GammaMinus;
  if (!has_dirichlet)
    throw InvalidInput("solve_velocity: no GammaMinus facets, system is singular");
  apply_dirichlet(sys, mesh, BoundarySelector::GammaMinus, 0.0);
  Field v = make_field(mesh, FieldRank::Vector2, 2);
  v.coeffs = solve(sys);
  return v;
}

Field solve_pressure(const Mesh& mesh, const MaterialParams& mp, const Field& v_s,
                     const Field& phi_s, const ScalarBC& bc) {
  ScalarCoeff div_vs = field_divergence_coeff(v_s);
  ScalarCoeff source = [div_vs](int tri, const Vec2& x) { return -div_vs(tri, x); };
  SparseSystem sys = assemble_scalar(mesh, 1, constant_coeff(Mat2(mp.k_h * Mat2::Identity())),
                                     nullptr, nullptr, source);
  apply_dirichlet(sys, mesh, BoundarySelector::All, bc);
  Field p = make_field(mesh, FieldRank::Scalar, 1);
  p.coeffs = solve(sys);
  if (mp.osmotic) {
    // The unknown above is chi = p - Pi phi_s.
    p.coeffs += mp.Pi * phi_s.coeffs;
  }
  return p;
}

Field solve_pressure(const Mesh& mesh, const MaterialParams& mp, const Field& v_s,
                     const Field& phi_s, double t) {
  double bc = mp.osmotic ? mp.p_ext_at(t) - mp.pi_ext_at(t) : mp.p_ext_at(t);
  ScalarCoeff div_vs = field_divergence_coeff(v_s);
  ScalarCoeff source = [div_vs](int tri, const Vec2& x) { return -div_vs(tri, x); };
  SparseSystem sys = assemble_scalar(mesh, 1, constant_coeff(Mat2(mp.k_h * Mat2::Identity())),
                                     nullptr, nullptr, source);
  Field p = solve_shifted_constant(mesh, std::move(sys), bc);
  if (mp.osmotic) p.coeffs += mp.Pi * phi_s.coeffs;
  return p;
}

Field solve_displacement(const Mesh& mesh, const MaterialParams& mp, const Field& p,
                         const Field& phi_s, double t, const BoundaryVectorCoeff& g_override) {
  ElasticityLoads loads;
  const Field* pp = &p;
  const Field* ps = &phi_s;
  double Pi = mp.Pi;
  loads.pressure = [pp, ps, Pi](int tri, const Vec2& x) {
    Vec3 bary = barycentric_coords(*pp->mesh, tri, x);
    return eval_scalar(*pp, tri, bary) + Pi * eval_scalar(*ps, tri, bary);
  };
  loads.traction = g_override ? g_override : default_traction(mp, t);
  SparseSystem sys = assemble_elasticity(mesh, 2, mp.ec, loads);
  bool has_dirichlet = false;
  for (const auto& f : mesh.facets) has_dirichlet |= f.tag == BoundaryTag::GammaMinus;
  if (!has_dirichlet)
    throw InvalidInput("solve_displacement: no GammaMinus facets, system is singular");
  apply_dirichlet(sys, mesh, BoundarySelector::GammaMinus, 0.0);
  Field u = make_field(mesh, FieldRank::Vector2, 2);
  u.coeffs = solve(sys);
  return u;
}

Field darcy_fluid_velocity(const Mesh& mesh, const MaterialParams& mp, const Field& p,
                           const Field& phi_s, const Field& v_s) {
  Field potential = p;
  if (mp.osmotic) potential.coeffs -= mp.Pi * phi_s.coeffs;
  Field grad_p = recover_gradient(mesh, potential);
  Field grad_p2 = promote_to_degree2(mesh, grad_p);
  Field v_f = v_s;
  v_f.coeffs -= mp.xi_inf * grad_p2.coeffs;
  return v_f;
}

}  // namespace biofilm
