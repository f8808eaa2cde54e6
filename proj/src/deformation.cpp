#include "biofilm/deformation.hpp"

#include <cmath>
#include <sstream>

namespace biofilm {

namespace {

[[noreturn]] void degenerate_at(const Vec2& x, double t, double detJ) {
  std::ostringstream os;
  os << "degenerate deformation: detJ=" << detJ << " at x=(" << x.x() << "," << x.y()
     << "), t=" << t;
  throw DegenerateDeformation(os.str());
}

}  // namespace

DeformationMap DeformationMap::identity(double t_max) {
  DeformationMap m;
  m.mode_ = Mode::LinearField;
  m.nu_ = [](const Vec2&) { return Vec2::Zero(); };
  m.grad_nu_ = [](const Vec2&) { return Mat2::Zero(); };
  m.h0_ = [](double) { return 1.0; };
  m.dh0_dx1_ = [](double) { return 0.0; };
  m.t_max_ = t_max;
  return m;
}

DeformationMap DeformationMap::linear_field(VectorFieldFn nu, MatrixFieldFn grad_nu,
                                            double length, ScalarFn h0, ScalarFn dh0_dx1,
                                            double t_max_request) {
  DeformationMap m;
  m.mode_ = Mode::LinearField;
  m.nu_ = std::move(nu);
  m.grad_nu_ = std::move(grad_nu);
  m.length_ = length;
  m.h0_ = std::move(h0);
  m.dh0_dx1_ = std::move(dh0_dx1);
  m.compute_t_max(t_max_request);
  return m;
}

DeformationMap DeformationMap::graph_height(SpaceTimeFn h, SpaceTimeFn dh_dt, SpaceTimeFn dh_dx1,
                                            SpaceTimeFn d2h_dx1x1, SpaceTimeFn d2h_dtdx1,
                                            ScalarFn h0, ScalarFn dh0_dx1, double length,
                                            double h_floor, double t_max_request) {
  DeformationMap m;
  m.mode_ = Mode::GraphHeight;
  m.h_ = std::move(h);
  m.dh_dt_ = std::move(dh_dt);
  m.dh_dx1_ = std::move(dh_dx1);
  m.d2h_dx1x1_ = std::move(d2h_dx1x1);
  m.d2h_dtdx1_ = std::move(d2h_dtdx1);
  m.h0_ = std::move(h0);
  m.dh0_dx1_ = std::move(dh0_dx1);
  m.length_ = length;
  m.h_floor_ = h_floor;
  m.compute_t_max(t_max_request);
  return m;
}

DeformationMap DeformationMap::graph_height_expr(const Expr& h, const Expr& h0, double length,
                                                 double h_floor, double t_max_request) {
  Expr ht = h.derivative("t");
  Expr hx = h.derivative("x1");
  Expr hxx = hx.derivative("x1");
  Expr htx = ht.derivative("x1");
  Expr h0x = h0.derivative("x1");
  return graph_height(
      [h](double x1, double t) { return h.eval(x1, 0.0, t); },
      [ht](double x1, double t) { return ht.eval(x1, 0.0, t); },
      [hx](double x1, double t) { return hx.eval(x1, 0.0, t); },
      [hxx](double x1, double t) { return hxx.eval(x1, 0.0, t); },
      [htx](double x1, double t) { return htx.eval(x1, 0.0, t); },
      [h0](double x1) { return h0.eval(x1, 0.0, 0.0); },
      [h0x](double x1) { return h0x.eval(x1, 0.0, 0.0); }, length, h_floor, t_max_request);
}

void DeformationMap::compute_t_max(double t_request) {
  if (t_request <= 0.0) throw InvalidInput("deformation: t_max request must be positive");
  const int n = 64;
  auto admissible = [this](double t) {
    for (int i = 0; i <= n; ++i) {
      double x1 = length_ * static_cast<double>(i) / n;
      double h0 = h0_(x1);
      if (mode_ == Mode::GraphHeight && h_(x1, t) < h_floor_) return false;
      for (int j = 0; j <= n; ++j) {
        Vec2 x(x1, h0 * static_cast<double>(j) / n);
        Mat2 J;
        if (mode_ == Mode::LinearField) {
          J = Mat2::Identity() + t * grad_nu_(x);
        } else {
          double rho = h_(x1, t) / h0;
          double drho = (dh_dx1_(x1, t) * h0 - h_(x1, t) * dh0_dx1_(x1)) / (h0 * h0);
          J << 1.0, 0.0, x.y() * drho, rho;
        }
        if (J.determinant() <= 1e-12) return false;
      }
    }
    return true;
  };
  if (admissible(t_request)) {
    t_max_ = t_request;
    return;
  }
  double lo = 0.0, hi = t_request;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (admissible(mid) ? lo : hi) = mid;
  }
  t_max_ = lo;
  if (t_max_ <= 0.0)
    throw InvalidInput("deformation: map is degenerate at all positive times");
}

void DeformationMap::check_time(double t) const {
  if (t < 0.0 || t > t_max_ * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "deformation: t=" << t << " outside [0, t_max=" << t_max_ << "]";
    throw InvalidInput(os.str());
  }
}

Vec2 DeformationMap::map(const Vec2& x, double t) const {
  check_time(t);
  if (mode_ == Mode::LinearField) return x + t * nu_(x);
  double h0 = h0_(x.x());
  return Vec2(x.x(), x.y() * h_(x.x(), t) / h0);
}

JacobianData DeformationMap::jacobian_at(const Vec2& x, double t) const {
  check_time(t);
  JacobianData jd;
  if (mode_ == Mode::LinearField) {
    jd.J = Mat2::Identity() + t * grad_nu_(x);
    jd.map_velocity = nu_(x);
  } else {
    double x1 = x.x();
    double h0 = h0_(x1);
    double h = h_(x1, t);
    double rho = h / h0;
    double drho = (dh_dx1_(x1, t) * h0 - h * dh0_dx1_(x1)) / (h0 * h0);
    jd.J << 1.0, 0.0, x.y() * drho, rho;
    jd.map_velocity = Vec2(0.0, x.y() * dh_dt_(x1, t) / h0);
  }
  jd.detJ = jd.J.determinant();
  if (jd.detJ <= 0.0) degenerate_at(x, t, jd.detJ);
  jd.Jinv = jd.J.inverse();
  return jd;
}

double DeformationMap::surface_dilation(const Vec2& x, const Vec2& n_ref, double t) const {
  JacobianData jd = jacobian_at(x, t);
  return jd.detJ * (jd.Jinv.transpose() * n_ref).norm();
}

Vec2 DeformationMap::velocity_current(const Vec2& x_ref, double t) const {
  return jacobian_at(x_ref, t).map_velocity;
}

Mat2 DeformationMap::velocity_gradient_current(const Vec2& x_ref, double t) const {
  JacobianData jd = jacobian_at(x_ref, t);
  Mat2 grad_ref;  // gradient of dPhi/dt in reference coordinates
  if (mode_ == Mode::LinearField) {
    grad_ref = grad_nu_(x_ref);
  } else {
    double x1 = x_ref.x();
    double h0 = h0_(x1);
    double h0x = dh0_dx1_(x1);
    double ht = dh_dt_(x1, t);
    double htx = d2h_dtdx1_(x1, t);
    grad_ref << 0.0, 0.0, x_ref.y() * (htx * h0 - ht * h0x) / (h0 * h0), ht / h0;
  }
  return grad_ref * jd.Jinv;  // chain rule to current coordinates
}

double DeformationMap::top_height(double x1, double t) const {
  if (mode_ == Mode::GraphHeight) return h_(x1, t);
  Vec2 top(x1, h0_(x1));
  return (top + t * nu_(top)).y();
}

SurfaceFrame DeformationMap::top_frame(double x1, double t) const {
  check_time(t);
  double slope, curvature, slope_rate;
  if (mode_ == Mode::GraphHeight) {
    slope = dh_dx1_(x1, t);
    curvature = d2h_dx1x1_(x1, t);
    slope_rate = d2h_dtdx1_(x1, t);
  } else {
    // Current top parametrized by the reference abscissa: y(x1) =
    // (x1, h0(x1)) + t*nu. Slope of the graph is y2'/y1'; the curvature is
    // obtained by differencing the analytic slope (the field callables do
    // not carry second derivatives).
    auto graph_tangent = [this, t](double a) {
      Vec2 p(a, h0_(a));
      Vec2 tangent_ref(1.0, dh0_dx1_(a));
      Vec2 yprime = tangent_ref + t * (grad_nu_(p) * tangent_ref);
      if (std::abs(yprime.x()) < 1e-14)
        throw DegenerateDeformation("top boundary is no longer a graph over x1");
      return yprime;
    };
    Vec2 yprime = graph_tangent(x1);
    slope = yprime.y() / yprime.x();
    const double dx = 1e-6 * std::max(1.0, length_);
    double a0 = std::max(0.0, x1 - dx), a1 = std::min(length_, x1 + dx);
    Vec2 y0 = graph_tangent(a0), y1 = graph_tangent(a1);
    curvature = (y1.y() / y1.x() - y0.y() / y0.x()) / (a1 - a0);
    Vec2 p(x1, h0_(x1));
    Vec2 w = grad_nu_(p) * Vec2(1.0, dh0_dx1_(x1));
    slope_rate = (w.y() - slope * w.x()) / yprime.x();
  }
  SurfaceFrame frame;
  double s = std::sqrt(1.0 + slope * slope);
  frame.slope = slope;
  frame.normal = Vec2(-slope / s, 1.0 / s);
  frame.dnormal_dx1 = curvature / (s * s * s) * Vec2(-1.0, -slope);
  frame.dnormal_dt = slope_rate / (s * s * s) * Vec2(-1.0, -slope);
  return frame;
}

Mesh deform_mesh(const Mesh& mesh, const DeformationMap& map, double t) {
  Mesh out = mesh;
  for (size_t i = 0; i < mesh.vertices.size(); ++i) out.vertices[i] = map.map(mesh.vertices[i], t);
  for (int tr = 0; tr < out.num_triangles(); ++tr) {
    if (out.triangle_area(tr) <= 0.0) {
      const auto& tri = out.triangles[tr];
      degenerate_at(mesh.vertices[tri[0]], t, out.triangle_area(tr));
    }
  }
  double h = 0.0;
  for (const auto& e : out.edges) h = std::max(h, (out.vertices[e[0]] - out.vertices[e[1]]).norm());
  out.h_mesh = h;
  return out;
}

}  // namespace biofilm
