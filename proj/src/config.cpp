#include "biofilm/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace biofilm {

namespace {

struct Assignment {
  std::string section, key, value;
  int line = 0;
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

class Collector {
 public:
  void fail(int line, const std::string& what) {
    std::ostringstream os;
    os << "line " << line << ": " << what;
    violations_.push_back(os.str());
  }
  void finish() {
    if (violations_.empty()) return;
    std::ostringstream os;
    os << violations_.size() << " configuration error(s); first: " << violations_.front();
    throw ConfigError(os.str(), violations_);
  }

 private:
  std::vector<std::string> violations_;
};

bool parse_double(const std::string& s, double* out) {
  try {
    size_t used;
    *out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_int(const std::string& s, int* out) {
  try {
    size_t used;
    *out = std::stoi(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_bool(const std::string& s, bool* out) {
  if (s == "true" || s == "on" || s == "1") {
    *out = true;
    return true;
  }
  if (s == "false" || s == "off" || s == "0") {
    *out = false;
    return true;
  }
  return false;
}

bool valid_expression(const std::string& s) {
  try {
    Expr::parse(s);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  std::vector<Assignment> assigns;
  Collector errors;
  {
    std::istringstream is(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(is, raw)) {
      ++line;
      std::string s = raw;
      size_t hash = s.find('#');
      if (hash != std::string::npos) s = s.substr(0, hash);
      s = trim(s);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') {
          errors.fail(line, "malformed section header '" + s + "'");
          continue;
        }
        section = trim(s.substr(1, s.size() - 2));
        continue;
      }
      size_t eq = s.find('=');
      if (eq == std::string::npos) {
        errors.fail(line, "expected 'key = value', got '" + s + "'");
        continue;
      }
      Assignment a;
      a.section = section;
      a.key = trim(s.substr(0, eq));
      a.value = trim(s.substr(eq + 1));
      a.line = line;
      if (a.key.empty()) {
        errors.fail(line, "empty key");
        continue;
      }
      assigns.push_back(a);
    }
  }

  RunConfig cfg;
  auto want_double = [&errors](const Assignment& a, double* slot) {
    if (!parse_double(a.value, slot)) errors.fail(a.line, a.key + " must be a number");
  };
  auto want_int = [&errors](const Assignment& a, int* slot) {
    if (!parse_int(a.value, slot)) errors.fail(a.line, a.key + " must be an integer");
  };
  auto want_bool = [&errors](const Assignment& a, bool* slot) {
    if (!parse_bool(a.value, slot)) errors.fail(a.line, a.key + " must be true or false");
  };
  auto want_expr = [&errors](const Assignment& a, std::string* slot) {
    if (valid_expression(a.value))
      *slot = a.value;
    else
      errors.fail(a.line, a.key + " is not a valid expression");
  };

  std::vector<std::pair<const Assignment*, bool>> seen;
  for (const auto& a : assigns) {
    const std::string& sec = a.section;
    const std::string& key = a.key;
    bool known = true;
    if (sec == "domain") {
      if (key == "L") want_double(a, &cfg.L);
      else if (key == "h0") {
        if (a.value.rfind("table:", 0) == 0 || valid_expression(a.value)) cfg.h0 = a.value;
        else errors.fail(a.line, "h0 must be an expression of x1 or table:<path>");
      }
      else if (key == "nx") want_int(a, &cfg.nx);
      else if (key == "ny") want_int(a, &cfg.ny);
      else if (key == "h_floor") want_double(a, &cfg.h_floor);
      else known = false;
    } else if (sec == "motion") {
      if (key == "mode") {
        if (a.value == "none") cfg.mode = MotionMode::None;
        else if (a.value == "linear_field") cfg.mode = MotionMode::LinearField;
        else if (a.value == "graph_height") cfg.mode = MotionMode::GraphHeight;
        else errors.fail(a.line, "mode must be none, linear_field or graph_height");
      }
      else if (key == "h") want_expr(a, &cfg.h);
      else if (key == "nu1") want_expr(a, &cfg.nu1);
      else if (key == "nu2") want_expr(a, &cfg.nu2);
      else known = false;
    } else if (sec == "material") {
      if (key == "mu") want_double(a, &cfg.mu);
      else if (key == "lambda") want_double(a, &cfg.lambda);
      else if (key == "k_h") want_double(a, &cfg.k_h);
      else if (key == "Pi") want_double(a, &cfg.Pi);
      else if (key == "xi_inf") want_double(a, &cfg.xi_inf);
      else if (key == "k_s") want_double(a, &cfg.k_s);
      else if (key == "g_s") want_double(a, &cfg.g_s);
      else if (key == "k_c") want_double(a, &cfg.k_c);
      else if (key == "g_c") want_double(a, &cfg.g_c);
      else if (key == "K_s") want_double(a, &cfg.K_s);
      else if (key == "K_c") want_double(a, &cfg.K_c);
      else if (key == "d") want_double(a, &cfg.d);
      else if (key == "c0") want_double(a, &cfg.c0);
      else if (key == "p_ext") want_expr(a, &cfg.p_ext);
      else if (key == "pi_ext") want_expr(a, &cfg.pi_ext);
      else if (key == "e_ext") want_double(a, &cfg.e_ext);
      else if (key == "e0") want_double(a, &cfg.e0);
      else if (key == "monod_mode") {
        if (a.value == "frozen") cfg.monod_live = false;
        else if (a.value == "live") cfg.monod_live = true;
        else errors.fail(a.line, "monod_mode must be frozen or live");
      }
      else if (key == "osmotic") want_bool(a, &cfg.osmotic);
      else known = false;
    } else if (sec == "time") {
      if (key == "T") want_double(a, &cfg.T);
      else if (key == "dt") want_double(a, &cfg.dt);
      else if (key == "theta") want_double(a, &cfg.theta);
      else if (key == "lambda_shift") {
        double v;
        if (parse_double(a.value, &v)) cfg.lambda_shift = v;
        else errors.fail(a.line, "lambda_shift must be a number");
      }
      else known = false;
    } else if (sec == "solver") {
      if (key == "max_iters") want_int(a, &cfg.sweep.max_iters);
      else if (key == "rel_tol") want_double(a, &cfg.sweep.rel_tol);
      else if (key == "relaxation") want_double(a, &cfg.sweep.relaxation);
      else if (key == "phi_infty") want_double(a, &cfg.sweep.phi_infty);
      else if (key == "fraction_tol") want_double(a, &cfg.sweep.fraction_tol);
      else known = false;
    } else if (sec == "output") {
      if (key == "dir") cfg.dir = a.value;
      else if (key == "stride") want_int(a, &cfg.stride);
      else if (key == "formats") {
        cfg.csv = a.value.find("csv") != std::string::npos;
        cfg.vtk = a.value.find("vtk") != std::string::npos;
        if (!cfg.csv && !cfg.vtk) errors.fail(a.line, "formats must list csv and/or vtk");
      }
      else if (key == "dump_matrices") want_bool(a, &cfg.dump_matrices);
      else if (key == "experimental_height_update") want_bool(a, &cfg.experimental_height_update);
      else known = false;
    } else {
      errors.fail(a.line, "unknown section '" + sec + "'");
      continue;
    }
    if (!known) errors.fail(a.line, "unknown key '" + key + "' in section [" + sec + "]");
  }

  // Invariant checks, reported with the offending line when available.
  auto line_of = [&assigns](const std::string& sec, const std::string& key) {
    for (const auto& a : assigns)
      if (a.section == sec && a.key == key) return a.line;
    return 0;
  };
  auto require = [&](bool ok, const std::string& sec, const std::string& key,
                     const std::string& what) {
    if (!ok) errors.fail(line_of(sec, key), key + " " + what);
  };
  require(cfg.L > 0.0, "domain", "L", "must be positive");
  require(cfg.nx >= 2, "domain", "nx", "must be at least 2");
  require(cfg.ny >= 2, "domain", "ny", "must be at least 2");
  require(cfg.h_floor > 0.0, "domain", "h_floor", "must be positive");
  require(cfg.mu > 0.0, "material", "mu", "must be positive");
  require(cfg.lambda >= 0.0, "material", "lambda", "must be nonnegative");
  require(cfg.Pi >= 0.0, "material", "Pi", "must be nonnegative");
  for (auto [v, k] : std::initializer_list<std::pair<double, const char*>>{
           {cfg.k_h, "k_h"}, {cfg.xi_inf, "xi_inf"}, {cfg.k_s, "k_s"}, {cfg.g_s, "g_s"},
           {cfg.k_c, "k_c"}, {cfg.g_c, "g_c"}, {cfg.K_s, "K_s"}, {cfg.K_c, "K_c"},
           {cfg.d, "d"}, {cfg.c0, "c0"}})
    require(v > 0.0, "material", k, "must be positive");
  require(cfg.T > 0.0, "time", "T", "must be positive");
  require(cfg.dt > 0.0, "time", "dt", "must be positive");
  require(cfg.theta >= 0.5 && cfg.theta <= 1.0, "time", "theta", "must lie in [0.5, 1]");
  require(cfg.sweep.max_iters >= 1, "solver", "max_iters", "must be at least 1");
  require(cfg.sweep.rel_tol > 0.0, "solver", "rel_tol", "must be positive");
  require(cfg.sweep.relaxation > 0.0 && cfg.sweep.relaxation <= 1.0, "solver", "relaxation",
          "must lie in (0, 1]");
  require(cfg.sweep.phi_infty > 0.0 && cfg.sweep.phi_infty < 1.0, "solver", "phi_infty",
          "must lie in (0, 1)");
  require(cfg.stride >= 1, "output", "stride", "must be at least 1");
  if (cfg.mode == MotionMode::GraphHeight)
    require(!cfg.h.empty(), "motion", "h", "is required in graph_height mode");

  errors.finish();
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open config file '" + path + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return parse_config(os.str());
}

std::string RunConfig::normalized() const {
  std::ostringstream os;
  os << "[domain]\n";
  os << "L = " << fmt(L) << "\n";
  os << "h0 = " << h0 << "\n";
  os << "nx = " << nx << "\n";
  os << "ny = " << ny << "\n";
  os << "h_floor = " << fmt(h_floor) << "\n";
  os << "\n[motion]\n";
  os << "mode = "
     << (mode == MotionMode::None ? "none"
                                  : mode == MotionMode::LinearField ? "linear_field"
                                                                    : "graph_height")
     << "\n";
  if (!h.empty()) os << "h = " << h << "\n";
  os << "nu1 = " << nu1 << "\n";
  os << "nu2 = " << nu2 << "\n";
  os << "\n[material]\n";
  os << "mu = " << fmt(mu) << "\n";
  os << "lambda = " << fmt(lambda) << "\n";
  os << "k_h = " << fmt(k_h) << "\n";
  os << "Pi = " << fmt(Pi) << "\n";
  os << "xi_inf = " << fmt(xi_inf) << "\n";
  os << "k_s = " << fmt(k_s) << "\n";
  os << "g_s = " << fmt(g_s) << "\n";
  os << "k_c = " << fmt(k_c) << "\n";
  os << "g_c = " << fmt(g_c) << "\n";
  os << "K_s = " << fmt(K_s) << "\n";
  os << "K_c = " << fmt(K_c) << "\n";
  os << "d = " << fmt(d) << "\n";
  os << "c0 = " << fmt(c0) << "\n";
  os << "p_ext = " << p_ext << "\n";
  os << "pi_ext = " << pi_ext << "\n";
  os << "e_ext = " << fmt(e_ext) << "\n";
  os << "e0 = " << fmt(e0) << "\n";
  os << "monod_mode = " << (monod_live ? "live" : "frozen") << "\n";
  os << "osmotic = " << (osmotic ? "true" : "false") << "\n";
  os << "\n[time]\n";
  os << "T = " << fmt(T) << "\n";
  os << "dt = " << fmt(dt) << "\n";
  os << "theta = " << fmt(theta) << "\n";
  if (lambda_shift) os << "lambda_shift = " << fmt(*lambda_shift) << "\n";
  os << "\n[solver]\n";
  os << "max_iters = " << sweep.max_iters << "\n";
  os << "rel_tol = " << fmt(sweep.rel_tol) << "\n";
  os << "relaxation = " << fmt(sweep.relaxation) << "\n";
  os << "phi_infty = " << fmt(sweep.phi_infty) << "\n";
  os << "fraction_tol = " << fmt(sweep.fraction_tol) << "\n";
  os << "\n[output]\n";
  os << "dir = " << dir << "\n";
  os << "stride = " << stride << "\n";
  os << "formats = " << (csv && vtk ? "csv,vtk" : csv ? "csv" : "vtk") << "\n";
  os << "dump_matrices = " << (dump_matrices ? "true" : "false") << "\n";
  os << "experimental_height_update = " << (experimental_height_update ? "true" : "false")
     << "\n";
  return os.str();
}

std::function<double(double)> load_height_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open height table '" + path + "'");
  std::vector<std::pair<double, double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x, h;
    if (ls >> x >> h) rows.emplace_back(x, h);
  }
  if (rows.size() < 2) throw InvalidInput("height table needs at least two rows");
  std::sort(rows.begin(), rows.end());
  return [rows](double x) {
    if (x <= rows.front().first) return rows.front().second;
    if (x >= rows.back().first) return rows.back().second;
    auto hi = std::upper_bound(rows.begin(), rows.end(), std::make_pair(x, 1e300));
    auto lo = hi - 1;
    double s = (x - lo->first) / (hi->first - lo->first);
    return (1.0 - s) * lo->second + s * hi->second;
  };
}

Mesh RunConfig::build_mesh() const {
  if (h0.rfind("table:", 0) == 0) {
    auto table = load_height_table(h0.substr(6));
    return build_strip_mesh(L, table, nx, ny);
  }
  Expr e = Expr::parse(h0);
  return build_strip_mesh(L, [e](double x1) { return e.eval(x1, 0, 0); }, nx, ny);
}

DeformationMap RunConfig::build_map() const {
  double t_request = std::max(T, dt);
  if (mode == MotionMode::None) return DeformationMap::identity();
  if (h0.rfind("table:", 0) == 0) {
    auto table = load_height_table(h0.substr(6));
    if (mode == MotionMode::GraphHeight)
      throw InvalidInput("graph_height motion requires an analytic h0 (differentiability)");
    Expr n1 = Expr::parse(nu1), n2 = Expr::parse(nu2);
    Expr d11 = n1.derivative("x1"), d12 = n1.derivative("x2");
    Expr d21 = n2.derivative("x1"), d22 = n2.derivative("x2");
    return DeformationMap::linear_field(
        [n1, n2](const Vec2& x) { return Vec2(n1.eval(x.x(), x.y(), 0), n2.eval(x.x(), x.y(), 0)); },
        [d11, d12, d21, d22](const Vec2& x) {
          Mat2 g;
          g << d11.eval(x.x(), x.y(), 0), d12.eval(x.x(), x.y(), 0), d21.eval(x.x(), x.y(), 0),
              d22.eval(x.x(), x.y(), 0);
          return g;
        },
        L, table, [](double) { return 0.0; }, t_request);
  }
  Expr e0x = Expr::parse(h0);
  if (mode == MotionMode::GraphHeight)
    return DeformationMap::graph_height_expr(Expr::parse(h), e0x, L, h_floor, t_request);
  Expr n1 = Expr::parse(nu1), n2 = Expr::parse(nu2);
  Expr d11 = n1.derivative("x1"), d12 = n1.derivative("x2");
  Expr d21 = n2.derivative("x1"), d22 = n2.derivative("x2");
  Expr h0d = e0x.derivative("x1");
  return DeformationMap::linear_field(
      [n1, n2](const Vec2& x) { return Vec2(n1.eval(x.x(), x.y(), 0), n2.eval(x.x(), x.y(), 0)); },
      [d11, d12, d21, d22](const Vec2& x) {
        Mat2 g;
        g << d11.eval(x.x(), x.y(), 0), d12.eval(x.x(), x.y(), 0), d21.eval(x.x(), x.y(), 0),
            d22.eval(x.x(), x.y(), 0);
        return g;
      },
      L, [e0x](double x1) { return e0x.eval(x1, 0, 0); },
      [h0d](double x1) { return h0d.eval(x1, 0, 0); }, t_request);
}

MaterialParams RunConfig::build_material() const {
  MaterialParams mp;
  mp.ec.mu = mu;
  mp.ec.lambda = lambda;
  mp.k_h = k_h;
  mp.Pi = Pi;
  mp.xi_inf = xi_inf;
  mp.k_s = k_s;
  mp.g_s = g_s;
  mp.k_c = k_c;
  mp.g_c = g_c;
  mp.K_s = K_s;
  mp.K_c = K_c;
  mp.d = d;
  mp.c0 = c0;
  mp.p_ext = Expr::parse(p_ext);
  mp.pi_ext = Expr::parse(pi_ext);
  mp.e_ext = e_ext;
  mp.e0 = e0;
  mp.monod_mode = monod_live ? MonodMode::Live : MonodMode::Frozen;
  mp.osmotic = osmotic;
  mp.validate();
  return mp;
}

}  // namespace biofilm
