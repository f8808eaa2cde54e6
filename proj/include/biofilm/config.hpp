#pragma once

#include "biofilm/coupled.hpp"

#include <optional>
#include <string>

namespace biofilm {

/// Parse failure carrying every violation found (not just the first), each
/// with its line number.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, std::vector<std::string> list)
      : std::runtime_error(msg), violations(std::move(list)) {}
  std::vector<std::string> violations;
};

enum class MotionMode { None, LinearField, GraphHeight };

/// Fully validated run configuration. Expressions are kept as text and
/// compiled on demand; normalized() emits the canonical echo form, which
/// re-parses to an identical configuration.
struct RunConfig {
  // [domain]
  double L = 1.0;
  std::string h0 = "1";  // expression of x1, or "table:<path>"
  int nx = 16, ny = 16;
  double h_floor = 1e-3;

  // [motion]
  MotionMode mode = MotionMode::None;
  std::string h = "";          // graph-height expression of (x1, t)
  std::string nu1 = "0", nu2 = "0";  // linear-field components of (x1, x2)

  // [material]
  double mu = 1.0, lambda = 1.0;
  double k_h = 1.0, Pi = 0.0, xi_inf = 1.0;
  double k_s = 1.0, g_s = 1.0, k_c = 1.0, g_c = 1.0;
  double K_s = 1.0, K_c = 1.0;
  double d = 1.0, c0 = 1.0;
  std::string p_ext = "0", pi_ext = "0";  // expressions of t
  double e_ext = 0.0, e0 = 0.0;
  bool monod_live = false;
  bool osmotic = false;

  // [time]
  double T = 1.0, dt = 0.1, theta = 1.0;
  std::optional<double> lambda_shift;

  // [solver]
  SweepConfig sweep;

  // [output]
  std::string dir = "out";
  int stride = 1;
  bool csv = true, vtk = true;
  bool dump_matrices = false;
  bool experimental_height_update = false;

  std::string normalized() const;
  Mesh build_mesh() const;
  DeformationMap build_map() const;
  MaterialParams build_material() const;
};

RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Piecewise-linear interpolant of a two-column (x1, h) CSV table.
std::function<double(double)> load_height_table(const std::string& path);

}  // namespace biofilm
