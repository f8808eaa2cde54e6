#include "biofilm/config.hpp"
#include "biofilm/io.hpp"
#include "biofilm/verification.hpp"

#include <CLI11.hpp>

#include <Eigen/Core>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

using namespace biofilm;

int run_simulate(const std::string& config_path, const std::string& out_override,
                 double until_override) {
  RunConfig cfg;
  try {
    cfg = parse_config_file(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error in " << config_path << ":\n";
    for (const auto& v : e.violations) std::cerr << "  " << v << '\n';
    return 2;
  } catch (const InvalidInput& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  if (!out_override.empty()) cfg.dir = out_override;
  double T = until_override > 0.0 ? until_override : cfg.T;

  try {
    Mesh mesh = cfg.build_mesh();
    DeformationMap map = cfg.build_map();
    CoupledModel model;
    model.mesh_ref = &mesh;
    model.map = &map;
    model.mp = cfg.build_material();
    model.sweep = cfg.sweep;
    model.theta = cfg.theta;
    model.lambda_shift = cfg.lambda_shift;

    if (cfg.dump_matrices) {
      // Debugging dumps of the two assembled operators at t = 0.
      namespace fsd = std::filesystem;
      fsd::create_directories(cfg.dir);
      SparseSystem stiff = assemble_elasticity(mesh, 2, model.mp.ec);
      write_matrix_market(stiff.unconstrained, cfg.dir + "/elasticity_t0.mtx");
      SparseSystem lap = assemble_scalar(mesh, 1,
                                         constant_coeff(Mat2(model.mp.k_h * Mat2::Identity())),
                                         nullptr, nullptr, nullptr);
      write_matrix_market(lap.unconstrained, cfg.dir + "/pressure_t0.mtx");
    }

    std::filesystem::create_directories(cfg.dir);
    write_mesh_vtk(mesh, cfg.dir + "/mesh_reference.vtk");

    RunReport report;
    SlabState state = initial_slab(model);
    report.add(state);
    int slab = 0;
    if (cfg.stride >= 1 && slab % cfg.stride == 0)
      export_fields(state, slab, cfg.dir, cfg.csv, cfg.vtk);
    std::cout << "slab " << slab << " t=" << state.t << " sweeps=" << state.sweep_history.size()
              << '\n';

    std::vector<double> h_columns;
    while (state.t + 1e-12 < T) {
      double t_next = std::min(state.t + cfg.dt, T);
      state = solve_time_slab(model, state, t_next);
      ++slab;
      report.add(state);
      if (slab % cfg.stride == 0) export_fields(state, slab, cfg.dir, cfg.csv, cfg.vtk);
      std::cout << "slab " << slab << " t=" << state.t
                << " sweeps=" << state.sweep_history.size()
                << " residual=" << (state.sweep_history.empty() ? 0.0 : state.sweep_history.back())
                << " height_flux=" << state.height_flux_norm << '\n';
      if (cfg.experimental_height_update) {
        if (h_columns.empty()) {
          for (int i = 0; i <= state.mesh_t().grid_nx; ++i) {
            double x1 = cfg.L * static_cast<double>(i) / state.mesh_t().grid_nx;
            h_columns.push_back(map.top_height(x1, state.t));
          }
        }
        HeightUpdate up =
            height_explicit_update(h_columns, state, model.mp, cfg.dt, cfg.h_floor, true);
        h_columns = up.h_next;
        std::cout << "  experimental height update: dt_used=" << up.dt_used
                  << (up.clipped ? " (clipped at floor)" : "") << '\n';
      }
    }
    report.write(cfg.dir + "/run_report.csv");
    std::cout << "report: " << cfg.dir << "/run_report.csv\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "simulation failed: " << e.what() << '\n';
    return 1;
  }
}

int run_verify(const std::string& suite) {
  std::vector<SuiteResult> results;
  try {
    if (suite == "all") {
      results = run_all_verifications();
    } else {
      results.push_back(run_verification_suite(suite));
    }
  } catch (const InvalidInput& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  bool ok = true;
  for (const auto& r : results) {
    for (const auto& c : r.checks) {
      std::cout << (c.pass ? "PASS" : "FAIL") << "  [" << r.suite << "] " << c.name;
      if (!c.detail.empty()) std::cout << "  (" << c.detail << ")";
      std::cout << '\n';
      ok &= c.pass;
    }
  }
  std::cout << (ok ? "all checks passed" : "some checks FAILED") << '\n';
  return ok ? 0 : 1;
}

int run_inspect(const std::string& config_path) {
  RunConfig cfg;
  try {
    cfg = parse_config_file(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error in " << config_path << ":\n";
    for (const auto& v : e.violations) std::cerr << "  " << v << '\n';
    return 2;
  } catch (const InvalidInput& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  std::cout << cfg.normalized();
  try {
    Mesh mesh = cfg.build_mesh();
    DeformationMap map = cfg.build_map();
    MaterialParams mp = cfg.build_material();
    Field vf0 = make_field(mesh, FieldRank::Vector2, 2);
    std::cout << "\n# derived\n";
    std::cout << "t_max = " << map.t_max() << '\n';
    std::cout << "h_mesh = " << mesh.h_mesh << '\n';
    std::cout << "triangles = " << mesh.num_triangles() << '\n';
    std::cout << "min_quality = " << min_triangle_quality(mesh) << '\n';
    std::cout << "coercivity_margin(v_f=0) = " << coercivity_margin(mesh, vf0, mp) << '\n';
    std::cout << "transport_threshold = " << mp.k_s * mp.g_s << '\n';
  } catch (const std::exception& e) {
    std::cerr << "inspect failed: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("BIOFILM_NUM_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));

  CLI::App app{"two-phase biofilm spread simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  double until = -1.0;
  auto* sim = app.add_subcommand("simulate", "run the coupled simulation from a config");
  sim->add_option("config", config_path, "config file")->required();
  sim->add_option("--out", out_dir, "output directory override");
  sim->add_option("--until", until, "stop at this time instead of [time] T");

  std::string suite = "all";
  auto* ver = app.add_subcommand("verify", "run verification suites");
  ver->add_option("suite", suite, "geometry|fem|mechanics|shape-derivative|transport|"
                                  "concentration|moving-diffusion|coupled|all");

  std::string inspect_path;
  auto* ins = app.add_subcommand("inspect", "print the normalized config and derived quantities");
  ins->add_option("config", inspect_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) return run_simulate(config_path, out_dir, until);
  if (ver->parsed()) return run_verify(suite);
  if (ins->parsed()) return run_inspect(inspect_path);
  return 2;
}
