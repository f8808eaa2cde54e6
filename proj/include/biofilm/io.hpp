#pragma once

#include "biofilm/coupled.hpp"
#include "biofilm/moving_diffusion.hpp"

#include <string>

namespace biofilm {

/// %.17g, round-trips doubles bitwise through text.
std::string format_double(double v);

/// Per-field CSV (node id, x1, x2, components) plus a single legacy ASCII
/// VTK file with all fields as point data. Filenames carry the slab index
/// and time. Returns the paths written.
std::vector<std::string> export_fields(const SlabState& state, int slab_index,
                                       const std::string& dir, bool csv, bool vtk);

/// One CSV per dump time (reference and deformed coordinates plus value) and
/// a VTK series for the trajectory.
std::vector<std::string> export_trajectory(const DiffusionTrajectory& traj,
                                           const std::string& dir, int stride);

struct FieldCsvRow {
  int node = 0;
  double x1 = 0.0, x2 = 0.0;
  std::vector<double> components;
};
std::vector<FieldCsvRow> read_field_csv(const std::string& path);

/// Run report: one CSV row per slab.
class RunReport {
 public:
  void add(const SlabState& state);
  void write(const std::string& path) const;
  int rows() const { return static_cast<int>(rows_.size()); }

 private:
  std::vector<std::string> rows_;
};

/// MatrixMarket coordinate format, for debugging dumps (flag-gated by the
/// caller).
void write_matrix_market(const SparseMat& m, const std::string& path);

void write_mesh_vtk(const Mesh& mesh, const std::string& path);

}  // namespace biofilm
