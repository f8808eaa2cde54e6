#include "biofilm/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace biofilm {

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write '" + path + "'");
  return os;
}

void write_field_csv(const Mesh& mesh, const Field& f, const std::string& path) {
  std::ofstream os = open_out(path);
  os << "node,x1,x2";
  if (f.rank == FieldRank::Scalar)
    os << ",value\n";
  else
    os << ",v1,v2\n";
  for (int n = 0; n < f.num_nodes(); ++n) {
    Vec2 x = mesh.node_position(f.degree, n);
    os << n << ',' << format_double(x.x()) << ',' << format_double(x.y());
    for (int c = 0; c < f.components(); ++c)
      os << ',' << format_double(f.coeffs[f.components() * n + c]);
    os << '\n';
  }
}

void vtk_header(std::ostream& os, const Mesh& mesh) {
  os << "# vtk DataFile Version 3.0\n";
  os << "biofilm slab fields\n";
  os << "ASCII\n";
  os << "DATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& v : mesh.vertices)
    os << format_double(v.x()) << ' ' << format_double(v.y()) << " 0\n";
  os << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
  for (const auto& t : mesh.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "CELL_TYPES " << mesh.num_triangles() << '\n';
  for (int t = 0; t < mesh.num_triangles(); ++t) os << "5\n";
}

void vtk_point_scalar(std::ostream& os, const Mesh& mesh, const Field& f, const std::string& name) {
  os << "SCALARS " << name << " double 1\n";
  os << "LOOKUP_TABLE default\n";
  for (int v = 0; v < mesh.num_vertices(); ++v) os << format_double(f.coeffs[v]) << '\n';
}

void vtk_point_vector(std::ostream& os, const Mesh& mesh, const Field& f, const std::string& name) {
  os << "VECTORS " << name << " double\n";
  for (int v = 0; v < mesh.num_vertices(); ++v)
    os << format_double(f.coeffs[2 * v]) << ' ' << format_double(f.coeffs[2 * v + 1]) << " 0\n";
}

std::string slab_tag(int slab_index, double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "slab_%04d_t%.6f", slab_index, t);
  return buf;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> export_fields(const SlabState& state, int slab_index,
                                       const std::string& dir, bool csv, bool vtk) {
  fs::create_directories(dir);
  std::vector<std::string> written;
  const std::string tag = slab_tag(slab_index, state.t);
  const std::pair<const char*, const Field*> fields[] = {
      {"e_rate", &state.e_rate}, {"p_rate", &state.p_rate}, {"p", &state.p},
      {"u_s", &state.u_s},       {"v_s", &state.v_s},       {"v_f", &state.v_f},
      {"phi_f", &state.phi_f},   {"phi_s", &state.phi_s},   {"c", &state.c},
  };
  if (csv) {
    for (const auto& [name, f] : fields) {
      std::string path = dir + "/" + tag + "_" + name + ".csv";
      write_field_csv(state.mesh_t(), *f, path);
      written.push_back(path);
    }
  }
  if (vtk) {
    std::string path = dir + "/" + tag + ".vtk";
    std::ofstream os = open_out(path);
    vtk_header(os, state.mesh_t());
    os << "POINT_DATA " << state.mesh_t().num_vertices() << '\n';
    for (const auto& [name, f] : fields) {
      if (f->rank == FieldRank::Scalar)
        vtk_point_scalar(os, state.mesh_t(), *f, name);
      else
        vtk_point_vector(os, state.mesh_t(), *f, name);
    }
    written.push_back(path);
  }
  return written;
}

std::vector<std::string> export_trajectory(const DiffusionTrajectory& traj,
                                           const std::string& dir, int stride) {
  fs::create_directories(dir);
  std::vector<std::string> written;
  std::vector<std::pair<std::string, double>> series;
  for (size_t i = 0; i < traj.times.size(); i += stride) {
    double t = traj.times[i];
    Mesh deformed = traj.deformed_at(static_cast<int>(i));
    char buf[64];
    std::snprintf(buf, sizeof buf, "diffusion_%04zu", i);
    std::string base = buf;

    std::string csv_path = dir + "/" + base + ".csv";
    std::ofstream cs = open_out(csv_path);
    cs << "x1_ref,x2_ref,x1_t,x2_t,value\n";
    const Field& f = traj.states[i];
    for (int n = 0; n < f.num_nodes(); ++n) {
      Vec2 xr = traj.mesh->node_position(f.degree, n);
      Vec2 xt = deformed.node_position(f.degree, n);
      cs << format_double(xr.x()) << ',' << format_double(xr.y()) << ','
         << format_double(xt.x()) << ',' << format_double(xt.y()) << ','
         << format_double(f.coeffs[n]) << '\n';
    }
    written.push_back(csv_path);

    std::string vtk_path = dir + "/" + base + ".vtk";
    std::ofstream os = open_out(vtk_path);
    vtk_header(os, deformed);
    os << "POINT_DATA " << deformed.num_vertices() << '\n';
    vtk_point_scalar(os, deformed, f, "e_rate");
    written.push_back(vtk_path);
    series.emplace_back(base + ".vtk", t);
  }
  // ParaView .series index.
  std::string series_path = dir + "/diffusion.vtk.series";
  std::ofstream ss = open_out(series_path);
  ss << "{\n  \"file-series-version\" : \"1.0\",\n  \"files\" : [\n";
  for (size_t i = 0; i < series.size(); ++i) {
    ss << "    { \"name\" : \"" << series[i].first << "\", \"time\" : "
       << format_double(series[i].second) << " }" << (i + 1 < series.size() ? "," : "") << '\n';
  }
  ss << "  ]\n}\n";
  written.push_back(series_path);
  return written;
}

std::vector<FieldCsvRow> read_field_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot read '" + path + "'");
  std::vector<FieldCsvRow> rows;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    FieldCsvRow row;
    std::istringstream ls(line);
    std::string cell;
    int col = 0;
    while (std::getline(ls, cell, ',')) {
      switch (col) {
        case 0: row.node = std::stoi(cell); break;
        case 1: row.x1 = std::stod(cell); break;
        case 2: row.x2 = std::stod(cell); break;
        default: row.components.push_back(std::stod(cell));
      }
      ++col;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void RunReport::add(const SlabState& state) {
  std::ostringstream os;
  auto minmax = [](const Field& f) {
    return std::make_pair(f.coeffs.minCoeff(), f.coeffs.maxCoeff());
  };
  os << format_double(state.t) << ',' << state.sweep_history.size() << ','
     << format_double(state.sweep_history.empty() ? 0.0 : state.sweep_history.back());
  for (const Field* f : {&state.e_rate, &state.p_rate, &state.p, &state.u_s, &state.v_s,
                         &state.v_f, &state.phi_f, &state.phi_s, &state.c}) {
    auto [lo, hi] = minmax(*f);
    os << ',' << format_double(lo) << ',' << format_double(hi);
  }
  os << ',' << (state.admissibility.admissible ? 1 : 0) << ','
     << format_double(state.admissibility.max_div) << ','
     << format_double(state.admissibility.max_flux_normal) << ','
     << format_double(state.admissibility.grad_norm) << ','
     << format_double(state.div_consistency) << ',' << format_double(state.height_flux_norm);
  rows_.push_back(os.str());
}

void RunReport::write(const std::string& path) const {
  std::ofstream os = open_out(path);
  os << "t,sweeps,final_residual";
  for (const char* name :
       {"e_rate", "p_rate", "p", "u_s", "v_s", "v_f", "phi_f", "phi_s", "c"})
    os << ',' << name << "_min," << name << "_max";
  os << ",admissible,max_div,max_flux,grad_norm,div_consistency,height_flux_norm\n";
  for (const auto& r : rows_) os << r << '\n';
}

void write_matrix_market(const SparseMat& m, const std::string& path) {
  std::ofstream os = open_out(path);
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it)
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << format_double(it.value()) << '\n';
}

void write_mesh_vtk(const Mesh& mesh, const std::string& path) {
  std::ofstream os = open_out(path);
  vtk_header(os, mesh);
}

}  // namespace biofilm
