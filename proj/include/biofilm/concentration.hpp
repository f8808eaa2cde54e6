#pragma once

#include "biofilm/mechanics.hpp"

namespace biofilm {

/// d - C * ||v_f||_inf with C the domain-diameter estimate; the advection
/// solve requires this to be positive.
double coercivity_margin(const Mesh& mesh, const Field& v_f, const MaterialParams& mp);

struct ConcentrationResult {
  Field c;
  double min_nodal = 0.0;
  bool nonnegative = true;  // min above -1e-8 * c0
  std::string warning;      // set when the nonnegativity contract is violated
  std::vector<double> live_changes;  // relative change per Monod relinearization
};

/// Advection--diffusion solve for the substrate: shifted unknown
/// ct = c - c0 from
///   d int grad(ct).grad(w) - int v_f.grad(w) ct + int_{Gamma+} ct w v_f.n
///   = -k_c g_c int phi_s w + c0 int v_f.grad(w),       ct = 0 on GammaMinus.
/// Live Monod mode relinearizes the uptake factor c/(c+K_c) five times.
/// Refuses to run when coercivity_margin <= 0.
ConcentrationResult solve_concentration(const Mesh& mesh, const Field& v_f, const Field& phi_s,
                                        const MaterialParams& mp);

}  // namespace biofilm
