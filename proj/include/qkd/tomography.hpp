#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qkd/qstate.hpp"

namespace qkd {

struct ProjectionPair {
  PolarizationState alice;
  PolarizationState bob;
  std::string label;  // e.g. "H⊗R"
};

// The 6x6 Cartesian product of {H, V, D, A, R, L} on each side,
// Alice-major, in that sequence. 36 pairs, "H⊗H" first.
const std::vector<ProjectionPair>& standard_projection_set();

struct TomographyRecord {
  std::vector<ProjectionPair> pairs;
  std::vector<std::uint64_t> counts;
  double acquisition_seconds = 0.0;

  // File format: header line `tomo-v1 <acquisition_seconds>`, then one
  // `label count` line per projection.
  void save(const std::string& path) const;
  static TomographyRecord load(const std::string& path);
  std::string to_text() const;
  static TomographyRecord from_text(const std::string& text);
};

// Born probabilities p_k = Tr(rho . |a_k><a_k| (x) |b_k><b_k|).
std::vector<double> predict_probabilities(const DensityMatrix& rho,
                                          const std::vector<ProjectionPair>& pairs);

// Poisson counts with mean = pair_rate * seconds_per_projection * p_k over
// the standard projection set. Reproducible under a fixed seed.
TomographyRecord simulate_tomography(const DensityMatrix& rho, double pair_rate,
                                     double seconds_per_projection,
                                     std::uint64_t seed);

struct ReconstructionResult {
  DensityMatrix rho;
  double residual = 0.0;        // max |Tr(rho P_k) - p_hat_k| after projection
  bool residual_warning = false;
};

// Linear inversion over the 36-projector operator basis (counts normalized
// per basis-pair group), then projection to the physical set: negative
// eigenvalues clipped to zero, trace renormalized.
ReconstructionResult reconstruct(const TomographyRecord& record);

}  // namespace qkd
