#pragma once

#include <array>
#include <string>

#include "qkd/optics.hpp"
#include "qkd/qstate.hpp"

namespace qkd {

// Refuse to derive a correction below this concurrence; warn below the
// second threshold. Weakly entangled states do not pin the conditional
// bases down.
constexpr double kCorrectionRefuseConcurrence = 0.3;
constexpr double kCorrectionWarnConcurrence = 0.7;

// The derived measurement bases for Bob's four detector arms, with the
// waveplate settings realizing them.
struct CorrectedBasisSet {
  PolarizationState phi_h;  // B1 (transmitted, H/V arm)
  PolarizationState phi_v;  // B2 = exact complement of phi_h
  PolarizationState phi_d;  // B3 (transmitted, D/A arm)
  PolarizationState phi_a;  // B4 = exact complement of phi_d
  WaveplateSetting hv_setting;
  WaveplateSetting da_setting;
  double source_fidelity = 0.0;  // top eigenvalue of the input state
  bool degenerate = false;
  double state_concurrence = 0.0;
  bool low_concurrence_warning = false;
  // Non-orthogonality diagnostics: overlap of the directly extracted
  // phi_V (phi_A) with the kept phi_H (phi_D).
  double hv_extraction_overlap_sq = 0.0;
  double da_extraction_overlap_sq = 0.0;
};

// Normalized (<x| (x) I) |psi>. Throws DegenerateStateError when the
// unnormalized result has norm <= 1e-6.
PolarizationState extract_conditional_state(const TwoQubitState& psi,
                                            const PolarizationState& x);

// Full derivation: nearest pure state, conditional extraction for H and D,
// complements for V and A, waveplate settings for both arms.
CorrectedBasisSet derive_corrected_bases(const DensityMatrix& rho);

// Bob's detector arm assignment: projection states for B1..B4.
struct BobAssignment {
  std::array<PolarizationState, 4> states;
};

// B1=V, B2=H, B3=D, B4=A: the uncorrected configuration, chosen so the
// ideal (|HV>+|VH>)/sqrt(2) gives zero QBER.
BobAssignment conventional_bob_assignment();
BobAssignment corrected_bob_assignment(const CorrectedBasisSet& basis);

// Alice always measures the conventional arms: A1=H, A2=V, A3=D, A4=A.
const std::array<PolarizationState, 4>& alice_projection_states();

// Born-rule QBER prediction in percent over the 8 sifted projector pairs:
// 100 * sum_error p(i,j) / sum_all p(i,j), with
// p(i,j) = Tr(rho . |a_i><a_i| (x) |b_j><b_j|).
double predicted_qber(const DensityMatrix& rho, const BobAssignment& bob);

// Plain-text block: basis vectors, settings in degrees, fidelity,
// concurrence, degeneracy flag.
std::string correction_report(const CorrectedBasisSet& basis);

}  // namespace qkd
