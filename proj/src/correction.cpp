#include "qkd/correction.hpp"

#include <cmath>
#include <cstdio>

namespace qkd {

PolarizationState extract_conditional_state(const TwoQubitState& psi,
                                            const PolarizationState& x) {
  const Eigen::Vector4cd& p = psi.amplitudes();
  const Eigen::Vector2cd& xa = x.amplitudes();
  // (<x| (x) I)|psi>: contract the first qubit.
  Eigen::Vector2cd out;
  out(0) = std::conj(xa(0)) * p(0) + std::conj(xa(1)) * p(2);
  out(1) = std::conj(xa(0)) * p(1) + std::conj(xa(1)) * p(3);
  if (out.norm() <= 1e-6) {
    throw DegenerateStateError(
        "extract_conditional_state: conditional state has near-zero norm");
  }
  return PolarizationState(out);
}

CorrectedBasisSet derive_corrected_bases(const DensityMatrix& rho) {
  NearestPureState nearest = nearest_pure_state(rho);
  if (nearest.degenerate) {
    throw DegenerateStateError(
        "derive_corrected_bases: top eigenvalue is degenerate; "
        "the nearest-pure-state decomposition is not meaningful");
  }
  double c = concurrence(rho);
  if (c < kCorrectionRefuseConcurrence) {
    throw DegenerateStateError(
        "derive_corrected_bases: concurrence " + std::to_string(c) +
        " below " + std::to_string(kCorrectionRefuseConcurrence) +
        "; conditional bases are not trustworthy");
  }

  PolarizationState phi_h =
      extract_conditional_state(nearest.state, PolarizationState::h());
  PolarizationState phi_v_raw =
      extract_conditional_state(nearest.state, PolarizationState::v());
  PolarizationState phi_d =
      extract_conditional_state(nearest.state, PolarizationState::d());
  PolarizationState phi_a_raw =
      extract_conditional_state(nearest.state, PolarizationState::a());

  // The PBS enforces orthogonality physically: keep the extracted phi_H
  // and phi_D, take exact complements for the reflected ports, and report
  // the raw extractions' overlap as a diagnostic.
  CorrectedBasisSet out{phi_h,
                        phi_h.orthogonal(),
                        phi_d,
                        phi_d.orthogonal(),
                        solve_waveplate_angles(phi_h),
                        solve_waveplate_angles(phi_d),
                        nearest.fidelity,
                        false,
                        c,
                        c < kCorrectionWarnConcurrence,
                        phi_h.overlap_sq(phi_v_raw),
                        phi_d.overlap_sq(phi_a_raw)};
  return out;
}

BobAssignment conventional_bob_assignment() {
  return BobAssignment{{PolarizationState::v(), PolarizationState::h(),
                        PolarizationState::d(), PolarizationState::a()}};
}

BobAssignment corrected_bob_assignment(const CorrectedBasisSet& basis) {
  return BobAssignment{{basis.phi_h, basis.phi_v, basis.phi_d, basis.phi_a}};
}

const std::array<PolarizationState, 4>& alice_projection_states() {
  static const std::array<PolarizationState, 4> states = {
      PolarizationState::h(), PolarizationState::v(), PolarizationState::d(),
      PolarizationState::a()};
  return states;
}

double predicted_qber(const DensityMatrix& rho, const BobAssignment& bob) {
  const auto& alice = alice_projection_states();
  auto born = [&](int i, int j) {
    Eigen::Vector4cd proj = tensor(alice[i], bob.states[j]).amplitudes();
    return std::max(0.0, (proj.adjoint() * rho.entries() * proj)(0, 0).real());
  };
  // Sifted pairs: (Ai, Bj) with both in the H/V arms or both in D/A.
  // Signal: (1,1),(2,2),(3,3),(4,4); errors: (1,2),(2,1),(3,4),(4,3).
  double signal = born(0, 0) + born(1, 1) + born(2, 2) + born(3, 3);
  double error = born(0, 1) + born(1, 0) + born(2, 3) + born(3, 2);
  double total = signal + error;
  if (total <= 0.0) {
    throw UndefinedQberError("predicted_qber: zero total probability");
  }
  return 100.0 * error / total;
}

std::string correction_report(const CorrectedBasisSet& basis) {
  auto vec = [](const PolarizationState& s) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "(%+.6f%+.6fj, %+.6f%+.6fj)",
                  s.amplitudes()(0).real(), s.amplitudes()(0).imag(),
                  s.amplitudes()(1).real(), s.amplitudes()(1).imag());
    return std::string(buf);
  };
  char buf[160];
  std::string out = "corrected basis report\n";
  out += "  phi_H: " + vec(basis.phi_h) + "\n";
  out += "  phi_V: " + vec(basis.phi_v) + "\n";
  out += "  phi_D: " + vec(basis.phi_d) + "\n";
  out += "  phi_A: " + vec(basis.phi_a) + "\n";
  std::snprintf(buf, sizeof(buf), "  H/V arm: HWP %.4f deg, QWP %.4f deg\n",
                basis.hv_setting.hwp_deg(), basis.hv_setting.qwp_deg());
  out += buf;
  std::snprintf(buf, sizeof(buf), "  D/A arm: HWP %.4f deg, QWP %.4f deg\n",
                basis.da_setting.hwp_deg(), basis.da_setting.qwp_deg());
  out += buf;
  std::snprintf(buf, sizeof(buf), "  fidelity: %.6f\n", basis.source_fidelity);
  out += buf;
  std::snprintf(buf, sizeof(buf), "  concurrence: %.6f\n", basis.state_concurrence);
  out += buf;
  out += std::string("  degenerate: ") + (basis.degenerate ? "yes" : "no") + "\n";
  out += std::string("  low-concurrence warning: ") +
         (basis.low_concurrence_warning ? "yes" : "no") + "\n";
  std::snprintf(buf, sizeof(buf),
                "  extraction overlaps |<phi_H|phi_V_raw>|^2: %.3e, "
                "|<phi_D|phi_A_raw>|^2: %.3e\n",
                basis.hv_extraction_overlap_sq, basis.da_extraction_overlap_sq);
  out += buf;
  return out;
}

}  // namespace qkd
