#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qkd/common.hpp"

namespace qkd {

using Complex = std::complex<double>;

// Tolerances for state invariants.
constexpr double kNormTol = 1e-12;
constexpr double kHermitianTol = 1e-10;
constexpr double kTraceTol = 1e-10;
constexpr double kPsdSlack = 1e-9;
constexpr double kEigenGapTol = 1e-6;

// Single-photon polarization state: normalized 2-component complex vector.
// Comparisons are modulo global phase.
class PolarizationState {
 public:
  PolarizationState() : amps_(1.0, 0.0) {}  // |H>
  explicit PolarizationState(const Eigen::Vector2cd& amplitudes);

  const Eigen::Vector2cd& amplitudes() const { return amps_; }

  // |<this|other>|^2; 1 means equal up to global phase.
  double overlap_sq(const PolarizationState& other) const;

  // Orthogonal complement, unique up to phase.
  PolarizationState orthogonal() const;

  static PolarizationState h();
  static PolarizationState v();
  static PolarizationState d();
  static PolarizationState a();
  static PolarizationState r();
  static PolarizationState l();

 private:
  Eigen::Vector2cd amps_;
};

// Two-qubit pure state over the ordered basis (HH, HV, VH, VV); qubit A
// (Alice) is the first tensor factor.
class TwoQubitState {
 public:
  explicit TwoQubitState(const Eigen::Vector4cd& amplitudes);

  const Eigen::Vector4cd& amplitudes() const { return amps_; }

  double overlap_sq(const TwoQubitState& other) const;

 private:
  Eigen::Vector4cd amps_;
};

TwoQubitState tensor(const PolarizationState& a, const PolarizationState& b);

TwoQubitState bell_psi_plus();   // (|HV> + |VH>)/sqrt(2)
TwoQubitState bell_psi_minus();  // (|HV> - |VH>)/sqrt(2)
TwoQubitState bell_phi_plus();   // (|HH> + |VV>)/sqrt(2)
TwoQubitState bell_phi_minus();  // (|HH> - |VV>)/sqrt(2)

// Two-qubit density matrix: Hermitian, trace 1, positive semidefinite
// (within the tolerances above). Construction validates.
class DensityMatrix {
 public:
  explicit DensityMatrix(const Eigen::Matrix4cd& entries);

  const Eigen::Matrix4cd& entries() const { return m_; }

  static DensityMatrix from_pure(const TwoQubitState& psi);
  static DensityMatrix maximally_mixed();
  // p * |psi+><psi+| + (1-p) * I/4
  static DensityMatrix werner(double p);

  // Text format: 4 lines x 4 entries, each entry `re+imj` with 12
  // significant digits. The reader accepts both '+' and '-' signed
  // imaginary parts.
  std::string to_text() const;
  static DensityMatrix from_text(const std::string& text);
  void save(const std::string& path) const;
  static DensityMatrix load(const std::string& path);

 private:
  Eigen::Matrix4cd m_;
};

struct EigenDecomposition {
  std::vector<double> eigenvalues;          // descending
  std::vector<TwoQubitState> eigenvectors;  // matching order, orthonormal
};

EigenDecomposition eigendecompose(const DensityMatrix& rho);

struct NearestPureState {
  TwoQubitState state;
  double fidelity = 0.0;  // <state|rho|state>, equals the top eigenvalue
  bool degenerate = false;  // top eigenvalue gap below kEigenGapTol
};

// Eigenvector of the maximum eigenvalue and its overlap with rho.
NearestPureState nearest_pure_state(const DensityMatrix& rho);

// <psi|rho|psi>, clamped to [0, 1].
double fidelity_with_pure(const DensityMatrix& rho, const TwoQubitState& psi);

// Wootters concurrence via the spin-flip construction.
double concurrence(const DensityMatrix& rho);

// Tr(rho^2).
double purity(const DensityMatrix& rho);

}  // namespace qkd
