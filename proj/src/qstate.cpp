#include "qkd/qstate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace qkd {

namespace {

const Complex kI(0.0, 1.0);

Eigen::Vector2cd normalized_or_throw(const Eigen::Vector2cd& v, const char* what) {
  double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw InvalidStateError(std::string(what) + ": zero or non-finite norm");
  }
  return v / n;
}

}  // namespace

PolarizationState::PolarizationState(const Eigen::Vector2cd& amplitudes)
    : amps_(normalized_or_throw(amplitudes, "PolarizationState")) {}

double PolarizationState::overlap_sq(const PolarizationState& other) const {
  return std::norm(amps_.dot(other.amps_));
}

PolarizationState PolarizationState::orthogonal() const {
  return PolarizationState(
      Eigen::Vector2cd(-std::conj(amps_(1)), std::conj(amps_(0))));
}

PolarizationState PolarizationState::h() {
  return PolarizationState(Eigen::Vector2cd(1.0, 0.0));
}
PolarizationState PolarizationState::v() {
  return PolarizationState(Eigen::Vector2cd(0.0, 1.0));
}
PolarizationState PolarizationState::d() {
  return PolarizationState(Eigen::Vector2cd(1.0, 1.0));
}
PolarizationState PolarizationState::a() {
  return PolarizationState(Eigen::Vector2cd(1.0, -1.0));
}
PolarizationState PolarizationState::r() {
  return PolarizationState(Eigen::Vector2cd(1.0, kI));
}
PolarizationState PolarizationState::l() {
  return PolarizationState(Eigen::Vector2cd(1.0, -kI));
}

TwoQubitState::TwoQubitState(const Eigen::Vector4cd& amplitudes) : amps_(amplitudes) {
  double n = amps_.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw InvalidStateError("TwoQubitState: zero or non-finite norm");
  }
  amps_ /= n;
}

double TwoQubitState::overlap_sq(const TwoQubitState& other) const {
  return std::norm(amps_.dot(other.amps_));
}

TwoQubitState tensor(const PolarizationState& a, const PolarizationState& b) {
  Eigen::Vector4cd out;
  out << a.amplitudes()(0) * b.amplitudes()(0), a.amplitudes()(0) * b.amplitudes()(1),
      a.amplitudes()(1) * b.amplitudes()(0), a.amplitudes()(1) * b.amplitudes()(1);
  return TwoQubitState(out);
}

TwoQubitState bell_psi_plus() {
  return TwoQubitState(Eigen::Vector4cd(0.0, 1.0, 1.0, 0.0));
}
TwoQubitState bell_psi_minus() {
  return TwoQubitState(Eigen::Vector4cd(0.0, 1.0, -1.0, 0.0));
}
TwoQubitState bell_phi_plus() {
  return TwoQubitState(Eigen::Vector4cd(1.0, 0.0, 0.0, 1.0));
}
TwoQubitState bell_phi_minus() {
  return TwoQubitState(Eigen::Vector4cd(1.0, 0.0, 0.0, -1.0));
}

DensityMatrix::DensityMatrix(const Eigen::Matrix4cd& entries) : m_(entries) {
  double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kHermitianTol) {
    throw InvalidStateError("DensityMatrix: not Hermitian (deviation " +
                            std::to_string(herm) + ")");
  }
  double tr = m_.trace().real();
  if (std::abs(tr - 1.0) > kTraceTol) {
    throw InvalidStateError("DensityMatrix: trace " + std::to_string(tr) +
                            " != 1");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(m_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -kPsdSlack) {
    throw InvalidStateError("DensityMatrix: negative eigenvalue " +
                            std::to_string(es.eigenvalues().minCoeff()));
  }
}

DensityMatrix DensityMatrix::from_pure(const TwoQubitState& psi) {
  return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
}

DensityMatrix DensityMatrix::maximally_mixed() {
  return DensityMatrix(Eigen::Matrix4cd::Identity() * 0.25);
}

DensityMatrix DensityMatrix::werner(double p) {
  if (p < 0.0 || p > 1.0) {
    throw InvalidStateError("werner: p outside [0, 1]");
  }
  const Eigen::Vector4cd psi = bell_psi_plus().amplitudes();
  Eigen::Matrix4cd m = p * (psi * psi.adjoint()) +
                       (1.0 - p) * 0.25 * Eigen::Matrix4cd::Identity();
  return DensityMatrix(m);
}

std::string DensityMatrix::to_text() const {
  std::string out;
  char buf[96];
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      std::snprintf(buf, sizeof(buf), "%+.11e%+.11ej", m_(i, j).real(),
                    m_(i, j).imag());
      out += buf;
      out += (j == 3) ? '\n' : ' ';
    }
  }
  return out;
}

DensityMatrix DensityMatrix::from_text(const std::string& text) {
  Eigen::Matrix4cd m;
  std::istringstream in(text);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      std::string tok;
      if (!(in >> tok)) {
        throw InvalidStateError("density matrix text: expected 16 entries");
      }
      if (tok.empty() || tok.back() != 'j') {
        throw InvalidStateError("density matrix text: entry must end in 'j': " + tok);
      }
      tok.pop_back();
      const char* s = tok.c_str();
      char* end = nullptr;
      double re = std::strtod(s, &end);
      if (end == s || (*end != '+' && *end != '-')) {
        throw InvalidStateError("density matrix text: bad entry: " + tok);
      }
      const char* s2 = end;
      double im = std::strtod(s2, &end);
      if (end == s2 || *end != '\0') {
        throw InvalidStateError("density matrix text: bad imaginary part: " + tok);
      }
      m(i, j) = Complex(re, im);
    }
  }
  return DensityMatrix(m);
}

void DensityMatrix::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << to_text();
  if (!f) throw IoError("write failed: " + path);
}

DensityMatrix DensityMatrix::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str());
}

EigenDecomposition eigendecompose(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho.entries());
  if (es.info() != Eigen::Success) {
    throw InvalidStateError("eigendecompose: solver failed");
  }
  // Eigen returns ascending order; flip to descending.
  EigenDecomposition out;
  for (int k = 3; k >= 0; --k) {
    out.eigenvalues.push_back(es.eigenvalues()(k));
    out.eigenvectors.emplace_back(Eigen::Vector4cd(es.eigenvectors().col(k)));
  }
  return out;
}

NearestPureState nearest_pure_state(const DensityMatrix& rho) {
  EigenDecomposition ed = eigendecompose(rho);
  NearestPureState out{ed.eigenvectors.front(), 0.0, false};
  out.fidelity = fidelity_with_pure(rho, out.state);
  out.degenerate = (ed.eigenvalues[0] - ed.eigenvalues[1]) < kEigenGapTol;
  return out;
}

double fidelity_with_pure(const DensityMatrix& rho, const TwoQubitState& psi) {
  const Eigen::Vector4cd& v = psi.amplitudes();
  double f = (v.adjoint() * rho.entries() * v)(0, 0).real();
  return std::clamp(f, 0.0, 1.0);
}

double concurrence(const DensityMatrix& rho) {
  // sigma_y (x) sigma_y over the (HH, HV, VH, VV) ordering.
  Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const Eigen::Matrix4cd& m = rho.entries();
  Eigen::Matrix4cd r = m * yy * m.conjugate() * yy;
  Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(r, false);
  if (es.info() != Eigen::Success) {
    throw InvalidStateError("concurrence: eigensolver failed");
  }
  std::array<double, 4> mu{};
  for (int k = 0; k < 4; ++k) {
    mu[k] = std::max(0.0, es.eigenvalues()(k).real());
  }
  std::sort(mu.begin(), mu.end(), std::greater<>());
  double c = std::sqrt(mu[0]) - std::sqrt(mu[1]) - std::sqrt(mu[2]) - std::sqrt(mu[3]);
  return std::clamp(c, 0.0, 1.0);
}

double purity(const DensityMatrix& rho) {
  return (rho.entries() * rho.entries()).trace().real();
}

}  // namespace qkd
