#include "qkd/tomography.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace qkd {

namespace {

constexpr double kResidualWarnThreshold = 0.02;

const std::vector<PolarizationState>& six_states() {
  static const std::vector<PolarizationState> states = {
      PolarizationState::h(), PolarizationState::v(), PolarizationState::d(),
      PolarizationState::a(), PolarizationState::r(), PolarizationState::l()};
  return states;
}

const char* six_labels[6] = {"H", "V", "D", "A", "R", "L"};

Eigen::Matrix4cd projector(const ProjectionPair& pair) {
  Eigen::Vector4cd v = tensor(pair.alice, pair.bob).amplitudes();
  return v * v.adjoint();
}

}  // namespace

const std::vector<ProjectionPair>& standard_projection_set() {
  static const std::vector<ProjectionPair> set = [] {
    std::vector<ProjectionPair> out;
    out.reserve(36);
    const auto& states = six_states();
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        out.push_back({states[i], states[j],
                       std::string(six_labels[i]) + "⊗" + six_labels[j]});
      }
    }
    return out;
  }();
  return set;
}

std::string TomographyRecord::to_text() const {
  if (pairs.size() != counts.size()) {
    throw InvalidStateError("TomographyRecord: pairs/counts length mismatch");
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "tomo-v1 %.9g\n", acquisition_seconds);
  std::string out = buf;
  for (size_t k = 0; k < pairs.size(); ++k) {
    out += pairs[k].label + " " + std::to_string(counts[k]) + "\n";
  }
  return out;
}

TomographyRecord TomographyRecord::from_text(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  TomographyRecord rec;
  if (!(in >> magic >> rec.acquisition_seconds) || magic != "tomo-v1") {
    throw ConfigError("tomography record: bad header (want `tomo-v1 <seconds>`)");
  }
  if (!(rec.acquisition_seconds > 0.0)) {
    throw ConfigError("tomography record: acquisition_seconds must be > 0");
  }
  const auto& std_set = standard_projection_set();
  std::string label;
  std::uint64_t count;
  while (in >> label >> count) {
    size_t k = rec.pairs.size();
    if (k >= std_set.size()) {
      throw ConfigError("tomography record: more than 36 projection lines");
    }
    if (label != std_set[k].label) {
      throw ConfigError("tomography record: line " + std::to_string(k + 1) +
                        " has label " + label + ", expected " + std_set[k].label);
    }
    rec.pairs.push_back(std_set[k]);
    rec.counts.push_back(count);
  }
  if (rec.pairs.size() != std_set.size()) {
    throw ConfigError("tomography record: expected 36 projection lines, got " +
                      std::to_string(rec.pairs.size()));
  }
  return rec;
}

void TomographyRecord::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << to_text();
  if (!f) throw IoError("write failed: " + path);
}

TomographyRecord TomographyRecord::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str());
}

std::vector<double> predict_probabilities(const DensityMatrix& rho,
                                          const std::vector<ProjectionPair>& pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    Eigen::Vector4cd v = tensor(pair.alice, pair.bob).amplitudes();
    double p = (v.adjoint() * rho.entries() * v)(0, 0).real();
    out.push_back(std::clamp(p, 0.0, 1.0));
  }
  return out;
}

TomographyRecord simulate_tomography(const DensityMatrix& rho, double pair_rate,
                                     double seconds_per_projection,
                                     std::uint64_t seed) {
  if (!(pair_rate > 0.0)) {
    throw InvalidStateError("simulate_tomography: pair_rate must be > 0");
  }
  if (!(seconds_per_projection > 0.0)) {
    throw InvalidStateError("simulate_tomography: seconds_per_projection must be > 0");
  }
  TomographyRecord rec;
  rec.pairs = standard_projection_set();
  rec.acquisition_seconds = seconds_per_projection;
  std::vector<double> probs = predict_probabilities(rho, rec.pairs);
  std::mt19937_64 rng(seed);
  rec.counts.reserve(probs.size());
  for (double p : probs) {
    double mean = pair_rate * seconds_per_projection * p;
    if (mean <= 0.0) {
      rec.counts.push_back(0);
    } else {
      std::poisson_distribution<std::uint64_t> poisson(mean);
      rec.counts.push_back(poisson(rng));
    }
  }
  return rec;
}

ReconstructionResult reconstruct(const TomographyRecord& record) {
  const size_t n = record.pairs.size();
  if (n != 36 || record.counts.size() != n) {
    throw InvalidStateError("reconstruct: expected a 36-projection record");
  }

  // Probability estimates: counts normalized by their basis-pair group
  // total (4 projections per group), making the result insensitive to
  // per-projection acquisition differences.
  std::vector<double> p_hat(n, 0.0);
  for (int ga = 0; ga < 3; ++ga) {
    for (int gb = 0; gb < 3; ++gb) {
      std::uint64_t total = 0;
      size_t idx[4];
      int m = 0;
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          size_t k = static_cast<size_t>(2 * ga + i) * 6 + (2 * gb + j);
          idx[m++] = k;
          total += record.counts[k];
        }
      }
      if (total == 0) {
        throw InsufficientDataError(
            "reconstruct: basis-pair group " + std::string(six_labels[2 * ga]) +
            "/" + six_labels[2 * gb] + " has zero total counts");
      }
      for (int k = 0; k < 4; ++k) {
        p_hat[idx[k]] = static_cast<double>(record.counts[idx[k]]) / total;
      }
    }
  }

  // rho = (1/4) sum_m s_m (sigma_i (x) sigma_j), s_0 = 1 fixed by trace.
  // Least squares for the 15 remaining real Pauli components.
  std::array<Eigen::Matrix2cd, 4> pauli;
  pauli[0] = Eigen::Matrix2cd::Identity();
  pauli[1] << 0, 1, 1, 0;
  pauli[2] << 0, Complex(0, -1), Complex(0, 1), 0;
  pauli[3] << 1, 0, 0, -1;
  std::array<Eigen::Matrix4cd, 16> basis;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      // Kronecker product sigma_i (x) sigma_j.
      Eigen::Matrix4cd m;
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
          m.block<2, 2>(2 * r, 2 * c) = pauli[i](r, c) * pauli[j];
        }
      }
      basis[i * 4 + j] = m;
    }
  }

  Eigen::MatrixXd design(n, 15);
  Eigen::VectorXd rhs(n);
  std::vector<Eigen::Matrix4cd> projectors(n);
  for (size_t k = 0; k < n; ++k) {
    projectors[k] = projector(record.pairs[k]);
    for (int m = 1; m < 16; ++m) {
      design(k, m - 1) = 0.25 * (basis[m] * projectors[k]).trace().real();
    }
    rhs(k) = p_hat[k] - 0.25 * projectors[k].trace().real();
  }
  Eigen::VectorXd s = design.colPivHouseholderQr().solve(rhs);

  Eigen::Matrix4cd rho_lin = 0.25 * Eigen::Matrix4cd::Identity();
  for (int m = 1; m < 16; ++m) {
    rho_lin += 0.25 * s(m - 1) * basis[m];
  }
  rho_lin = 0.5 * (rho_lin + rho_lin.adjoint().eval());

  // Physicality projection: clip negative eigenvalues, renormalize trace.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho_lin);
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  double tr = ev.sum();
  if (tr <= 0.0) {
    throw InsufficientDataError("reconstruct: projected state has zero trace");
  }
  ev /= tr;
  Eigen::Matrix4cd rho_phys = es.eigenvectors() * ev.asDiagonal() *
                              es.eigenvectors().adjoint();
  rho_phys = 0.5 * (rho_phys + rho_phys.adjoint().eval());
  // Scrub residual asymmetry so the validating constructor accepts it.
  rho_phys *= 1.0 / rho_phys.trace().real();

  ReconstructionResult out{DensityMatrix(rho_phys), 0.0, false};
  for (size_t k = 0; k < n; ++k) {
    double model = (rho_phys * projectors[k]).trace().real();
    out.residual = std::max(out.residual, std::abs(model - p_hat[k]));
  }
  out.residual_warning = out.residual > kResidualWarnThreshold;
  return out;
}

}  // namespace qkd
