#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qkd/qstate.hpp"

namespace qkd {

// Optional slow modulation over a simulated day: the scrambler angle and
// the source fidelity target wander sinusoidally.
struct DriftModel {
  bool enabled = false;
  double scrambler_amplitude_rad = 0.0;
  double fidelity_amplitude = 0.0;
  double period_hours = 24.0;
};

// Nonideal entangled-pair source. The delivered two-qubit state is
//   rho = w |psi_d><psi_d| + (1 - w) I/4,
//   |psi_d> = sqrt(d) |Psi+> + i sqrt(1-d) |Psi->,
// with (w, d) solved from (target_fidelity, target_concurrence).
struct SourceModel {
  double pair_rate = 1e6;       // pairs/s
  double target_fidelity = 1.0;
  double target_concurrence = 1.0;
  DriftModel drift;

  SourceModel() = default;
  SourceModel(double rate, double fidelity, double conc,
              DriftModel drift_model = {});
};

struct ChannelModel {
  Eigen::Matrix2cd bob_unitary = Eigen::Matrix2cd::Identity();
  double alice_transmission = 1.0;
  double bob_transmission = 1.0;
  double free_space_length_m = 50.0;  // metadata only
};

struct NoiseModel {
  double background_singles_rate_per_detector = 0.0;  // at 10 nm, factor 1
  double filter_fwhm_nm = 10.0;
  double daylight_factor = 1.0;
  double dark_count_rate = 0.0;

  // Background scales linearly with filter FWHM (relative to 10 nm) and
  // with the daylight factor.
  double effective_background_rate() const {
    return background_singles_rate_per_detector * daylight_factor *
           (filter_fwhm_nm / 10.0);
  }
};

struct DetectorModel {
  double efficiency = 1.0;
  double jitter_sigma_ps = 0.0;
  double dead_time_ps = 0.0;
};

// Internal parameters of the source family for given targets.
struct SourceFamilyPoint {
  double mixing_weight = 1.0;    // w
  double psi_plus_weight = 1.0;  // d
};

// Solves (w, d) so the state's fidelity to |Psi+> and its concurrence hit
// the targets within 1e-6. Throws InfeasibleTargetError outside the
// family's reach (the Psi+ component must dominate: d in [1/2, 1]).
SourceFamilyPoint solve_source_family(double target_fidelity,
                                      double target_concurrence);

DensityMatrix build_source_state(double target_fidelity,
                                 double target_concurrence);

// (I (x) U) rho (I (x) U)^dagger. Throws on non-unitary U.
DensityMatrix scramble(const DensityMatrix& rho, const Eigen::Matrix2cd& u);

// Haar-random SU(2), reproducible by seed.
Eigen::Matrix2cd random_scrambler(std::uint64_t seed);

struct ScenarioPreset {
  std::string name;
  SourceModel source;
  ChannelModel channel;
  NoiseModel noise;
  DetectorModel detector;
};

// Named parameter bundles calibrated against the reported day/night
// keyrate and QBER figures. Names: night-clear-10nm, day-sunny-10nm,
// day-rain-3nm, night-rain-10nm, custom.
ScenarioPreset scenario_preset(const std::string& name);
std::vector<std::string> scenario_preset_names();

}  // namespace qkd
