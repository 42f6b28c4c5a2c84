#pragma once

#include <utility>

#include <Eigen/Dense>

#include "qkd/qstate.hpp"

namespace qkd {

using JonesMatrix = Eigen::Matrix2cd;

// Half-wave plate with fast axis at alpha radians from horizontal:
// [[cos 2a, sin 2a], [sin 2a, -cos 2a]].
JonesMatrix hwp(double alpha);

// Quarter-wave plate with fast axis at beta radians from horizontal:
// [[cos^2 b + i sin^2 b, (1-i) sin b cos b],
//  [(1-i) sin b cos b,   sin^2 b + i cos^2 b]].
JonesMatrix qwp(double beta);

// Plain rotation of the polarization plane by theta (counterclockwise).
JonesMatrix rotation(double theta);

PolarizationState apply_jones(const JonesMatrix& j, const PolarizationState& s);

// One analyzer arm: HWP at hwp_angle followed by QWP at qwp_angle in front
// of a PBS. Angles are kept in [0, pi).
struct WaveplateSetting {
  double hwp_angle = 0.0;  // radians
  double qwp_angle = 0.0;  // radians

  WaveplateSetting() = default;
  WaveplateSetting(double hwp_rad, double qwp_rad);

  double hwp_deg() const;
  double qwp_deg() const;
};

// Solves qwp(b') * hwp(a') * |H> ~ target (up to global phase).
// Closed form from the target's Bloch coordinates; among the equivalent
// angle pairs the one with smallest a'^2 + b'^2 after normalization into
// [0, pi) is returned. Throws NumericError if the bounded refinement
// fallback cannot reach overlap >= 1 - 1e-9.
WaveplateSetting solve_waveplate_angles(const PolarizationState& target);

// The projection states measured at the two PBS ports behind the plates:
// transmitted = qwp*hwp|H>, reflected = qwp*hwp|V>. Always orthonormal.
std::pair<PolarizationState, PolarizationState> pbs_projectors(
    const WaveplateSetting& setting);

}  // namespace qkd
