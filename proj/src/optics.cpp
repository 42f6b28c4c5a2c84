#include "qkd/optics.hpp"

#include <array>
#include <cmath>

namespace qkd {

namespace {

const Complex kI(0.0, 1.0);

double wrap_half_turn(double angle) {
  double a = std::fmod(angle, kPi);
  if (a < 0.0) a += kPi;
  // fmod can land exactly on pi through rounding; +0.0 scrubs minus zero.
  if (a >= kPi) a -= kPi;
  return a + 0.0;
}

Eigen::Vector2cd forward(double alpha, double beta) {
  return qwp(beta) * hwp(alpha) * Eigen::Vector2cd(1.0, 0.0);
}

double forward_overlap_sq(const PolarizationState& target, double alpha, double beta) {
  return std::norm(target.amplitudes().dot(forward(alpha, beta)));
}

}  // namespace

JonesMatrix hwp(double alpha) {
  if (!std::isfinite(alpha)) throw InvalidStateError("hwp: non-finite angle");
  double c = std::cos(2.0 * alpha), s = std::sin(2.0 * alpha);
  JonesMatrix m;
  m << c, s, s, -c;
  return m;
}

JonesMatrix qwp(double beta) {
  if (!std::isfinite(beta)) throw InvalidStateError("qwp: non-finite angle");
  double c = std::cos(beta), s = std::sin(beta);
  JonesMatrix m;
  m << c * c + kI * s * s, (1.0 - kI) * s * c, (1.0 - kI) * s * c, s * s + kI * c * c;
  return m;
}

JonesMatrix rotation(double theta) {
  double c = std::cos(theta), s = std::sin(theta);
  JonesMatrix m;
  m << c, -s, s, c;
  return m;
}

PolarizationState apply_jones(const JonesMatrix& j, const PolarizationState& s) {
  return PolarizationState(j * s.amplitudes());
}

WaveplateSetting::WaveplateSetting(double hwp_rad, double qwp_rad)
    : hwp_angle(wrap_half_turn(hwp_rad)), qwp_angle(wrap_half_turn(qwp_rad)) {}

double WaveplateSetting::hwp_deg() const { return rad_to_deg(hwp_angle); }
double WaveplateSetting::qwp_deg() const { return rad_to_deg(qwp_angle); }

// The stack output qwp(b)hwp(a)|H> has Bloch vector
//   ( cos(4a-2b) cos 2b, cos(4a-2b) sin 2b, sin(4a-2b) )
// in the (H/V, D/A, R/L) coordinates, so given the target's Bloch vector
// (s1, s2, s3) the two branches cos(4a-2b) = +-sqrt(s1^2 + s2^2) each fix
// (a, b) up to the hwp's half-turn period.
WaveplateSetting solve_waveplate_angles(const PolarizationState& target) {
  const Eigen::Vector2cd& t = target.amplitudes();
  double s1 = std::norm(t(0)) - std::norm(t(1));
  Complex cross = std::conj(t(0)) * t(1);
  double s2 = 2.0 * cross.real();
  double s3 = 2.0 * cross.imag();
  double r = std::hypot(s1, s2);

  std::array<WaveplateSetting, 4> candidates;
  int n = 0;
  if (r < 1e-12) {
    // Circular target: any qwp axis works, pick beta = 0.
    double delta = (s3 >= 0.0) ? kPi / 2.0 : -kPi / 2.0;
    candidates[n++] = WaveplateSetting(delta / 4.0, 0.0);
    candidates[n++] = WaveplateSetting(delta / 4.0 + kPi / 2.0, 0.0);
  } else {
    for (double sign : {1.0, -1.0}) {
      double delta = std::atan2(s3, sign * r);
      double two_beta = std::atan2(sign * s2, sign * s1);
      double alpha = (delta + two_beta) / 4.0;
      candidates[n++] = WaveplateSetting(alpha, two_beta / 2.0);
      candidates[n++] = WaveplateSetting(alpha + kPi / 2.0, two_beta / 2.0);
    }
  }

  WaveplateSetting best;
  double best_overlap = -1.0, best_norm = 0.0;
  for (int k = 0; k < n; ++k) {
    double ov = forward_overlap_sq(target, candidates[k].hwp_angle, candidates[k].qwp_angle);
    double nrm = candidates[k].hwp_angle * candidates[k].hwp_angle +
                 candidates[k].qwp_angle * candidates[k].qwp_angle;
    bool better = ov > best_overlap + 1e-12 ||
                  (ov > best_overlap - 1e-12 && nrm < best_norm);
    if (better) {
      best = candidates[k];
      best_overlap = ov;
      best_norm = nrm;
    }
  }
  if (best_overlap >= 1.0 - 1e-9) return best;

  // Coordinate-descent refinement from the best candidate. Only reachable
  // if the closed form degraded numerically near a pole.
  double a = best.hwp_angle, b = best.qwp_angle;
  double step = 0.1;
  double ov = forward_overlap_sq(target, a, b);
  for (int iter = 0; iter < 400 && ov < 1.0 - 1e-12; ++iter) {
    bool improved = false;
    for (double da : {step, -step}) {
      if (forward_overlap_sq(target, a + da, b) > ov) {
        a += da;
        ov = forward_overlap_sq(target, a, b);
        improved = true;
      }
      if (forward_overlap_sq(target, a, b + da) > ov) {
        b += da;
        ov = forward_overlap_sq(target, a, b);
        improved = true;
      }
    }
    if (!improved) step *= 0.5;
  }
  if (ov < 1.0 - 1e-9) {
    throw NumericError("solve_waveplate_angles: no convergence", 1.0 - ov);
  }
  return WaveplateSetting(a, b);
}

std::pair<PolarizationState, PolarizationState> pbs_projectors(
    const WaveplateSetting& setting) {
  JonesMatrix m = qwp(setting.qwp_angle) * hwp(setting.hwp_angle);
  return {PolarizationState(m * Eigen::Vector2cd(1.0, 0.0)),
          PolarizationState(m * Eigen::Vector2cd(0.0, 1.0))};
}

}  // namespace qkd
