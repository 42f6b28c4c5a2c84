#include <doctest.h>

#include <random>

#include "qkd/optics.hpp"

using namespace qkd;

namespace {

PolarizationState haar_state(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return PolarizationState(
      Eigen::Vector2cd(Complex(g(rng), g(rng)), Complex(g(rng), g(rng))));
}

const Complex kI(0.0, 1.0);

}  // namespace

TEST_CASE("hwp matrix values") {
  JonesMatrix m0 = hwp(0.0);
  CHECK(std::abs(m0(0, 0) - Complex(1, 0)) < 1e-15);
  CHECK(std::abs(m0(0, 1)) < 1e-15);
  CHECK(std::abs(m0(1, 0)) < 1e-15);
  CHECK(std::abs(m0(1, 1) - Complex(-1, 0)) < 1e-15);

  // 22.5 degrees sends |H> to |D| up to phase.
  PolarizationState out = apply_jones(hwp(deg_to_rad(22.5)), PolarizationState::h());
  CHECK(out.overlap_sq(PolarizationState::d()) == doctest::Approx(1.0).epsilon(1e-12));

  // 45 degrees sends |H> to |V>.
  CHECK(apply_jones(hwp(deg_to_rad(45)), PolarizationState::h())
            .overlap_sq(PolarizationState::v()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hwp is unitary and Hermitian across a sweep") {
  for (int k = 0; k < 360; ++k) {
    JonesMatrix m = hwp(deg_to_rad(k));
    CHECK((m * m.adjoint() - JonesMatrix::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((m - m.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("qwp matrix values") {
  JonesMatrix m0 = qwp(0.0);
  CHECK(std::abs(m0(0, 0) - Complex(1, 0)) < 1e-15);
  CHECK(std::abs(m0(1, 1) - kI) < 1e-15);
  CHECK(std::abs(m0(0, 1)) < 1e-15);

  // 45 degrees leaves |D> unchanged up to phase.
  PolarizationState out = apply_jones(qwp(deg_to_rad(45)), PolarizationState::d());
  CHECK(out.overlap_sq(PolarizationState::d()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("qwp unitarity across a sweep") {
  for (int k = 0; k < 360; ++k) {
    JonesMatrix m = qwp(deg_to_rad(k));
    CHECK((m * m.adjoint() - JonesMatrix::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("apply: identity, flip, composition") {
  std::mt19937_64 rng(5);
  PolarizationState s = haar_state(rng);
  CHECK(apply_jones(JonesMatrix::Identity(), s).overlap_sq(s) == doctest::Approx(1.0));

  JonesMatrix a = qwp(0.3), b = hwp(1.1);
  PolarizationState lhs = apply_jones(a, apply_jones(b, s));
  PolarizationState rhs = apply_jones(JonesMatrix(a * b), s);
  CHECK(lhs.overlap_sq(rhs) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("solve_waveplate_angles on named targets") {
  SUBCASE("|H> solves to (0, 0)") {
    WaveplateSetting s = solve_waveplate_angles(PolarizationState::h());
    CHECK(s.hwp_angle == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.qwp_angle == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("|D> solves to (22.5, 45) degrees") {
    WaveplateSetting s = solve_waveplate_angles(PolarizationState::d());
    CHECK(s.hwp_deg() == doctest::Approx(22.5).epsilon(1e-9));
    CHECK(s.qwp_deg() == doctest::Approx(45.0).epsilon(1e-9));
    PolarizationState forward =
        apply_jones(JonesMatrix(qwp(s.qwp_angle) * hwp(s.hwp_angle)), PolarizationState::h());
    CHECK(forward.overlap_sq(PolarizationState::d()) >= 1.0 - 1e-9);
  }
  SUBCASE("circular targets (Bloch poles)") {
    for (auto target : {PolarizationState::r(), PolarizationState::l()}) {
      WaveplateSetting s = solve_waveplate_angles(target);
      PolarizationState forward =
          apply_jones(JonesMatrix(qwp(s.qwp_angle) * hwp(s.hwp_angle)), PolarizationState::h());
      CHECK(forward.overlap_sq(target) >= 1.0 - 1e-9);
    }
  }
}

TEST_CASE("solve_waveplate_angles round trip on Haar-random targets") {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 1000; ++t) {
    PolarizationState target = haar_state(rng);
    WaveplateSetting s = solve_waveplate_angles(target);
    CHECK(s.hwp_angle >= 0.0);
    CHECK(s.hwp_angle < kPi);
    CHECK(s.qwp_angle >= 0.0);
    CHECK(s.qwp_angle < kPi);
    PolarizationState forward =
        apply_jones(JonesMatrix(qwp(s.qwp_angle) * hwp(s.hwp_angle)), PolarizationState::h());
    CHECK(forward.overlap_sq(target) >= 1.0 - 1e-9);
  }
}

TEST_CASE("pbs_projectors") {
  SUBCASE("zero setting gives (|H>, |V>)") {
    auto [t, r] = pbs_projectors(WaveplateSetting(0.0, 0.0));
    CHECK(t.overlap_sq(PolarizationState::h()) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.overlap_sq(PolarizationState::v()) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("setting solved for a target transmits that target") {
    std::mt19937_64 rng(37);
    for (int t = 0; t < 50; ++t) {
      PolarizationState target = haar_state(rng);
      auto [trans, refl] = pbs_projectors(solve_waveplate_angles(target));
      CHECK(trans.overlap_sq(target) >= 1.0 - 1e-9);
      CHECK(refl.overlap_sq(target) <= 1e-9);
    }
  }
  SUBCASE("the two ports are orthogonal for random settings") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> ang(0.0, kPi);
    for (int t = 0; t < 100; ++t) {
      auto [trans, refl] = pbs_projectors(WaveplateSetting(ang(rng), ang(rng)));
      CHECK(std::abs(trans.amplitudes().dot(refl.amplitudes())) < 1e-10);
    }
  }
}

TEST_CASE("waveplate setting normalization and degrees") {
  WaveplateSetting s(-0.25 * kPi, 1.5 * kPi);
  CHECK(s.hwp_angle == doctest::Approx(0.75 * kPi));
  CHECK(s.qwp_angle == doctest::Approx(0.5 * kPi));
  CHECK(s.hwp_deg() == doctest::Approx(135.0));
  CHECK(s.qwp_deg() == doctest::Approx(90.0));
}

TEST_CASE("hwp/qwp reject non-finite angles") {
  CHECK_THROWS_AS(hwp(std::nan("")), InvalidStateError);
  CHECK_THROWS_AS(qwp(std::numeric_limits<double>::infinity()), InvalidStateError);
}
