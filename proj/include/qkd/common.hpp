#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qkd {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A matrix or vector violated a state invariant (hermiticity, trace, norm, ...).
struct InvalidStateError : Error {
  using Error::Error;
};

// The top eigenvalue of a density matrix is (nearly) degenerate, or a
// conditional state collapsed to zero norm; the requested derivation is
// meaningless for such inputs.
struct DegenerateStateError : Error {
  using Error::Error;
};

// A numeric solver failed to converge. Carries the best residual reached.
struct NumericError : Error {
  NumericError(const std::string& what, double residual)
      : Error(what), best_residual(residual) {}
  double best_residual = 0.0;
};

// Requested (fidelity, concurrence) pair lies outside the source family.
struct InfeasibleTargetError : Error {
  using Error::Error;
};

// Not enough counts/events to produce a meaningful result.
struct InsufficientDataError : Error {
  using Error::Error;
};

// Cross-correlation histogram shows no significant coincidence peak.
struct NoPeakError : Error {
  using Error::Error;
};

// QBER is undefined (zero sifted coincidences).
struct UndefinedQberError : Error {
  using Error::Error;
};

// Malformed configuration, unknown preset, bad file contents.
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem-level failure; message carries the path.
struct IoError : Error {
  using Error::Error;
};

// splitmix64: cheap, well-mixed 64-bit hash used to derive independent
// sub-seeds from one master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic seed for a named subsystem under a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x51ed270b0f4a9cd1ULL));
}

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace qkd
