#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qkd/timetag.hpp"

namespace qkd {

enum class BasisMode { conventional, corrected };

const char* to_string(BasisMode mode);
BasisMode basis_mode_from_string(const std::string& s);

// Information-theoretic security threshold on the QBER, percent.
constexpr double kDefaultQberSecureThresholdPct = 11.0;

struct ProtocolResult {
  double keyrate_hz = 0.0;
  double qber_pct = 0.0;
  std::uint64_t total_coincidences = 0;  // the 8 sifted pairs
  std::uint64_t error_coincidences = 0;  // the 4 anti-expected pairs
  double acquisition_seconds = 0.0;
  BasisMode basis_mode = BasisMode::conventional;
  bool secure = false;

  // One CSV row: timestamp_label, basis_mode, keyrate_hz, qber_pct,
  // total, errors, secure.
  std::string to_csv_row(const std::string& timestamp_label) const;
};

// Sifted coincidences per second:
// [C(A1,B1)+C(A1,B2)+C(A2,B1)+C(A2,B2)+C(A3,B3)+C(A3,B4)+C(A4,B3)+C(A4,B4)] / T.
// Cross-basis coincidences never enter.
double keyrate(const CoincidenceTable& table);

// 100 * [C(A1,B2)+C(A2,B1)+C(A3,B4)+C(A4,B3)] / (8-term sifted sum).
// Throws UndefinedQberError when the sifted sum is zero.
double qber(const CoincidenceTable& table);

ProtocolResult evaluate(const CoincidenceTable& table, BasisMode mode,
                        double secure_threshold_pct = kDefaultQberSecureThresholdPct);

struct SiftedKeyPair {
  std::vector<std::uint8_t> alice_bits;
  std::vector<std::uint8_t> bob_bits;

  double mismatch_fraction() const;
};

// One bit per same-basis coincidence: Alice 0 for {A1, A3}, 1 for
// {A2, A4}; Bob 0 for {B1, B3}, 1 for {B2, B4}.
SiftedKeyPair sift_bits(const TimestampStream& a, const TimestampStream& b,
                        std::int64_t delay_ps, std::int64_t window_ps);

}  // namespace qkd
