#include "qkd/protocol.hpp"

#include <cstdio>

namespace qkd {

const char* to_string(BasisMode mode) {
  return mode == BasisMode::corrected ? "corrected" : "conventional";
}

BasisMode basis_mode_from_string(const std::string& s) {
  if (s == "corrected") return BasisMode::corrected;
  if (s == "conventional") return BasisMode::conventional;
  throw ConfigError("unknown basis mode `" + s +
                    "` (want corrected or conventional)");
}

std::string ProtocolResult::to_csv_row(const std::string& timestamp_label) const {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%llu,%llu,%d",
                timestamp_label.c_str(), qkd::to_string(basis_mode), keyrate_hz,
                qber_pct, static_cast<unsigned long long>(total_coincidences),
                static_cast<unsigned long long>(error_coincidences),
                secure ? 1 : 0);
  return buf;
}

double keyrate(const CoincidenceTable& table) {
  if (!(table.acquisition_seconds > 0.0)) {
    throw InvalidStateError("keyrate: acquisition_seconds must be > 0");
  }
  return static_cast<double>(table.sifted_sum()) / table.acquisition_seconds;
}

double qber(const CoincidenceTable& table) {
  std::uint64_t sifted = table.sifted_sum();
  if (sifted == 0) {
    throw UndefinedQberError("qber: zero sifted coincidences");
  }
  return 100.0 * static_cast<double>(table.error_sum()) /
         static_cast<double>(sifted);
}

ProtocolResult evaluate(const CoincidenceTable& table, BasisMode mode,
                        double secure_threshold_pct) {
  ProtocolResult r;
  r.keyrate_hz = keyrate(table);
  r.qber_pct = qber(table);
  r.total_coincidences = table.sifted_sum();
  r.error_coincidences = table.error_sum();
  r.acquisition_seconds = table.acquisition_seconds;
  r.basis_mode = mode;
  r.secure = r.qber_pct < secure_threshold_pct;
  return r;
}

double SiftedKeyPair::mismatch_fraction() const {
  if (alice_bits.size() != bob_bits.size()) {
    throw InvalidStateError("SiftedKeyPair: unequal lengths");
  }
  if (alice_bits.empty()) return 0.0;
  std::uint64_t bad = 0;
  for (size_t k = 0; k < alice_bits.size(); ++k) {
    bad += alice_bits[k] != bob_bits[k];
  }
  return static_cast<double>(bad) / static_cast<double>(alice_bits.size());
}

SiftedKeyPair sift_bits(const TimestampStream& a, const TimestampStream& b,
                        std::int64_t delay_ps, std::int64_t window_ps) {
  SiftedKeyPair out;
  for_each_coincidence(a, b, delay_ps, window_ps,
                       [&](std::uint8_t da, std::uint8_t db) {
                         bool alice_hv = da <= 2, bob_hv = db <= 2;
                         if (alice_hv != bob_hv) return;  // cross-basis: discard
                         out.alice_bits.push_back(da == 2 || da == 4);
                         out.bob_bits.push_back(db == 2 || db == 4);
                       });
  return out;
}

}  // namespace qkd
