#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qkd/channel.hpp"
#include "qkd/correction.hpp"
#include "qkd/qstate.hpp"

namespace qkd {

enum class Party { alice, bob };

struct TimestampEvent {
  std::int64_t time_ps = 0;
  std::uint8_t detector = 1;  // 1..4
};

// One party's time-tagged detection record. Events are sorted by
// (time, detector); times are integer picoseconds.
struct TimestampStream {
  std::vector<TimestampEvent> events;
  Party party = Party::alice;
  std::int64_t duration_ps = 0;

  void validate() const;

  // Binary format: magic `TTAG1`, then little-endian records of
  // (u8 detector_id, u64 picoseconds).
  void save_binary(const std::string& path) const;
  static TimestampStream load_binary(const std::string& path,
                                     Party party = Party::alice);

  // CSV debug format: header `detector,ps`, one event per line.
  void save_csv(const std::string& path) const;
  static TimestampStream load_csv(const std::string& path,
                                  Party party = Party::alice);
};

// Bob's timebase relative to Alice's. With PPS discipline the accumulated
// drift is reset at every simulated second boundary.
struct ClockModel {
  std::int64_t initial_offset_ps = 0;
  double drift_ps_per_s = 0.0;
  bool pps_discipline = false;

  double offset_at_ps(double t_ps) const;
};

struct CoincidenceTable {
  // counts[i][j] = C(A(i+1), B(j+1))
  std::array<std::array<std::uint64_t, 4>, 4> counts{};
  std::int64_t window_ps = 0;
  std::int64_t delay_ps = 0;
  double acquisition_seconds = 0.0;

  std::uint64_t at(int alice_detector, int bob_detector) const {
    return counts[alice_detector - 1][bob_detector - 1];
  }
  // The 8 same-basis pairs of the keyrate formula.
  std::uint64_t sifted_sum() const;
  // The 4 anti-expected pairs: C(A1,B2)+C(A2,B1)+C(A3,B4)+C(A4,B3).
  std::uint64_t error_sum() const;
  std::uint64_t grand_total() const;
};

// Simulates one acquisition of `duration_s` seconds. Pair events are drawn
// Poisson at the detected-pair rate and assigned detector pairs with
// Born-rule probabilities over the active 8-projector configuration
// (Alice conventional, Bob per `bob`); per-detector Gaussian jitter,
// background and dark counts, Bob's clock offset, and per-detector dead
// time are applied. Deterministic under `seed`.
std::pair<TimestampStream, TimestampStream> generate_streams(
    const DensityMatrix& rho_effective, const SourceModel& source,
    const ChannelModel& channel, const NoiseModel& noise,
    const DetectorModel& detector, const ClockModel& clock,
    const BobAssignment& bob, double duration_s, std::uint64_t seed);

// Cross-correlation histogram peak of (t_b - t_a) within +-search_range,
// refined by the centroid of the peak neighborhood. Throws NoPeakError when
// the peak does not stand out of the accidental floor (3x threshold).
std::int64_t find_delay(const TimestampStream& a, const TimestampStream& b,
                        std::int64_t search_range_ps, std::int64_t bin_ps);

// Greedy earliest-first matching, each event used at most once; a pair
// matches when |t_a - (t_b - delay)| <= window/2 (closed window).
CoincidenceTable count_coincidences(const TimestampStream& a,
                                    const TimestampStream& b,
                                    std::int64_t delay_ps,
                                    std::int64_t window_ps);

// Same matching loop, surfacing each matched (alice_detector,
// bob_detector) pair in time order.
void for_each_coincidence(const TimestampStream& a, const TimestampStream& b,
                          std::int64_t delay_ps, std::int64_t window_ps,
                          const std::function<void(std::uint8_t, std::uint8_t)>& fn);

struct WindowOptimizationResult {
  std::int64_t window_ps = 0;
  CoincidenceTable table;
  bool limit_met = false;
};

// Scans the window grid and returns the window maximizing keyrate among
// those with QBER <= qber_limit_pct (ties resolved toward the larger
// window). If no window qualifies, returns the minimum-QBER window with
// limit_met = false.
WindowOptimizationResult optimize_window(const TimestampStream& a,
                                         const TimestampStream& b,
                                         std::int64_t delay_ps,
                                         double qber_limit_pct,
                                         const std::vector<std::int64_t>& window_grid_ps);

}  // namespace qkd
