#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qkd/channel.hpp"
#include "qkd/protocol.hpp"
#include "qkd/timetag.hpp"

namespace qkd {

// Everything one session or daily run needs. Built from a preset, then
// overridden by config-file keys, then by CLI flags.
struct RunConfig {
  std::string preset = "night-clear-10nm";

  SourceModel source;
  ChannelModel channel;
  NoiseModel noise;
  DetectorModel detector;
  ClockModel clock{813000, 0.0, true};

  double acquisition_seconds = 10.0;
  int samples_per_session = 30;
  std::vector<BasisMode> basis_modes = {BasisMode::corrected,
                                        BasisMode::conventional};
  std::uint64_t master_seed = 20230915;
  std::string output_dir = "out";

  // Day/night schedule for daily cycles, hours in [0, 24).
  int day_start_hour = 8;
  int day_end_hour = 18;
  int slot_hours = 2;
  double day_daylight_factor = 1.28;
  double night_daylight_factor = 1.0;

  std::int64_t coincidence_window_ps = 1000;
  std::int64_t correlation_bin_ps = 100;
  std::int64_t delay_search_range_ps = 1000000;

  double tomo_seconds_per_projection = 10.0;
  double qber_secure_threshold_pct = kDefaultQberSecureThresholdPct;

  void validate() const;
};

// RunConfig with all models and the frozen calibration knobs (coincidence
// window, clock, daylight factors) taken from the named preset.
RunConfig config_from_preset(const std::string& preset_name);

// Parses the flat `key = value` format with `[section]` headers and `#`
// comments. A `preset` key switches the baseline before the remaining
// keys are applied as overrides. Unknown keys are errors.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// The documented default configuration, suitable for `gen-config`.
std::string default_config_text();

}  // namespace qkd
