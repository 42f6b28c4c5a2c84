#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qkd/config.hpp"
#include "qkd/correction.hpp"
#include "qkd/tomography.hpp"

namespace qkd {

struct BasisVisibility {
  double hv_pct = 0.0;
  double da_pct = 0.0;
};

// V = (C_max - C_min)/(C_max + C_min) * 100 per basis, correlated vs
// anti-correlated coincidence sums. Throws on a zero denominator.
BasisVisibility visibility(const CoincidenceTable& table);

struct ModeStats {
  BasisMode mode = BasisMode::corrected;
  std::vector<ProtocolResult> rows;  // one per sample
  double keyrate_mean_hz = 0.0;
  double keyrate_std_hz = 0.0;
  double qber_mean_pct = 0.0;
  double qber_std_pct = 0.0;
  BasisVisibility vis;  // from the per-mode summed coincidence table
};

struct SessionReport {
  std::string label;
  double hour = -1.0;  // slot hour for daily cycles, -1 for single runs
  bool is_day = false;
  // Metrics of the tomographic (reconstructed) state.
  double state_fidelity = 0.0;    // to |Psi+>
  double state_concurrence = 0.0;
  double nearest_pure_fidelity = 0.0;
  CorrectedBasisSet basis;
  std::vector<ModeStats> modes;
};

// One full session: source -> scrambler -> tomography -> reconstruction ->
// corrected bases -> per-sample stream generation, delay recovery,
// coincidence counting and evaluation for each configured basis mode.
// Module errors are rethrown with a pipeline stage label.
SessionReport run_pipeline(const RunConfig& config);

// One session per slot, daylight factor chosen by the schedule.
std::vector<SessionReport> daily_cycle(const RunConfig& config);

// Writes sessions.csv, summary.csv, state_metrics.csv and
// correction_report.txt into `dir` (created if missing).
void emit_reports(const std::vector<SessionReport>& reports,
                  const std::string& dir);

// Aggregation helper shared by reports and tests.
struct MeanStd {
  double mean = 0.0;
  double std_dev = 0.0;  // sample standard deviation (N-1)
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace qkd
