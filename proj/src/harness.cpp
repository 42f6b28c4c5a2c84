#include "qkd/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "qkd/optics.hpp"

namespace qkd {

namespace {

// Seed streams: independent generators per (session, purpose, mode, sample).
std::uint64_t session_seed(const RunConfig& cfg, std::uint64_t session,
                           std::uint64_t purpose, std::uint64_t k = 0) {
  return derive_seed(cfg.master_seed,
                     (session << 40) ^ (purpose << 32) ^ k);
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(std::string(name) + ": " + e.what());
  }
}

DensityMatrix effective_state(const RunConfig& cfg, double hour) {
  double fidelity = cfg.source.target_fidelity;
  Eigen::Matrix2cd u = cfg.channel.bob_unitary;
  const DriftModel& drift = cfg.source.drift;
  if (drift.enabled && hour >= 0.0) {
    double phase = 2.0 * kPi * hour / drift.period_hours;
    fidelity += drift.fidelity_amplitude * std::sin(phase);
    // Clamp the wandering fidelity into the family's reach at this
    // concurrence (w depends on the concurrence target only).
    double w = (2.0 * cfg.source.target_concurrence + 1.0) / 3.0;
    fidelity = std::clamp(fidelity, (1.0 + w) / 4.0 + 1e-9,
                          (3.0 * w + 1.0) / 4.0 - 1e-9);
    u = rotation(drift.scrambler_amplitude_rad * std::sin(phase)) * u;
  }
  DensityMatrix source = stage("source", [&] {
    return build_source_state(fidelity, cfg.source.target_concurrence);
  });
  return stage("scramble", [&] { return scramble(source, u); });
}

ModeStats run_mode(const RunConfig& cfg, const DensityMatrix& rho_eff,
                   const BobAssignment& bob, BasisMode mode,
                   std::uint64_t session) {
  ModeStats stats;
  stats.mode = mode;
  CoincidenceTable summed;
  summed.acquisition_seconds = 0.0;
  std::vector<double> keyrates, qbers;
  for (int s = 0; s < cfg.samples_per_session; ++s) {
    std::uint64_t seed = session_seed(
        cfg, session, mode == BasisMode::corrected ? 2 : 3, static_cast<std::uint64_t>(s));
    auto [sa, sb] = stage("generate", [&] {
      return generate_streams(rho_eff, cfg.source, cfg.channel, cfg.noise,
                              cfg.detector, cfg.clock, bob,
                              cfg.acquisition_seconds, seed);
    });
    std::int64_t delay = stage("find-delay", [&] {
      return find_delay(sa, sb, cfg.delay_search_range_ps, cfg.correlation_bin_ps);
    });
    CoincidenceTable table = stage("count", [&] {
      return count_coincidences(sa, sb, delay, cfg.coincidence_window_ps);
    });
    ProtocolResult res = stage("evaluate", [&] {
      return evaluate(table, mode, cfg.qber_secure_threshold_pct);
    });
    stats.rows.push_back(res);
    keyrates.push_back(res.keyrate_hz);
    qbers.push_back(res.qber_pct);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) summed.counts[i][j] += table.counts[i][j];
    }
  }
  MeanStd kr = mean_std(keyrates), qb = mean_std(qbers);
  stats.keyrate_mean_hz = kr.mean;
  stats.keyrate_std_hz = kr.std_dev;
  stats.qber_mean_pct = qb.mean;
  stats.qber_std_pct = qb.std_dev;
  stats.vis = visibility(summed);
  return stats;
}

SessionReport run_session(const RunConfig& cfg, const std::string& label,
                          double hour, bool is_day, std::uint64_t session) {
  SessionReport report;
  report.label = label;
  report.hour = hour;
  report.is_day = is_day;

  DensityMatrix rho_eff = effective_state(cfg, hour);

  double detected_pair_rate = cfg.source.pair_rate *
                              cfg.channel.alice_transmission * cfg.detector.efficiency *
                              cfg.channel.bob_transmission * cfg.detector.efficiency;
  TomographyRecord record = stage("tomography", [&] {
    return simulate_tomography(rho_eff, detected_pair_rate,
                               cfg.tomo_seconds_per_projection,
                               session_seed(cfg, session, 1));
  });
  ReconstructionResult recon = stage("reconstruct", [&] { return reconstruct(record); });
  report.state_fidelity = fidelity_with_pure(recon.rho, bell_psi_plus());
  report.state_concurrence = concurrence(recon.rho);
  report.basis = stage("correct", [&] { return derive_corrected_bases(recon.rho); });
  report.nearest_pure_fidelity = report.basis.source_fidelity;

  for (BasisMode mode : cfg.basis_modes) {
    BobAssignment bob = mode == BasisMode::corrected
                            ? corrected_bob_assignment(report.basis)
                            : conventional_bob_assignment();
    report.modes.push_back(run_mode(cfg, rho_eff, bob, mode, session));
  }
  return report;
}

}  // namespace

BasisVisibility visibility(const CoincidenceTable& t) {
  auto basis_vis = [](std::uint64_t corr, std::uint64_t anti) {
    std::uint64_t denom = corr + anti;
    if (denom == 0) {
      throw InsufficientDataError("visibility: zero coincidences in basis");
    }
    std::uint64_t cmax = std::max(corr, anti), cmin = std::min(corr, anti);
    return 100.0 * static_cast<double>(cmax - cmin) / static_cast<double>(denom);
  };
  BasisVisibility v;
  v.hv_pct = basis_vis(t.counts[0][0] + t.counts[1][1],
                       t.counts[0][1] + t.counts[1][0]);
  v.da_pct = basis_vis(t.counts[2][2] + t.counts[3][3],
                       t.counts[2][3] + t.counts[3][2]);
  return v;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std_dev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

SessionReport run_pipeline(const RunConfig& config) {
  config.validate();
  return run_session(config, "single", -1.0, false, 0);
}

std::vector<SessionReport> daily_cycle(const RunConfig& config) {
  config.validate();
  std::vector<SessionReport> reports;
  int n_slots = 24 / config.slot_hours;
  for (int slot = 0; slot < n_slots; ++slot) {
    int hour = slot * config.slot_hours;
    bool is_day = hour >= config.day_start_hour && hour < config.day_end_hour;
    RunConfig slot_cfg = config;
    slot_cfg.noise.daylight_factor =
        is_day ? config.day_daylight_factor : config.night_daylight_factor;
    char label[32];
    std::snprintf(label, sizeof(label), "hour-%02d", hour);
    reports.push_back(run_session(slot_cfg, label, hour, is_day,
                                  static_cast<std::uint64_t>(slot + 1)));
  }
  return reports;
}

void emit_reports(const std::vector<SessionReport>& reports, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output dir " + dir + ": " + ec.message());

  auto open = [&](const char* name) {
    std::ofstream f(fs::path(dir) / name);
    if (!f) throw IoError(std::string("cannot open for writing: ") + dir + "/" + name);
    return f;
  };
  char buf[256];

  {
    auto f = open("sessions.csv");
    f << "# qkdsim-sessions-v1\n"
         "timestamp_label,basis_mode,keyrate_hz,qber_pct,total,errors,secure\n";
    for (const auto& r : reports) {
      for (const auto& m : r.modes) {
        for (size_t s = 0; s < m.rows.size(); ++s) {
          std::snprintf(buf, sizeof(buf), "%s/s%02zu", r.label.c_str(), s);
          f << m.rows[s].to_csv_row(buf) << '\n';
        }
      }
    }
    if (!f) throw IoError("write failed: " + dir + "/sessions.csv");
  }
  {
    auto f = open("summary.csv");
    f << "# qkdsim-summary-v1\n"
         "session,hour,is_day,basis_mode,samples,keyrate_mean_hz,keyrate_std_hz,"
         "qber_mean_pct,qber_std_pct,visibility_hv_pct,visibility_da_pct\n";
    for (const auto& r : reports) {
      for (const auto& m : r.modes) {
        std::snprintf(buf, sizeof(buf),
                      "%s,%.1f,%d,%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      r.label.c_str(), r.hour, r.is_day ? 1 : 0,
                      to_string(m.mode), m.rows.size(), m.keyrate_mean_hz,
                      m.keyrate_std_hz, m.qber_mean_pct, m.qber_std_pct,
                      m.vis.hv_pct, m.vis.da_pct);
        f << buf;
      }
    }
    if (!f) throw IoError("write failed: " + dir + "/summary.csv");
  }
  {
    auto f = open("state_metrics.csv");
    f << "# qkdsim-state-metrics-v1\n"
         "session,hour,fidelity,concurrence,nearest_pure_fidelity\n";
    for (const auto& r : reports) {
      std::snprintf(buf, sizeof(buf), "%s,%.1f,%.6f,%.6f,%.6f\n", r.label.c_str(),
                    r.hour, r.state_fidelity, r.state_concurrence,
                    r.nearest_pure_fidelity);
      f << buf;
    }
    if (!f) throw IoError("write failed: " + dir + "/state_metrics.csv");
  }
  {
    auto f = open("correction_report.txt");
    for (const auto& r : reports) {
      f << "== session " << r.label << " ==\n" << correction_report(r.basis);
    }
    if (!f) throw IoError("write failed: " + dir + "/correction_report.txt");
  }
}

}  // namespace qkd
