// qkdsim: entanglement-based BBM92 simulator with passive polarization
// basis compensation. Subcommands: run, daily, tomo, correct, coinc,
// gen-config.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qkd/config.hpp"
#include "qkd/harness.hpp"
#include "qkd/optics.hpp"
#include "qkd/protocol.hpp"
#include "qkd/tomography.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::optional<int> samples;
  std::optional<double> seconds;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string modes;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("-c,--config", o.config_path, "Configuration file");
  cmd->add_option("-p,--preset", o.preset, "Scenario preset override");
  cmd->add_option("-n,--samples", o.samples, "Samples per session");
  cmd->add_option("-T,--seconds", o.seconds, "Acquisition seconds per sample");
  cmd->add_option("-s,--seed", o.seed, "Master seed");
  cmd->add_option("-o,--out", o.out_dir, "Output directory");
  cmd->add_option("-m,--modes", o.modes,
                  "Basis modes, comma separated (corrected,conventional)");
}

qkd::RunConfig resolve_config(const CommonOpts& o) {
  if (!o.config_path.empty() && !o.preset.empty()) {
    throw qkd::ConfigError(
        "--preset conflicts with --config; set `preset` inside the config file");
  }
  qkd::RunConfig cfg;
  if (!o.config_path.empty()) {
    cfg = qkd::load_config(o.config_path);
  } else {
    cfg = qkd::config_from_preset(o.preset.empty() ? "night-clear-10nm" : o.preset);
  }
  if (o.samples) cfg.samples_per_session = *o.samples;
  if (o.seconds) cfg.acquisition_seconds = *o.seconds;
  if (o.seed) cfg.master_seed = *o.seed;
  if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
  if (!o.modes.empty()) {
    cfg.basis_modes.clear();
    std::stringstream ss(o.modes);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      cfg.basis_modes.push_back(qkd::basis_mode_from_string(tok));
    }
  }
  // Environment override for the output directory only.
  if (const char* env = std::getenv("QKDSIM_OUTDIR"); env && *env) {
    cfg.output_dir = env;
  }
  cfg.validate();
  return cfg;
}

void print_session(const qkd::SessionReport& r) {
  for (const auto& m : r.modes) {
    std::printf("%-10s %-12s keyrate %9.2f +- %7.2f Hz   QBER %6.3f +- %5.3f %%"
                "   vis H/V %6.2f%%  D/A %6.2f%%\n",
                r.label.c_str(), qkd::to_string(m.mode), m.keyrate_mean_hz,
                m.keyrate_std_hz, m.qber_mean_pct, m.qber_std_pct, m.vis.hv_pct,
                m.vis.da_pct);
  }
  std::printf("%-10s state fidelity %.4f  concurrence %.4f  nearest-pure %.4f\n",
              r.label.c_str(), r.state_fidelity, r.state_concurrence,
              r.nearest_pure_fidelity);
}

int cmd_run(const CommonOpts& o) {
  qkd::RunConfig cfg = resolve_config(o);
  qkd::SessionReport report = qkd::run_pipeline(cfg);
  print_session(report);
  qkd::emit_reports({report}, cfg.output_dir);
  std::printf("reports written to %s\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_daily(const CommonOpts& o) {
  qkd::RunConfig cfg = resolve_config(o);
  std::vector<qkd::SessionReport> reports = qkd::daily_cycle(cfg);
  for (const auto& r : reports) print_session(r);
  qkd::emit_reports(reports, cfg.output_dir);
  std::printf("reports written to %s\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_tomo(const CommonOpts& o, const std::string& rho_path,
             const std::string& record_out) {
  qkd::RunConfig cfg = resolve_config(o);
  qkd::DensityMatrix rho = rho_path.empty()
                               ? qkd::scramble(qkd::build_source_state(
                                                   cfg.source.target_fidelity,
                                                   cfg.source.target_concurrence),
                                               cfg.channel.bob_unitary)
                               : qkd::DensityMatrix::load(rho_path);
  double rate = cfg.source.pair_rate * cfg.channel.alice_transmission *
                cfg.channel.bob_transmission * cfg.detector.efficiency *
                cfg.detector.efficiency;
  qkd::TomographyRecord rec = qkd::simulate_tomography(
      rho, rate, cfg.tomo_seconds_per_projection, cfg.master_seed);
  if (record_out.empty()) {
    std::fputs(rec.to_text().c_str(), stdout);
  } else {
    rec.save(record_out);
    std::printf("tomography record written to %s\n", record_out.c_str());
  }
  qkd::ReconstructionResult recon = qkd::reconstruct(rec);
  std::printf("reconstructed: fidelity to Psi+ %.4f, concurrence %.4f, "
              "residual %.2e%s\n",
              qkd::fidelity_with_pure(recon.rho, qkd::bell_psi_plus()),
              qkd::concurrence(recon.rho), recon.residual,
              recon.residual_warning ? " (high-residual warning)" : "");
  return 0;
}

int cmd_correct(const std::string& rho_path, const std::string& record_path,
                const std::string& report_out) {
  qkd::DensityMatrix rho = [&] {
    if (!record_path.empty()) {
      return qkd::reconstruct(qkd::TomographyRecord::load(record_path)).rho;
    }
    return qkd::DensityMatrix::load(rho_path);
  }();
  qkd::CorrectedBasisSet basis = qkd::derive_corrected_bases(rho);
  std::string report = qkd::correction_report(basis);
  if (report_out.empty()) {
    std::fputs(report.c_str(), stdout);
  } else {
    std::ofstream f(report_out);
    if (!f) throw qkd::IoError("cannot open for writing: " + report_out);
    f << report;
    std::printf("correction report written to %s\n", report_out.c_str());
  }
  return 0;
}

int cmd_coinc(const std::string& alice_path, const std::string& bob_path,
              bool csv, std::optional<std::int64_t> delay_opt,
              std::int64_t window_ps, std::int64_t search_range_ps,
              std::int64_t bin_ps, const std::string& optimize_grid) {
  using qkd::Party;
  qkd::TimestampStream a = csv
      ? qkd::TimestampStream::load_csv(alice_path, Party::alice)
      : qkd::TimestampStream::load_binary(alice_path, Party::alice);
  qkd::TimestampStream b = csv
      ? qkd::TimestampStream::load_csv(bob_path, Party::bob)
      : qkd::TimestampStream::load_binary(bob_path, Party::bob);
  std::int64_t delay =
      delay_opt ? *delay_opt : qkd::find_delay(a, b, search_range_ps, bin_ps);
  std::printf("delay: %lld ps\n", static_cast<long long>(delay));

  qkd::CoincidenceTable table;
  if (!optimize_grid.empty()) {
    std::vector<std::int64_t> grid;
    std::stringstream ss(optimize_grid);
    std::string tok;
    while (std::getline(ss, tok, ',')) grid.push_back(std::stoll(tok));
    qkd::WindowOptimizationResult r =
        qkd::optimize_window(a, b, delay, qkd::kDefaultQberSecureThresholdPct, grid);
    table = r.table;
    std::printf("optimized window: %lld ps (%s)\n",
                static_cast<long long>(r.window_ps),
                r.limit_met ? "QBER limit met" : "QBER limit NOT met");
  } else {
    table = qkd::count_coincidences(a, b, delay, window_ps);
  }

  std::printf("coincidence table (window %lld ps):\n",
              static_cast<long long>(table.window_ps));
  for (int i = 1; i <= 4; ++i) {
    std::printf("  A%d:", i);
    for (int j = 1; j <= 4; ++j) {
      std::printf(" %10llu", static_cast<unsigned long long>(table.at(i, j)));
    }
    std::printf("\n");
  }
  qkd::ProtocolResult res = qkd::evaluate(table, qkd::BasisMode::corrected);
  std::printf("timestamp_label,basis_mode,keyrate_hz,qber_pct,total,errors,secure\n");
  std::printf("%s\n", res.to_csv_row("coinc").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BBM92 QKD simulator with passive polarization basis compensation"};
  app.require_subcommand(1);

  CommonOpts run_opts, daily_opts, tomo_opts;
  std::string tomo_rho, tomo_out;
  std::string correct_rho, correct_record, correct_out;
  std::string coinc_alice, coinc_bob, coinc_grid;
  bool coinc_csv = false;
  std::optional<std::int64_t> coinc_delay;
  std::int64_t coinc_window = 2000, coinc_range = 1000000, coinc_bin = 100;
  std::string gen_path = "default.cfg";

  CLI::App* run = app.add_subcommand("run", "Run one QKD session");
  add_common(run, run_opts);

  CLI::App* daily = app.add_subcommand("daily", "Run a 24-hour day/night cycle");
  add_common(daily, daily_opts);

  CLI::App* tomo = app.add_subcommand("tomo", "Simulate a 36-projection tomography");
  add_common(tomo, tomo_opts);
  tomo->add_option("--rho", tomo_rho, "Density-matrix text file to measure");
  tomo->add_option("--record-out", tomo_out, "Write the tomo-v1 record here");

  CLI::App* correct = app.add_subcommand(
      "correct", "Derive corrected bases and waveplate settings");
  correct->add_option("--rho", correct_rho, "Density-matrix text file");
  correct->add_option("--record", correct_record, "tomo-v1 record to reconstruct");
  correct->add_option("--report-out", correct_out, "Write the report here");

  CLI::App* coinc = app.add_subcommand(
      "coinc", "Process a pair of timestamp streams into a table and metrics");
  coinc->add_option("--alice", coinc_alice, "Alice stream file")->required();
  coinc->add_option("--bob", coinc_bob, "Bob stream file")->required();
  coinc->add_flag("--csv", coinc_csv, "Streams are in CSV debug format");
  coinc->add_option("--delay", coinc_delay, "Delay in ps (default: recover)");
  coinc->add_option("--window", coinc_window, "Coincidence window, ps");
  coinc->add_option("--search-range", coinc_range, "Delay search range, ps");
  coinc->add_option("--bin", coinc_bin, "Correlation bin, ps");
  coinc->add_option("--optimize", coinc_grid,
                    "Window grid (ps, comma separated) to optimize over");

  CLI::App* gen = app.add_subcommand("gen-config", "Write the default config file");
  gen->add_option("path", gen_path, "Output path (default default.cfg)");

  try {
    app.parse(argc, argv);
    if (run->parsed()) return cmd_run(run_opts);
    if (daily->parsed()) return cmd_daily(daily_opts);
    if (tomo->parsed()) return cmd_tomo(tomo_opts, tomo_rho, tomo_out);
    if (correct->parsed()) {
      if (correct_rho.empty() && correct_record.empty()) {
        throw qkd::ConfigError("correct: need --rho or --record");
      }
      return cmd_correct(correct_rho, correct_record, correct_out);
    }
    if (coinc->parsed()) {
      return cmd_coinc(coinc_alice, coinc_bob, coinc_csv, coinc_delay,
                       coinc_window, coinc_range, coinc_bin, coinc_grid);
    }
    if (gen->parsed()) {
      std::ofstream f(gen_path);
      if (!f) throw qkd::IoError("cannot open for writing: " + gen_path);
      f << qkd::default_config_text();
      std::printf("config written to %s\n", gen_path.c_str());
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const qkd::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const qkd::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
