#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qkd/harness.hpp"
#include "qkd/optics.hpp"

using namespace qkd;

namespace {

// Small, fast scenario for pipeline-shape tests: modest rates, light noise.
RunConfig fast_config() {
  RunConfig cfg = config_from_preset("custom");
  cfg.preset = "custom";
  cfg.source = SourceModel(2e5, 0.92, 0.93);
  cfg.channel.alice_transmission = 0.30;
  cfg.channel.bob_transmission = 0.20;
  cfg.channel.bob_unitary = random_scrambler(77);
  cfg.detector = DetectorModel{0.9, 250.0, 0.0};
  cfg.noise = NoiseModel{3000.0, 10.0, 1.0, 50.0};
  cfg.clock = ClockModel{400000, 0.0, true};
  cfg.acquisition_seconds = 1.0;
  cfg.samples_per_session = 4;
  cfg.coincidence_window_ps = 2000;
  cfg.tomo_seconds_per_projection = 2.0;
  cfg.master_seed = 555;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("visibility") {
  CoincidenceTable t;
  t.counts[0][0] = 1000;
  t.counts[1][1] = 1000;
  t.counts[2][2] = 900;
  t.counts[3][3] = 900;
  SUBCASE("ideal correlations give 100 percent") {
    BasisVisibility v = visibility(t);
    CHECK(v.hv_pct == doctest::Approx(100.0));
    CHECK(v.da_pct == doctest::Approx(100.0));
  }
  SUBCASE("equal counts give zero") {
    t.counts[0][1] = 1000;
    t.counts[1][0] = 1000;
    t.counts[2][3] = 900;
    t.counts[3][2] = 900;
    BasisVisibility v = visibility(t);
    CHECK(v.hv_pct == doctest::Approx(0.0));
    CHECK(v.da_pct == doctest::Approx(0.0));
  }
  SUBCASE("Werner(0.9) Born prediction gives 90 percent in H/V") {
    // Closed-form Born probabilities scaled into a synthetic table.
    DensityMatrix rho = DensityMatrix::werner(0.9);
    const auto& alice = alice_projection_states();
    BobAssignment bob = conventional_bob_assignment();
    CoincidenceTable w;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        Eigen::Vector4cd v = tensor(alice[i], bob.states[j]).amplitudes();
        double p = (v.adjoint() * rho.entries() * v)(0, 0).real();
        w.counts[i][j] = static_cast<std::uint64_t>(std::llround(p * 1e6));
      }
    }
    BasisVisibility v = visibility(w);
    CHECK(v.hv_pct == doctest::Approx(90.0).epsilon(1e-6));
    CHECK(v.da_pct == doctest::Approx(90.0).epsilon(1e-6));
  }
  SUBCASE("zero denominator is an error") {
    CoincidenceTable empty;
    CHECK_THROWS_AS(visibility(empty), InsufficientDataError);
  }
}

TEST_CASE("mean_std") {
  MeanStd m = mean_std({2.0, 4.0, 6.0});
  CHECK(m.mean == doctest::Approx(4.0));
  CHECK(m.std_dev == doctest::Approx(2.0));
  CHECK(mean_std({}).mean == 0.0);
  CHECK(mean_std({5.0}).std_dev == 0.0);
}

TEST_CASE("run_pipeline produces a coherent session") {
  RunConfig cfg = fast_config();
  SessionReport r = run_pipeline(cfg);
  REQUIRE(r.modes.size() == 2);
  const ModeStats& corrected = r.modes[0];
  const ModeStats& conventional = r.modes[1];
  CHECK(corrected.mode == BasisMode::corrected);
  CHECK(static_cast<int>(corrected.rows.size()) == cfg.samples_per_session);

  // The corrected mode never does worse than conventional beyond two
  // combined standard errors.
  double se = std::sqrt(std::pow(corrected.qber_std_pct, 2) +
                        std::pow(conventional.qber_std_pct, 2)) /
              std::sqrt(static_cast<double>(cfg.samples_per_session));
  CHECK(corrected.qber_mean_pct <= conventional.qber_mean_pct + 2.0 * se);

  // Reported statistics are recomputable from the rows.
  std::vector<double> keyrates, qbers;
  for (const auto& row : corrected.rows) {
    keyrates.push_back(row.keyrate_hz);
    qbers.push_back(row.qber_pct);
  }
  CHECK(corrected.keyrate_mean_hz == doctest::Approx(mean_std(keyrates).mean));
  CHECK(corrected.keyrate_std_hz == doctest::Approx(mean_std(keyrates).std_dev));
  CHECK(corrected.qber_mean_pct == doctest::Approx(mean_std(qbers).mean));

  // State metrics come from tomography on the scrambled state.
  CHECK(r.state_concurrence == doctest::Approx(0.93).epsilon(0.02));
  CHECK(r.nearest_pure_fidelity > 0.9);
}

TEST_CASE("identity scrambler: corrected and conventional are indistinguishable") {
  RunConfig cfg = fast_config();
  cfg.source = SourceModel(2e5, 0.997, 0.997);
  cfg.channel.bob_unitary = Eigen::Matrix2cd::Identity();
  cfg.samples_per_session = 6;
  SessionReport r = run_pipeline(cfg);
  const ModeStats& corr = r.modes[0];
  const ModeStats& conv = r.modes[1];
  double se = std::sqrt(std::pow(corr.qber_std_pct, 2) / corr.rows.size() +
                        std::pow(conv.qber_std_pct, 2) / conv.rows.size());
  CHECK(std::abs(corr.qber_mean_pct - conv.qber_mean_pct) < 2.0 * se + 0.05);
}

TEST_CASE("45-degree scrambler: conventional breaks, corrected holds") {
  RunConfig cfg = fast_config();
  cfg.channel.bob_unitary = rotation(deg_to_rad(45.0));
  SessionReport r = run_pipeline(cfg);
  const ModeStats& corr = r.modes[0];
  const ModeStats& conv = r.modes[1];
  CHECK(conv.qber_mean_pct > 45.0);
  CHECK(conv.qber_mean_pct < 55.0);
  CHECK(corr.qber_mean_pct < 11.0);
}

TEST_CASE("daily_cycle schedule") {
  RunConfig cfg = fast_config();
  cfg.samples_per_session = 3;
  cfg.basis_modes = {BasisMode::corrected};
  cfg.acquisition_seconds = 0.5;
  cfg.day_daylight_factor = 100.0;  // strong contrast so the ordering is visible
  cfg.night_daylight_factor = 1.0;
  std::vector<SessionReport> reports = daily_cycle(cfg);
  REQUIRE(reports.size() == 12);  // 2-hour slots
  int day_sessions = 0;
  for (const auto& r : reports) {
    bool expect_day = r.hour >= 8.0 && r.hour < 18.0;
    CHECK(r.is_day == expect_day);
    day_sessions += r.is_day;
  }
  CHECK(day_sessions == 5);  // hours 8, 10, 12, 14, 16

  // Day slots carry more background, so under equal link loss their QBER
  // is higher and their keyrate gains accidentals; the night mean must
  // not fall more than one session sigma below the day mean.
  double day_q = 0, night_q = 0, day_k = 0, night_k = 0, sigma = 0;
  for (const auto& r : reports) {
    (r.is_day ? day_q : night_q) += r.modes[0].qber_mean_pct;
    (r.is_day ? day_k : night_k) += r.modes[0].keyrate_mean_hz;
    sigma = std::max(sigma, r.modes[0].keyrate_std_hz);
  }
  day_q /= 5; night_q /= 7; day_k /= 5; night_k /= 7;
  CHECK(day_q > night_q);
  CHECK(night_k >= day_k - sigma);
}

TEST_CASE("emit_reports writes the four files and is deterministic") {
  namespace fs = std::filesystem;
  RunConfig cfg = fast_config();
  cfg.samples_per_session = 2;
  cfg.acquisition_seconds = 0.5;
  fs::path dir1 = fs::temp_directory_path() / "qkd_reports_a";
  fs::path dir2 = fs::temp_directory_path() / "qkd_reports_b";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  SessionReport r = run_pipeline(cfg);
  emit_reports({r}, dir1.string());
  SessionReport r2 = run_pipeline(cfg);
  emit_reports({r2}, dir2.string());

  for (const char* name :
       {"sessions.csv", "summary.csv", "state_metrics.csv", "correction_report.txt"}) {
    CAPTURE(name);
    CHECK(slurp(dir1 / name) == slurp(dir2 / name));
  }

  // Schema headers are versioned.
  CHECK(slurp(dir1 / "sessions.csv").rfind("# qkdsim-sessions-v1", 0) == 0);
  CHECK(slurp(dir1 / "summary.csv").rfind("# qkdsim-summary-v1", 0) == 0);
  std::string sessions = slurp(dir1 / "sessions.csv");
  // Header + 2 samples x 2 modes.
  CHECK(std::count(sessions.begin(), sessions.end(), '\n') == 2 + 4);

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("emit_reports with an empty report list writes valid headers") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "qkd_reports_empty";
  fs::remove_all(dir);
  emit_reports({}, dir.string());
  CHECK(slurp(dir / "sessions.csv").find("timestamp_label") != std::string::npos);
  CHECK(slurp(dir / "summary.csv").find("session") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("pipeline errors carry stage labels") {
  RunConfig cfg = fast_config();
  cfg.source.target_fidelity = 0.2;  // infeasible at C = 0.93 -> source stage
  try {
    run_pipeline(cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("source") != std::string::npos);
  }
}

TEST_CASE("drift modulates the tomographic state across a day") {
  RunConfig cfg = fast_config();
  cfg.samples_per_session = 1;
  cfg.basis_modes = {BasisMode::corrected};
  cfg.acquisition_seconds = 0.2;
  cfg.channel.bob_unitary = Eigen::Matrix2cd::Identity();
  cfg.source.drift.enabled = true;
  cfg.source.drift.fidelity_amplitude = 0.10;
  cfg.source.drift.scrambler_amplitude_rad = deg_to_rad(30.0);
  std::vector<SessionReport> reports = daily_cycle(cfg);
  // The drift moves the measured fidelity to Psi+ (the drifting scrambler
  // and Psi- admixture both shift it); the top eigenvalue only tracks
  // concurrence and stays put.
  double lo = 2.0, hi = -1.0;
  for (const auto& r : reports) {
    lo = std::min(lo, r.state_fidelity);
    hi = std::max(hi, r.state_fidelity);
  }
  CHECK(hi - lo > 0.05);
}
