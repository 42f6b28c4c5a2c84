#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "qkd/protocol.hpp"
#include "qkd/timetag.hpp"

using namespace qkd;

namespace {

TimestampStream make_stream(std::vector<TimestampEvent> ev, Party party,
                            std::int64_t duration_ps) {
  std::sort(ev.begin(), ev.end(), [](const auto& x, const auto& y) {
    return x.time_ps != y.time_ps ? x.time_ps < y.time_ps
                                  : x.detector < y.detector;
  });
  TimestampStream s{std::move(ev), party, duration_ps};
  s.validate();
  return s;
}

TimestampStream random_stream(std::mt19937_64& rng, size_t n,
                              std::int64_t duration_ps, Party party) {
  std::uniform_int_distribution<std::int64_t> t(0, duration_ps);
  std::uniform_int_distribution<int> det(1, 4);
  std::vector<TimestampEvent> ev;
  ev.reserve(n);
  for (size_t k = 0; k < n; ++k) {
    ev.push_back({t(rng), static_cast<std::uint8_t>(det(rng))});
  }
  return make_stream(std::move(ev), party, duration_ps);
}

// Quadratic reference matcher: for each Alice event in time order, take
// the earliest unmatched Bob event inside the closed window.
CoincidenceTable quadratic_oracle(const TimestampStream& a, const TimestampStream& b,
                                  std::int64_t delay, std::int64_t window) {
  CoincidenceTable table;
  table.window_ps = window;
  table.delay_ps = delay;
  table.acquisition_seconds = static_cast<double>(a.duration_ps) / 1e12;
  std::vector<bool> used(b.events.size(), false);
  for (const auto& ea : a.events) {
    for (size_t j = 0; j < b.events.size(); ++j) {
      if (used[j]) continue;
      std::int64_t diff = ea.time_ps - (b.events[j].time_ps - delay);
      if (2 * diff > window) continue;   // b too early for this a
      if (2 * diff < -window) break;     // b (and all later ones) too late
      used[j] = true;
      table.counts[ea.detector - 1][b.events[j].detector - 1]++;
      break;
    }
  }
  return table;
}

ScenarioPreset bench_preset() {
  ScenarioPreset p = scenario_preset("custom");
  p.source = SourceModel(1e6, 1.0, 1.0);
  p.channel.alice_transmission = 0.08;
  p.channel.bob_transmission = 0.05;
  p.detector = DetectorModel{1.0, 0.0, 0.0};
  p.noise = NoiseModel{0.0, 10.0, 1.0, 0.0};
  return p;
}

}  // namespace

TEST_CASE("stream validation") {
  CHECK_NOTHROW(make_stream({{10, 1}, {20, 2}}, Party::alice, 100));
  TimestampStream bad{{{20, 1}, {10, 2}}, Party::alice, 100};
  CHECK_THROWS_AS(bad.validate(), InvalidStateError);
  TimestampStream bad_det{{{10, 5}}, Party::alice, 100};
  CHECK_THROWS_AS(bad_det.validate(), InvalidStateError);
}

TEST_CASE("generate_streams basics") {
  ScenarioPreset p = bench_preset();
  ClockModel clock{0, 0.0, false};
  DensityMatrix bell = DensityMatrix::from_pure(bell_psi_plus());

  SUBCASE("zero rates give empty streams") {
    ScenarioPreset z = p;
    z.channel.alice_transmission = 0.0;
    z.channel.bob_transmission = 0.0;
    auto [a, b] = generate_streams(bell, z.source, z.channel, z.noise, z.detector,
                                   clock, conventional_bob_assignment(), 0.1, 7);
    CHECK(a.events.empty());
    CHECK(b.events.empty());
  }
  SUBCASE("noiseless Psi+ conventional: zero error coincidences") {
    // Unit transmissions: every pair is detected on both sides, so the
    // streams carry no partner-loss singles and no accidentals.
    ScenarioPreset ideal = p;
    ideal.source = SourceModel(1e4, 1.0, 1.0);
    ideal.channel.alice_transmission = 1.0;
    ideal.channel.bob_transmission = 1.0;
    auto [a, b] = generate_streams(bell, ideal.source, ideal.channel, ideal.noise,
                                   ideal.detector, clock,
                                   conventional_bob_assignment(), 1.0, 11);
    CoincidenceTable t = count_coincidences(a, b, 0, 1000);
    CHECK(t.error_sum() == 0);
    CHECK(t.sifted_sum() > 0);
  }
  SUBCASE("detected-pair count is Poisson around rate*T") {
    // Both-detected rate = 1e6 * 0.08 * 0.05 = 4000/s; over 10 s each
    // seed's total should sit within 3 sigma of 40000.
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto [a, b] = generate_streams(bell, p.source, p.channel, p.noise,
                                     p.detector, clock,
                                     conventional_bob_assignment(), 10.0, seed);
      CoincidenceTable t = count_coincidences(a, b, 0, 1000);
      double n = static_cast<double>(t.grand_total());
      CHECK(std::abs(n - 40000.0) < 3.0 * std::sqrt(40000.0));
    }
  }
  SUBCASE("deterministic under a fixed seed") {
    auto [a1, b1] = generate_streams(bell, p.source, p.channel, p.noise, p.detector,
                                     clock, conventional_bob_assignment(), 0.5, 99);
    auto [a2, b2] = generate_streams(bell, p.source, p.channel, p.noise, p.detector,
                                     clock, conventional_bob_assignment(), 0.5, 99);
    REQUIRE(a1.events.size() == a2.events.size());
    CHECK(std::equal(a1.events.begin(), a1.events.end(), a2.events.begin(),
                     [](const auto& x, const auto& y) {
                       return x.time_ps == y.time_ps && x.detector == y.detector;
                     }));
    CHECK(b1.events.size() == b2.events.size());
  }
  SUBCASE("dead time thins a hot detector") {
    ScenarioPreset hot = p;
    hot.noise.background_singles_rate_per_detector = 2e6;
    hot.channel.alice_transmission = 0.0;
    hot.channel.bob_transmission = 0.0;
    ScenarioPreset hot_dead = hot;
    hot_dead.detector.dead_time_ps = 100000.0;  // 100 ns
    auto [a1, b1] = generate_streams(bell, hot.source, hot.channel, hot.noise,
                                     hot.detector, clock,
                                     conventional_bob_assignment(), 0.2, 5);
    auto [a2, b2] = generate_streams(bell, hot_dead.source, hot_dead.channel,
                                     hot_dead.noise, hot_dead.detector, clock,
                                     conventional_bob_assignment(), 0.2, 5);
    CHECK(b2.events.size() < b1.events.size());
    // Saturated: at most one accepted event per dead time per detector.
    CHECK(static_cast<double>(b2.events.size()) < 4 * 0.2 / 100e-9 + 100);
  }
}

TEST_CASE("find_delay") {
  std::mt19937_64 rng(13);
  SUBCASE("recovers a pure shift of 1234000 ps") {
    TimestampStream a = random_stream(rng, 20000, 1'000'000'000'000, Party::alice);
    std::vector<TimestampEvent> shifted;
    for (const auto& e : a.events) shifted.push_back({e.time_ps + 1'234'000, e.detector});
    TimestampStream b = make_stream(shifted, Party::bob, a.duration_ps + 2'000'000);
    std::int64_t d = find_delay(a, b, 2'000'000, 100);
    CHECK(std::abs(d - 1'234'000) <= 100);
  }
  SUBCASE("zero shift") {
    TimestampStream a = random_stream(rng, 20000, 1'000'000'000'000, Party::alice);
    std::int64_t d = find_delay(a, a, 1'000'000, 100);
    CHECK(std::abs(d) <= 100);
  }
  SUBCASE("pure background gives no peak") {
    TimestampStream a = random_stream(rng, 30000, 1'000'000'000'000, Party::alice);
    TimestampStream b = random_stream(rng, 30000, 1'000'000'000'000, Party::bob);
    CHECK_THROWS_AS(find_delay(a, b, 1'000'000, 100), NoPeakError);
  }
  SUBCASE("empty stream is an error") {
    TimestampStream empty{{}, Party::bob, 100};
    TimestampStream a = random_stream(rng, 100, 1'000'000, Party::alice);
    CHECK_THROWS_AS(find_delay(a, empty, 1000, 100), InsufficientDataError);
  }
}

TEST_CASE("find_delay recovers random offsets when signal dominates") {
  // 100 (offset, seed) pairs, signal-to-accidental >= 5, recovery within
  // one 100 ps bin.
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::int64_t> offset_dist(-1'000'000, 1'000'000);
  ScenarioPreset p = bench_preset();
  p.source = SourceModel(2e5, 1.0, 1.0);
  p.channel.alice_transmission = 0.25;
  p.channel.bob_transmission = 0.25;
  p.noise.background_singles_rate_per_detector = 2000.0;
  p.detector.jitter_sigma_ps = 100.0;
  DensityMatrix bell = DensityMatrix::from_pure(bell_psi_plus());
  int recovered = 0;
  for (int t = 0; t < 100; ++t) {
    std::int64_t offset = offset_dist(rng);
    ClockModel clock{offset, 0.0, false};
    auto [a, b] = generate_streams(bell, p.source, p.channel, p.noise, p.detector,
                                   clock, conventional_bob_assignment(), 0.5,
                                   1000 + static_cast<std::uint64_t>(t));
    std::int64_t d = find_delay(a, b, 1'100'000, 100);
    if (std::abs(d - offset) <= 100) ++recovered;
  }
  CHECK(recovered == 100);
}

TEST_CASE("count_coincidences") {
  SUBCASE("identical corrected times all match") {
    TimestampStream a = make_stream({{100, 1}, {200, 2}, {300, 3}}, Party::alice, 1000);
    TimestampStream b = make_stream({{150, 2}, {250, 1}, {350, 4}}, Party::bob, 1000);
    CoincidenceTable t = count_coincidences(a, b, 50, 10);
    CHECK(t.at(1, 2) == 1);
    CHECK(t.at(2, 1) == 1);
    CHECK(t.at(3, 4) == 1);
    CHECK(t.grand_total() == 3);
  }
  SUBCASE("boundary: closed at window/2, unmatched at the full window") {
    TimestampStream a = make_stream({{1000, 1}}, Party::alice, 10000);
    TimestampStream on_edge = make_stream({{1250, 1}}, Party::bob, 10000);
    TimestampStream beyond = make_stream({{1500, 1}}, Party::bob, 10000);
    CHECK(count_coincidences(a, on_edge, 0, 500).grand_total() == 1);
    CHECK(count_coincidences(a, beyond, 0, 500).grand_total() == 0);
  }
  SUBCASE("each event is used at most once") {
    TimestampStream a = make_stream({{100, 1}, {101, 2}}, Party::alice, 1000);
    TimestampStream b = make_stream({{100, 3}}, Party::bob, 1000);
    CoincidenceTable t = count_coincidences(a, b, 0, 1000);
    CHECK(t.grand_total() == 1);
    CHECK(t.at(1, 3) == 1);
  }
  SUBCASE("translation invariance") {
    std::mt19937_64 rng(23);
    TimestampStream a = random_stream(rng, 500, 1'000'000, Party::alice);
    TimestampStream b = random_stream(rng, 500, 1'000'000, Party::bob);
    CoincidenceTable t0 = count_coincidences(a, b, 77, 400);
    std::vector<TimestampEvent> sa, sb;
    for (const auto& e : a.events) sa.push_back({e.time_ps + 1'000'000'000, e.detector});
    for (const auto& e : b.events) sb.push_back({e.time_ps + 1'000'000'000, e.detector});
    CoincidenceTable t1 =
        count_coincidences(make_stream(sa, Party::alice, a.duration_ps + 1'000'000'000),
                           make_stream(sb, Party::bob, b.duration_ps + 1'000'000'000),
                           77, 400);
    CHECK(t0.counts == t1.counts);
  }
}

TEST_CASE("count_coincidences equals the quadratic oracle") {
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<std::int64_t> delay_dist(-5000, 5000);
  std::uniform_int_distribution<std::int64_t> window_dist(50, 5000);
  for (int trial = 0; trial < 50; ++trial) {
    TimestampStream a = random_stream(rng, 1000, 10'000'000, Party::alice);
    TimestampStream b = random_stream(rng, 1000, 10'000'000, Party::bob);
    std::int64_t delay = delay_dist(rng);
    std::int64_t window = window_dist(rng);
    CoincidenceTable fast = count_coincidences(a, b, delay, window);
    CoincidenceTable slow = quadratic_oracle(a, b, delay, window);
    CHECK(fast.counts == slow.counts);
  }
}

TEST_CASE("window monotonicity on noise-free pair streams") {
  // Pairs spaced far beyond the largest window: every Alice event has
  // exactly one candidate partner, so enlarging the window can only add
  // matches.
  std::mt19937_64 rng(31);
  std::normal_distribution<double> jitter(0.0, 300.0);
  std::uniform_int_distribution<int> det(1, 4);
  std::vector<TimestampEvent> ea, eb;
  for (int k = 0; k < 2000; ++k) {
    std::int64_t t = 100000 * (k + 1);
    ea.push_back({t + std::llround(jitter(rng)), static_cast<std::uint8_t>(det(rng))});
    eb.push_back({t + std::llround(jitter(rng)), static_cast<std::uint8_t>(det(rng))});
  }
  TimestampStream a = make_stream(ea, Party::alice, 100000 * 2001);
  TimestampStream b = make_stream(eb, Party::bob, 100000 * 2001);
  CoincidenceTable prev;
  bool first = true;
  for (std::int64_t w : {100, 300, 1000, 3000, 10000}) {
    CoincidenceTable t = count_coincidences(a, b, 0, w);
    if (!first) {
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(t.counts[i][j] >= prev.counts[i][j]);
    }
    prev = t;
    first = false;
  }
  CHECK(prev.grand_total() == 2000);
}

TEST_CASE("pps discipline caps the accumulated drift") {
  ClockModel disciplined{0, 10000.0, true};  // 10 ns/s drift
  ClockModel free_running{0, 10000.0, false};
  // Offsets at each simulated second boundary return to the initial value
  // under PPS; without discipline they accumulate.
  for (int s = 1; s <= 10; ++s) {
    double at_boundary = disciplined.offset_at_ps(s * 1e12);
    CHECK(std::abs(at_boundary - 0.0) < 1000.0);  // < 1 ns residual
    CHECK(free_running.offset_at_ps(s * 1e12) ==
          doctest::Approx(10000.0 * s).epsilon(1e-9));
  }
  // Mid-second wander follows the drift within the second.
  CHECK(disciplined.offset_at_ps(0.5e12) == doctest::Approx(5000.0));
  CHECK(disciplined.offset_at_ps(7.25e12) == doctest::Approx(2500.0));
}

TEST_CASE("optimize_window") {
  ScenarioPreset p = bench_preset();
  p.detector.jitter_sigma_ps = 200.0;
  ClockModel clock{0, 0.0, false};
  DensityMatrix bell = DensityMatrix::from_pure(bell_psi_plus());
  std::vector<std::int64_t> grid = {100, 250, 500, 1000, 2000, 4000, 8000};

  SUBCASE("noiseless: the largest window wins") {
    auto [a, b] = generate_streams(bell, p.source, p.channel, p.noise, p.detector,
                                   clock, conventional_bob_assignment(), 1.0, 37);
    WindowOptimizationResult r = optimize_window(a, b, 0, 11.0, grid);
    CHECK(r.limit_met);
    CHECK(r.window_ps == 8000);
  }
  SUBCASE("heavy background pushes the window down, QBER stays under the limit") {
    ScenarioPreset noisy = p;
    noisy.noise.background_singles_rate_per_detector = 800000.0;
    auto [a, b] = generate_streams(bell, noisy.source, noisy.channel, noisy.noise,
                                   noisy.detector, clock,
                                   conventional_bob_assignment(), 1.0, 41);
    WindowOptimizationResult r = optimize_window(a, b, 0, 11.0, grid);
    CHECK(r.limit_met);
    CHECK(r.window_ps < 8000);
    CHECK(qber(r.table) <= 11.0);
  }
  SUBCASE("infeasible zero-percent limit sets the not-met flag") {
    ScenarioPreset noisy = p;
    noisy.noise.background_singles_rate_per_detector = 800000.0;
    auto [a, b] = generate_streams(bell, noisy.source, noisy.channel, noisy.noise,
                                   noisy.detector, clock,
                                   conventional_bob_assignment(), 1.0, 43);
    WindowOptimizationResult r = optimize_window(a, b, 0, 0.0, grid);
    CHECK_FALSE(r.limit_met);
  }
  SUBCASE("error paths") {
    TimestampStream empty{{}, Party::alice, 100};
    auto [a, b] = generate_streams(bell, p.source, p.channel, p.noise, p.detector,
                                   clock, conventional_bob_assignment(), 0.05, 47);
    CHECK_THROWS_AS(optimize_window(empty, b, 0, 11.0, grid), InsufficientDataError);
    std::vector<std::int64_t> no_grid;
    CHECK_THROWS_AS(optimize_window(a, b, 0, 11.0, no_grid), InvalidStateError);
  }
}

TEST_CASE("stream files round trip") {
  std::mt19937_64 rng(53);
  TimestampStream s = random_stream(rng, 500, 1'000'000, Party::alice);
  namespace fs = std::filesystem;
  std::string bin = (fs::temp_directory_path() / "qkd_stream_test.ttag").string();
  std::string csv = (fs::temp_directory_path() / "qkd_stream_test.csv").string();

  s.save_binary(bin);
  TimestampStream from_bin = TimestampStream::load_binary(bin, Party::alice);
  REQUIRE(from_bin.events.size() == s.events.size());
  for (size_t k = 0; k < s.events.size(); ++k) {
    CHECK(from_bin.events[k].time_ps == s.events[k].time_ps);
    CHECK(from_bin.events[k].detector == s.events[k].detector);
  }

  s.save_csv(csv);
  TimestampStream from_csv = TimestampStream::load_csv(csv, Party::bob);
  CHECK(from_csv.events.size() == s.events.size());
  CHECK(from_csv.party == Party::bob);

  // Readers validate monotonic time.
  {
    std::ofstream f(csv);
    f << "detector,ps\n2,100\n1,50\n";
  }
  CHECK_THROWS_AS(TimestampStream::load_csv(csv, Party::alice), InvalidStateError);

  fs::remove(bin);
  fs::remove(csv);
}
