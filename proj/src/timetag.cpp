#include "qkd/timetag.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

namespace qkd {

namespace {

constexpr char kMagic[5] = {'T', 'T', 'A', 'G', '1'};
constexpr double kPsPerSecond = 1e12;

bool event_less(const TimestampEvent& x, const TimestampEvent& y) {
  return x.time_ps != y.time_ps ? x.time_ps < y.time_ps : x.detector < y.detector;
}

void sort_deadtime_gate(std::vector<TimestampEvent>& ev, double dead_time_ps,
                        std::int64_t duration_ps) {
  std::sort(ev.begin(), ev.end(), event_less);
  const std::int64_t dead = static_cast<std::int64_t>(dead_time_ps);
  std::array<std::int64_t, 5> last;
  last.fill(std::numeric_limits<std::int64_t>::min() / 2);
  size_t out = 0;
  for (const auto& e : ev) {
    if (e.time_ps < 0 || e.time_ps > duration_ps) continue;
    if (dead > 0 && e.time_ps - last[e.detector] < dead) continue;
    last[e.detector] = e.time_ps;
    ev[out++] = e;
  }
  ev.resize(out);
}

}  // namespace

void TimestampStream::validate() const {
  std::int64_t prev = std::numeric_limits<std::int64_t>::min();
  for (const auto& e : events) {
    if (e.detector < 1 || e.detector > 4) {
      throw InvalidStateError("TimestampStream: detector id " +
                              std::to_string(e.detector) + " out of range 1..4");
    }
    if (e.time_ps < prev) {
      throw InvalidStateError("TimestampStream: times not nondecreasing");
    }
    prev = e.time_ps;
  }
}

void TimestampStream::save_binary(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(kMagic, sizeof(kMagic));
  for (const auto& e : events) {
    if (e.time_ps < 0) {
      throw InvalidStateError("save_binary: negative timestamp");
    }
    std::uint8_t det = e.detector;
    std::uint64_t t = static_cast<std::uint64_t>(e.time_ps);
    std::uint8_t rec[9];
    rec[0] = det;
    for (int k = 0; k < 8; ++k) rec[1 + k] = static_cast<std::uint8_t>(t >> (8 * k));
    f.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
  if (!f) throw IoError("write failed: " + path);
}

TimestampStream TimestampStream::load_binary(const std::string& path, Party party) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  char magic[5];
  if (!f.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, 5) != 0) {
    throw ConfigError("stream file: bad magic (want TTAG1): " + path);
  }
  TimestampStream s;
  s.party = party;
  std::uint8_t rec[9];
  while (f.read(reinterpret_cast<char*>(rec), sizeof(rec))) {
    std::uint64_t t = 0;
    for (int k = 0; k < 8; ++k) t |= static_cast<std::uint64_t>(rec[1 + k]) << (8 * k);
    if (t > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      throw ConfigError("stream file: timestamp exceeds 2^63-1 ps");
    }
    s.events.push_back({static_cast<std::int64_t>(t), rec[0]});
  }
  if (f.gcount() != 0) {
    throw ConfigError("stream file: truncated record: " + path);
  }
  s.duration_ps = s.events.empty() ? 0 : s.events.back().time_ps;
  s.validate();
  return s;
}

void TimestampStream::save_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "detector,ps\n";
  for (const auto& e : events) {
    f << static_cast<int>(e.detector) << ',' << e.time_ps << '\n';
  }
  if (!f) throw IoError("write failed: " + path);
}

TimestampStream TimestampStream::load_csv(const std::string& path, Party party) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "detector,ps") {
    throw ConfigError("stream csv: missing `detector,ps` header: " + path);
  }
  TimestampStream s;
  s.party = party;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    int det = 0;
    long long t = 0;
    if (std::sscanf(line.c_str(), "%d,%lld", &det, &t) != 2) {
      throw ConfigError("stream csv: bad line `" + line + "`");
    }
    s.events.push_back({t, static_cast<std::uint8_t>(det)});
  }
  s.duration_ps = s.events.empty() ? 0 : s.events.back().time_ps;
  s.validate();
  return s;
}

double ClockModel::offset_at_ps(double t_ps) const {
  double seconds = t_ps / kPsPerSecond;
  if (pps_discipline) {
    seconds -= std::floor(seconds);  // drift resets at each PPS edge
  }
  return static_cast<double>(initial_offset_ps) + drift_ps_per_s * seconds;
}

std::uint64_t CoincidenceTable::sifted_sum() const {
  return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1] +
         counts[2][2] + counts[2][3] + counts[3][2] + counts[3][3];
}

std::uint64_t CoincidenceTable::error_sum() const {
  return counts[0][1] + counts[1][0] + counts[2][3] + counts[3][2];
}

std::uint64_t CoincidenceTable::grand_total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts)
    for (auto c : row) t += c;
  return t;
}

std::pair<TimestampStream, TimestampStream> generate_streams(
    const DensityMatrix& rho_effective, const SourceModel& source,
    const ChannelModel& channel, const NoiseModel& noise,
    const DetectorModel& detector, const ClockModel& clock,
    const BobAssignment& bob, double duration_s, std::uint64_t seed) {
  if (!(duration_s > 0.0)) {
    throw InvalidStateError("generate_streams: duration must be > 0");
  }
  const std::int64_t duration_ps = static_cast<std::int64_t>(duration_s * kPsPerSecond);
  const double eff_a = channel.alice_transmission * detector.efficiency;
  const double eff_b = channel.bob_transmission * detector.efficiency;

  // Joint outcome probabilities for the 16 detector pairs: 1/4 for the
  // passive arm split on each side times the Born probability.
  const auto& alice_states = alice_projection_states();
  std::array<double, 16> p16{};
  std::array<double, 4> pa{}, pb{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      Eigen::Vector4cd v = tensor(alice_states[i], bob.states[j]).amplitudes();
      double p = (v.adjoint() * rho_effective.entries() * v)(0, 0).real();
      p = std::max(0.0, p) * 0.25;
      p16[i * 4 + j] = p;
      pa[i] += p;
      pb[j] += p;
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni_t(0.0, static_cast<double>(duration_ps));
  std::normal_distribution<double> jitter(0.0, std::max(detector.jitter_sigma_ps, 1e-9));
  const bool has_jitter = detector.jitter_sigma_ps > 0.0;
  std::discrete_distribution<int> joint(p16.begin(), p16.end());
  std::discrete_distribution<int> alice_marginal(pa.begin(), pa.end());
  std::discrete_distribution<int> bob_marginal(pb.begin(), pb.end());

  auto poisson_count = [&](double mean) -> std::uint64_t {
    if (!(mean > 0.0)) return 0;
    std::poisson_distribution<std::uint64_t> dist(mean);
    return dist(rng);
  };
  auto jitter_ps = [&]() -> double { return has_jitter ? jitter(rng) : 0.0; };

  std::vector<TimestampEvent> ev_a, ev_b;
  const double rate_pairs = source.pair_rate * eff_a * eff_b;
  const double rate_a_only = source.pair_rate * eff_a * (1.0 - eff_b);
  const double rate_b_only = source.pair_rate * (1.0 - eff_a) * eff_b;
  const double bg_bob = noise.effective_background_rate() + noise.dark_count_rate;
  const double bg_alice = noise.dark_count_rate;

  const std::uint64_t n_pairs = poisson_count(rate_pairs * duration_s);
  const std::uint64_t n_a_only = poisson_count(rate_a_only * duration_s);
  const std::uint64_t n_b_only = poisson_count(rate_b_only * duration_s);
  ev_a.reserve(n_pairs + n_a_only +
               static_cast<size_t>(4.2 * bg_alice * duration_s) + 64);
  ev_b.reserve(n_pairs + n_b_only +
               static_cast<size_t>(4.2 * bg_bob * duration_s) + 64);

  for (std::uint64_t k = 0; k < n_pairs; ++k) {
    double t = uni_t(rng);
    int outcome = joint(rng);
    double ta = t + jitter_ps();
    double tb = t + jitter_ps() + clock.offset_at_ps(t);
    ev_a.push_back({std::llround(ta), static_cast<std::uint8_t>(outcome / 4 + 1)});
    ev_b.push_back({std::llround(tb), static_cast<std::uint8_t>(outcome % 4 + 1)});
  }
  for (std::uint64_t k = 0; k < n_a_only; ++k) {
    double t = uni_t(rng) + jitter_ps();
    ev_a.push_back({std::llround(t), static_cast<std::uint8_t>(alice_marginal(rng) + 1)});
  }
  for (std::uint64_t k = 0; k < n_b_only; ++k) {
    double t = uni_t(rng);
    double tb = t + jitter_ps() + clock.offset_at_ps(t);
    ev_b.push_back({std::llround(tb), static_cast<std::uint8_t>(bob_marginal(rng) + 1)});
  }
  for (int det = 1; det <= 4; ++det) {
    std::uint64_t n = poisson_count(bg_alice * duration_s);
    for (std::uint64_t k = 0; k < n; ++k) {
      ev_a.push_back({std::llround(uni_t(rng)), static_cast<std::uint8_t>(det)});
    }
  }
  for (int det = 1; det <= 4; ++det) {
    std::uint64_t n = poisson_count(bg_bob * duration_s);
    for (std::uint64_t k = 0; k < n; ++k) {
      double t = uni_t(rng);
      ev_b.push_back({std::llround(t + clock.offset_at_ps(t)),
                      static_cast<std::uint8_t>(det)});
    }
  }

  sort_deadtime_gate(ev_a, detector.dead_time_ps, duration_ps);
  sort_deadtime_gate(ev_b, detector.dead_time_ps, duration_ps);

  TimestampStream sa{std::move(ev_a), Party::alice, duration_ps};
  TimestampStream sb{std::move(ev_b), Party::bob, duration_ps};
  return {std::move(sa), std::move(sb)};
}

std::int64_t find_delay(const TimestampStream& a, const TimestampStream& b,
                        std::int64_t search_range_ps, std::int64_t bin_ps) {
  if (a.events.empty() || b.events.empty()) {
    throw InsufficientDataError("find_delay: empty stream");
  }
  if (search_range_ps <= 0 || bin_ps <= 0) {
    throw InvalidStateError("find_delay: search range and bin must be > 0");
  }
  // Odd bin count with the middle bin centered on zero delay.
  const std::int64_t nbins = 2 * (search_range_ps / bin_ps) + 1;
  const std::int64_t lo = -(search_range_ps / bin_ps) * bin_ps - bin_ps / 2;
  std::vector<std::uint64_t> hist(nbins, 0);
  std::vector<double> dt_sum(nbins, 0.0);

  size_t j0 = 0;
  const auto& ea = a.events;
  const auto& eb = b.events;
  for (const auto& e : ea) {
    const std::int64_t t_lo = e.time_ps + lo;
    while (j0 < eb.size() && eb[j0].time_ps < t_lo) ++j0;
    for (size_t j = j0; j < eb.size(); ++j) {
      std::int64_t dt = eb[j].time_ps - e.time_ps;
      std::int64_t idx = (dt - lo) / bin_ps;
      if (idx >= nbins) break;
      hist[idx]++;
      dt_sum[idx] += static_cast<double>(dt);
    }
  }

  std::int64_t peak_idx = 0;
  std::uint64_t peak = 0, total = 0;
  for (std::int64_t k = 0; k < nbins; ++k) {
    total += hist[k];
    if (hist[k] > peak) {
      peak = hist[k];
      peak_idx = k;
    }
  }
  std::uint64_t near_peak = 0;
  std::int64_t k_from = std::max<std::int64_t>(0, peak_idx - 3);
  std::int64_t k_to = std::min<std::int64_t>(nbins - 1, peak_idx + 3);
  for (std::int64_t k = k_from; k <= k_to; ++k) near_peak += hist[k];
  double floor_mean = (nbins > (k_to - k_from + 1))
                          ? static_cast<double>(total - near_peak) /
                                static_cast<double>(nbins - (k_to - k_from + 1))
                          : 0.0;
  if (peak < 10 || static_cast<double>(peak) < 3.0 * floor_mean) {
    throw NoPeakError("find_delay: no significant coincidence peak (peak " +
                      std::to_string(peak) + ", floor " +
                      std::to_string(floor_mean) + ")");
  }

  // Centroid over the peak bin and its neighbors.
  std::uint64_t n = 0;
  double s = 0.0;
  for (std::int64_t k = std::max<std::int64_t>(0, peak_idx - 1);
       k <= std::min<std::int64_t>(nbins - 1, peak_idx + 1); ++k) {
    n += hist[k];
    s += dt_sum[k];
  }
  return std::llround(s / static_cast<double>(n));
}

void for_each_coincidence(const TimestampStream& a, const TimestampStream& b,
                          std::int64_t delay_ps, std::int64_t window_ps,
                          const std::function<void(std::uint8_t, std::uint8_t)>& fn) {
  if (window_ps <= 0) {
    throw InvalidStateError("coincidence window must be > 0");
  }
  const auto& ea = a.events;
  const auto& eb = b.events;
  size_t j = 0;
  for (const auto& e : ea) {
    // 2|t_a - (t_b - delay)| <= window, all in exact integer arithmetic.
    while (j < eb.size() && 2 * (e.time_ps - (eb[j].time_ps - delay_ps)) > window_ps) {
      ++j;
    }
    if (j == eb.size()) break;
    std::int64_t diff = e.time_ps - (eb[j].time_ps - delay_ps);
    if (2 * diff >= -window_ps) {
      fn(e.detector, eb[j].detector);
      ++j;
    }
  }
}

CoincidenceTable count_coincidences(const TimestampStream& a,
                                    const TimestampStream& b,
                                    std::int64_t delay_ps,
                                    std::int64_t window_ps) {
  CoincidenceTable table;
  table.window_ps = window_ps;
  table.delay_ps = delay_ps;
  table.acquisition_seconds = static_cast<double>(a.duration_ps) / kPsPerSecond;
  for_each_coincidence(a, b, delay_ps, window_ps,
                       [&](std::uint8_t da, std::uint8_t db) {
                         table.counts[da - 1][db - 1]++;
                       });
  return table;
}

WindowOptimizationResult optimize_window(const TimestampStream& a,
                                         const TimestampStream& b,
                                         std::int64_t delay_ps,
                                         double qber_limit_pct,
                                         const std::vector<std::int64_t>& window_grid_ps) {
  if (window_grid_ps.empty()) {
    throw InvalidStateError("optimize_window: empty window grid");
  }
  if (a.events.empty() || b.events.empty()) {
    throw InsufficientDataError("optimize_window: empty stream");
  }
  bool have_any = false, have_qualified = false;
  WindowOptimizationResult best{};
  double best_keyrate = -1.0, best_qber = std::numeric_limits<double>::max();
  for (std::int64_t w : window_grid_ps) {
    CoincidenceTable t = count_coincidences(a, b, delay_ps, w);
    std::uint64_t sifted = t.sifted_sum();
    if (sifted == 0) continue;
    have_any = true;
    double qber = 100.0 * static_cast<double>(t.error_sum()) /
                  static_cast<double>(sifted);
    double keyrate = static_cast<double>(sifted) / t.acquisition_seconds;
    if (qber <= qber_limit_pct) {
      if (!have_qualified || keyrate > best_keyrate ||
          (keyrate == best_keyrate && w > best.window_ps)) {
        best = {w, t, true};
        best_keyrate = keyrate;
      }
      have_qualified = true;
    } else if (!have_qualified && qber < best_qber) {
      best = {w, t, false};
      best_qber = qber;
    }
  }
  if (!have_any) {
    throw InsufficientDataError("optimize_window: no window produced sifted coincidences");
  }
  return best;
}

}  // namespace qkd
