#pragma once

// Detector model and Monte Carlo time-tag generation.
//
// Tags are integer picoseconds. Every period starts at k * rep_period_ps;
// photon arrival offsets within a period come from a temporal profile and
// are blurred by Gaussian detector jitter.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qfcsim/signal.hpp"

namespace qfcsim {

using Rng = std::mt19937_64;

inline std::int64_t to_ps(double seconds) { return std::llround(seconds * 1e12); }

/// splitmix64 step, used to derive independent sub-seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct DetectorSpec {
  double efficiency = 0.14;
  double dark_rate = 40.0;        // Hz
  double jitter_fwhm = 100e-12;   // Gaussian
  double dead_time = 0.0;

  void validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0))
      throw std::invalid_argument("DetectorSpec: efficiency must lie in [0, 1]");
    if (!(dark_rate >= 0.0)) throw std::invalid_argument("DetectorSpec: dark_rate must be >= 0");
    if (!(jitter_fwhm >= 0.0)) throw std::invalid_argument("DetectorSpec: jitter_fwhm must be >= 0");
    if (!(dead_time >= 0.0)) throw std::invalid_argument("DetectorSpec: dead_time must be >= 0");
  }

  double jitter_sigma() const { return jitter_fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0))); }
};

struct TimeTagStream {
  std::uint8_t channel = 0;
  std::vector<std::int64_t> times_ps;  // sorted
  std::int64_t duration_ps = 0;
  std::int64_t rep_period_ps = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return times_ps.size(); }

  void validate() const {
    if (duration_ps <= 0) throw std::invalid_argument("TimeTagStream: duration must be positive");
    if (rep_period_ps <= 0) throw std::invalid_argument("TimeTagStream: rep period must be positive");
    if (!std::is_sorted(times_ps.begin(), times_ps.end()))
      throw std::invalid_argument("TimeTagStream: times must be non-decreasing");
    if (!times_ps.empty() && (times_ps.front() < 0 || times_ps.back() > duration_ps))
      throw std::invalid_argument("TimeTagStream: times outside [0, duration]");
  }
};

// -- Temporal profiles (offsets within a period, seconds) ------------------

struct DeltaProfile {
  double offset = 0.0;
};
struct GaussianProfile {
  double center = 0.0;
  double fwhm = 0.0;
};
struct UniformProfile {
  double start = 0.0;
  double width = 0.0;
};
struct ExponentialProfile {
  double onset = 0.0;
  double lifetime = 0.0;
};
using TemporalProfile = std::variant<DeltaProfile, GaussianProfile, UniformProfile, ExponentialProfile>;

inline double sample_offset(const TemporalProfile& profile, Rng& rng) {
  struct Visitor {
    Rng& rng;
    double operator()(const DeltaProfile& p) const { return p.offset; }
    double operator()(const GaussianProfile& p) const {
      if (p.fwhm == 0.0) return p.center;
      std::normal_distribution<double> d(p.center, p.fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0))));
      return d(rng);
    }
    double operator()(const UniformProfile& p) const {
      std::uniform_real_distribution<double> d(p.start, p.start + p.width);
      return d(rng);
    }
    double operator()(const ExponentialProfile& p) const {
      std::exponential_distribution<double> d(1.0 / p.lifetime);
      return p.onset + d(rng);
    }
  };
  return std::visit(Visitor{rng}, profile);
}

enum class PhotonStatistics {
  single_photon,  // at most one photon per period (Bernoulli)
  poisson,
};

struct PhotonSource {
  PhotonStatistics statistics = PhotonStatistics::single_photon;
  double mean_per_pulse = 0.0;  // click probability (single) or mean (Poisson) before detection
  TemporalProfile profile = DeltaProfile{};
};

namespace detail {

/// Calls fn(period) for each period in [0, n) holding a Bernoulli(p) event.
template <typename Fn>
void for_each_bernoulli(Rng& rng, double p, std::int64_t n, Fn&& fn) {
  if (p <= 0.0) return;
  if (p >= 1.0) {
    for (std::int64_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::geometric_distribution<std::int64_t> skip(p);
  for (std::int64_t k = skip(rng); k < n; k += 1 + skip(rng)) fn(k);
}

/// Calls fn(period) once per event of a Poisson process with `mean` events
/// per period, over n periods. Event order is not chronological.
template <typename Fn>
void for_each_poisson(Rng& rng, double mean, std::int64_t n, Fn&& fn) {
  if (mean <= 0.0 || n <= 0) return;
  std::poisson_distribution<std::int64_t> total(mean * static_cast<double>(n));
  const std::int64_t k = total(rng);
  std::uniform_int_distribution<std::int64_t> period(0, n - 1);
  for (std::int64_t i = 0; i < k; ++i) fn(period(rng));
}

inline void finalize_stream(TimeTagStream& s, const DetectorSpec& det) {
  std::sort(s.times_ps.begin(), s.times_ps.end());
  if (det.dead_time > 0.0 && !s.times_ps.empty()) {
    const std::int64_t dead = to_ps(det.dead_time);
    std::vector<std::int64_t> kept;
    kept.reserve(s.times_ps.size());
    for (auto t : s.times_ps)
      if (kept.empty() || t - kept.back() >= dead) kept.push_back(t);
    s.times_ps = std::move(kept);
  }
}

}  // namespace detail

/// Adds detected photons from `period` to `stream`, applying jitter and
/// discarding arrivals outside [0, duration].
class TagWriter {
 public:
  TagWriter(TimeTagStream& stream, const DetectorSpec& det, Rng& rng)
      : stream_(stream), rng_(rng), jitter_(0.0, det.jitter_sigma()), jittered_(det.jitter_fwhm > 0.0) {}

  void emit(std::int64_t period, double offset) {
    double t = offset;
    if (jittered_) t += jitter_(rng_);
    const std::int64_t ps = period * stream_.rep_period_ps + to_ps(t);
    if (ps >= 0 && ps <= stream_.duration_ps) stream_.times_ps.push_back(ps);
  }

 private:
  TimeTagStream& stream_;
  Rng& rng_;
  std::normal_distribution<double> jitter_;
  bool jittered_;
};

/// Uniform dark counts at det.dark_rate over the stream duration.
inline void add_dark_counts(TimeTagStream& s, const DetectorSpec& det, Rng& rng) {
  if (det.dark_rate <= 0.0) return;
  std::poisson_distribution<std::int64_t> count(det.dark_rate * static_cast<double>(s.duration_ps) *
                                                1e-12);
  std::uniform_int_distribution<std::int64_t> when(0, s.duration_ps);
  const auto k = count(rng);
  for (std::int64_t i = 0; i < k; ++i) s.times_ps.push_back(when(rng));
}

inline TimeTagStream simulate_timetags(std::uint64_t seed, double duration,
                                       const std::vector<PhotonSource>& sources,
                                       const DetectorSpec& det, double rep_period,
                                       std::uint8_t channel = 0) {
  det.validate();
  if (!(duration > 0.0)) throw std::invalid_argument("simulate_timetags: duration must be positive");
  TimeTagStream s;
  s.channel = channel;
  s.duration_ps = to_ps(duration);
  s.rep_period_ps = to_ps(rep_period);
  s.seed = seed;
  if (s.rep_period_ps <= 0) throw std::invalid_argument("simulate_timetags: rep period must be positive");
  const std::int64_t periods = s.duration_ps / s.rep_period_ps;
  if (periods < 1) throw std::invalid_argument("simulate_timetags: duration shorter than one period");
  for (const auto& src : sources) {
    const double m = src.mean_per_pulse;
    if (!(m >= 0.0) || (src.statistics == PhotonStatistics::single_photon && m > 1.0))
      throw std::invalid_argument("simulate_timetags: invalid per-pulse probability");
  }

  Rng rng(seed);
  TagWriter writer(s, det, rng);
  std::bernoulli_distribution detected(det.efficiency);
  for (const auto& src : sources) {
    auto on_photon = [&](std::int64_t k) {
      if (detected(rng)) writer.emit(k, sample_offset(src.profile, rng));
    };
    if (src.statistics == PhotonStatistics::single_photon)
      detail::for_each_bernoulli(rng, src.mean_per_pulse, periods, on_photon);
    else
      detail::for_each_poisson(rng, src.mean_per_pulse, periods, on_photon);
  }
  add_dark_counts(s, det, rng);
  detail::finalize_stream(s, det);
  return s;
}

// -- Phase histogram -------------------------------------------------------

struct PhaseHistogram {
  double bin_width = 0.0;  // s
  double rep_period = 0.0;
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
  double phase(std::size_t i) const { return (static_cast<double>(i) + 0.5) * bin_width; }
};

/// Largest bin width not exceeding `requested` that tiles rep_period exactly.
inline double compatible_bin_width(double rep_period, double requested) {
  const double n = std::ceil(rep_period / requested - 1e-9);
  return rep_period / std::max(1.0, n);
}

inline PhaseHistogram phase_histogram(const TimeTagStream& stream, double bin_width) {
  stream.validate();
  const auto rep = stream.rep_period_ps;
  const double bins_exact = static_cast<double>(rep) * 1e-12 / bin_width;
  const double bins = std::round(bins_exact);
  if (!(bin_width > 0.0) || bins < 1.0 ||
      std::abs(bins * bin_width - static_cast<double>(rep) * 1e-12) >
          1e-6 * static_cast<double>(rep) * 1e-12)
    throw std::invalid_argument("phase_histogram: bin width must divide the rep period");
  const auto nb = static_cast<std::int64_t>(bins);
  PhaseHistogram h;
  h.bin_width = static_cast<double>(rep) * 1e-12 / bins;
  h.rep_period = static_cast<double>(rep) * 1e-12;
  h.counts.assign(static_cast<std::size_t>(nb), 0);
  for (auto t : stream.times_ps) {
    const std::int64_t phase = t % rep;
    ++h.counts[static_cast<std::size_t>(phase * nb / rep)];
  }
  return h;
}

// -- QTAG binary format ----------------------------------------------------
//
// 16-byte header: "QTAG", u8 version, u24 rep_period_ps, u64 duration_ps;
// then 9-byte records (u8 channel, u64 time_ps), all little-endian, sorted
// by time.

inline constexpr std::uint8_t qtag_version = 1;

namespace detail {

inline void put_le(std::ostream& os, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_le(std::istream& is, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) throw std::runtime_error("qtag: truncated input");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace detail

inline void write_qtag(std::ostream& os, const std::vector<TimeTagStream>& streams) {
  if (streams.empty()) throw std::invalid_argument("write_qtag: no streams");
  const auto rep = streams.front().rep_period_ps;
  const auto duration = streams.front().duration_ps;
  for (const auto& s : streams) {
    s.validate();
    if (s.rep_period_ps != rep || s.duration_ps != duration)
      throw std::invalid_argument("write_qtag: streams must share rep period and duration");
  }
  if (rep >= (1 << 24)) throw std::invalid_argument("write_qtag: rep period exceeds 24-bit field");
  os.write("QTAG", 4);
  detail::put_le(os, qtag_version, 1);
  detail::put_le(os, static_cast<std::uint64_t>(rep), 3);
  detail::put_le(os, static_cast<std::uint64_t>(duration), 8);

  std::vector<std::pair<std::int64_t, std::uint8_t>> merged;
  for (const auto& s : streams)
    for (auto t : s.times_ps) merged.emplace_back(t, s.channel);
  std::stable_sort(merged.begin(), merged.end());
  for (const auto& [t, ch] : merged) {
    detail::put_le(os, ch, 1);
    detail::put_le(os, static_cast<std::uint64_t>(t), 8);
  }
}

/// One stream per channel present, in ascending channel order.
inline std::vector<TimeTagStream> read_qtag(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "QTAG")
    throw std::runtime_error("qtag: bad magic");
  const auto version = detail::get_le(is, 1);
  if (version != qtag_version)
    throw std::runtime_error("qtag: unsupported version " + std::to_string(version));
  const auto rep = static_cast<std::int64_t>(detail::get_le(is, 3));
  const auto duration = static_cast<std::int64_t>(detail::get_le(is, 8));
  std::map<std::uint8_t, TimeTagStream> by_channel;
  while (is.peek() != std::char_traits<char>::eof()) {
    const auto ch = static_cast<std::uint8_t>(detail::get_le(is, 1));
    const auto t = static_cast<std::int64_t>(detail::get_le(is, 8));
    auto& s = by_channel[ch];
    s.channel = ch;
    s.times_ps.push_back(t);
  }
  std::vector<TimeTagStream> out;
  for (auto& [ch, s] : by_channel) {
    s.rep_period_ps = rep;
    s.duration_ps = duration;
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_timetags_csv(std::ostream& os, const std::vector<TimeTagStream>& streams) {
  std::vector<std::pair<std::int64_t, std::uint8_t>> merged;
  for (const auto& s : streams)
    for (auto t : s.times_ps) merged.emplace_back(t, s.channel);
  std::stable_sort(merged.begin(), merged.end());
  os << "channel,time_ps\n";
  for (const auto& [t, ch] : merged) os << static_cast<int>(ch) << ',' << t << '\n';
}

}  // namespace qfcsim
