#pragma once

// Pulsed second-order correlation analysis of time-tag streams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "qfcsim/timetags.hpp"

namespace qfcsim {

/// Keeps tags whose arrival phase d relative to gate_center satisfies
/// -gate_width/2 <= d < gate_width/2 (circular modulo the rep period).
inline TimeTagStream gate_stream(const TimeTagStream& stream, double gate_width, double gate_center) {
  const auto rep = stream.rep_period_ps;
  if (!(gate_width > 0.0) || gate_width >= static_cast<double>(rep) * 1e-12)
    throw std::invalid_argument("gate_stream: gate width must lie in (0, rep_period)");
  const double half = static_cast<double>(to_ps(gate_width)) / 2.0;
  const std::int64_t center = ((to_ps(gate_center) % rep) + rep) % rep;
  TimeTagStream out = stream;
  out.times_ps.clear();
  for (auto t : stream.times_ps) {
    std::int64_t d = ((t - center) % rep + rep) % rep;
    if (2 * d >= rep) d -= rep;
    if (static_cast<double>(d) >= -half && static_cast<double>(d) < half) out.times_ps.push_back(t);
  }
  return out;
}

struct CorrelationHistogram {
  double bin_width = 0.0;
  double rep_period = 0.0;
  std::vector<double> lags;  // bin centers, symmetric about zero
  std::vector<std::uint64_t> counts;
  std::uint64_t total_pairs = 0;

  std::size_t zero_index() const { return lags.size() / 2; }
};

namespace detail {

inline CorrelationHistogram correlate_streams(const TimeTagStream& a, const TimeTagStream& b,
                                              double bin_width, double max_lag, bool skip_self) {
  a.validate();
  b.validate();
  if (a.duration_ps != b.duration_ps || a.rep_period_ps != b.rep_period_ps)
    throw std::invalid_argument("cross_correlate: streams must share duration and rep period");
  const double rep = static_cast<double>(a.rep_period_ps);
  const double bw = bin_width * 1e12;
  if (!(bw > 0.0)) throw std::invalid_argument("cross_correlate: bin width must be positive");
  if (bw >= rep) throw std::invalid_argument("cross_correlate: bin width >= rep period");
  if (!(max_lag > 0.0)) throw std::invalid_argument("cross_correlate: max_lag must be positive");
  const std::int64_t max_ps = to_ps(max_lag);
  const auto kmax = static_cast<std::int64_t>(std::floor((static_cast<double>(max_ps) + bw / 2) / bw));
  // Search out to the far edge of the outermost bin so every bin is complete.
  const auto reach = static_cast<std::int64_t>(std::ceil(static_cast<double>(kmax) * bw + bw / 2)) - 1;

  CorrelationHistogram h;
  h.bin_width = bw * 1e-12;
  h.rep_period = rep * 1e-12;
  for (std::int64_t k = -kmax; k <= kmax; ++k) h.lags.push_back(static_cast<double>(k) * h.bin_width);
  h.counts.assign(h.lags.size(), 0);

  const auto& ta = a.times_ps;
  const auto& tb = b.times_ps;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    while (lo < tb.size() && tb[lo] < ta[i] - reach) ++lo;
    for (std::size_t j = lo; j < tb.size() && tb[j] <= ta[i] + reach; ++j) {
      if (skip_self && i == j) continue;
      const std::int64_t d = tb[j] - ta[i];
      const double mag = std::floor((static_cast<double>(d < 0 ? -d : d) + bw / 2) / bw);
      if (mag > static_cast<double>(kmax)) continue;
      const auto k = static_cast<std::int64_t>(d < 0 ? -mag : mag);
      ++h.counts[static_cast<std::size_t>(k + kmax)];
      ++h.total_pairs;
    }
  }
  return h;
}

}  // namespace detail

/// All-pairs histogram of t_b - t_a over the bins reaching max_lag; the
/// outermost bins are filled over their full width.
inline CorrelationHistogram cross_correlate(const TimeTagStream& a, const TimeTagStream& b,
                                            double bin_width, double max_lag) {
  return detail::correlate_streams(a, b, bin_width, max_lag, false);
}

/// Autocorrelation excluding each tag's pairing with itself.
inline CorrelationHistogram autocorrelate(const TimeTagStream& s, double bin_width, double max_lag) {
  return detail::correlate_streams(s, s, bin_width, max_lag, true);
}

struct PeakArea {
  int index;
  double area;
};

/// Sums bins whose centers fall in [m T - w/2, m T + w/2) for every peak m
/// whose full window lies inside the histogram.
inline std::vector<PeakArea> peak_areas(const CorrelationHistogram& h, double window) {
  if (!(window > 0.0)) throw std::invalid_argument("peak_areas: window must be positive");
  if (window > h.rep_period * (1.0 + 1e-12))
    throw std::invalid_argument("peak_areas: window overlaps adjacent peaks");
  if (h.lags.empty()) return {};
  const double edge = h.lags.back() + h.bin_width / 2;
  const int m_max = static_cast<int>(std::floor((edge - window / 2) / h.rep_period + 1e-12));
  std::vector<PeakArea> out;
  for (int m = -m_max; m <= m_max; ++m) {
    const double lo = m * h.rep_period - window / 2;
    const double hi = m * h.rep_period + window / 2;
    double area = 0.0;
    for (std::size_t i = 0; i < h.lags.size(); ++i)
      if (h.lags[i] >= lo && h.lags[i] < hi) area += static_cast<double>(h.counts[i]);
    out.push_back({m, area});
  }
  return out;
}

struct NormalizedPeak {
  int index;
  double area;
  double value;
  double sigma;
};

struct G2Result {
  std::vector<NormalizedPeak> peaks;
  double normalization = 0.0;
  double normalization_rel_error = 0.0;

  const NormalizedPeak& at(int index) const {
    for (const auto& p : peaks)
      if (p.index == index) return p;
    throw std::out_of_range("G2Result: no peak with index " + std::to_string(index));
  }
  double g2_zero() const { return at(0).value; }
  double g2_zero_sigma() const { return at(0).sigma; }
};

/// Normalizes by the mean of the n_side side peaks nearest zero lag.
///
/// Each peak carries sqrt(max(area, 1)) Poisson error, so an empty zero-lag
/// peak still gets a finite one-count bound; the normalization's relative
/// error 1/sqrt(sum of side areas) is added in quadrature.
inline G2Result normalize_g2(const std::vector<PeakArea>& areas, int n_side) {
  if (n_side < 1) throw std::invalid_argument("normalize_g2: need at least one side peak");
  std::vector<PeakArea> side;
  for (const auto& p : areas)
    if (p.index != 0) side.push_back(p);
  if (static_cast<int>(side.size()) < n_side)
    throw std::invalid_argument("normalize_g2: only " + std::to_string(side.size()) +
                                " side peaks available, " + std::to_string(n_side) + " requested");
  std::stable_sort(side.begin(), side.end(), [](const PeakArea& x, const PeakArea& y) {
    const int ax = std::abs(x.index), ay = std::abs(y.index);
    return ax != ay ? ax < ay : x.index < y.index;
  });
  double sum = 0.0;
  for (int i = 0; i < n_side; ++i) sum += side[static_cast<std::size_t>(i)].area;
  if (!(sum > 0.0)) throw std::domain_error("normalize_g2: side peaks hold no counts");
  G2Result r;
  r.normalization = sum / n_side;
  r.normalization_rel_error = 1.0 / std::sqrt(sum);
  for (const auto& p : areas) {
    const double value = p.area / r.normalization;
    const double peak_err = std::sqrt(std::max(p.area, 1.0)) / r.normalization;
    const double norm_err = value * r.normalization_rel_error;
    r.peaks.push_back({p.index, p.area, value, std::hypot(peak_err, norm_err)});
  }
  return r;
}

// -- End-to-end photon-statistics Monte Carlo ------------------------------

enum class G2Mode { hbt, cross };

struct Gate {
  double width = 200e-12;
  double center = 0.0;  // phase within the period
};

/// Probability that a photon drawn from `profile` and blurred by Gaussian
/// jitter lands inside the gate, modulo the period. Without a gate every
/// photon passes.
inline double gate_acceptance(const TemporalProfile& profile, double jitter_sigma,
                              const std::optional<Gate>& gate, double rep_period) {
  if (!gate) return 1.0;
  const double lo = gate->center - gate->width / 2.0;
  const double hi = gate->center + gate->width / 2.0;
  auto pass = [&](double x, double sigma) {
    double p = 0.0;
    for (int m = -2; m <= 2; ++m) {
      const double shift = x + m * rep_period;
      if (sigma > 0.0) {
        p += 0.5 * (std::erfc((lo - shift) / (sigma * std::sqrt(2.0))) -
                    std::erfc((hi - shift) / (sigma * std::sqrt(2.0))));
      } else if (shift >= lo && shift < hi) {
        p += 1.0;
      }
    }
    return p;
  };
  // Midpoint average over the profile's quantile function.
  constexpr int n = 4000;
  auto average = [&](auto quantile) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += pass(quantile((i + 0.5) / n), jitter_sigma);
    return sum / n;
  };
  return std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, DeltaProfile>) {
          return pass(p.offset, jitter_sigma);
        } else if constexpr (std::is_same_v<P, GaussianProfile>) {
          const double s = p.fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
          return pass(p.center, std::hypot(s, jitter_sigma));
        } else if constexpr (std::is_same_v<P, UniformProfile>) {
          return average([&](double u) { return p.start + u * p.width; });
        } else {
          return average([&](double u) { return p.onset - p.lifetime * std::log1p(-u); });
        }
      },
      profile);
}

struct G2Arm {
  double transmission = 1.0;  // after the beamsplitter, before the detector
  DetectorSpec detector;
  TemporalProfile signal_profile = DeltaProfile{};
  double noise_per_period = 0.0;  // Poisson photons at the detector input
  TemporalProfile noise_profile = UniformProfile{-0.5e-9, 1e-9};
  std::optional<Gate> gate;
};

struct G2Setup {
  G2Mode mode = G2Mode::hbt;
  double p1 = 1.0 / 3.0;   // single-photon probability per period
  double mu_leak = 0.0;    // Poisson leakage photons per period, same path as the emitter
  G2Arm arm_a;
  G2Arm arm_b;
  double rep_period = 13158e-12;
  std::int64_t periods = 1'000'000;
  std::uint64_t seed = 1;
  double bin_width = 100e-12;
  double peak_window = 5e-9;
  int side_peaks = 30;

  void validate() const {
    if (!(p1 >= 0.0 && p1 <= 1.0)) throw std::invalid_argument("G2Setup: p1 must lie in [0, 1]");
    if (!(mu_leak >= 0.0)) throw std::invalid_argument("G2Setup: mu_leak must be >= 0");
    for (const auto* arm : {&arm_a, &arm_b}) {
      arm->detector.validate();
      if (!(arm->transmission >= 0.0 && arm->transmission <= 1.0))
        throw std::invalid_argument("G2Setup: arm transmission must lie in [0, 1]");
      if (!(arm->noise_per_period >= 0.0))
        throw std::invalid_argument("G2Setup: noise_per_period must be >= 0");
    }
    if (periods < 1) throw std::invalid_argument("G2Setup: periods must be >= 1");
    if (side_peaks < 1) throw std::invalid_argument("G2Setup: side_peaks must be >= 1");
  }
};

struct G2Outcome {
  TimeTagStream a;
  TimeTagStream b;
  CorrelationHistogram histogram;
  std::vector<PeakArea> areas;
  G2Result result;
};

/// Simulates both detector channels behind a 50/50 split. Emitter and
/// leakage photons pick an arm independently; each arm then applies its
/// transmission and detector efficiency. Noise and darks are independent
/// per arm.
inline std::pair<TimeTagStream, TimeTagStream> simulate_g2_streams(const G2Setup& s) {
  s.validate();
  TimeTagStream a, b;
  a.channel = 0;
  b.channel = 1;
  a.rep_period_ps = b.rep_period_ps = to_ps(s.rep_period);
  a.duration_ps = b.duration_ps = a.rep_period_ps * s.periods;
  a.seed = b.seed = s.seed;

  Rng rng(derive_seed(s.seed, 0));
  TagWriter write_a(a, s.arm_a.detector, rng);
  TagWriter write_b(b, s.arm_b.detector, rng);
  std::bernoulli_distribution to_a(0.5);
  std::bernoulli_distribution pass_a(s.arm_a.transmission * s.arm_a.detector.efficiency);
  std::bernoulli_distribution pass_b(s.arm_b.transmission * s.arm_b.detector.efficiency);
  auto route = [&](std::int64_t k) {
    if (to_a(rng)) {
      if (pass_a(rng)) write_a.emit(k, sample_offset(s.arm_a.signal_profile, rng));
    } else if (pass_b(rng)) {
      write_b.emit(k, sample_offset(s.arm_b.signal_profile, rng));
    }
  };
  detail::for_each_bernoulli(rng, s.p1, s.periods, route);
  detail::for_each_poisson(rng, s.mu_leak, s.periods, route);

  std::uint64_t stream = 1;
  for (auto [tags, arm] : {std::pair{&a, &s.arm_a}, std::pair{&b, &s.arm_b}}) {
    Rng noise_rng(derive_seed(s.seed, stream++));
    TagWriter noise_writer(*tags, arm->detector, noise_rng);
    std::bernoulli_distribution detected(arm->detector.efficiency);
    detail::for_each_poisson(noise_rng, arm->noise_per_period, s.periods, [&](std::int64_t k) {
      if (detected(noise_rng)) noise_writer.emit(k, sample_offset(arm->noise_profile, noise_rng));
    });
    add_dark_counts(*tags, arm->detector, noise_rng);
    detail::finalize_stream(*tags, arm->detector);
  }
  return {std::move(a), std::move(b)};
}

inline G2Outcome g2_experiment(const G2Setup& s) {
  auto [a, b] = simulate_g2_streams(s);
  if (s.arm_a.gate) a = gate_stream(a, s.arm_a.gate->width, s.arm_a.gate->center);
  if (s.arm_b.gate) b = gate_stream(b, s.arm_b.gate->width, s.arm_b.gate->center);
  const double max_lag = (std::ceil(s.side_peaks / 2.0) + 0.5) * s.rep_period;
  G2Outcome out;
  out.histogram = cross_correlate(a, b, s.bin_width, max_lag);
  out.areas = peak_areas(out.histogram, s.peak_window);
  out.result = normalize_g2(out.areas, s.side_peaks);
  out.a = std::move(a);
  out.b = std::move(b);
  return out;
}

/// Expected zero-lag value from mean detected counts per period in each
/// arm: emitter photons (never in both arms at once) and uncorrelated
/// Poisson contributions (leakage, noise, darks).
inline double g2_zero_expected(double signal_a, double uncorrelated_a, double signal_b,
                               double uncorrelated_b) {
  const double na = signal_a + uncorrelated_a;
  const double nb = signal_b + uncorrelated_b;
  if (!(na > 0.0 && nb > 0.0)) throw std::domain_error("g2_zero_expected: empty arm");
  return 1.0 - signal_a * signal_b / (na * nb);
}

/// Leakage per period that gives a noiseless split measurement the value
/// g2 at zero lag: 1 - 1/(1 + mu/p1)^2 = g2.
inline double leak_for_g2(double p1, double g2) {
  if (!(g2 >= 0.0 && g2 < 1.0)) throw std::invalid_argument("leak_for_g2: g2 must lie in [0, 1)");
  return p1 * (1.0 / std::sqrt(1.0 - g2) - 1.0);
}

inline void write_histogram_csv(std::ostream& os, const CorrelationHistogram& h) {
  os << "lag_s,counts,sigma\n";
  for (std::size_t i = 0; i < h.lags.size(); ++i)
    os << format_number(h.lags[i]) << ',' << h.counts[i] << ','
       << format_number(std::sqrt(static_cast<double>(h.counts[i]))) << '\n';
}

inline void write_g2_csv(std::ostream& os, const G2Result& r) {
  os << "peak_index,normalized_area,sigma\n";
  for (const auto& p : r.peaks)
    os << p.index << ',' << format_number(p.value) << ',' << format_number(p.sigma) << '\n';
}

}  // namespace qfcsim
