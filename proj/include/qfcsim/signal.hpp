#pragma once

// Time grids and complex pulse envelopes.
//
// Envelope samples are in sqrt(W): |A(t)|^2 is instantaneous power. Photon
// numbers are derived from energy and the carrier wavelength where needed.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfcsim/fft.hpp"
#include "qfcsim/units.hpp"

namespace qfcsim {

using cplx = std::complex<double>;

/// Uniform, power-of-two time grid. Construct through make_grid().
class TimeGrid {
 public:
  std::size_t size() const { return n_; }
  double dt() const { return dt_; }
  double origin() const { return origin_; }
  double span() const { return static_cast<double>(n_) * dt_; }
  double time(std::size_t i) const { return origin_ + static_cast<double>(i) * dt_; }
  double end() const { return time(n_ - 1); }

  /// Spacing of the conjugate frequency grid, 1/(N dt).
  double df() const { return 1.0 / span(); }

  /// Angular frequency of FFT bin k in standard (wrapped) ordering.
  double omega(std::size_t k) const {
    const auto n = static_cast<std::ptrdiff_t>(n_);
    auto kk = static_cast<std::ptrdiff_t>(k);
    if (kk >= n / 2) kk -= n;
    return 2.0 * pi * static_cast<double>(kk) * df();
  }

  bool contains(double t) const { return t >= origin_ && t <= end(); }

  /// Fractional sample index of time t.
  double index_of(double t) const { return (t - origin_) / dt_; }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  friend TimeGrid make_grid(std::size_t, double, double);
  TimeGrid(std::size_t n, double dt, double origin) : n_(n), dt_(dt), origin_(origin) {}

  std::size_t n_;
  double dt_;
  double origin_;
};

inline TimeGrid make_grid(std::size_t n_points, double dt, double origin) {
  if (n_points < 2 || !is_power_of_two(n_points))
    throw std::invalid_argument("make_grid: n_points must be a power of two >= 2, got " +
                                std::to_string(n_points));
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("make_grid: dt must be positive");
  if (!std::isfinite(origin)) throw std::invalid_argument("make_grid: origin must be finite");
  return TimeGrid(n_points, dt, origin);
}

/// Grid centred on t = 0 (sample N/2 sits at exactly zero).
inline TimeGrid make_grid(std::size_t n_points, double dt) {
  return make_grid(n_points, dt, -static_cast<double>(n_points / 2) * dt);
}

struct ComplexEnvelope {
  TimeGrid grid;
  double center_wavelength;
  std::vector<cplx> samples;

  ComplexEnvelope(TimeGrid g, double wavelength)
      : grid(g), center_wavelength(wavelength), samples(g.size()) {}

  ComplexEnvelope(TimeGrid g, double wavelength, std::vector<cplx> s)
      : grid(g), center_wavelength(wavelength), samples(std::move(s)) {
    if (samples.size() != grid.size())
      throw std::invalid_argument("ComplexEnvelope: sample count does not match grid");
  }

  double power(std::size_t i) const { return std::norm(samples[i]); }

  std::vector<double> powers() const {
    std::vector<double> p(samples.size());
    std::transform(samples.begin(), samples.end(), p.begin(),
                   [](const cplx& a) { return std::norm(a); });
    return p;
  }

  double peak_power() const {
    double m = 0.0;
    for (const auto& a : samples) m = std::max(m, std::norm(a));
    return m;
  }

  /// Sum |A|^2 dt in joules.
  double energy() const {
    double e = 0.0;
    for (const auto& a : samples) e += std::norm(a);
    return e * grid.dt();
  }

  double photon_number() const { return energy() / photon_energy(center_wavelength); }

  bool all_finite() const {
    return std::all_of(samples.begin(), samples.end(), [](const cplx& a) {
      return std::isfinite(a.real()) && std::isfinite(a.imag());
    });
  }
};

/// Energy evaluated from the spectrum: sum |X_k|^2 dt / N.
inline double spectral_energy(const ComplexEnvelope& env) {
  std::vector<cplx> spec = env.samples;
  Fft fft(spec.size());
  fft.forward(spec);
  double e = 0.0;
  for (const auto& x : spec) e += std::norm(x);
  return e * env.grid.dt() / static_cast<double>(spec.size());
}

inline ComplexEnvelope gaussian_pulse(const TimeGrid& grid, double fwhm, double peak_power,
                                      double center, double wavelength) {
  if (!(fwhm > 0.0)) throw std::invalid_argument("gaussian_pulse: fwhm must be positive");
  if (fwhm < 4.0 * grid.dt())
    throw std::invalid_argument("gaussian_pulse: fwhm under-sampled (< 4 dt)");
  if (!(peak_power >= 0.0)) throw std::invalid_argument("gaussian_pulse: negative power");
  if (!grid.contains(center))
    throw std::invalid_argument("gaussian_pulse: center outside grid");
  ComplexEnvelope env(grid, wavelength);
  const double amp = std::sqrt(peak_power);
  const double a = 2.0 * std::log(2.0) / (fwhm * fwhm);  // field: exp(-a t^2)
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid.time(i) - center;
    env.samples[i] = amp * std::exp(-a * t * t);
  }
  return env;
}

/// Flat-top envelope covering round(width/dt) samples centred on `center`.
inline ComplexEnvelope rect_pulse(const TimeGrid& grid, double width, double power, double center,
                                  double wavelength) {
  if (!(width > 0.0)) throw std::invalid_argument("rect_pulse: width must be positive");
  if (width >= grid.span()) throw std::invalid_argument("rect_pulse: width exceeds grid span");
  if (!(power >= 0.0)) throw std::invalid_argument("rect_pulse: negative power");
  const auto n_on = static_cast<std::ptrdiff_t>(std::llround(width / grid.dt()));
  if (n_on < 1) throw std::invalid_argument("rect_pulse: width unresolvable on grid");
  const auto first = static_cast<std::ptrdiff_t>(
      std::llround(grid.index_of(center) - 0.5 * static_cast<double>(n_on - 1)));
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
  if (first < 0 || first + n_on > n)
    throw std::invalid_argument("rect_pulse: pulse does not fit inside grid");
  ComplexEnvelope env(grid, wavelength);
  const double amp = std::sqrt(power);
  for (std::ptrdiff_t i = first; i < first + n_on; ++i) env.samples[static_cast<std::size_t>(i)] = amp;
  return env;
}

/// Full width of a sampled profile at `level` x peak, with linear
/// interpolation between samples. x must be increasing.
inline double width_at_level(std::span<const double> x, std::span<const double> y, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("width_at_level: level must lie in (0, 1)");
  if (x.size() != y.size() || y.size() < 2)
    throw std::invalid_argument("width_at_level: need matching x/y with >= 2 samples");
  const auto it = std::max_element(y.begin(), y.end());
  const double peak = *it;
  if (!(peak > 0.0)) throw std::domain_error("width_at_level: profile is identically zero");
  const double thr = level * peak;
  const auto imax = static_cast<std::size_t>(it - y.begin());

  std::size_t lo = imax;
  while (lo > 0 && y[lo - 1] >= thr) --lo;
  std::size_t hi = imax;
  while (hi + 1 < y.size() && y[hi + 1] >= thr) ++hi;
  if (lo == 0 || hi + 1 == y.size())
    throw std::domain_error("width_at_level: level contour not bracketed within the grid");

  auto cross = [&](std::size_t below, std::size_t above) {
    const double f = (thr - y[below]) / (y[above] - y[below]);
    return x[below] + f * (x[above] - x[below]);
  };
  return cross(hi + 1, hi) - cross(lo - 1, lo);
}

inline double width_at_level(const ComplexEnvelope& env, double level) {
  std::vector<double> t(env.grid.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = env.grid.time(i);
  const auto p = env.powers();
  return width_at_level(t, p, level);
}

/// Intensity cross-correlation C(tau) = sum_t Pa(t) Pb(t - tau) dt on lags
/// k dt, k = -(N-1) .. N-1.
struct CorrelationTrace {
  std::vector<double> lag;
  std::vector<double> value;
};

inline CorrelationTrace correlate(const ComplexEnvelope& a, const ComplexEnvelope& b) {
  if (!(a.grid == b.grid)) throw std::invalid_argument("correlate: mismatched grids");
  const auto pa = a.powers();
  const auto pb = b.powers();
  const auto n = static_cast<std::ptrdiff_t>(pa.size());
  const double dt = a.grid.dt();

  CorrelationTrace out;
  out.lag.resize(static_cast<std::size_t>(2 * n - 1));
  out.value.assign(out.lag.size(), 0.0);
  for (std::ptrdiff_t k = -(n - 1); k <= n - 1; ++k)
    out.lag[static_cast<std::size_t>(k + n - 1)] = static_cast<double>(k) * dt;

  auto support = [](const std::vector<double>& p) {
    std::ptrdiff_t first = -1, last = -1;
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(p.size()); ++i)
      if (p[static_cast<std::size_t>(i)] != 0.0) {
        if (first < 0) first = i;
        last = i;
      }
    return std::pair{first, last};
  };
  const auto [a0, a1] = support(pa);
  const auto [b0, b1] = support(pb);
  if (a0 < 0 || b0 < 0) return out;

  // Terms are summed in increasing index of `a`, so correlate(b, a) at -k
  // visits exactly the same products in the same order.
  for (std::ptrdiff_t k = a0 - b1; k <= a1 - b0; ++k) {
    const std::ptrdiff_t lo = std::max(a0, b0 + k);
    const std::ptrdiff_t hi = std::min(a1, b1 + k);
    double s = 0.0;
    for (std::ptrdiff_t i = lo; i <= hi; ++i)
      s += pa[static_cast<std::size_t>(i)] * pb[static_cast<std::size_t>(i - k)];
    out.value[static_cast<std::size_t>(k + n - 1)] = s * dt;
  }
  return out;
}

/// Delay an envelope by `delay` seconds (circular Fourier shift).
inline ComplexEnvelope shifted(const ComplexEnvelope& env, double delay) {
  ComplexEnvelope out = env;
  if (delay == 0.0) return out;
  const double k_exact = delay / env.grid.dt();
  const double k_round = std::round(k_exact);
  if (std::abs(k_exact - k_round) < 1e-9) {
    const auto n = static_cast<std::ptrdiff_t>(env.samples.size());
    const auto k = ((static_cast<std::ptrdiff_t>(k_round) % n) + n) % n;
    std::rotate_copy(env.samples.begin(), env.samples.end() - k, env.samples.end(),
                     out.samples.begin());
    return out;
  }
  Fft fft(out.samples.size());
  fft.forward(out.samples);
  for (std::size_t k = 0; k < out.samples.size(); ++k)
    out.samples[k] *= std::polar(1.0, -env.grid.omega(k) * delay);
  fft.backward(out.samples);
  return out;
}

inline ComplexEnvelope scaled_to_peak(const ComplexEnvelope& env, double peak_power) {
  ComplexEnvelope out = env;
  const double p = env.peak_power();
  if (p <= 0.0) throw std::domain_error("scaled_to_peak: envelope is identically zero");
  const double s = std::sqrt(peak_power / p);
  for (auto& a : out.samples) a *= s;
  return out;
}

// -- CSV dump --------------------------------------------------------------

/// Shortest decimal form that parses back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// Writes "# center_wavelength_m=<l> dt_s=<dt> origin_s=<t0>" followed by a
/// time_s,re_sqrtW,im_sqrtW,power_W table.
inline void write_envelope_csv(std::ostream& os, const ComplexEnvelope& env) {
  os << "# center_wavelength_m=" << format_number(env.center_wavelength)
     << " dt_s=" << format_number(env.grid.dt()) << " origin_s=" << format_number(env.grid.origin())
     << "\n";
  os << "time_s,re_sqrtW,im_sqrtW,power_W\n";
  for (std::size_t i = 0; i < env.samples.size(); ++i) {
    const auto& a = env.samples[i];
    os << format_number(env.grid.time(i)) << ',' << format_number(a.real()) << ','
       << format_number(a.imag()) << ',' << format_number(std::norm(a)) << '\n';
  }
}

inline ComplexEnvelope read_envelope_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("#", 0) != 0)
    throw std::runtime_error("envelope csv: missing metadata header");
  double wavelength = 0, dt = 0, origin = 0;
  if (std::sscanf(line.c_str(), "# center_wavelength_m=%lf dt_s=%lf origin_s=%lf", &wavelength, &dt,
                  &origin) != 3)
    throw std::runtime_error("envelope csv: malformed metadata header");
  if (!std::getline(is, line) || line != "time_s,re_sqrtW,im_sqrtW,power_W")
    throw std::runtime_error("envelope csv: missing column header");
  std::vector<cplx> samples;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    double t, re, im, p;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &t, &re, &im, &p) != 4)
      throw std::runtime_error("envelope csv: malformed row: " + line);
    samples.emplace_back(re, im);
  }
  const auto grid = make_grid(samples.size(), dt, origin);
  return ComplexEnvelope(grid, wavelength, std::move(samples));
}

}  // namespace qfcsim
