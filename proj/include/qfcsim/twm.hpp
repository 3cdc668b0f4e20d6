#pragma once

// Three-wave mixing in quasi-phase-matched chi(2) devices.
//
// Bands follow the difference-frequency convention 1/ls = 1/lp + 1/lt:
// a signal photon splits into a pump photon and a target photon. Envelopes
// are propagated in a co-moving frame with a symmetrized split-step Fourier
// scheme: dispersion, walkoff and loss act in the frequency domain, the
// coupled-mode interaction acts pointwise in time.

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "qfcsim/signal.hpp"

namespace qfcsim {

/// Pump wavelength that downconverts ls to lt: (1/ls - 1/lt)^-1.
inline double pump_wavelength(double signal_wavelength, double target_wavelength) {
  if (!(signal_wavelength > 0.0))
    throw std::invalid_argument("pump_wavelength: signal wavelength must be positive");
  if (!(signal_wavelength < target_wavelength))
    throw std::invalid_argument("pump_wavelength: downconversion needs signal < target wavelength");
  return 1.0 / (1.0 / signal_wavelength - 1.0 / target_wavelength);
}

enum class Band : std::size_t { signal = 0, pump = 1, target = 2 };

struct BandParams {
  double center_wavelength = 0.0;
  double group_slowness = 0.0;  // s/m, relative to the frame reference
  double loss_db_per_m = 0.0;
  double gvd = 0.0;  // s^2/m

  /// Power attenuation coefficient in 1/m.
  double attenuation() const { return loss_db_per_m * std::log(10.0) / 10.0; }
};

/// Geometry, grating and per-band parameters of a chi(2) device.
class WaveguideSpec {
 public:
  WaveguideSpec(double length, double poling_period, double kappa, BandParams signal,
                BandParams pump, BandParams target, double phase_mismatch = 0.0)
      : length_(length),
        poling_period_(poling_period),
        kappa_(kappa),
        bands_{signal, pump, target},
        phase_mismatch_(phase_mismatch) {
    if (!(length > 0.0)) throw std::invalid_argument("WaveguideSpec: length must be positive");
    if (!(poling_period > 0.0))
      throw std::invalid_argument("WaveguideSpec: poling period must be positive");
    if (!(kappa >= 0.0)) throw std::invalid_argument("WaveguideSpec: kappa must be >= 0");
    if (!std::isfinite(phase_mismatch))
      throw std::invalid_argument("WaveguideSpec: phase mismatch must be finite");
    for (const auto& b : bands_) {
      if (!(b.center_wavelength > 0.0))
        throw std::invalid_argument("WaveguideSpec: band wavelength must be positive");
      if (!(b.loss_db_per_m >= 0.0))
        throw std::invalid_argument("WaveguideSpec: band loss must be >= 0");
    }
    const double ls = signal.center_wavelength, lp = pump.center_wavelength,
                 lt = target.center_wavelength;
    if (ls == lp || ls == lt || lp == lt)
      throw std::invalid_argument("WaveguideSpec: band wavelengths must be distinct");
    if (std::abs(1.0 / ls - 1.0 / lp - 1.0 / lt) > 1e-6 / ls)
      throw std::invalid_argument(
          "WaveguideSpec: bands violate energy conservation 1/ls = 1/lp + 1/lt");
  }

  double length() const { return length_; }
  double poling_period() const { return poling_period_; }
  double kappa() const { return kappa_; }
  double phase_mismatch() const { return phase_mismatch_; }
  const BandParams& band(Band b) const { return bands_[static_cast<std::size_t>(b)]; }
  const std::array<BandParams, 3>& bands() const { return bands_; }

  WaveguideSpec with_kappa(double kappa) const {
    WaveguideSpec s = *this;
    if (!(kappa >= 0.0)) throw std::invalid_argument("WaveguideSpec: kappa must be >= 0");
    s.kappa_ = kappa;
    return s;
  }

 private:
  double length_;
  double poling_period_;
  double kappa_;
  std::array<BandParams, 3> bands_;
  double phase_mismatch_;
};

enum class Coupling {
  full,        // all three envelopes evolve
  undepleted,  // pump is propagated linearly but not depleted
};

struct SplitStepConfig {
  double dz = 0.0;
  std::size_t record_every = 0;  // 0: no step records
  Coupling coupling = Coupling::full;
  int rk4_substeps = 1;  // per split step, full coupling only

  static SplitStepConfig with_steps(double length, std::size_t steps,
                                    Coupling coupling = Coupling::full) {
    SplitStepConfig c;
    c.dz = length / static_cast<double>(steps);
    c.coupling = coupling;
    return c;
  }
};

struct StepRecord {
  double z = 0.0;
  std::array<double, 3> photons{};  // signal, pump, target
  std::array<double, 3> energy{};   // J
};

struct PropagationResult {
  ComplexEnvelope signal;
  ComplexEnvelope pump;
  ComplexEnvelope target;
  std::vector<StepRecord> records;
};

namespace detail {

inline StepRecord make_record(double z, const std::array<std::vector<cplx>, 3>& f,
                              const std::array<double, 3>& wavelengths, double dt) {
  StepRecord r;
  r.z = z;
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0.0;
    for (const auto& a : f[j]) s += std::norm(a);
    r.energy[j] = s * dt;
    r.photons[j] = r.energy[j] / photon_energy(wavelengths[j]);
  }
  return r;
}

}  // namespace detail

/// Advances signal, pump and target envelopes through the device.
///
/// Amplitudes are rescaled internally to photon-flux-proportional units
/// b_j = A_j sqrt(w_p / w_j), in which the coupled equations read
///   db_s/dz = -i k b_p b_t e^{-i dk z}
///   db_p/dz = -i k b_s b_t* e^{+i dk z}
///   db_t/dz = -i k b_s b_p* e^{+i dk z}
/// so photon bookkeeping is manifest.
inline PropagationResult propagate(const ComplexEnvelope& signal, const ComplexEnvelope& pump,
                                   const ComplexEnvelope& target, const WaveguideSpec& spec,
                                   const SplitStepConfig& cfg) {
  const TimeGrid grid = signal.grid;
  if (!(pump.grid == grid) || !(target.grid == grid))
    throw std::invalid_argument("propagate: envelopes must share one grid");
  const std::array<const ComplexEnvelope*, 3> in{&signal, &pump, &target};
  for (std::size_t j = 0; j < 3; ++j) {
    const double want = spec.bands()[j].center_wavelength;
    if (std::abs(in[j]->center_wavelength - want) > 1e-6 * want)
      throw std::invalid_argument("propagate: envelope wavelength does not match band " +
                                  std::to_string(j));
    if (!in[j]->all_finite()) throw std::invalid_argument("propagate: non-finite input samples");
  }
  const double L = spec.length();
  if (!(cfg.dz > 0.0)) throw std::invalid_argument("propagate: dz must be positive");
  if (cfg.dz > L / 16.0 * (1.0 + 1e-12))
    throw std::invalid_argument("propagate: dz must not exceed length/16");
  if (cfg.rk4_substeps < 1) throw std::invalid_argument("propagate: rk4_substeps must be >= 1");

  const auto n_steps =
      static_cast<std::size_t>(std::max(1.0, std::ceil(L / cfg.dz - 1e-9)));
  const double h = L / static_cast<double>(n_steps);
  const std::size_t n = grid.size();

  std::array<double, 3> wavelengths{};
  std::array<double, 3> to_b{};  // A -> b scale
  const double w_pump = angular_frequency(spec.band(Band::pump).center_wavelength);
  for (std::size_t j = 0; j < 3; ++j) {
    wavelengths[j] = spec.bands()[j].center_wavelength;
    to_b[j] = std::sqrt(w_pump / angular_frequency(wavelengths[j]));
  }

  // Linear propagators for a half and a full step.
  std::array<std::vector<cplx>, 3> half, full;
  std::array<bool, 3> trivial{};
  for (std::size_t j = 0; j < 3; ++j) {
    const auto& b = spec.bands()[j];
    trivial[j] = b.group_slowness == 0.0 && b.gvd == 0.0 && b.loss_db_per_m == 0.0;
    half[j].resize(n);
    full[j].resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double w = grid.omega(k);
      auto op = [&](double dz) {
        const double phase = -w * b.group_slowness * dz + 0.5 * b.gvd * w * w * dz;
        return std::polar(std::exp(-0.5 * b.attenuation() * dz), phase);
      };
      half[j][k] = op(0.5 * h);
      full[j][k] = op(h);
    }
  }

  std::array<std::vector<cplx>, 3> f;
  for (std::size_t j = 0; j < 3; ++j) {
    f[j] = in[j]->samples;
    for (auto& a : f[j]) a *= to_b[j];
  }

  Fft fft(n);
  auto linear = [&](const std::array<std::vector<cplx>, 3>& ops) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (trivial[j]) continue;
      fft.forward(f[j]);
      for (std::size_t k = 0; k < n; ++k) f[j][k] *= ops[j][k];
      fft.backward(f[j]);
    }
  };

  const double kappa = spec.kappa();
  const double dk = spec.phase_mismatch();

  auto nonlinear_undepleted = [&](double z) {
    // Pump frozen across the step: the signal/target pair obeys a linear
    // system with Hermitian generator, integrated exactly.
    for (std::size_t i = 0; i < n; ++i) {
      const cplx c = kappa * f[1][i];
      const cplx u = f[0][i];
      const cplx v = f[2][i] * std::polar(1.0, -dk * z);
      const double gamma = std::sqrt(std::norm(c) + 0.25 * dk * dk);
      const double cs = std::cos(gamma * h);
      const double sn = gamma > 0.0 ? std::sin(gamma * h) / gamma : h;
      const cplx ph = std::polar(1.0, -0.5 * dk * h);
      const cplx I(0.0, 1.0);
      const cplx u1 = ph * (cs * u - I * sn * (-0.5 * dk * u + c * v));
      const cplx v1 = ph * (cs * v - I * sn * (std::conj(c) * u + 0.5 * dk * v));
      f[0][i] = u1;
      f[2][i] = v1 * std::polar(1.0, dk * (z + h));
    }
  };

  auto nonlinear_full = [&](double z0) {
    const cplx I(0.0, 1.0);
    const double hs = h / cfg.rk4_substeps;
    auto deriv = [&](double z, const std::array<cplx, 3>& b) {
      const cplx e = dk == 0.0 ? cplx(1.0) : std::polar(1.0, dk * z);
      return std::array<cplx, 3>{-I * kappa * b[1] * b[2] * std::conj(e),
                                 -I * kappa * b[0] * std::conj(b[2]) * e,
                                 -I * kappa * b[0] * std::conj(b[1]) * e};
    };
    for (std::size_t i = 0; i < n; ++i) {
      std::array<cplx, 3> b{f[0][i], f[1][i], f[2][i]};
      double z = z0;
      for (int s = 0; s < cfg.rk4_substeps; ++s) {
        const auto k1 = deriv(z, b);
        std::array<cplx, 3> tmp;
        for (std::size_t j = 0; j < 3; ++j) tmp[j] = b[j] + 0.5 * hs * k1[j];
        const auto k2 = deriv(z + 0.5 * hs, tmp);
        for (std::size_t j = 0; j < 3; ++j) tmp[j] = b[j] + 0.5 * hs * k2[j];
        const auto k3 = deriv(z + 0.5 * hs, tmp);
        for (std::size_t j = 0; j < 3; ++j) tmp[j] = b[j] + hs * k3[j];
        const auto k4 = deriv(z + hs, tmp);
        for (std::size_t j = 0; j < 3; ++j)
          b[j] += hs / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        z += hs;
      }
      for (std::size_t j = 0; j < 3; ++j) f[j][i] = b[j];
    }
  };

  auto physical = [&]() {
    std::array<std::vector<cplx>, 3> out = f;
    for (std::size_t j = 0; j < 3; ++j)
      for (auto& a : out[j]) a /= to_b[j];
    return out;
  };

  std::vector<StepRecord> records;
  if (cfg.record_every > 0)
    records.push_back(detail::make_record(0.0, physical(), wavelengths, grid.dt()));

  linear(half);
  for (std::size_t step = 0; step < n_steps; ++step) {
    const double z = static_cast<double>(step) * h;
    if (kappa > 0.0) {
      if (cfg.coupling == Coupling::undepleted)
        nonlinear_undepleted(z);
      else
        nonlinear_full(z);
    }
    const bool last = step + 1 == n_steps;
    const bool record = cfg.record_every > 0 && ((step + 1) % cfg.record_every == 0 || last);
    if (last || record) {
      linear(half);
      for (const auto& band : f)
        for (const auto& a : band)
          if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
            throw std::runtime_error("propagate: non-finite field at z = " +
                                     std::to_string(z + h) + " m (numerical blow-up)");
      if (record)
        records.push_back(detail::make_record(z + h, physical(), wavelengths, grid.dt()));
      if (!last) linear(half);
    } else {
      linear(full);
    }
  }

  auto out = physical();
  return PropagationResult{ComplexEnvelope(grid, wavelengths[0], std::move(out[0])),
                           ComplexEnvelope(grid, wavelengths[1], std::move(out[1])),
                           ComplexEnvelope(grid, wavelengths[2], std::move(out[2])),
                           std::move(records)};
}

/// Lossless analytic CW conversion (photon-number efficiency) at pump power P.
inline double cw_efficiency(double pump_power, const WaveguideSpec& spec) {
  if (!(pump_power >= 0.0)) throw std::invalid_argument("cw_efficiency: negative pump power");
  const double k2p = spec.kappa() * spec.kappa() * pump_power;
  const double half_dk = 0.5 * spec.phase_mismatch();
  const double g = std::sqrt(k2p + half_dk * half_dk);
  if (g == 0.0) return 0.0;
  const double s = std::sin(g * spec.length());
  return s * s * k2p / (g * g);
}

/// Internal efficiency (target photons out per signal photon in) for a CW
/// pump of `pump_power` at the start of the grating, with all band losses.
inline double cw_internal_efficiency(double pump_power, const WaveguideSpec& spec,
                                     std::size_t steps = 64) {
  const TimeGrid grid = make_grid(16, 1e-12);
  const auto& bs = spec.band(Band::signal);
  const auto& bp = spec.band(Band::pump);
  const auto& bt = spec.band(Band::target);
  ComplexEnvelope s(grid, bs.center_wavelength, std::vector<cplx>(16, cplx(1e-3)));
  ComplexEnvelope p(grid, bp.center_wavelength,
                    std::vector<cplx>(16, cplx(std::sqrt(pump_power))));
  ComplexEnvelope t(grid, bt.center_wavelength);
  const auto r = propagate(s, p, t, spec,
                           SplitStepConfig::with_steps(spec.length(), steps, Coupling::undepleted));
  return r.target.photon_number() / s.photon_number();
}

/// Coupling coefficient giving `target_efficiency` internal conversion at the
/// stated in-fiber peak pump power. Searches the rising edge of the first
/// conversion fringe.
inline double calibrate_kappa(double peak_in_fiber_power, double pump_insertion_loss_db,
                              double target_efficiency, const WaveguideSpec& spec) {
  if (!(target_efficiency > 0.0 && target_efficiency <= 1.0))
    throw std::invalid_argument("calibrate_kappa: target efficiency must lie in (0, 1]");
  if (!(peak_in_fiber_power > 0.0))
    throw std::invalid_argument("calibrate_kappa: pump power must be positive");
  const double p0 = peak_in_fiber_power * db_to_transmission(pump_insertion_loss_db);
  const double a = 0.5 * spec.band(Band::pump).attenuation();  // field decay rate
  const double L = spec.length();
  const double pump_path = a > 0.0 ? (1.0 - std::exp(-a * L)) / a : L;
  const double kappa_hi = 0.5 * pi / (std::sqrt(p0) * pump_path);

  auto excess = [&](double kappa) {
    return cw_internal_efficiency(p0, spec.with_kappa(kappa)) - target_efficiency;
  };
  const double f_hi = excess(kappa_hi);
  if (std::abs(f_hi) <= 1e-12) return kappa_hi;
  if (f_hi < 0.0)
    throw std::runtime_error("calibrate_kappa: target efficiency " +
                             std::to_string(target_efficiency) +
                             " unreachable (maximum " + std::to_string(f_hi + target_efficiency) +
                             ")");
  std::uintmax_t iters = 200;
  const auto [lo, hi] = boost::math::tools::toms748_solve(
      excess, 0.0, kappa_hi, -target_efficiency, f_hi,
      boost::math::tools::eps_tolerance<double>(48), iters);
  return 0.5 * (lo + hi);
}

// -- Pump synthesis --------------------------------------------------------

namespace detail {

/// Area weights of a box [-w/2, w/2] over sample cells; unit delta for w = 0.
inline std::vector<double> box_kernel(double width, double dt, std::ptrdiff_t& half_len) {
  const double hw = 0.5 * width / dt;
  half_len = static_cast<std::ptrdiff_t>(std::ceil(hw + 0.5));
  std::vector<double> w(static_cast<std::size_t>(2 * half_len + 1), 0.0);
  if (width <= 0.0) {
    half_len = 0;
    return {1.0};
  }
  for (std::ptrdiff_t k = -half_len; k <= half_len; ++k) {
    const double lo = std::max(-hw, static_cast<double>(k) - 0.5);
    const double hi = std::min(hw, static_cast<double>(k) + 0.5);
    w[static_cast<std::size_t>(k + half_len)] = std::max(0.0, hi - lo);
  }
  double sum = 0.0;
  for (double x : w) sum += x;
  for (double& x : w) x /= sum;
  return w;
}

template <typename T>
std::vector<T> convolve_same(const std::vector<T>& x, const std::vector<double>& kernel,
                             std::ptrdiff_t half_len) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<T> y(x.size(), T{});
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    T s{};
    for (std::ptrdiff_t k = -half_len; k <= half_len; ++k) {
      const std::ptrdiff_t j = i - k;
      if (j < 0 || j >= n) continue;
      s += kernel[static_cast<std::size_t>(k + half_len)] * x[static_cast<std::size_t>(j)];
    }
    y[static_cast<std::size_t>(i)] = s;
  }
  return y;
}

}  // namespace detail

/// Intensity profile of a walkoff-limited DFG output: the short-pulse
/// intensity convolved with a centred box of duration `window` (unit peak).
inline std::vector<double> walkoff_profile(const ComplexEnvelope& short_pulse, double window) {
  if (window >= 0.5 * short_pulse.grid.span())
    throw std::invalid_argument("walkoff_profile: walkoff window exceeds half the grid span");
  std::ptrdiff_t half_len = 0;
  const auto kernel = detail::box_kernel(window, short_pulse.grid.dt(), half_len);
  auto out = detail::convolve_same(short_pulse.powers(), kernel, half_len);
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, v);
  if (peak <= 0.0) throw std::domain_error("walkoff_profile: input pulse is identically zero");
  for (double& v : out) v /= peak;
  return out;
}

struct PumpSynthesisOptions {
  /// Output peak power. When unset, the low-gain coherent DFG estimate
  /// kappa^2 (w_p^2 / w_s w_t) P_cw max|int A_s dz|^2 is used.
  std::optional<double> peak_power;
};

/// Walkoff-limited DFG pump synthesis in a bulk crystal. `bulk` uses the
/// short pulse as its signal band, the generated long wave as its pump band
/// and the CW seed as its target band.
inline ComplexEnvelope synthesize_pump(const ComplexEnvelope& input_short, double input_cw_power,
                                       const WaveguideSpec& bulk,
                                       const PumpSynthesisOptions& opts = {}) {
  const auto& bs = bulk.band(Band::signal);
  const auto& bp = bulk.band(Band::pump);
  const auto& bt = bulk.band(Band::target);
  if (std::abs(input_short.center_wavelength - bs.center_wavelength) > 1e-6 * bs.center_wavelength)
    throw std::invalid_argument("synthesize_pump: input wavelength does not match bulk signal band");
  if (!(input_cw_power >= 0.0))
    throw std::invalid_argument("synthesize_pump: negative CW power");
  const double window = std::abs(bs.group_slowness - bp.group_slowness) * bulk.length();
  const auto profile = walkoff_profile(input_short, window);

  double peak = 0.0;
  if (opts.peak_power) {
    peak = *opts.peak_power;
    if (!(peak >= 0.0)) throw std::invalid_argument("synthesize_pump: negative peak power");
  } else {
    std::ptrdiff_t half_len = 0;
    const auto kernel = detail::box_kernel(window, input_short.grid.dt(), half_len);
    const auto amp = detail::convolve_same(input_short.samples, kernel, half_len);
    double m = 0.0;
    for (const auto& a : amp) m = std::max(m, std::norm(a));
    const double ws = angular_frequency(bs.center_wavelength);
    const double wp = angular_frequency(bp.center_wavelength);
    const double wt = angular_frequency(bt.center_wavelength);
    const double L = bulk.length();
    peak = bulk.kappa() * bulk.kappa() * wp * wp / (ws * wt) * input_cw_power * m * L * L;
  }
  ComplexEnvelope out(input_short.grid, bp.center_wavelength);
  const double amp = std::sqrt(peak);
  for (std::size_t i = 0; i < profile.size(); ++i) out.samples[i] = amp * std::sqrt(profile[i]);
  return out;
}

/// Walkoff window duration for which the synthesized pump reaches `width`
/// at `level` of its peak (default 1/e^2).
inline double walkoff_window_for_width(const ComplexEnvelope& input_short, double width,
                                       double level = std::exp(-2.0)) {
  std::vector<double> t(input_short.grid.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = input_short.grid.time(i);
  auto excess = [&](double w) { return width_at_level(t, walkoff_profile(input_short, w), level) - width; };
  const double f0 = excess(0.0);
  if (f0 >= 0.0)
    throw std::invalid_argument("walkoff_window_for_width: input already wider than target");
  const double hi = std::min(0.45 * input_short.grid.span(), 4.0 * width);
  const double fhi = excess(hi);
  if (fhi <= 0.0) throw std::runtime_error("walkoff_window_for_width: target width out of range");
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      excess, 0.0, hi, f0, fhi, boost::math::tools::eps_tolerance<double>(40), iters);
  return 0.5 * (a + b);
}

/// Minimum over maximum of a profile inside [center - half_width, center + half_width].
inline double flatness(std::span<const double> t, std::span<const double> y, double center,
                       double half_width) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i] - center) > half_width) continue;
    lo = std::min(lo, y[i]);
    hi = std::max(hi, y[i]);
  }
  if (!(hi > 0.0)) throw std::domain_error("flatness: empty or zero region");
  return lo / hi;
}

// -- Conversion window -----------------------------------------------------

struct WindowScanOptions {
  std::size_t steps = 128;
  Coupling coupling = Coupling::undepleted;
  /// Rescale the pump so that kappa sqrt(P_peak) L does not exceed
  /// max_conversion_phase, keeping the scan in the low-conversion regime.
  bool low_conversion = true;
  double max_conversion_phase = 0.02;
};

struct WindowScan {
  std::vector<double> delay;
  std::vector<double> energy;      // converted target energy, J
  std::vector<double> normalized;  // energy / max

  double fwhm() const { return width_at_level(delay, normalized, 0.5); }
};

inline WindowScan window_scan(const ComplexEnvelope& probe, const ComplexEnvelope& pump,
                              const WaveguideSpec& spec, const std::vector<double>& delays,
                              const WindowScanOptions& opts = {}) {
  for (double d : delays)
    if (!(std::abs(d) < 0.5 * probe.grid.span()))
      throw std::invalid_argument("window_scan: delay outside grid span");
  ComplexEnvelope p = pump;
  if (opts.low_conversion) {
    const double phase = spec.kappa() * std::sqrt(p.peak_power()) * spec.length();
    if (phase > opts.max_conversion_phase) {
      const double s = opts.max_conversion_phase / phase;
      for (auto& a : p.samples) a *= s;
    }
  }
  const ComplexEnvelope target(probe.grid, spec.band(Band::target).center_wavelength);
  SplitStepConfig cfg = SplitStepConfig::with_steps(spec.length(), opts.steps, opts.coupling);

  WindowScan out;
  out.delay = delays;
  for (double d : delays) {
    const auto r = propagate(probe, shifted(p, d), target, spec, cfg);
    out.energy.push_back(r.target.energy());
  }
  double m = 0.0;
  for (double e : out.energy) m = std::max(m, e);
  for (double e : out.energy) out.normalized.push_back(m > 0.0 ? e / m : 0.0);
  return out;
}

inline void write_step_records_csv(std::ostream& os, const std::vector<StepRecord>& records) {
  os << "z_m,photonflux_signal,photonflux_pump,photonflux_target,energy_signal_J,"
        "energy_pump_J,energy_target_J\n";
  for (const auto& r : records) {
    os << format_number(r.z);
    for (double v : r.photons) os << ',' << format_number(v);
    for (double v : r.energy) os << ',' << format_number(v);
    os << '\n';
  }
}

}  // namespace qfcsim
