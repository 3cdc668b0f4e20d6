#pragma once

// Population-level model of a singly charged quantum dot driven as a
// Lambda system: |e_down> <-> |t_down> optical excitation, trion decay into
// either ground spin state, and a spin rotation between |e_up> and |e_down>.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfcsim/signal.hpp"

namespace qfcsim {

struct LambdaSystem {
  double lifetime = 600e-12;
  double branching_to_eup = 0.5;
  double spin_flip_probability = 0.0;  // incoherent flip per period

  void validate() const {
    if (!(lifetime > 0.0)) throw std::invalid_argument("LambdaSystem: lifetime must be positive");
    if (!(branching_to_eup >= 0.0 && branching_to_eup <= 1.0))
      throw std::invalid_argument("LambdaSystem: branching_to_eup must lie in [0, 1]");
    if (!(spin_flip_probability >= 0.0 && spin_flip_probability <= 1.0))
      throw std::invalid_argument("LambdaSystem: spin_flip_probability must lie in [0, 1]");
  }
};

struct StatePopulations {
  double edown = 1.0;
  double eup = 0.0;
  double trion = 0.0;

  double total() const { return edown + eup + trion; }

  bool valid(double tol = 1e-12) const {
    auto in01 = [&](double p) { return p >= -tol && p <= 1.0 + tol; };
    return in01(edown) && in01(eup) && in01(trion) && std::abs(total() - 1.0) <= tol;
  }
};

struct PulseSequence {
  double excitation_area = pi;
  double excitation_time = 0.0;
  double excitation_duration = 100e-12;
  double rotation_area = pi;
  double rotation_time = 5e-9;
  double rotation_detuning = 300e9;  // Hz, metadata only
  double conversion_delay = 200e-12;
  double rep_period = 1.0 / 76e6;
  /// Per-pi-area fidelity of each rotation; 1 gives undamped fringes.
  double pi_area_fidelity = 1.0;

  void validate() const {
    if (!(rep_period > 0.0)) throw std::invalid_argument("PulseSequence: rep_period must be positive");
    const double conversion_time = excitation_time + conversion_delay;
    if (!(excitation_time >= 0.0 && excitation_time < conversion_time &&
          conversion_time < rotation_time && rotation_time < excitation_time + rep_period))
      throw std::invalid_argument(
          "PulseSequence: events must be ordered excitation < conversion < rotation within one "
          "period");
    if (!(pi_area_fidelity > 0.0 && pi_area_fidelity <= 1.0))
      throw std::invalid_argument("PulseSequence: pi_area_fidelity must lie in (0, 1]");
  }
};

/// Transfer probability of a resonant rotation of area theta, damped by
/// fidelity^(|theta|/pi) toward an even mixture.
inline double transfer_probability(double theta, double fidelity = 1.0) {
  const double damping = fidelity == 1.0 ? 1.0 : std::pow(fidelity, std::abs(theta) / pi);
  return 0.5 * (1.0 - damping * std::cos(theta));
}

inline StatePopulations excite(const StatePopulations& s, double area, double fidelity = 1.0) {
  const double r = transfer_probability(area, fidelity);
  return {s.edown * (1.0 - r) + s.trion * r, s.eup, s.trion * (1.0 - r) + s.edown * r};
}

inline StatePopulations rotate_spin(const StatePopulations& s, double area,
                                    double fidelity = 1.0) {
  const double r = transfer_probability(area, fidelity);
  return {s.edown * (1.0 - r) + s.eup * r, s.eup * (1.0 - r) + s.edown * r, s.trion};
}

struct DecayResult {
  StatePopulations state;
  double emission_probability;
};

/// Complete trion decay. Only decay into |e_up> is emitted into the
/// collected channel.
inline DecayResult decay(const StatePopulations& s, double branching_to_eup) {
  const double to_up = s.trion * branching_to_eup;
  return {{s.edown + (s.trion - to_up), s.eup + to_up, 0.0}, to_up};
}

struct EmissionWaveform {
  TimeGrid grid;
  double onset;
  double lifetime;
  std::vector<double> values;  // 1/s

  /// w(t), using the analytic right limit inside the onset cell.
  double at(double t) const {
    if (t < onset) return 0.0;
    return std::exp(-(t - onset) / lifetime) / lifetime;
  }

  /// Trapezoid integral of the sampled waveform over the grid, with the
  /// onset discontinuity resolved.
  double integral() const { return integrate(grid.origin(), grid.end()); }

  /// Integral over [a, b] of the piecewise-linear interpolant of the samples.
  double integrate(double a, double b) const {
    a = std::max({a, onset, grid.origin()});
    b = std::min(b, grid.end());
    if (!(b > a)) return 0.0;
    auto value = [&](double t) {
      // Linear interpolation between samples at or after the onset.
      const double x = grid.index_of(t);
      const auto i0 = static_cast<std::size_t>(std::floor(x));
      if (i0 + 1 >= values.size()) return values.back();
      const double t0 = grid.time(i0);
      const double t1 = grid.time(i0 + 1);
      const double y0 = t0 < onset ? at(onset) : values[i0];
      const double x0 = t0 < onset ? onset : t0;
      const double f = (t - x0) / (t1 - x0);
      return y0 + f * (values[i0 + 1] - y0);
    };
    double sum = 0.0;
    double left = a;
    double yl = value(a);
    auto next = static_cast<std::size_t>(std::floor(grid.index_of(a))) + 1;
    while (left < b) {
      const double right = next < values.size() ? std::min(b, grid.time(next)) : b;
      const double yr = right == b ? value(b) : values[next];
      sum += 0.5 * (yl + yr) * (right - left);
      left = right;
      yl = yr;
      ++next;
    }
    return sum;
  }
};

/// w(t) = exp(-(t - t0)/tau)/tau for t >= t0, sampled on the grid.
inline EmissionWaveform emission_waveform(const TimeGrid& grid, double onset, double lifetime) {
  if (!(lifetime > 0.0)) throw std::invalid_argument("emission_waveform: lifetime must be positive");
  if (!grid.contains(onset)) throw std::invalid_argument("emission_waveform: onset outside grid");
  EmissionWaveform w{grid, onset, lifetime, std::vector<double>(grid.size(), 0.0)};
  for (std::size_t i = 0; i < grid.size(); ++i) w.values[i] = w.at(grid.time(i));
  const double captured = w.integral();
  if (captured < 0.99)
    throw std::invalid_argument("emission_waveform: grid holds only " + std::to_string(captured) +
                                " of the waveform (need >= 0.99)");
  return w;
}

struct SteadyState {
  StatePopulations populations;  // before the excitation pulse
  double emission_probability;   // collected photons per period
};

/// One period: excite, decay, incoherent spin flip, spin rotation.
inline DecayResult period_map(const StatePopulations& s, const LambdaSystem& sys,
                              const PulseSequence& seq) {
  const auto excited = excite(s, seq.excitation_area, seq.pi_area_fidelity);
  auto d = decay(excited, sys.branching_to_eup);
  const double q = sys.spin_flip_probability;
  d.state = {d.state.edown * (1.0 - q) + d.state.eup * q, d.state.eup * (1.0 - q) + d.state.edown * q,
             0.0};
  d.state = rotate_spin(d.state, seq.rotation_area, seq.pi_area_fidelity);
  return d;
}

/// Fixed point of the period map, solved in closed form.
///
/// With no trion population before the pulse the map is affine in p_edown:
/// x' = alpha x + beta. When alpha == 1 every state is fixed and the
/// unpolarized state is returned.
inline SteadyState sequence_steady_state(const LambdaSystem& sys, const PulseSequence& seq) {
  sys.validate();
  const double se = transfer_probability(seq.excitation_area, seq.pi_area_fidelity);
  const double r = transfer_probability(seq.rotation_area, seq.pi_area_fidelity);
  const double q = sys.spin_flip_probability;
  const double b = sys.branching_to_eup;
  const double alpha = (1.0 - 2.0 * r) * (1.0 - 2.0 * q) * (1.0 - b * se);
  const double beta = r + (1.0 - 2.0 * r) * q;
  const double x = std::abs(1.0 - alpha) < 1e-15 ? 0.5 : beta / (1.0 - alpha);
  const StatePopulations s{x, 1.0 - x, 0.0};
  return {s, b * se * x};
}

/// Same fixed point by direct iteration from the unpolarized state.
inline SteadyState iterate_steady_state(const LambdaSystem& sys, const PulseSequence& seq,
                                        std::size_t max_iterations = 1'000'000,
                                        double tolerance = 1e-14) {
  sys.validate();
  StatePopulations s{0.5, 0.5, 0.0};
  for (std::size_t i = 0; i < max_iterations; ++i) {
    const auto next = period_map(s, sys, seq);
    const double change =
        std::abs(next.state.edown - s.edown) + std::abs(next.state.eup - s.eup);
    s = next.state;
    if (change <= tolerance) return {s, period_map(s, sys, seq).emission_probability};
  }
  throw std::runtime_error("iterate_steady_state: no convergence after " +
                           std::to_string(max_iterations) + " periods");
}

/// theta = pi sqrt(P / P_pi).
inline double pulse_area_from_power(double power, double pi_power) {
  if (!(power >= 0.0)) throw std::invalid_argument("pulse_area_from_power: negative power");
  if (!(pi_power > 0.0)) throw std::invalid_argument("pulse_area_from_power: P_pi must be positive");
  return pi * std::sqrt(power / pi_power);
}

enum class RabiPulse { excitation, rotation };

struct RabiPoint {
  double power;
  double area;
  double emission_probability;
  double relative_counts;
};

inline std::vector<RabiPoint> rabi_scan(const LambdaSystem& sys, const PulseSequence& seq,
                                        RabiPulse which, const std::vector<double>& powers,
                                        double pi_power, double detection_constant = 1.0) {
  std::vector<RabiPoint> out;
  out.reserve(powers.size());
  for (double p : powers) {
    PulseSequence s = seq;
    const double area = pulse_area_from_power(p, pi_power);
    (which == RabiPulse::excitation ? s.excitation_area : s.rotation_area) = area;
    const auto ss = sequence_steady_state(sys, s);
    out.push_back({p, area, ss.emission_probability, detection_constant * ss.emission_probability});
  }
  return out;
}

inline void write_rabi_csv(std::ostream& os, const std::vector<RabiPoint>& scan) {
  os << "power_W,area_rad,emission_probability,relative_counts\n";
  for (const auto& p : scan)
    os << format_number(p.power) << ',' << format_number(p.area) << ','
       << format_number(p.emission_probability) << ',' << format_number(p.relative_counts) << '\n';
}

}  // namespace qfcsim
