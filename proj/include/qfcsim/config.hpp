#pragma once

// Experiment configuration: a flat file of dotted `key = value` lines.
//
// Every key is optional; missing keys keep their defaults. All quantities
// are SI (seconds, meters, watts, hertz) except attenuations, which are dB
// or dB/m as the key name says.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qfcsim/budget.hpp"
#include "qfcsim/emitter.hpp"
#include "qfcsim/timetags.hpp"
#include "qfcsim/twm.hpp"

namespace qfcsim {

struct ExperimentConfig {
  struct Grid {
    std::int64_t points = 16384;  // emission-waveform grid
    double dt = 0.2e-12;
    std::int64_t pulse_points = 2048;  // propagation grid
    double pulse_dt = 0.1e-12;
  } grid;

  struct Waveguide {
    double length = 0.04;
    double poling_period = 21.9e-6;
    double phase_mismatch = 0.0;
    double signal_wavelength = 910e-9;
    double target_wavelength = 1560e-9;
    double signal_slowness = 2.2e-10;  // s/m relative to the target band
    double pump_slowness = -1.0e-10;
    double target_slowness = 0.0;
    double signal_loss_db_per_m = 20.0;
    double pump_loss_db_per_m = 100.0;
    double target_loss_db_per_m = 20.0;
    double pump_coupling_db = 2.8;
    double pump_lead_in = 0.002;  // unpoled section before the grating
    double fiber_peak_power = 3.0;
    double peak_efficiency = 0.8;
    std::int64_t steps = 128;
    std::string coupling = "full";  // full | undepleted
  } waveguide;

  struct Bulk {
    double length = 0.05;
    double poling_period = 25.9e-6;
    double short_wavelength = 911e-9;
    double cw_wavelength = 1565e-9;
    double short_fwhm = 3e-12;
    double walkoff_length = 0.0125;  // short pulse vs CW seed
    double output_width = 8.6e-12;   // 1/e^2 width of the generated pulse
    double output_peak_power = 40.0;
  } bulk;

  struct Scan {
    double probe_fwhm = 3e-12;
    double delay_span = 30e-12;
    double delay_step = 0.5e-12;
  } scan;

  struct Emitter {
    double lifetime = 600e-12;
    double branching = 0.5;
    double spin_flip = 0.0;
    double input_rate = 6e4;  // single photons per second into the input fiber
  } emitter;

  struct Sequence {
    double excitation_area = pi;
    double excitation_duration = 100e-12;
    double rotation_area = pi;
    double rotation_time = 5e-9;
    double rotation_detuning = 300e9;
    double conversion_delay = 200e-12;
    double pi_fidelity = 1.0;
  } sequence;

  struct Rabi {
    double excitation_pi_power = 25e-9;
    double rotation_pi_power = 2e-3;
    double max_area = 5.0 * pi;
    std::int64_t points = 201;
  } rabi;

  struct Loss {
    double input_db = 1.5;
    double output_db = 1.0;
    double filter_db = 2.4;
    double filter_bandwidth = 2e-9;  // metadata
  } loss;

  struct Detector {
    double efficiency = 0.14;
    double dark_rate = 40.0;
    double jitter_fwhm = 100e-12;
    double dead_time = 0.0;
  } detector;

  struct Noise {
    double rate = 1.0;     // pump-synchronous counts per second at the detector
    double window = 1e-9;  // flat arrival window around the signal
  } noise;

  double rep_rate = 76e6;

  struct Tcspc {
    double bin_width = 102e-12;
    double signal_offset = 2e-9;  // arrival phase of converted photons
    double gate_width = 200e-12;
  } tcspc;

  struct Acquisition {
    double duration = 300.0;
  } acquisition;

  struct Overlap {
    double window = 10e-12;
    double delay = 0.0;
  } overlap;

  struct Decay {
    double delay_min = 0.0;
    double delay_max = 1.5e-9;
    std::int64_t points = 7;
  } decay;

  struct G2 {
    double hbt_g2 = 0.13;
    double arm_efficiency = 0.1;  // desk-scale detection probability per photon and arm
    std::int64_t periods = 4'000'000;
    double bin_width = 100e-12;
    double peak_window = 5e-9;
    std::int64_t side_peaks = 30;
  } g2;

  std::uint64_t seed = 1;
  std::string output_dir = "out";

  double rep_period() const { return 1.0 / rep_rate; }
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, std::size_t line, const std::string& what)
      : std::runtime_error(format(field, line, what)), field_(std::move(field)), line_(line) {}

  const std::string& field() const { return field_; }
  std::size_t line() const { return line_; }  // 0 when not tied to a line

 private:
  static std::string format(const std::string& field, std::size_t line, const std::string& what) {
    std::string s = "config";
    if (line > 0) s += " line " + std::to_string(line);
    if (!field.empty()) s += " [" + field + "]";
    return s + ": " + what;
  }
  std::string field_;
  std::size_t line_;
};

struct ConfigField {
  std::string_view key;
  std::string_view unit;
  std::variant<double*, std::int64_t*, std::uint64_t*, std::string*> ref;
};

/// Schema in canonical order.
inline std::vector<ConfigField> config_fields(ExperimentConfig& c) {
  return {
      {"grid.points", "", &c.grid.points},
      {"grid.dt", "s", &c.grid.dt},
      {"grid.pulse_points", "", &c.grid.pulse_points},
      {"grid.pulse_dt", "s", &c.grid.pulse_dt},
      {"waveguide.length", "m", &c.waveguide.length},
      {"waveguide.poling_period", "m", &c.waveguide.poling_period},
      {"waveguide.phase_mismatch", "rad/m", &c.waveguide.phase_mismatch},
      {"waveguide.signal_wavelength", "m", &c.waveguide.signal_wavelength},
      {"waveguide.target_wavelength", "m", &c.waveguide.target_wavelength},
      {"waveguide.signal_slowness", "s/m", &c.waveguide.signal_slowness},
      {"waveguide.pump_slowness", "s/m", &c.waveguide.pump_slowness},
      {"waveguide.target_slowness", "s/m", &c.waveguide.target_slowness},
      {"waveguide.signal_loss_db_per_m", "dB/m", &c.waveguide.signal_loss_db_per_m},
      {"waveguide.pump_loss_db_per_m", "dB/m", &c.waveguide.pump_loss_db_per_m},
      {"waveguide.target_loss_db_per_m", "dB/m", &c.waveguide.target_loss_db_per_m},
      {"waveguide.pump_coupling_db", "dB", &c.waveguide.pump_coupling_db},
      {"waveguide.pump_lead_in", "m", &c.waveguide.pump_lead_in},
      {"waveguide.fiber_peak_power", "W", &c.waveguide.fiber_peak_power},
      {"waveguide.peak_efficiency", "", &c.waveguide.peak_efficiency},
      {"waveguide.steps", "", &c.waveguide.steps},
      {"waveguide.coupling", "", &c.waveguide.coupling},
      {"bulk.length", "m", &c.bulk.length},
      {"bulk.poling_period", "m", &c.bulk.poling_period},
      {"bulk.short_wavelength", "m", &c.bulk.short_wavelength},
      {"bulk.cw_wavelength", "m", &c.bulk.cw_wavelength},
      {"bulk.short_fwhm", "s", &c.bulk.short_fwhm},
      {"bulk.walkoff_length", "m", &c.bulk.walkoff_length},
      {"bulk.output_width", "s", &c.bulk.output_width},
      {"bulk.output_peak_power", "W", &c.bulk.output_peak_power},
      {"scan.probe_fwhm", "s", &c.scan.probe_fwhm},
      {"scan.delay_span", "s", &c.scan.delay_span},
      {"scan.delay_step", "s", &c.scan.delay_step},
      {"emitter.lifetime", "s", &c.emitter.lifetime},
      {"emitter.branching", "", &c.emitter.branching},
      {"emitter.spin_flip", "", &c.emitter.spin_flip},
      {"emitter.input_rate", "1/s", &c.emitter.input_rate},
      {"sequence.excitation_area", "rad", &c.sequence.excitation_area},
      {"sequence.excitation_duration", "s", &c.sequence.excitation_duration},
      {"sequence.rotation_area", "rad", &c.sequence.rotation_area},
      {"sequence.rotation_time", "s", &c.sequence.rotation_time},
      {"sequence.rotation_detuning", "Hz", &c.sequence.rotation_detuning},
      {"sequence.conversion_delay", "s", &c.sequence.conversion_delay},
      {"sequence.pi_fidelity", "", &c.sequence.pi_fidelity},
      {"rabi.excitation_pi_power", "W", &c.rabi.excitation_pi_power},
      {"rabi.rotation_pi_power", "W", &c.rabi.rotation_pi_power},
      {"rabi.max_area", "rad", &c.rabi.max_area},
      {"rabi.points", "", &c.rabi.points},
      {"loss.input_db", "dB", &c.loss.input_db},
      {"loss.output_db", "dB", &c.loss.output_db},
      {"loss.filter_db", "dB", &c.loss.filter_db},
      {"loss.filter_bandwidth", "m", &c.loss.filter_bandwidth},
      {"detector.efficiency", "", &c.detector.efficiency},
      {"detector.dark_rate", "Hz", &c.detector.dark_rate},
      {"detector.jitter_fwhm", "s", &c.detector.jitter_fwhm},
      {"detector.dead_time", "s", &c.detector.dead_time},
      {"noise.rate", "Hz", &c.noise.rate},
      {"noise.window", "s", &c.noise.window},
      {"rep_rate", "Hz", &c.rep_rate},
      {"tcspc.bin_width", "s", &c.tcspc.bin_width},
      {"tcspc.signal_offset", "s", &c.tcspc.signal_offset},
      {"tcspc.gate_width", "s", &c.tcspc.gate_width},
      {"acquisition.duration", "s", &c.acquisition.duration},
      {"overlap.window", "s", &c.overlap.window},
      {"overlap.delay", "s", &c.overlap.delay},
      {"decay.delay_min", "s", &c.decay.delay_min},
      {"decay.delay_max", "s", &c.decay.delay_max},
      {"decay.points", "", &c.decay.points},
      {"g2.hbt_g2", "", &c.g2.hbt_g2},
      {"g2.arm_efficiency", "", &c.g2.arm_efficiency},
      {"g2.periods", "", &c.g2.periods},
      {"g2.bin_width", "s", &c.g2.bin_width},
      {"g2.peak_window", "s", &c.g2.peak_window},
      {"g2.side_peaks", "", &c.g2.side_peaks},
      {"seed", "", &c.seed},
      {"output_dir", "", &c.output_dir},
  };
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

/// Assigns one key. Throws ConfigError on unknown keys or malformed values.
inline void set_config_value(ExperimentConfig& c, std::string_view key, std::string_view value,
                             std::size_t line = 0) {
  for (auto& f : config_fields(c)) {
    if (f.key != key) continue;
    const std::string k(key);
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, std::string>) {
            if (value.empty()) throw ConfigError(k, line, "empty value");
            *p = std::string(value);
          } else {
            T v{};
            if (!detail::parse_number(value, v))
              throw ConfigError(k, line, "cannot parse '" + std::string(value) + "' as a number");
            *p = v;
          }
        },
        f.ref);
    return;
  }
  throw ConfigError(std::string(key), line, "unknown key");
}

/// Applies a `key=value` override string.
inline void apply_override(ExperimentConfig& c, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("", 0, "override '" + std::string(assignment) + "' is not key=value");
  set_config_value(c, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

/// Validates every field; the error names the first offending key.
inline void validate_config(const ExperimentConfig& c) {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(field, 0, what);
  };
  auto positive = [&](double v, const char* field) { require(v > 0.0, field, "must be positive"); };
  auto non_negative = [&](double v, const char* field) { require(v >= 0.0, field, "must be >= 0"); };
  auto fraction = [&](double v, const char* field) {
    require(v >= 0.0 && v <= 1.0, field, "must lie in [0, 1]");
  };

  require(c.grid.points >= 2 && is_power_of_two(static_cast<std::size_t>(c.grid.points)),
          "grid.points", "must be a power of two >= 2");
  positive(c.grid.dt, "grid.dt");
  require(c.grid.pulse_points >= 2 && is_power_of_two(static_cast<std::size_t>(c.grid.pulse_points)),
          "grid.pulse_points", "must be a power of two >= 2");
  positive(c.grid.pulse_dt, "grid.pulse_dt");

  positive(c.waveguide.length, "waveguide.length");
  positive(c.waveguide.poling_period, "waveguide.poling_period");
  require(std::isfinite(c.waveguide.phase_mismatch), "waveguide.phase_mismatch", "must be finite");
  positive(c.waveguide.signal_wavelength, "waveguide.signal_wavelength");
  require(c.waveguide.target_wavelength > c.waveguide.signal_wavelength,
          "waveguide.target_wavelength", "must exceed the signal wavelength");
  non_negative(c.waveguide.signal_loss_db_per_m, "waveguide.signal_loss_db_per_m");
  non_negative(c.waveguide.pump_loss_db_per_m, "waveguide.pump_loss_db_per_m");
  non_negative(c.waveguide.target_loss_db_per_m, "waveguide.target_loss_db_per_m");
  non_negative(c.waveguide.pump_coupling_db, "waveguide.pump_coupling_db");
  non_negative(c.waveguide.pump_lead_in, "waveguide.pump_lead_in");
  positive(c.waveguide.fiber_peak_power, "waveguide.fiber_peak_power");
  require(c.waveguide.peak_efficiency > 0.0 && c.waveguide.peak_efficiency <= 1.0,
          "waveguide.peak_efficiency", "must lie in (0, 1]");
  require(c.waveguide.steps >= 16, "waveguide.steps", "must be >= 16");
  require(c.waveguide.coupling == "full" || c.waveguide.coupling == "undepleted",
          "waveguide.coupling", "must be 'full' or 'undepleted'");

  positive(c.bulk.length, "bulk.length");
  positive(c.bulk.poling_period, "bulk.poling_period");
  positive(c.bulk.short_wavelength, "bulk.short_wavelength");
  require(c.bulk.cw_wavelength > c.bulk.short_wavelength, "bulk.cw_wavelength",
          "must exceed the short-pulse wavelength");
  positive(c.bulk.short_fwhm, "bulk.short_fwhm");
  positive(c.bulk.walkoff_length, "bulk.walkoff_length");
  require(c.bulk.output_width > c.bulk.short_fwhm, "bulk.output_width",
          "must exceed the short-pulse width");
  non_negative(c.bulk.output_peak_power, "bulk.output_peak_power");

  positive(c.scan.probe_fwhm, "scan.probe_fwhm");
  positive(c.scan.delay_span, "scan.delay_span");
  require(c.scan.delay_step > 0.0 && c.scan.delay_step < c.scan.delay_span, "scan.delay_step",
          "must be positive and below scan.delay_span");

  positive(c.emitter.lifetime, "emitter.lifetime");
  fraction(c.emitter.branching, "emitter.branching");
  fraction(c.emitter.spin_flip, "emitter.spin_flip");
  non_negative(c.emitter.input_rate, "emitter.input_rate");

  require(std::isfinite(c.sequence.excitation_area), "sequence.excitation_area", "must be finite");
  positive(c.sequence.excitation_duration, "sequence.excitation_duration");
  require(std::isfinite(c.sequence.rotation_area), "sequence.rotation_area", "must be finite");
  positive(c.sequence.rotation_time, "sequence.rotation_time");
  positive(c.sequence.conversion_delay, "sequence.conversion_delay");
  require(c.sequence.pi_fidelity > 0.0 && c.sequence.pi_fidelity <= 1.0, "sequence.pi_fidelity",
          "must lie in (0, 1]");

  positive(c.rabi.excitation_pi_power, "rabi.excitation_pi_power");
  positive(c.rabi.rotation_pi_power, "rabi.rotation_pi_power");
  positive(c.rabi.max_area, "rabi.max_area");
  require(c.rabi.points >= 3, "rabi.points", "must be >= 3");

  non_negative(c.loss.input_db, "loss.input_db");
  non_negative(c.loss.output_db, "loss.output_db");
  non_negative(c.loss.filter_db, "loss.filter_db");
  non_negative(c.loss.filter_bandwidth, "loss.filter_bandwidth");

  fraction(c.detector.efficiency, "detector.efficiency");
  non_negative(c.detector.dark_rate, "detector.dark_rate");
  non_negative(c.detector.jitter_fwhm, "detector.jitter_fwhm");
  non_negative(c.detector.dead_time, "detector.dead_time");

  non_negative(c.noise.rate, "noise.rate");
  positive(c.noise.window, "noise.window");
  positive(c.rep_rate, "rep_rate");
  const double period = c.rep_period();
  require(c.noise.window < period, "noise.window", "must be shorter than the rep period");
  require(c.sequence.rotation_time > c.sequence.conversion_delay && c.sequence.rotation_time < period,
          "sequence.rotation_time", "must fall after the conversion window and within the period");

  require(c.tcspc.bin_width > 0.0 && c.tcspc.bin_width < period, "tcspc.bin_width",
          "must lie in (0, rep period)");
  require(c.tcspc.signal_offset >= 0.0 && c.tcspc.signal_offset < period, "tcspc.signal_offset",
          "must lie in [0, rep period)");
  require(c.tcspc.gate_width > 0.0 && c.tcspc.gate_width < period, "tcspc.gate_width",
          "must lie in (0, rep period)");
  require(c.acquisition.duration >= period, "acquisition.duration", "must cover one period");
  positive(c.overlap.window, "overlap.window");
  non_negative(c.overlap.delay, "overlap.delay");
  non_negative(c.decay.delay_min, "decay.delay_min");
  require(c.decay.delay_max > c.decay.delay_min, "decay.delay_max", "must exceed decay.delay_min");
  require(c.decay.points >= 3, "decay.points", "must be >= 3");

  require(c.g2.hbt_g2 >= 0.0 && c.g2.hbt_g2 < 1.0, "g2.hbt_g2", "must lie in [0, 1)");
  require(c.g2.arm_efficiency > 0.0 && c.g2.arm_efficiency <= 1.0, "g2.arm_efficiency",
          "must lie in (0, 1]");
  require(c.g2.periods >= 1, "g2.periods", "must be >= 1");
  require(c.g2.bin_width > 0.0 && c.g2.bin_width < period, "g2.bin_width",
          "must lie in (0, rep period)");
  require(c.g2.peak_window > 0.0 && c.g2.peak_window <= period, "g2.peak_window",
          "must lie in (0, rep period]");
  require(c.g2.side_peaks >= 1, "g2.side_peaks", "must be >= 1");
  require(!c.output_dir.empty(), "output_dir", "must not be empty");
}

inline ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig c;
  std::vector<std::string> seen;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string_view s = raw;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ConfigError("", line, "expected key = value");
    const auto key = detail::trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("", line, "missing key");
    for (const auto& k : seen)
      if (k == key) throw ConfigError(std::string(key), line, "duplicate key");
    seen.emplace_back(key);
    set_config_value(c, key, detail::trim(s.substr(eq + 1)), line);
  }
  validate_config(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot open '" + path + "'");
  return parse_config(in);
}

/// Canonical form: every key in schema order, numbers at full precision.
inline std::string serialize_config(const ExperimentConfig& config) {
  auto& c = const_cast<ExperimentConfig&>(config);
  std::ostringstream os;
  for (const auto& f : config_fields(c)) {
    os << f.key << " = ";
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, double>)
            os << format_number(*p);
          else
            os << *p;
        },
        f.ref);
    os << '\n';
  }
  return os.str();
}

// -- Builders for the domain objects ---------------------------------------

inline LambdaSystem make_lambda_system(const ExperimentConfig& c) {
  return {c.emitter.lifetime, c.emitter.branching, c.emitter.spin_flip};
}

inline PulseSequence make_pulse_sequence(const ExperimentConfig& c) {
  PulseSequence s;
  s.excitation_area = c.sequence.excitation_area;
  s.excitation_time = 0.0;
  s.excitation_duration = c.sequence.excitation_duration;
  s.rotation_area = c.sequence.rotation_area;
  s.rotation_time = c.sequence.rotation_time;
  s.rotation_detuning = c.sequence.rotation_detuning;
  s.conversion_delay = c.sequence.conversion_delay;
  s.rep_period = c.rep_period();
  s.pi_area_fidelity = c.sequence.pi_fidelity;
  s.validate();
  return s;
}

inline LossChain make_loss_chain(const ExperimentConfig& c) {
  return {{{"waveguide input (910 nm)", c.loss.input_db, LossKind::coupling},
           {"fiber output coupling (1560 nm)", c.loss.output_db, LossKind::coupling},
           {"filtering", c.loss.filter_db, LossKind::filter}},
          c.detector.efficiency};
}

inline DetectorSpec make_detector(const ExperimentConfig& c) {
  return {c.detector.efficiency, c.detector.dark_rate, c.detector.jitter_fwhm, c.detector.dead_time};
}

/// Downconversion waveguide with the given coupling coefficient.
inline WaveguideSpec make_waveguide(const ExperimentConfig& c, double kappa) {
  const auto& w = c.waveguide;
  const double lp = pump_wavelength(w.signal_wavelength, w.target_wavelength);
  return WaveguideSpec(w.length, w.poling_period, kappa,
                       {w.signal_wavelength, w.signal_slowness, w.signal_loss_db_per_m, 0.0},
                       {lp, w.pump_slowness, w.pump_loss_db_per_m, 0.0},
                       {w.target_wavelength, w.target_slowness, w.target_loss_db_per_m, 0.0},
                       w.phase_mismatch);
}

inline Coupling make_coupling(const ExperimentConfig& c) {
  return c.waveguide.coupling == "undepleted" ? Coupling::undepleted : Coupling::full;
}

/// Pump insertion loss from the input fiber to the start of the grating.
inline double pump_insertion_db(const ExperimentConfig& c) {
  return c.waveguide.pump_coupling_db + c.waveguide.pump_loss_db_per_m * c.waveguide.pump_lead_in;
}

/// Bulk pump-synthesis crystal. The short pulse walks off the CW seed by
/// short_fwhm over walkoff_length; `window` is the short-pulse/idler
/// walkoff accumulated over the crystal.
inline WaveguideSpec make_bulk(const ExperimentConfig& c, double window, double kappa = 0.0) {
  const auto& b = c.bulk;
  const double lp = pump_wavelength(b.short_wavelength, b.cw_wavelength);
  const double ds = b.short_fwhm / b.walkoff_length;
  return WaveguideSpec(b.length, b.poling_period, kappa, {b.short_wavelength, ds, 0.0, 0.0},
                       {lp, ds - window / b.length, 0.0, 0.0}, {b.cw_wavelength, 0.0, 0.0, 0.0});
}

}  // namespace qfcsim
