#pragma once

// Photon budget arithmetic for the conversion link.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfcsim/emitter.hpp"
#include "qfcsim/signal.hpp"
#include "qfcsim/units.hpp"

namespace qfcsim {

enum class LossKind { coupling, filter, other };

struct LossElement {
  std::string name;
  double db = 0.0;
  LossKind kind = LossKind::other;
};

struct LossChain {
  std::vector<LossElement> elements;
  double detector_efficiency = 1.0;

  void validate() const {
    for (const auto& e : elements)
      if (!(e.db >= 0.0))
        throw std::invalid_argument("LossChain: attenuation of '" + e.name + "' must be >= 0 dB");
    if (!(detector_efficiency >= 0.0 && detector_efficiency <= 1.0))
      throw std::invalid_argument("LossChain: detector efficiency must lie in [0, 1]");
  }

  double total_db() const {
    double s = 0.0;
    for (const auto& e : elements) s += e.db;
    return s;
  }
};

/// Elements of `a` followed by those of `b`; detector efficiencies multiply.
inline LossChain concat(const LossChain& a, const LossChain& b) {
  LossChain c = a;
  c.elements.insert(c.elements.end(), b.elements.begin(), b.elements.end());
  c.detector_efficiency = a.detector_efficiency * b.detector_efficiency;
  return c;
}

inline double chain_transmission(const LossChain& chain, bool include_detector) {
  chain.validate();
  double t = 1.0;
  for (const auto& e : chain.elements) t *= db_to_transmission(e.db);
  return include_detector ? t * chain.detector_efficiency : t;
}

/// The budget chain as reported for the downconversion interface: fiber
/// input to the chip at 910 nm, fiber output at 1560 nm, pump/SHG filtering,
/// and the SNSPD.
inline LossChain default_loss_chain() {
  return {{{"waveguide input (910 nm)", 1.5, LossKind::coupling},
           {"fiber output coupling (1560 nm)", 1.0, LossKind::coupling},
           {"filtering", 2.4, LossKind::filter}},
          0.14};
}

/// Fraction of the emission waveform captured by a rectangular conversion
/// window of `width` that opens `delay` after the emission onset.
inline double overlap_factor(const EmissionWaveform& w, double width, double delay) {
  if (!(width > 0.0)) throw std::invalid_argument("overlap_factor: window width must be positive");
  if (!(delay >= 0.0)) throw std::invalid_argument("overlap_factor: delay must be >= 0");
  const double start = w.onset + delay;
  if (start >= w.grid.end() || start + width <= w.grid.origin())
    throw std::invalid_argument("overlap_factor: window entirely outside grid");
  return w.integrate(start, start + width);
}

/// Overlap with a shaped window: the peak-normalized intensity of
/// `conversion_profile`, whose time axis is taken relative to onset + delay.
inline double overlap_factor(const EmissionWaveform& w, const ComplexEnvelope& conversion_profile,
                             double delay) {
  if (!(delay >= 0.0)) throw std::invalid_argument("overlap_factor: delay must be >= 0");
  const double peak = conversion_profile.peak_power();
  if (!(peak > 0.0)) throw std::invalid_argument("overlap_factor: window profile is zero");
  const auto& g = conversion_profile.grid;
  const double shift = w.onset + delay;
  if (shift + g.origin() >= w.grid.end() || shift + g.end() <= w.grid.origin())
    throw std::invalid_argument("overlap_factor: window entirely outside grid");
  // Integrate on the finer of the two grids, over the window support.
  const double dt = std::min(g.dt(), w.grid.dt());
  const double a = std::max(shift + g.origin(), w.onset);
  const double b = std::min(shift + g.end(), w.grid.end());
  if (!(b > a)) return 0.0;
  const auto n = static_cast<std::size_t>(std::ceil((b - a) / dt));
  const double h = (b - a) / static_cast<double>(n);
  auto window = [&](double t) {
    const double x = g.index_of(t - shift);
    const auto i = static_cast<std::size_t>(std::clamp(std::floor(x), 0.0,
                                                       static_cast<double>(g.size() - 2)));
    const double f = std::clamp(x - static_cast<double>(i), 0.0, 1.0);
    return ((1.0 - f) * conversion_profile.power(i) + f * conversion_profile.power(i + 1)) / peak;
  };
  double s = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = a + static_cast<double>(k) * h;
    const double wt = (k == 0 || k == n) ? 0.5 : 1.0;
    s += wt * window(t) * w.at(t);
  }
  return s * h;
}

inline double expected_rate(double input_rate, double internal_efficiency, double overlap,
                            const LossChain& chain) {
  if (!(input_rate >= 0.0)) throw std::invalid_argument("expected_rate: negative input rate");
  if (!(internal_efficiency >= 0.0 && internal_efficiency <= 1.0))
    throw std::invalid_argument("expected_rate: internal efficiency must lie in [0, 1]");
  if (!(overlap >= 0.0 && overlap <= 1.0))
    throw std::invalid_argument("expected_rate: overlap must lie in [0, 1]");
  return input_rate * internal_efficiency * overlap * chain_transmission(chain, true);
}

/// Fiber-to-fiber conversion efficiency with full temporal overlap; the
/// detector is never included, filter elements optionally.
inline double external_efficiency(double internal_efficiency, const LossChain& chain,
                                  bool include_filters) {
  LossChain c = chain;
  std::erase_if(c.elements,
                [&](const LossElement& e) { return !include_filters && e.kind == LossKind::filter; });
  return internal_efficiency * chain_transmission(c, false);
}

inline double noise_per_pulse(double noise_rate, double rep_rate) {
  if (!(rep_rate > 0.0)) throw std::invalid_argument("noise_per_pulse: rep rate must be positive");
  if (!(noise_rate >= 0.0)) throw std::invalid_argument("noise_per_pulse: negative noise rate");
  return noise_rate / rep_rate;
}

}  // namespace qfcsim
