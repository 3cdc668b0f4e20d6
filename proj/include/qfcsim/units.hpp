#pragma once

#include <cmath>
#include <numbers>

namespace qfcsim {

/// SI physical constants (CODATA exact values).
inline constexpr double speed_of_light = 299'792'458.0;  // m/s
inline constexpr double planck = 6.626'070'15e-34;       // J s
inline constexpr double pi = std::numbers::pi;

namespace units {
inline constexpr double fs = 1e-15;
inline constexpr double ps = 1e-12;
inline constexpr double ns = 1e-9;
inline constexpr double nm = 1e-9;
inline constexpr double um = 1e-6;
inline constexpr double cm = 1e-2;
inline constexpr double MHz = 1e6;
inline constexpr double GHz = 1e9;
}  // namespace units

inline double angular_frequency(double wavelength) {
  return 2.0 * pi * speed_of_light / wavelength;
}

inline double photon_energy(double wavelength) {
  return planck * speed_of_light / wavelength;
}

inline double db_to_transmission(double db) { return std::pow(10.0, -db / 10.0); }

inline double transmission_to_db(double t) { return -10.0 * std::log10(t); }

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace qfcsim
