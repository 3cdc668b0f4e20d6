#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "qfcsim/signal.hpp"

using namespace qfcsim;

namespace {

constexpr double ps = 1e-12;
constexpr double fs = 1e-15;

std::vector<double> times(const TimeGrid& g) {
  std::vector<double> t(g.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = g.time(i);
  return t;
}

// Intensity of a Gaussian (FWHM f) convolved with a box of width w, from
// the closed-form erf expression.
double gauss_box(double tau, double f, double w) {
  const double s = f / (2.0 * std::sqrt(std::log(2.0)));
  return std::erf((tau + w / 2) / s) - std::erf((tau - w / 2) / s);
}

// FWHM of an even, unimodal function by bisection on its half-maximum.
template <typename F>
double analytic_fwhm(F f, double hi) {
  const double half = 0.5 * f(0.0);
  double a = 0.0, b = hi;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (a + b);
    (f(m) > half ? a : b) = m;
  }
  return a + b;
}

}  // namespace

TEST(TimeGrid, SpanOf1024By50fs) {
  const auto g = make_grid(1024, 50 * fs);
  EXPECT_NEAR(g.span(), 51.2 * ps, 1e-24);
}

TEST(TimeGrid, TwoPointGridFrequencySpacing) {
  const auto g = make_grid(2, 1 * ps);
  EXPECT_NEAR(g.span(), 2 * ps, 1e-24);
  EXPECT_NEAR(g.df(), 0.5e12, 1e-3);
}

TEST(TimeGrid, RejectsNonPowerOfTwo) {
  EXPECT_THROW(make_grid(1000, 1 * ps), std::invalid_argument);
  EXPECT_THROW(make_grid(1, 1 * ps), std::invalid_argument);
}

TEST(TimeGrid, RejectsNonPositiveStep) {
  EXPECT_THROW(make_grid(64, 0.0), std::invalid_argument);
  EXPECT_THROW(make_grid(64, -1 * ps), std::invalid_argument);
}

TEST(TimeGrid, OmegaIsWrappedFftOrder) {
  const auto g = make_grid(8, 1 * ps);
  const double dw = 2 * M_PI * g.df();
  EXPECT_DOUBLE_EQ(g.omega(0), 0.0);
  EXPECT_DOUBLE_EQ(g.omega(1), dw);
  EXPECT_DOUBLE_EQ(g.omega(7), -dw);
}

TEST(GaussianPulse, FwhmRoundTrip) {
  const auto g = make_grid(4096, 20 * fs);
  const auto p = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910e-9);
  EXPECT_NEAR(width_at_level(p, 0.5), 3 * ps, g.dt());
  EXPECT_NEAR(p.peak_power(), 1.0, 1e-12);
}

TEST(GaussianPulse, ZeroPowerGivesZeroEnergy) {
  const auto g = make_grid(1024, 20 * fs);
  EXPECT_EQ(gaussian_pulse(g, 3 * ps, 0.0, 0.0, 910e-9).energy(), 0.0);
}

TEST(GaussianPulse, EnergyMatchesClosedForm) {
  const auto g = make_grid(4096, 20 * fs);
  const auto p = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910e-9);
  const double oracle = 3 * ps * std::sqrt(M_PI / (4 * std::log(2.0)));
  EXPECT_NEAR(p.energy(), oracle, 1e-9 * oracle);
  EXPECT_NEAR(oracle, 3.19e-12, 0.005e-12);
}

TEST(GaussianPulse, RejectsUnderSampledWidth) {
  const auto g = make_grid(1024, 1 * ps);
  EXPECT_THROW(gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910e-9), std::invalid_argument);
}

TEST(GaussianPulse, RejectsCenterOutsideGrid) {
  const auto g = make_grid(1024, 20 * fs);
  EXPECT_THROW(gaussian_pulse(g, 3 * ps, 1.0, 1e-9, 910e-9), std::invalid_argument);
}

TEST(RectPulse, EnergyOfPumpPulse) {
  const auto g = make_grid(2048, 0.1 * ps);
  const auto p = rect_pulse(g, 8.6 * ps, 40.0, 0.0, 2184e-9);
  EXPECT_NEAR(p.energy(), 344e-12, 1e-20);
}

TEST(RectPulse, WidthEqualToSpanThrows) {
  const auto g = make_grid(256, 0.1 * ps);
  EXPECT_THROW(rect_pulse(g, g.span(), 1.0, 0.0, 2184e-9), std::invalid_argument);
}

TEST(RectPulse, WidthAtAnyLevel) {
  const auto g = make_grid(2048, 0.1 * ps);
  const auto p = rect_pulse(g, 10 * ps, 1.0, 0.0, 2184e-9);
  EXPECT_NEAR(width_at_level(p, std::exp(-2.0)), 10 * ps, g.dt());
  const auto q = rect_pulse(g, 8.6 * ps, 1.0, 0.0, 2184e-9);
  for (double level : {0.1, 0.5, 0.9}) EXPECT_NEAR(width_at_level(q, level), 8.6 * ps, g.dt());
}

TEST(WidthAtLevel, GaussianAtInverseESquared) {
  const auto g = make_grid(4096, 20 * fs);
  const auto p = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910e-9);
  const double level = std::exp(-2.0);
  const double oracle = 3 * ps * std::sqrt(std::log(1.0 / level) / std::log(2.0));
  EXPECT_NEAR(width_at_level(p, level), oracle, g.dt());
  EXPECT_NEAR(oracle, 5.10 * ps, 0.005 * ps);
}

TEST(WidthAtLevel, ZeroEnvelopeThrows) {
  const auto g = make_grid(64, 1 * ps);
  EXPECT_THROW(width_at_level(ComplexEnvelope(g, 910e-9), 0.5), std::domain_error);
}

TEST(WidthAtLevel, UnbracketedContourThrows) {
  const auto g = make_grid(64, 1 * ps);
  ComplexEnvelope e(g, 910e-9, std::vector<cplx>(64, cplx(1.0)));
  e.samples[10] = 2.0;
  EXPECT_THROW(width_at_level(e, 0.1), std::domain_error);
}

TEST(WidthAtLevel, RejectsLevelOutsideUnitInterval) {
  const auto g = make_grid(1024, 20 * fs);
  const auto p = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910e-9);
  EXPECT_THROW(width_at_level(p, 0.0), std::invalid_argument);
  EXPECT_THROW(width_at_level(p, 1.0), std::invalid_argument);
}

TEST(Correlate, SymmetricPulseAutocorrelationIsEvenAndPeaked) {
  const auto g = make_grid(512, 0.1 * ps);
  const auto p = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910e-9);
  const auto c = correlate(p, p);
  const auto zero = c.value.size() / 2;
  EXPECT_DOUBLE_EQ(c.lag[zero], 0.0);
  for (std::size_t k = 1; k < zero; ++k) {
    EXPECT_DOUBLE_EQ(c.value[zero + k], c.value[zero - k]);
    EXPECT_LE(c.value[zero + k], c.value[zero]);
  }
}

TEST(Correlate, ZeroOperandGivesZero) {
  const auto g = make_grid(256, 0.1 * ps);
  const auto p = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910e-9);
  for (double v : correlate(p, ComplexEnvelope(g, 910e-9)).value) EXPECT_EQ(v, 0.0);
}

TEST(Correlate, MismatchedGridsThrow) {
  const auto a = gaussian_pulse(make_grid(256, 0.1 * ps), 3 * ps, 1.0, 0.0, 910e-9);
  const auto b = gaussian_pulse(make_grid(512, 0.1 * ps), 3 * ps, 1.0, 0.0, 910e-9);
  EXPECT_THROW(correlate(a, b), std::invalid_argument);
}

TEST(Correlate, RectWithGaussianMatchesErfOracle) {
  const auto g = make_grid(2048, 0.05 * ps);
  const auto rect = rect_pulse(g, 8.6 * ps, 1.0, 0.0, 2184e-9);
  const auto gauss = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910e-9);
  const auto c = correlate(rect, gauss);
  const double oracle =
      analytic_fwhm([](double t) { return gauss_box(t, 3 * ps, 8.6 * ps); }, 50 * ps);
  EXPECT_NEAR(width_at_level(c.lag, c.value, 0.5), oracle, 2 * g.dt());
  // The frozen oracle value for this pair.
  EXPECT_NEAR(oracle, 8.602 * ps, 0.001 * ps);
}

TEST(Correlate, SwappingOperandsMirrorsLagExactly) {
  const auto g = make_grid(256, 0.1 * ps);
  const auto a = gaussian_pulse(g, 3 * ps, 1.0, -2 * ps, 910e-9);
  const auto b = rect_pulse(g, 5 * ps, 0.7, 1.3 * ps, 2184e-9);
  const auto ab = correlate(a, b);
  const auto ba = correlate(b, a);
  const auto n = ab.value.size();
  for (std::size_t k = 0; k < n; ++k) EXPECT_EQ(ab.value[k], ba.value[n - 1 - k]);
}

TEST(Parseval, HoldsForRandomEnvelopes) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d;
  for (std::size_t n : {2u, 64u, 1024u, 8192u}) {
    const auto g = make_grid(n, 0.1 * ps);
    ComplexEnvelope e(g, 910e-9);
    for (auto& s : e.samples) s = cplx(d(rng), d(rng));
    EXPECT_NEAR(spectral_energy(e), e.energy(), 1e-10 * e.energy()) << n;
  }
}

TEST(Parseval, HoldsAfterTransformRoundTrip) {
  const auto g = make_grid(1024, 0.1 * ps);
  auto e = gaussian_pulse(g, 3 * ps, 2.0, 5 * ps, 910e-9);
  Fft fft(g.size());
  const auto original = e.samples;
  fft.forward(e.samples);
  fft.backward(e.samples);
  for (std::size_t i = 0; i < original.size(); ++i)
    EXPECT_NEAR(std::abs(e.samples[i] - original[i]), 0.0, 1e-12);
  EXPECT_NEAR(spectral_energy(e), e.energy(), 1e-10 * e.energy());
}

TEST(Shift, EnergyInvariantUnderShift) {
  const auto g = make_grid(1024, 0.1 * ps);
  const auto e = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910e-9);
  for (double d : {0.0, 1 * ps, -7.3 * ps, 0.05 * ps, 12.34 * ps}) {
    const auto s = shifted(e, d);
    EXPECT_NEAR(s.energy(), e.energy(), 1e-10 * e.energy()) << d;
  }
}

TEST(Shift, MovesPeak) {
  const auto g = make_grid(1024, 0.1 * ps);
  const auto e = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910e-9);
  const auto s = shifted(e, 4.25 * ps);
  const auto it = std::max_element(s.samples.begin(), s.samples.end(),
                                    [](cplx a, cplx b) { return std::norm(a) < std::norm(b); });
  const double t_peak = g.time(static_cast<std::size_t>(it - s.samples.begin()));
  EXPECT_NEAR(t_peak, 4.25 * ps, g.dt());
}

TEST(WidthAtLevel, GaussianRoundTripAcrossWidths) {
  const auto g = make_grid(4096, 0.05 * ps);
  for (double f = 0.2 * ps; f < 40 * ps; f *= 1.37) {
    const auto p = gaussian_pulse(g, f, 1.0, 0.0, 910e-9);
    EXPECT_NEAR(width_at_level(p, 0.5), f, g.dt()) << f;
  }
}

TEST(EnvelopeCsv, RoundTrip) {
  const auto g = make_grid(64, 0.5 * ps, -3 * ps);
  auto e = gaussian_pulse(g, 3 * ps, 1.5, 1 * ps, 910e-9);
  e.samples[3] = cplx(0.25, -0.125);
  std::stringstream ss;
  write_envelope_csv(ss, e);
  const auto r = read_envelope_csv(ss);
  EXPECT_TRUE(r.grid == e.grid);
  EXPECT_EQ(r.center_wavelength, e.center_wavelength);
  EXPECT_EQ(r.samples, e.samples);
}

TEST(EnvelopeCsv, HeaderLayout) {
  const auto g = make_grid(4, 1 * ps, 0.0);
  std::stringstream ss;
  write_envelope_csv(ss, ComplexEnvelope(g, 1560e-9));
  std::string first, second;
  std::getline(ss, first);
  std::getline(ss, second);
  EXPECT_EQ(first.rfind("# center_wavelength_m=1.56", 0), 0u);
  EXPECT_NE(first.find("dt_s=1e-12"), std::string::npos);
  EXPECT_EQ(second, "time_s,re_sqrtW,im_sqrtW,power_W");
}

TEST(ComplexEnvelope, RejectsWrongSampleCount) {
  const auto g = make_grid(8, 1 * ps);
  EXPECT_THROW(ComplexEnvelope(g, 910e-9, std::vector<cplx>(7)), std::invalid_argument);
}

TEST(ComplexEnvelope, PhotonNumberFromEnergy) {
  const auto g = make_grid(1024, 0.1 * ps);
  const auto p = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910e-9);
  const double oracle = p.energy() * 910e-9 / (6.62607015e-34 * 299792458.0);
  EXPECT_NEAR(p.photon_number(), oracle, 1e-12 * oracle);
}

TEST(Width, TimesHelperMatchesEnvelopeOverload) {
  const auto g = make_grid(1024, 0.1 * ps);
  const auto p = gaussian_pulse(g, 5 * ps, 1.0, 0.0, 910e-9);
  const auto t = times(g);
  const auto y = p.powers();
  EXPECT_EQ(width_at_level(t, y, 0.5), width_at_level(p, 0.5));
}
