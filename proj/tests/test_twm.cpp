#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "qfcsim/twm.hpp"

using namespace qfcsim;

namespace {

constexpr double ps = 1e-12;
constexpr double nm = 1e-9;

const double lp_default = pump_wavelength(910 * nm, 1560 * nm);

WaveguideSpec device(double kappa, double ds = 0.0, double dp = 0.0, double loss_s = 0.0,
                     double loss_p = 0.0, double loss_t = 0.0, double dk = 0.0, double length = 0.04) {
  return WaveguideSpec(length, 21.9e-6, kappa, {910 * nm, ds, loss_s, 0.0},
                       {lp_default, dp, loss_p, 0.0}, {1560 * nm, 0.0, loss_t, 0.0}, dk);
}

struct Fields {
  ComplexEnvelope s, p, t;
};

Fields cw_fields(double pump_power, std::size_t n = 16) {
  const auto g = make_grid(n, 1 * ps);
  return {ComplexEnvelope(g, 910 * nm, std::vector<cplx>(n, cplx(1e-3))),
          ComplexEnvelope(g, lp_default, std::vector<cplx>(n, cplx(std::sqrt(pump_power)))),
          ComplexEnvelope(g, 1560 * nm)};
}

Fields pulsed_fields(double signal_peak, double pump_peak) {
  const auto g = make_grid(1024, 0.1 * ps);
  return {gaussian_pulse(g, 3 * ps, signal_peak, 0.0, 910 * nm),
          rect_pulse(g, 8.6 * ps, pump_peak, 0.0, lp_default), ComplexEnvelope(g, 1560 * nm)};
}

// Width of a Gaussian (FWHM f) intensity convolved with a box of width w,
// at `level` of its peak, from the erf closed form.
double gauss_box_width(double f, double w, double level) {
  const double s = f / (2.0 * std::sqrt(std::log(2.0)));
  auto y = [&](double t) { return std::erf((t + w / 2) / s) - std::erf((t - w / 2) / s); };
  const double target = level * y(0.0);
  double a = 0.0, b = 10 * (f + w);
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (a + b);
    (y(m) > target ? a : b) = m;
  }
  return a + b;
}

}  // namespace

TEST(PumpWavelength, DownconversionOfQuantumDotPhotons) {
  EXPECT_NEAR(pump_wavelength(910 * nm, 1560 * nm), 2184 * nm, 0.1 * nm);
}

TEST(PumpWavelength, DoubleWavelengthIdentity) {
  for (double l : {500 * nm, 910 * nm, 1.3e-6}) EXPECT_NEAR(pump_wavelength(l, 2 * l), 2 * l, 1e-9 * l);
}

TEST(PumpWavelength, RejectsUpconversionGeometry) {
  EXPECT_THROW(pump_wavelength(910 * nm, 900 * nm), std::invalid_argument);
  EXPECT_THROW(pump_wavelength(910 * nm, 910 * nm), std::invalid_argument);
}

TEST(WaveguideSpec, EnforcesEnergyConservation) {
  EXPECT_NO_THROW(device(1.0));
  EXPECT_THROW(WaveguideSpec(0.04, 21.9e-6, 1.0, {910 * nm, 0, 0, 0}, {2200 * nm, 0, 0, 0},
                             {1560 * nm, 0, 0, 0}),
               std::invalid_argument);
}

TEST(WaveguideSpec, RejectsInvalidGeometry) {
  EXPECT_THROW(device(-1.0), std::invalid_argument);
  EXPECT_THROW(device(1.0, 0, 0, 0, 0, 0, 0, 0.0), std::invalid_argument);
  EXPECT_THROW(device(1.0, 0, 0, -1.0), std::invalid_argument);
  EXPECT_THROW(WaveguideSpec(0.04, 0.0, 1.0, {910 * nm, 0, 0, 0}, {lp_default, 0, 0, 0},
                             {1560 * nm, 0, 0, 0}),
               std::invalid_argument);
}

TEST(CwEfficiency, ZeroPump) { EXPECT_EQ(cw_efficiency(0.0, device(30.0)), 0.0); }

TEST(CwEfficiency, AnalyticMaximum) {
  const double P = 0.6;
  const double kappa = M_PI / 2 / (std::sqrt(P) * 0.04);
  EXPECT_NEAR(cw_efficiency(P, device(kappa)), 1.0, 1e-14);
}

TEST(CwEfficiency, SincNullMatchesPropagation) {
  const double L = 0.04;
  const double dk = 2 * M_PI / L;
  const double kappa = 1.0;
  const double P = 1e-3;  // kappa^2 P << (dk/2)^2
  const auto spec = device(kappa, 0, 0, 0, 0, 0, dk);
  const double analytic = cw_efficiency(P, spec);
  EXPECT_LT(analytic, 1e-6);
  const auto f = cw_fields(P);
  const auto r = propagate(f.s, f.p, f.t, spec, SplitStepConfig::with_steps(L, 512, Coupling::undepleted));
  const double eta = r.target.photon_number() / f.s.photon_number();
  EXPECT_NEAR(eta, analytic, 1e-9);
}

TEST(CwEfficiency, MismatchedFormulaMatchesPropagation) {
  const double L = 0.04;
  const auto spec = device(20.0, 0, 0, 0, 0, 0, 60.0);
  const double P = 0.5;
  const auto f = cw_fields(P);
  const auto r = propagate(f.s, f.p, f.t, spec, SplitStepConfig::with_steps(L, 256, Coupling::undepleted));
  const double eta = r.target.photon_number() / f.s.photon_number();
  // Oracle written out directly.
  const double g = std::sqrt(20.0 * 20.0 * P + 30.0 * 30.0);
  const double oracle = std::pow(std::sin(g * L), 2) * 400.0 * P / (g * g);
  EXPECT_NEAR(eta, oracle, 1e-9);
}

TEST(Propagate, DecoupledLimitAppliesLossAndWalkoffOnly) {
  const double L = 0.04;
  const auto spec = device(0.0, 2e-10, -1e-10, 20.0, 100.0, 30.0);
  auto f = pulsed_fields(1.0, 2.0);
  f.t = gaussian_pulse(f.s.grid, 4 * ps, 0.5, 0.0, 1560 * nm);
  auto cfg = SplitStepConfig::with_steps(L, 64);
  cfg.record_every = 1;
  const auto r = propagate(f.s, f.p, f.t, spec, cfg);
  const std::array<double, 3> loss{20.0, 100.0, 30.0};
  const std::array<const ComplexEnvelope*, 3> in{&f.s, &f.p, &f.t};
  for (const auto& rec : r.records)
    for (std::size_t j = 0; j < 3; ++j) {
      const double expect = in[j]->photon_number() * std::pow(10.0, -loss[j] * rec.z / 10.0);
      EXPECT_NEAR(rec.photons[j], expect, 1e-10 * expect) << "band " << j << " z " << rec.z;
    }
  EXPECT_NEAR(r.signal.energy(), f.s.energy() * std::pow(10.0, -20.0 * L / 10), 1e-10 * f.s.energy());
  // Signal walks 8 ps behind the target frame.
  const auto peak = [](const ComplexEnvelope& e) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < e.samples.size(); ++i)
      if (e.power(i) > e.power(best)) best = i;
    return e.grid.time(best);
  };
  EXPECT_NEAR(peak(r.signal), 2e-10 * L, 0.1 * ps);
}

TEST(Propagate, CwUndepletedMatchesSineSquared) {
  const double L = 0.04;
  const double kappa = 30.0;
  for (double P : {0.0, 0.05, 0.3, 0.9, 1.6}) {
    const auto f = cw_fields(P);
    const auto r = propagate(f.s, f.p, f.t, device(kappa),
                             SplitStepConfig::with_steps(L, 512, Coupling::undepleted));
    const double eta = r.target.photon_number() / f.s.photon_number();
    const double oracle = std::pow(std::sin(kappa * std::sqrt(P) * L), 2);
    if (oracle == 0.0)
      EXPECT_EQ(eta, 0.0);
    else
      EXPECT_NEAR(eta, oracle, 1e-6 * oracle) << P;
  }
}

TEST(Propagate, ManleyRoweInLosslessPulsedPropagation) {
  const double L = 0.04;
  const auto spec = device(35.0, 2.2e-10, -1e-10);
  const auto f = pulsed_fields(0.5, 1.0);
  auto cfg = SplitStepConfig::with_steps(L, 512, Coupling::full);
  cfg.record_every = 16;
  const auto r = propagate(f.s, f.p, f.t, spec, cfg);
  const auto& first = r.records.front();
  const double n0 = first.photons[0] + first.photons[2];
  for (const auto& rec : r.records) {
    EXPECT_NEAR(rec.photons[0] + rec.photons[2], n0, 1e-8 * n0);
    const double dt_photons = rec.photons[2] - first.photons[2];
    const double dp_photons = rec.photons[1] - first.photons[1];
    EXPECT_NEAR(dp_photons, dt_photons, 1e-8 * first.photons[1]);
  }
  EXPECT_GT(r.target.photon_number(), 0.05 * f.s.photon_number());
}

TEST(Propagate, RejectsGridMismatch) {
  auto f = pulsed_fields(1.0, 1.0);
  f.t = ComplexEnvelope(make_grid(512, 0.1 * ps), 1560 * nm);
  EXPECT_THROW(propagate(f.s, f.p, f.t, device(1.0), SplitStepConfig::with_steps(0.04, 32)),
               std::invalid_argument);
}

TEST(Propagate, RejectsOversizedStep) {
  const auto f = pulsed_fields(1.0, 1.0);
  EXPECT_THROW(propagate(f.s, f.p, f.t, device(1.0), SplitStepConfig::with_steps(0.04, 8)),
               std::invalid_argument);
}

TEST(Propagate, RejectsWrongBandWavelength) {
  auto f = pulsed_fields(1.0, 1.0);
  f.p.center_wavelength = 2200 * nm;
  EXPECT_THROW(propagate(f.s, f.p, f.t, device(1.0), SplitStepConfig::with_steps(0.04, 32)),
               std::invalid_argument);
}

TEST(Propagate, ReportsNumericalBlowUp) {
  const auto f = pulsed_fields(1e6, 1e6);
  EXPECT_THROW(propagate(f.s, f.p, f.t, device(1e8), SplitStepConfig::with_steps(0.04, 16)),
               std::runtime_error);
}

TEST(Propagate, SecondOrderConvergence) {
  const double L = 0.04;
  const auto spec = device(35.0, 2.2e-10, -1e-10);
  const auto f = pulsed_fields(0.5, 1.0);
  auto run = [&](std::size_t steps) {
    return propagate(f.s, f.p, f.t, spec, SplitStepConfig::with_steps(L, steps, Coupling::full)).target;
  };
  const auto coarse = run(32), fine = run(64), reference = run(256);
  auto err = [&](const ComplexEnvelope& e) {
    double s = 0;
    for (std::size_t i = 0; i < e.samples.size(); ++i) s += std::norm(e.samples[i] - reference.samples[i]);
    return std::sqrt(s);
  };
  const double ratio = err(coarse) / err(fine);
  EXPECT_NEAR(ratio, 4.0, 0.8);
}

TEST(CalibrateKappa, LosslessClosedForm) {
  const double P = 0.7;
  const double k = calibrate_kappa(P, 0.0, 1.0, device(0.0));
  EXPECT_NEAR(k, M_PI / (2 * std::sqrt(P) * 0.04), 1e-9 * k);
}

TEST(CalibrateKappa, ReproducesTargetWithLosses) {
  const auto spec = device(0.0, 0, 0, 20.0, 100.0, 20.0);
  const double insertion = 2.8 + 0.2;
  const double k = calibrate_kappa(3.0, insertion, 0.8, spec);
  const double p0 = 3.0 * std::pow(10.0, -insertion / 10);
  EXPECT_NEAR(cw_internal_efficiency(p0, spec.with_kappa(k)), 0.8, 1e-9);
  EXPECT_NEAR(k, 34.9, 0.2);
}

TEST(CalibrateKappa, RejectsUnphysicalTarget) {
  EXPECT_THROW(calibrate_kappa(3.0, 3.0, 1.2, device(0.0)), std::invalid_argument);
  EXPECT_THROW(calibrate_kappa(3.0, 3.0, 0.0, device(0.0)), std::invalid_argument);
}

TEST(CalibrateKappa, UnreachableTargetThrows) {
  const auto lossy = device(0.0, 0, 0, 200.0, 100.0, 200.0);
  EXPECT_THROW(calibrate_kappa(3.0, 3.0, 0.95, lossy), std::runtime_error);
}

TEST(SynthesizePump, ZeroLengthCrystalKeepsInputWidth) {
  const auto g = make_grid(1024, 0.05 * ps);
  const double l_idler = pump_wavelength(911 * nm, 1565 * nm);
  const auto input = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 911 * nm);
  const WaveguideSpec bulk(1e-9, 25.9e-6, 0.0, {911 * nm, 2.4e-10, 0, 0}, {l_idler, -1e-10, 0, 0},
                           {1565 * nm, 0, 0, 0});
  PumpSynthesisOptions o;
  o.peak_power = 1.0;
  const auto out = synthesize_pump(input, 1.0, bulk, o);
  EXPECT_NEAR(width_at_level(out, 0.5), 3 * ps, g.dt());
  EXPECT_NEAR(out.center_wavelength, l_idler, 1e-15);
}

TEST(SynthesizePump, WidthFollowsConvolutionOracleAcrossLengths) {
  const auto g = make_grid(2048, 0.05 * ps);
  const double l_idler = pump_wavelength(911 * nm, 1565 * nm);
  const auto input = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 911 * nm);
  const double dslow = 2.0e-10;
  PumpSynthesisOptions o;
  o.peak_power = 40.0;
  std::vector<double> widths;
  for (double L : {0.02, 0.03, 0.05}) {
    const WaveguideSpec bulk(L, 25.9e-6, 0.0, {911 * nm, dslow, 0, 0}, {l_idler, 0.0, 0, 0},
                             {1565 * nm, 0, 0, 0});
    const auto out = synthesize_pump(input, 1.0, bulk, o);
    const double level = std::exp(-2.0);
    EXPECT_NEAR(width_at_level(out, level), gauss_box_width(3 * ps, dslow * L, level), 2 * g.dt()) << L;
    EXPECT_NEAR(out.peak_power(), 40.0, 1e-9);
    widths.push_back(width_at_level(out, 0.5));
  }
  // Long windows: width grows by the walkoff per unit length.
  EXPECT_NEAR((widths[2] - widths[1]) / 0.02, dslow, 0.05 * dslow);
}

TEST(SynthesizePump, WindowUnresolvableOnGridThrows) {
  const auto g = make_grid(256, 0.1 * ps);
  const double l_idler = pump_wavelength(911 * nm, 1565 * nm);
  const auto input = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 911 * nm);
  const WaveguideSpec bulk(0.5, 25.9e-6, 0.0, {911 * nm, 2.4e-10, 0, 0}, {l_idler, 0, 0, 0},
                           {1565 * nm, 0, 0, 0});
  EXPECT_THROW(synthesize_pump(input, 1.0, bulk), std::invalid_argument);
}

TEST(SynthesizePump, CoherentPeakEstimateScalesWithSeedPower) {
  const auto g = make_grid(1024, 0.05 * ps);
  const double l_idler = pump_wavelength(911 * nm, 1565 * nm);
  const auto input = gaussian_pulse(g, 3 * ps, 100.0, 0.0, 911 * nm);
  const WaveguideSpec bulk(0.05, 25.9e-6, 5.0, {911 * nm, 2.4e-10, 0, 0}, {l_idler, 1.2e-10, 0, 0},
                           {1565 * nm, 0, 0, 0});
  const double a = synthesize_pump(input, 1.0, bulk).peak_power();
  const double b = synthesize_pump(input, 2.0, bulk).peak_power();
  EXPECT_GT(a, 0.0);
  EXPECT_NEAR(b / a, 2.0, 1e-12);
}

TEST(WindowScan, SymmetricPulsesGiveSymmetricScan) {
  const auto g = make_grid(1024, 0.1 * ps);
  const auto probe = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910 * nm);
  const auto pump = gaussian_pulse(g, 8.6 * ps, 10.0, 0.0, lp_default);
  std::vector<double> delays;
  for (int k = -20; k <= 20; ++k) delays.push_back(k * 1 * ps);
  WindowScanOptions o;
  o.steps = 32;
  const auto scan = window_scan(probe, pump, device(30.0), delays, o);
  for (std::size_t k = 0; k < delays.size(); ++k)
    EXPECT_NEAR(scan.normalized[k], scan.normalized[delays.size() - 1 - k], 1e-9);
  EXPECT_NEAR(scan.normalized[20], 1.0, 1e-12);
}

TEST(WindowScan, DeltaProbeReproducesPumpProfile) {
  const auto g = make_grid(1024, 0.1 * ps);
  ComplexEnvelope probe(g, 910 * nm);
  probe.samples[g.size() / 2] = 1.0;  // t = 0
  const auto pump = gaussian_pulse(g, 6 * ps, 10.0, 0.0, lp_default);
  std::vector<double> delays;
  for (int k = -100; k <= 100; k += 5) delays.push_back(k * 0.1 * ps);
  WindowScanOptions o;
  o.steps = 32;
  const auto scan = window_scan(probe, pump, device(30.0), delays, o);
  for (std::size_t k = 0; k < delays.size(); ++k) {
    const double oracle = std::exp(-4 * std::log(2.0) * std::pow(delays[k] / (6 * ps), 2));
    EXPECT_NEAR(scan.normalized[k], oracle, 1e-3) << delays[k];
  }
}

TEST(WindowScan, NormalizedShapeInvariantUnderCommonRescaling) {
  const auto g = make_grid(1024, 0.1 * ps);
  const auto spec = device(35.0, 2.2e-10, -1e-10);
  std::vector<double> delays;
  for (int k = -15; k <= 15; ++k) delays.push_back(k * 1 * ps);
  WindowScanOptions o;
  o.steps = 32;
  o.low_conversion = false;
  o.coupling = Coupling::full;
  auto scan_at = [&](double scale) {
    const auto probe = gaussian_pulse(g, 3 * ps, 1e-4 * scale, 0.0, 910 * nm);
    const auto pump = rect_pulse(g, 8.6 * ps, 1e-4 * scale, 0.0, lp_default);
    return window_scan(probe, pump, spec, delays, o);
  };
  const auto a = scan_at(1.0), b = scan_at(7.0);
  for (std::size_t k = 0; k < delays.size(); ++k) EXPECT_NEAR(a.normalized[k], b.normalized[k], 1e-3);
}

TEST(WindowScan, RejectsDelayOutsideGrid) {
  const auto g = make_grid(256, 0.1 * ps);
  const auto probe = gaussian_pulse(g, 3 * ps, 1.0, 0.0, 910 * nm);
  const auto pump = rect_pulse(g, 8.6 * ps, 1.0, 0.0, lp_default);
  EXPECT_THROW(window_scan(probe, pump, device(1.0), {20 * ps}), std::invalid_argument);
}

TEST(Flatness, FlatTopIsOne) {
  std::vector<double> t{-2, -1, 0, 1, 2}, y{0.1, 1, 1, 1, 0.1};
  EXPECT_EQ(flatness(t, y, 0.0, 1.0), 1.0);
  EXPECT_NEAR(flatness(t, y, 0.0, 2.0), 0.1, 1e-15);
}

TEST(StepRecords, CsvColumns) {
  std::ostringstream os;
  write_step_records_csv(os, {StepRecord{0.01, {1, 2, 3}, {4, 5, 6}}});
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header,
            "z_m,photonflux_signal,photonflux_pump,photonflux_target,energy_signal_J,energy_pump_J,"
            "energy_target_J");
  EXPECT_EQ(row, "0.01,1,2,3,4,5,6");
}
