#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace qfcsim {

struct DecayPoint {
  double delay;
  double counts;
};

struct ExponentialFit {
  double tau;        // +inf when the data do not decay
  double amplitude;  // A in A exp(-t/tau)
  double residual;   // weighted sum of squared log residuals
  bool degenerate;
};

/// Weighted log-linear least squares for A exp(-t/tau).
///
/// ln(counts) has variance ~1/counts for Poisson data, so each point is
/// weighted by its counts. Points with non-positive counts are skipped.
inline ExponentialFit fit_exponential(const std::vector<DecayPoint>& points) {
  double sw = 0, st = 0, sy = 0, stt = 0, sty = 0;
  std::size_t used = 0;
  for (const auto& p : points) {
    if (!std::isfinite(p.delay) || !std::isfinite(p.counts))
      throw std::invalid_argument("fit_exponential: non-finite point");
    if (p.counts <= 0.0) continue;
    const double w = p.counts;
    const double y = std::log(p.counts);
    sw += w;
    st += w * p.delay;
    sy += w * y;
    stt += w * p.delay * p.delay;
    sty += w * p.delay * y;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("fit_exponential: no point has positive counts");
  const double det = sw * stt - st * st;
  if (used < 2 || !(det > 1e-12 * sw * stt))
    throw std::invalid_argument("fit_exponential: data span a single delay");
  const double slope = (sw * sty - st * sy) / det;
  const double intercept = (sy - slope * st) / sw;

  double residual = 0.0;
  for (const auto& p : points) {
    if (p.counts <= 0.0) continue;
    const double r = std::log(p.counts) - (intercept + slope * p.delay);
    residual += p.counts * r * r;
  }
  // A non-negative slope, or one too shallow to resolve over the data span,
  // means no decay.
  const double span = std::sqrt(det) / sw;
  const bool degenerate = !(slope < 0.0) || -slope * span < 1e-12;
  return {degenerate ? std::numeric_limits<double>::infinity() : -1.0 / slope, std::exp(intercept),
          residual, degenerate};
}

}  // namespace qfcsim
