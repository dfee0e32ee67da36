#include "geomflow/milnor_geometry.hpp"

#include <cmath>
#include <string>

#include "geomflow/error.hpp"

namespace geomflow {

MetricDiag::MetricDiag(double a, double b, double c) : a_(a), b_(b), c_(c) {
  for (double v : {a, b, c}) {
    if (!std::isfinite(v) || !(v > 0.0)) {
      throw ValidationError("metric coefficients must be finite and positive, got (" + std::to_string(a) + ", " +
                            std::to_string(b) + ", " + std::to_string(c) + ")");
    }
  }
}

MetricDiag MetricDiag::scaled(double lambda) const {
  return MetricDiag(lambda * a_, lambda * b_, lambda * c_);
}

std::array<double, 3> f_polynomials(const MetricDiag& m) noexcept { return f_polynomials(m.a(), m.b(), m.c()); }

std::array<double, 3> sectional_curvatures(const MetricDiag& m) noexcept {
  // F first, one division: keeps k_i * ABC - F_i at roundoff.
  const auto f = f_polynomials(m);
  const double vol = m.volume();
  return {f[0] / vol, f[1] / vol, f[2] / vol};
}

CurvatureReport curvature_report(const MetricDiag& m) noexcept {
  CurvatureReport r;
  r.f = f_polynomials(m);
  r.k = sectional_curvatures(m);
  const auto& k = r.k;
  r.ricci = {k[1] + k[2], k[2] + k[0], k[0] + k[1]};
  r.cross = {k[1] * k[2], k[2] * k[0], k[0] * k[1]};
  r.scalar = 2.0 * (k[0] + k[1] + k[2]);
  return r;
}

}  // namespace geomflow
