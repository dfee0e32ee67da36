/**
 * @file projective_reduction.hpp
 * @brief Planar systems obtained by central projection of the backward flows
 * onto the plane A = 1 (Ricci, coordinates b = B/A, c = C/A) or B = 1 (cross
 * curvature, coordinates a = A/B, c = C/B), with their equilibria and Jacobians.
 *
 * The planar fields drop the positive factors 2A^2 (Ricci) and 8/(Bac)^2
 * (cross curvature): orbits coincide with the projected 3D orbits up to a
 * monotone change of time.
 */
#pragma once

#include <array>
#include <complex>
#include <string_view>
#include <vector>

#include "geomflow/flow_fields.hpp"
#include "geomflow/milnor_geometry.hpp"
#include "geomflow/ode_engine.hpp"

namespace geomflow {

using State2 = ode::State<2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

enum class Chart { RicciBC, XcfAC };

[[nodiscard]] std::string_view to_string(Chart c) noexcept;
[[nodiscard]] Chart chart_for(Flow f) noexcept;
[[nodiscard]] Flow flow_for(Chart c) noexcept;

struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;
  Chart chart = Chart::RicciBC;

  [[nodiscard]] State2 as_array() const noexcept { return {x, y}; }
  /// Open domain: b > c > 0 (RicciBC), a > 0 and 0 < c < 1 (XcfAC).
  [[nodiscard]] bool in_domain() const noexcept;
};

/// Central projection of a metric onto the chart plane.
[[nodiscard]] PlanarPoint project(Chart chart, const MetricDiag& m) noexcept;

/// Point of the cone over p with ABC = volume.
[[nodiscard]] MetricDiag lift(const PlanarPoint& p, double volume = 4.0);

/// Planar field on raw chart coordinates.
[[nodiscard]] inline State2 planar_field(Chart chart, const State2& p) noexcept {
  const double x = p[0], y = p[1];
  if (chart == Chart::RicciBC) {
    return {x * (1.0 + x) * (x - y - 1.0), -y * (1.0 + y) * (x - y + 1.0)};
  }
  const double phi1 = -3.0 * x * x + 1.0 + y * y - 2.0 * y - 2.0 * x * y - 2.0 * x;
  const double phi3 = -3.0 * y * y + x * x + 1.0 + 2.0 * y - 2.0 * x * y + 2.0 * x;
  return {x * (x + 1.0) * (x + y - 1.0) * phi3, -y * (1.0 - y) * (x + y + 1.0) * phi1};
}

[[nodiscard]] inline State2 planar_field(const PlanarPoint& p) noexcept { return planar_field(p.chart, p.as_array()); }

/// Planar field as an integrator callable; sign = -1 gives the time-reversed field.
struct PlanarField {
  Chart chart;
  double sign = 1.0;
  State2 operator()(double /*t*/, const State2& p) const noexcept {
    auto d = planar_field(chart, p);
    return {sign * d[0], sign * d[1]};
  }
};

/// Analytic Jacobian of planar_field.
[[nodiscard]] Mat2 planar_jacobian(Chart chart, const State2& p) noexcept;

/// Planar velocity induced by the 3D backward flow through the projection (chain rule on b = B/A etc.).
[[nodiscard]] State2 induced_planar_velocity(Chart chart, const MetricDiag& m) noexcept;

enum class EquilibriumKind { Attracting, Repelling, Saddle, Degenerate };
[[nodiscard]] std::string_view to_string(EquilibriumKind k) noexcept;

struct EquilibriumReport {
  PlanarPoint location;
  Mat2 jacobian{};
  std::array<std::complex<double>, 2> eigenvalues{};
  EquilibriumKind kind = EquilibriumKind::Degenerate;
};

[[nodiscard]] std::array<std::complex<double>, 2> eigenvalues(const Mat2& j) noexcept;
[[nodiscard]] EquilibriumKind classify_eigenvalues(const std::array<std::complex<double>, 2>& ev) noexcept;

/// Closed-form equilibria of the chart's planar system with linear classification.
[[nodiscard]] std::vector<EquilibriumReport> find_equilibria(Chart chart);

struct OrbitComparison {
  double deviation = 0.0;     ///< symmetric Hausdorff distance over the common segment
  double common_length = 0.0; ///< arc length of the compared segment
  std::size_t samples_3d = 0;
  std::size_t samples_planar = 0;
};

/**
 * @brief Integrates the backward 3D flow from m0 and the planar system from
 * project(m0) and measures how far the two planar orbits are apart.
 *
 * Both orbits are clipped to the box max(|x|,|y|) <= box and then to their
 * common arc length before the distance is taken.
 * @throws ValidationError if project(m0) is outside the open chart domain.
 */
[[nodiscard]] OrbitComparison orbit_correspondence_check(Flow flow, const MetricDiag& m0,
                                                         const ode::IntegratorConfig& cfg = {}, double box = 100.0);

}  // namespace geomflow
