/**
 * @file blowup_analysis.hpp
 * @brief Desingularization of the degenerate equilibrium (a,c) = (0,1) of the
 * planar cross curvature system.
 *
 * Chain: translation e = c - 1; square-root chart a = u^2, e = v; polar
 * coordinates (u,v) = (r cos th, r sin th). The field X is the polar field
 * divided by r^2, so the origin becomes the invariant circle r = 0. Y is X with
 * (r^5 cos^8 th + r^7 cos^10 th)/2 removed from the radial component.
 */
#pragma once

#include <string_view>
#include <vector>

#include "geomflow/ode_engine.hpp"
#include "geomflow/projective_reduction.hpp"

namespace geomflow::blowup {

/// Point of the blow-up cylinder; state layout for integration is {r, theta}.
struct BlowupPoint {
  double r = 0.0;
  double theta = 0.0;
};

/// (da/dt, de/dt) with e = c - 1.
[[nodiscard]] State2 translate_field(double a, double e) noexcept;

/// (du/dt, dv/dt) with a = u^2, e = v. @throws ValidationError for u < 0.
[[nodiscard]] State2 sqrt_chart_field(double u, double v);

/// (dr/dt, dtheta/dt) of X. @throws ValidationError for r < 0.
[[nodiscard]] State2 polar_field_X(const BlowupPoint& p);
/// (dr/dt, dtheta/dt) of Y. @throws ValidationError for r < 0.
[[nodiscard]] State2 polar_field_Y(const BlowupPoint& p);

namespace detail {

// The radial components as polynomials in (r, cos, sin). Templated so the same
// transcription can be evaluated in exact arithmetic.
template <class T>
[[nodiscard]] T x_radial(const T& r, const T& c, const T& s) {
  const T c2 = c * c, c4 = c2 * c2, c6 = c4 * c2, c8 = c4 * c4, c10 = c8 * c2;
  const T s2 = s * s, s3 = s2 * s, s4 = s2 * s2, s5 = s4 * s, s6 = s3 * s3;
  const T r2 = r * r, r3 = r2 * r, r4 = r2 * r2, r5 = r4 * r, r6 = r3 * r3;
  const T poly = T(-33) * r3 * c4 * s3 - T(29) * r2 * c4 * s2 - T(11) * r4 * c6 * s2 - r5 * c8 * s -
                 T(5) * r3 * c6 * s + r6 * c10 - T(35) * r * c2 * s3 - T(20) * c2 * s2 - T(4) * r * c4 * s +
                 r4 * c8 + T(2) * r2 * s6 - T(2) * r3 * s5 * c2 - T(18) * r2 * c2 * s4 - T(10) * r4 * s4 * c4 +
                 T(6) * r * s5 - T(6) * r5 * s3 * c6 + T(4) * s4;
  return T(0.5) * r * poly;
}

// Every term carries a factor sin: the line theta = 0 is invariant for Y.
template <class T>
[[nodiscard]] T y_radial(const T& r, const T& c, const T& s) {
  const T c2 = c * c, c4 = c2 * c2, c6 = c4 * c2, c8 = c4 * c4;
  const T s2 = s * s, s3 = s2 * s, s4 = s2 * s2, s5 = s4 * s;
  const T r2 = r * r, r3 = r2 * r, r4 = r2 * r2, r5 = r4 * r;
  const T poly = T(-5) * r3 * c6 - T(4) * r * c4 - T(29) * r2 * c4 * s - T(20) * s * c2 -
                 T(35) * r * c2 * s2 - r5 * c8 - T(11) * r4 * c6 * s - T(33) * r3 * c4 * s2 -
                 T(6) * r5 * c6 * s2 - T(10) * r4 * c4 * s3 - T(2) * r3 * c2 * s4 - T(18) * r2 * c2 * s3 +
                 T(6) * r * s4 + T(2) * r2 * s5 + T(4) * s3;
  return T(0.5) * s * r * poly;
}

/// The removed term (r^5 cos^8 + r^7 cos^10) / 2.
template <class T>
[[nodiscard]] T xy_radial_gap(const T& r, const T& c) {
  const T c2 = c * c, c4 = c2 * c2, c8 = c4 * c4;
  const T r2 = r * r, r5 = r2 * r2 * r;
  return T(0.5) * (r5 * c8 + r5 * r2 * c8 * c2);
}

[[nodiscard]] State2 x_field(double r, double theta) noexcept;
[[nodiscard]] State2 y_field(double r, double theta) noexcept;
}  // namespace detail

/// X or Y as integrator callables on {r, theta}; sign = -1 reverses time.
struct FieldX {
  double sign = 1.0;
  State2 operator()(double, const State2& s) const noexcept {
    auto d = detail::x_field(s[0], s[1]);
    return {sign * d[0], sign * d[1]};
  }
};
struct FieldY {
  double sign = 1.0;
  State2 operator()(double, const State2& s) const noexcept {
    auto d = detail::y_field(s[0], s[1]);
    return {sign * d[0], sign * d[1]};
  }
};

/// X restricted to the circle: (1/r) dr/dt and dtheta/dt at r = 0.
[[nodiscard]] double circle_radial_rate(double theta) noexcept;
[[nodiscard]] double circle_angular_velocity(double theta) noexcept;

/// Linearization data at a circle equilibrium written in terms of cos^2(theta).
[[nodiscard]] double radial_rate_at(double cos2) noexcept;
[[nodiscard]] double angular_slope_at(double cos2) noexcept;

/// d(dtheta/dt)/dr at r = 0 (the off-diagonal Jacobian entry at a circle equilibrium).
[[nodiscard]] double angular_radial_coupling(double theta) noexcept;

enum class CircleKind { SaddleUnstableOut, SaddleStableIn, NeedsFurtherAnalysis };
[[nodiscard]] std::string_view to_string(CircleKind k) noexcept;

struct CircleEquilibrium {
  double theta = 0.0;
  double cos2 = 0.0;          ///< family label: 0, 1/3 or 1
  double radial_rate = 0.0;   ///< (1/r) dr/dt at r = 0
  double angular_rate = 0.0;  ///< d(dtheta/dt)/dtheta at r = 0
  CircleKind kind = CircleKind::NeedsFurtherAnalysis;
  bool physical = false;      ///< cos(theta) >= 0, i.e. maps back to a >= 0
};

/// All zeros of dtheta/dt on r = 0 in (-pi, pi], ascending in theta.
[[nodiscard]] std::vector<CircleEquilibrium> circle_equilibria();

/// Angle of the saddle whose stable manifold enters {c < 1} with u >= 0: cos^2 = 1/3, sin < 0, cos > 0.
[[nodiscard]] double gamma0_saddle_angle() noexcept;

/// Stable eigenvector (dr, dtheta), normalized with dr = 1, of X's Jacobian at a cos^2 = 1/3 equilibrium.
[[nodiscard]] State2 stable_direction(double theta_saddle) noexcept;

/// (a, c) of a blow-up point: a = r^2 cos^2, c = 1 + r sin.
[[nodiscard]] State2 to_ac(const BlowupPoint& p) noexcept;

struct AxisCheckReport {
  BlowupPoint start;
  bool dtheta_negative = true;  ///< dtheta/dt < 0 at every sample with theta in (0, pi/2) and r > 0
  bool above_y_orbit = true;    ///< r_X(theta) >= r_Y(theta) on the common theta range
  double min_radius = 0.0;      ///< min of hypot(theta, r) along the X orbit
  double final_theta = 0.0;
  double final_r = 0.0;
  bool confirmed = false;
  std::string_view note;
};

/**
 * @brief Follows X from (theta0, r0) and checks that it does not approach the
 * origin of the (theta, r) plane, using Y as the comparison field.
 *
 * r0 = 0 follows the invariant circle; theta0 = 0 follows the invariant r axis.
 * @throws ValidationError for r0 < 0 or theta0 outside [0, pi/2).
 */
[[nodiscard]] AxisCheckReport axis_nonapproach_check(double theta0, double r0, const ode::IntegratorConfig& cfg = {});

}  // namespace geomflow::blowup
