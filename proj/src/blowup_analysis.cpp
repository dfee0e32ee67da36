#include "geomflow/blowup_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geomflow/error.hpp"

namespace geomflow::blowup {

State2 translate_field(double a, double e) noexcept {
  const double da = -a * (a + 1.0) * (a + e) * (3.0 * e * e + 4.0 * e + 2.0 * a * e - a * a);
  const double de = e * (e + 1.0) * (a + e + 2.0) * (e * e - 2.0 * a * e - 4.0 * a - 3.0 * a * a);
  return {da, de};
}

State2 sqrt_chart_field(double u, double v) {
  if (!(u >= 0.0)) throw ValidationError("sqrt_chart_field: u must be non-negative");
  const double u2 = u * u;
  const double du = -0.5 * u * (u2 + 1.0) * (v + u2) * (3.0 * v * v + 4.0 * v + 2.0 * u2 * v - u2 * u2);
  const double dv = v * (v + 1.0) * (v + 2.0 + u2) * (v * v - 2.0 * u2 * v - 4.0 * u2 - 3.0 * u2 * u2);
  return {du, dv};
}

namespace detail {

namespace {

double x_theta(double r, double c, double s) noexcept {
  const double c2 = c * c, c4 = c2 * c2, c6 = c4 * c2, c8 = c4 * c4;
  const double s2 = s * s, s3 = s2 * s, s4 = s2 * s2;
  const double r2 = r * r, r3 = r2 * r, r4 = r2 * r2, r5 = r4 * r, r6 = r3 * r3;
  return -0.5 * c * s *
         (-2.0 * r2 * s4 - r3 * s3 * c2 + 9.0 * r2 * c2 * s2 + 5.0 * r4 * s2 * c4 - 9.0 * r * s3 +
          28.0 * r * c2 * s + 25.0 * r3 * c4 * s + 5.0 * r5 * s * c6 - 8.0 * s2 + 16.0 * c2 + 20.0 * r2 * c4 +
          7.0 * r4 * c6 + r6 * c8);
}

}  // namespace

State2 x_field(double r, double theta) noexcept {
  const double c = std::cos(theta), s = std::sin(theta);
  return {x_radial(r, c, s), x_theta(r, c, s)};
}

State2 y_field(double r, double theta) noexcept {
  const double c = std::cos(theta), s = std::sin(theta);
  return {y_radial(r, c, s), x_theta(r, c, s)};
}

}  // namespace detail

State2 polar_field_X(const BlowupPoint& p) {
  if (!(p.r >= 0.0)) throw ValidationError("polar_field_X: r must be non-negative");
  return detail::x_field(p.r, p.theta);
}

State2 polar_field_Y(const BlowupPoint& p) {
  if (!(p.r >= 0.0)) throw ValidationError("polar_field_Y: r must be non-negative");
  return detail::y_field(p.r, p.theta);
}

double circle_radial_rate(double theta) noexcept {
  const double c = std::cos(theta), s = std::sin(theta);
  const double c2 = c * c, s2 = s * s;
  return 0.5 * (-20.0 * c2 * s2 + 4.0 * s2 * s2);
}

double circle_angular_velocity(double theta) noexcept {
  const double c = std::cos(theta), s = std::sin(theta);
  return -4.0 * c * s * (3.0 * c * c - 1.0);
}

double radial_rate_at(double cos2) noexcept {
  const double sin2 = 1.0 - cos2;
  return -10.0 * cos2 * sin2 + 2.0 * sin2 * sin2;
}

double angular_slope_at(double cos2) noexcept {
  // d/dtheta of -4 c s (3c^2 - 1) at a zero, in terms of c^2 only.
  const double sin2 = 1.0 - cos2;
  return -4.0 * ((cos2 - sin2) * (3.0 * cos2 - 1.0) - 6.0 * cos2 * sin2);
}

double angular_radial_coupling(double theta) noexcept {
  const double c = std::cos(theta), s = std::sin(theta);
  const double c2 = c * c, s2 = s * s;
  return -0.5 * c * s2 * (28.0 * c2 - 9.0 * s2);
}

std::string_view to_string(CircleKind k) noexcept {
  switch (k) {
    case CircleKind::SaddleUnstableOut: return "saddle_unstable_out";
    case CircleKind::SaddleStableIn: return "saddle_stable_in";
    case CircleKind::NeedsFurtherAnalysis: return "needs_further_analysis";
  }
  return "unknown";
}

std::vector<CircleEquilibrium> circle_equilibria() {
  using std::numbers::pi;
  const double t13 = std::acos(1.0 / std::sqrt(3.0));
  struct Seed {
    double theta;
    double cos2;
  };
  const Seed seeds[] = {{-pi + t13, 1.0 / 3.0}, {-pi / 2.0, 0.0}, {-t13, 1.0 / 3.0}, {0.0, 1.0},
                        {t13, 1.0 / 3.0},       {pi / 2.0, 0.0},  {pi - t13, 1.0 / 3.0}, {pi, 1.0}};
  std::vector<CircleEquilibrium> out;
  out.reserve(std::size(seeds));
  for (const auto& sd : seeds) {
    CircleEquilibrium e;
    e.theta = sd.theta;
    e.cos2 = sd.cos2;
    e.radial_rate = radial_rate_at(sd.cos2);
    e.angular_rate = angular_slope_at(sd.cos2);
    if (e.radial_rate == 0.0 || e.angular_rate == 0.0) {
      e.kind = CircleKind::NeedsFurtherAnalysis;
    } else if (e.radial_rate > 0.0 && e.angular_rate < 0.0) {
      e.kind = CircleKind::SaddleUnstableOut;
    } else if (e.radial_rate < 0.0 && e.angular_rate > 0.0) {
      e.kind = CircleKind::SaddleStableIn;
    } else {
      e.kind = CircleKind::NeedsFurtherAnalysis;
    }
    e.physical = std::cos(sd.theta) >= -1e-15;
    out.push_back(e);
  }
  return out;
}

double gamma0_saddle_angle() noexcept { return -std::acos(1.0 / std::sqrt(3.0)); }

State2 stable_direction(double theta_saddle) noexcept {
  const double c2 = std::cos(theta_saddle) * std::cos(theta_saddle);
  const double rho = radial_rate_at(c2);
  const double lam = angular_slope_at(c2);
  return {1.0, angular_radial_coupling(theta_saddle) / (rho - lam)};
}

State2 to_ac(const BlowupPoint& p) noexcept {
  const double c = std::cos(p.theta);
  return {p.r * p.r * c * c, 1.0 + p.r * std::sin(p.theta)};
}

namespace {

constexpr double kThetaStop = 1e-9;

}  // namespace

AxisCheckReport axis_nonapproach_check(double theta0, double r0, const ode::IntegratorConfig& base) {
  using std::numbers::pi;
  if (!std::isfinite(r0) || r0 < 0.0) throw ValidationError("axis_nonapproach_check: r0 must be non-negative");
  if (!std::isfinite(theta0) || theta0 < 0.0 || theta0 >= pi / 2.0)
    throw ValidationError("axis_nonapproach_check: theta0 must lie in [0, pi/2)");

  AxisCheckReport rep;
  rep.start = {r0, theta0};
  ode::IntegratorConfig cfg = base;
  cfg.component_floor = 0.0;
  cfg.component_ceiling = 1e6;

  if (theta0 == 0.0) {
    // Invariant r axis: dtheta = 0 and dr = (r^5 + r^7)/2 >= 0.
    const auto d = detail::x_field(r0, 0.0);
    rep.dtheta_negative = false;
    rep.min_radius = r0;
    rep.final_r = r0;
    rep.confirmed = d[1] == 0.0 && d[0] >= 0.0;
    rep.note = r0 > 0.0 ? "on the r axis: r increases weakly" : "origin is an equilibrium";
    return rep;
  }

  if (r0 == 0.0) {
    // The circle r = 0 is invariant; theta runs down to the equilibrium angle 0.
    std::vector<ode::EventSpec<2>> ev{{"theta_small", [](double, const State2& s) { return s[1] - kThetaStop; },
                                       ode::Crossing::Falling, ode::EventAction::Stop}};
    const auto tx = ode::integrate<2>(FieldX{}, State2{0.0, theta0}, {0.0, 1e3}, cfg, ev);
    rep.min_radius = theta0;
    for (const auto& s : tx.states) {
      rep.min_radius = std::min(rep.min_radius, std::hypot(s[1], s[0]));
      if (s[1] > 0.0 && !(detail::x_field(s[0], s[1])[1] < 0.0)) rep.dtheta_negative = false;
    }
    rep.final_r = tx.states.back()[0];
    rep.final_theta = tx.states.back()[1];
    rep.confirmed = rep.final_r == 0.0 && rep.final_theta < 1e-6;
    rep.note = "on the invariant circle: theta converges to 0";
    return rep;
  }

  if (!(detail::x_field(r0, theta0)[1] < 0.0)) {
    // Above the cos^2 = 1/3 ray the angle grows and the comparison argument does not apply.
    rep.dtheta_negative = false;
    rep.min_radius = std::hypot(theta0, r0);
    rep.final_theta = theta0;
    rep.final_r = r0;
    rep.note = "start outside the sector where dtheta/dt < 0";
    return rep;
  }

  // Both orbits as graphs over theta, integrated jointly in s = -theta so the
  // comparison is made at identical angles.
  auto rhs = [](double s, const State2& y) -> State2 {
    const double th = -s;
    const auto dx = detail::x_field(y[0], th);
    const auto dy = detail::y_field(y[1], th);
    return {-dx[0] / dx[1], -dy[0] / dy[1]};
  };
  bool turned = false;
  std::vector<ode::EventSpec<2>> ev{{"r_large", [](double, const State2& y) { return y[0] - 10.0; },
                                     ode::Crossing::Rising, ode::EventAction::Stop}};
  const auto tr = ode::integrate<2>(rhs, State2{r0, r0}, {-theta0, -kThetaStop}, cfg, ev);
  rep.min_radius = std::hypot(theta0, r0);
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const double th = -tr.times[i];
    const auto& y = tr.states[i];
    rep.min_radius = std::min(rep.min_radius, std::hypot(th, y[0]));
    if (th > 0.0 && !(detail::x_field(y[0], th)[1] < 0.0)) turned = true;
    if (y[0] < y[1] * (1.0 - 1e-9) - 1e-12) rep.above_y_orbit = false;
  }
  rep.dtheta_negative = !turned;
  rep.final_theta = -tr.times.back();
  rep.final_r = tr.states.back()[0];
  rep.confirmed = rep.dtheta_negative && rep.above_y_orbit && rep.min_radius > 1e-4;
  rep.note = rep.confirmed ? "orbit stays away from the origin" : "comparison failed";
  return rep;
}

}  // namespace geomflow::blowup
