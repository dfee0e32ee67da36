/**
 * @file flow_fields.hpp
 * @brief Right-hand sides of the normalized Ricci flow and the cross curvature
 * flow on SL(2,R) in a Milnor frame, forward and backward, plus the
 * space/time renormalization of a computed trajectory.
 */
#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "geomflow/milnor_geometry.hpp"
#include "geomflow/ode_engine.hpp"

namespace geomflow {

using State3 = ode::State<3>;

enum class Flow { RicciNormalized, CrossCurvature };
enum class Direction { Forward, Backward };

struct FlowSpec {
  Flow flow = Flow::RicciNormalized;
  Direction direction = Direction::Forward;
  friend bool operator==(const FlowSpec&, const FlowSpec&) = default;
};

[[nodiscard]] std::string_view to_string(Flow f) noexcept;
[[nodiscard]] std::string_view to_string(Direction d) noexcept;

namespace detail {

// dX/dt of the forward normalized Ricci flow for the coefficient x, with y the
// coefficient that enters with a minus sign (B <-> C mirror of each other).
// Written in d = x - y: the expanded form cancels x^3 terms and loses everything
// once x ~ y is large, which is exactly where the forward flow goes.
[[nodiscard]] inline double ricci_mirror(double a, double x, double y) noexcept {
  const double d = x - y;
  return (2.0 / 3.0) * x * (a * (a + (y - d)) - d * (2.0 * x + y));
}

}  // namespace detail

/// Raw field evaluation on a coefficient triple; no validation (integrator hot path).
[[nodiscard]] inline State3 flow_field(FlowSpec spec, const State3& y) noexcept {
  const double a = y[0], b = y[1], c = y[2];
  State3 d;
  if (spec.flow == Flow::RicciNormalized) {
    d[0] = (2.0 / 3.0) * (-a * a * (2.0 * a + (b + c)) + a * (b - c) * (b - c));
    d[1] = detail::ricci_mirror(a, b, c);
    d[2] = detail::ricci_mirror(a, c, b);
  } else {
    const auto f = f_polynomials(a, b, c);
    const double vol = a * (b * c);
    const double inv = 1.0 / (vol * vol);
    d[0] = -2.0 * a * (f[1] * f[2]) * inv;
    d[1] = -2.0 * b * (f[2] * f[0]) * inv;
    d[2] = -2.0 * c * (f[0] * f[1]) * inv;
  }
  if (spec.direction == Direction::Backward) {
    for (double& v : d) v = -v;
  }
  return d;
}

/// Callable adaptor for ode::integrate.
struct FlowField {
  FlowSpec spec;
  State3 operator()(double /*t*/, const State3& y) const noexcept { return flow_field(spec, y); }
};

[[nodiscard]] State3 field(FlowSpec spec, const MetricDiag& m) noexcept;

/// A trajectory of one of the 3D flows; time starts at 0 and runs in the spec's direction.
struct FlowTrajectory {
  FlowSpec spec;
  ode::Trajectory<3> path;
};

[[nodiscard]] FlowTrajectory integrate_flow(FlowSpec spec, const MetricDiag& m0, double duration,
                                            const ode::IntegratorConfig& cfg,
                                            const std::vector<ode::EventSpec<3>>& events = {});

/// max |ABC - A0B0C0| / A0B0C0 over the stored samples. Rejects cross curvature trajectories.
[[nodiscard]] double conserved_volume_defect(const FlowTrajectory& traj);

enum class PsiKind { VolumeNormalizing, UserSupplied };

struct RenormalizedSample {
  double t;
  MetricDiag g;
};

struct RenormalizedTrajectory {
  std::vector<RenormalizedSample> samples;
  PsiKind psi_kind = PsiKind::UserSupplied;
};

/**
 * @brief g~ = psi(t) g(t) at new time t~ = int_0^t psi (Ricci) or int_0^t psi^2 (XCF).
 *
 * psi is sampled on the trajectory nodes; the time integral is the composite
 * trapezoid rule on that grid. Near a singularity psi^k dt can drop below the
 * resolution of t~; a node that does not advance t~ overwrites the metric of
 * the previous sample, so samples stay strictly increasing in t~ and the last
 * node is always represented.
 */
[[nodiscard]] RenormalizedTrajectory renormalize(const ode::Trajectory<3>& traj, std::span<const double> psi,
                                                 Flow flow);

/// Renormalization with psi = (target/ABC)^(1/3); uses the dense midpoint of each step when available.
[[nodiscard]] RenormalizedTrajectory renormalize_volume(const ode::Trajectory<3>& traj, Flow flow,
                                                        double target_volume = 4.0);

}  // namespace geomflow
