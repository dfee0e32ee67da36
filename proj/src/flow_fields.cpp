#include "geomflow/flow_fields.hpp"

#include <algorithm>
#include <cmath>

#include "geomflow/error.hpp"

namespace geomflow {

std::string_view to_string(Flow f) noexcept {
  return f == Flow::RicciNormalized ? "ricci" : "xcf";
}

std::string_view to_string(Direction d) noexcept {
  return d == Direction::Forward ? "forward" : "backward";
}

State3 field(FlowSpec spec, const MetricDiag& m) noexcept { return flow_field(spec, m.as_array()); }

FlowTrajectory integrate_flow(FlowSpec spec, const MetricDiag& m0, double duration, const ode::IntegratorConfig& cfg,
                              const std::vector<ode::EventSpec<3>>& events) {
  return {spec, ode::integrate<3>(FlowField{spec}, m0.as_array(), {0.0, duration}, cfg, events)};
}

double conserved_volume_defect(const FlowTrajectory& traj) {
  if (traj.spec.flow != Flow::RicciNormalized)
    throw ValidationError("conserved_volume_defect: only the normalized Ricci flow preserves ABC");
  if (traj.path.states.empty()) throw ValidationError("conserved_volume_defect: empty trajectory");
  const auto& s0 = traj.path.states.front();
  const double v0 = s0[0] * s0[1] * s0[2];
  double worst = 0.0;
  for (const auto& s : traj.path.states) worst = std::max(worst, std::abs(s[0] * s[1] * s[2] - v0) / v0);
  return worst;
}

namespace {

double time_weight(double psi, Flow flow) { return flow == Flow::RicciNormalized ? psi : psi * psi; }

MetricDiag scale_state(const State3& s, double psi) { return MetricDiag(psi * s[0], psi * s[1], psi * s[2]); }

void push_sample(std::vector<RenormalizedSample>& out, double t, const MetricDiag& g) {
  if (!out.empty() && !(t > out.back().t)) {
    out.back().g = g;
    return;
  }
  out.push_back({t, g});
}

}  // namespace

RenormalizedTrajectory renormalize(const ode::Trajectory<3>& traj, std::span<const double> psi, Flow flow) {
  const auto n = traj.times.size();
  if (n == 0) throw ValidationError("renormalize: empty trajectory");
  if (psi.size() != n) throw ValidationError("renormalize: need one psi sample per trajectory node");
  for (double p : psi)
    if (!std::isfinite(p) || !(p > 0.0)) throw ValidationError("renormalize: psi must be positive");

  RenormalizedTrajectory out;
  out.psi_kind = PsiKind::UserSupplied;
  out.samples.reserve(n);
  // Reparametrized time is measured from t = 0 (phi(0) = 0), which may precede the first node.
  double t_new = traj.times[0] * time_weight(psi[0], flow);
  out.samples.push_back({t_new, scale_state(traj.states[0], psi[0])});
  for (std::size_t i = 1; i < n; ++i) {
    const double dt = traj.times[i] - traj.times[i - 1];
    t_new += 0.5 * dt * (time_weight(psi[i - 1], flow) + time_weight(psi[i], flow));
    push_sample(out.samples, t_new, scale_state(traj.states[i], psi[i]));
  }
  return out;
}

RenormalizedTrajectory renormalize_volume(const ode::Trajectory<3>& traj, Flow flow, double target_volume) {
  if (!(target_volume > 0.0) || !std::isfinite(target_volume))
    throw ValidationError("renormalize_volume: target volume must be positive");
  const auto n = traj.times.size();
  if (n == 0) throw ValidationError("renormalize_volume: empty trajectory");
  auto psi_of = [&](const State3& s) { return std::cbrt(target_volume / (s[0] * s[1] * s[2])); };

  RenormalizedTrajectory out;
  out.psi_kind = PsiKind::VolumeNormalizing;
  out.samples.reserve(n);
  double p_prev = psi_of(traj.states[0]);
  double t_new = traj.times[0] * time_weight(p_prev, flow);
  out.samples.push_back({t_new, scale_state(traj.states[0], p_prev)});
  const bool dense = traj.has_dense();
  for (std::size_t i = 1; i < n; ++i) {
    const double dt = traj.times[i] - traj.times[i - 1];
    const double p = psi_of(traj.states[i]);
    if (dense) {
      // Simpson on each step: trapezoid refined by the dense midpoint.
      const double pm = psi_of(traj.segments[i - 1].eval(traj.times[i - 1] + 0.5 * dt));
      t_new += dt / 6.0 * (time_weight(p_prev, flow) + 4.0 * time_weight(pm, flow) + time_weight(p, flow));
    } else {
      t_new += 0.5 * dt * (time_weight(p_prev, flow) + time_weight(p, flow));
    }
    push_sample(out.samples, t_new, scale_state(traj.states[i], p));
    p_prev = p;
  }
  return out;
}

}  // namespace geomflow
