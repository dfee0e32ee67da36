/**
 * @file ode_engine.hpp
 * @brief Adaptive Dormand-Prince 5(4) integration with dense output, event
 * location and blow-up termination.
 *
 * The engine is dimension-templated (the flows here are 3D, the projective and
 * blow-up systems 2D) and takes the vector field as any callable
 * `State<N>(double t, const State<N>& y)` so the hot loop inlines it.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geomflow/error.hpp"

namespace geomflow::ode {

template <std::size_t N>
using State = std::array<double, N>;

enum class Termination { TimeReached, ComponentFloor, ComponentCeiling, StepUnderflow, EventStop, StepBudget };

[[nodiscard]] constexpr std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::TimeReached: return "TimeReached";
    case Termination::ComponentFloor: return "ComponentFloor";
    case Termination::ComponentCeiling: return "ComponentCeiling";
    case Termination::StepUnderflow: return "StepUnderflow";
    case Termination::EventStop: return "EventStop";
    case Termination::StepBudget: return "StepBudget";
  }
  return "Unknown";
}

/// True for the terminations that signal an approach to a finite-time singularity.
[[nodiscard]] constexpr bool is_blowup(Termination t) noexcept {
  return t == Termination::ComponentFloor || t == Termination::ComponentCeiling || t == Termination::StepUnderflow;
}

struct IntegratorConfig {
  double rtol = 1e-10;
  double atol = 1e-12;
  /// 0 selects the automatic starting step.
  double h_init = 0.0;
  double h_min = 1e-16;
  /// A component with |y_i| below the floor terminates the run; 0 disables the check.
  double component_floor = 1e-13;
  double component_ceiling = 1e13;
  std::int64_t max_steps = 100'000'000;
  /// Keep every k-th accepted node (the final node is always kept). Dense output needs 1.
  std::int64_t record_stride = 1;
  bool dense = true;

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(rtol) || !positive(atol)) throw ValidationError("integrator: tolerances must be positive");
    if (!positive(h_min)) throw ValidationError("integrator: h_min must be positive");
    if (h_init != 0.0 && !(positive(h_init) && h_init > h_min))
      throw ValidationError("integrator: h_init must exceed h_min");
    if (!(component_floor >= 0.0) || !positive(component_ceiling) || component_floor >= component_ceiling)
      throw ValidationError("integrator: need 0 <= floor < ceiling");
    if (max_steps <= 0) throw ValidationError("integrator: max_steps must be positive");
    if (record_stride <= 0) throw ValidationError("integrator: record_stride must be positive");
    if (dense && record_stride != 1) throw ValidationError("integrator: dense output requires record_stride == 1");
  }
};

enum class Crossing { Rising, Falling, Any };
enum class EventAction { Record, Stop };

template <std::size_t N>
struct EventSpec {
  std::string id;
  std::function<double(double, const State<N>&)> guard;
  Crossing direction = Crossing::Any;
  EventAction action = EventAction::Record;
};

template <std::size_t N>
struct EventRecord {
  double time = 0.0;
  std::string id;
  State<N> state{};
};

/// Hairer's continuous extension of DOPRI5 over one accepted step.
template <std::size_t N>
struct DenseSegment {
  double t0 = 0.0;
  double h = 0.0;
  std::array<State<N>, 5> coeff{};

  [[nodiscard]] State<N> eval(double t) const noexcept {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    State<N> out;
    for (std::size_t i = 0; i < N; ++i) {
      out[i] = coeff[0][i] + s * (coeff[1][i] + s1 * (coeff[2][i] + s * (coeff[3][i] + s1 * coeff[4][i])));
    }
    return out;
  }
};

template <std::size_t N>
struct Trajectory {
  std::vector<double> times;
  std::vector<State<N>> states;
  /// segments[i] interpolates over [times[i], times[i+1]]; empty when dense output is off.
  std::vector<DenseSegment<N>> segments;
  Termination termination = Termination::TimeReached;
  std::vector<EventRecord<N>> events;
  std::int64_t steps_accepted = 0;
  std::int64_t steps_rejected = 0;
  /// Size of the last accepted step.
  double last_step = 0.0;

  [[nodiscard]] bool has_dense() const noexcept { return !times.empty() && segments.size() + 1 == times.size(); }
  [[nodiscard]] double t_begin() const { return times.front(); }
  [[nodiscard]] double t_end() const { return times.back(); }

  /// Interpolated state; exact at stored nodes.
  [[nodiscard]] State<N> dense_eval(double t) const {
    if (times.empty()) throw ValidationError("dense_eval: empty trajectory");
    if (!(t >= times.front() && t <= times.back())) throw ValidationError("dense_eval: time outside trajectory range");
    auto it = std::lower_bound(times.begin(), times.end(), t);
    const auto idx = static_cast<std::size_t>(it - times.begin());
    if (*it == t) return states[idx];
    if (!has_dense()) throw ValidationError("dense_eval: trajectory was recorded without dense output");
    return segments[idx - 1].eval(t);
  }
};

/// Hard integration failure; carries everything recorded before it.
template <std::size_t N>
class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, Trajectory<N> partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  [[nodiscard]] const Trajectory<N>& partial() const noexcept { return partial_; }

 private:
  Trajectory<N> partial_;
};

struct TimeSpan {
  double start = 0.0;
  double end = 0.0;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                        a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                        a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                        e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// Step controller: PI with safety 0.9 and growth clamp [0.2, 5].
inline constexpr double kSafety = 0.9;
inline constexpr double kFacMin = 0.2;
inline constexpr double kFacMax = 5.0;
inline constexpr double kBeta = 0.04;
inline constexpr double kAlpha = 0.2 - 0.75 * kBeta;

template <std::size_t N>
bool all_finite(const State<N>& y) noexcept {
  for (double v : y)
    if (!std::isfinite(v)) return false;
  return true;
}

template <std::size_t N, class Field>
double initial_step(Field& f, double t0, const State<N>& y0, const State<N>& f0, double span,
                    const IntegratorConfig& cfg) {
  double dnf = 0.0, dny = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double sk = cfg.atol + cfg.rtol * std::abs(y0[i]);
    dnf += (f0[i] / sk) * (f0[i] / sk);
    dny += (y0[i] / sk) * (y0[i] / sk);
  }
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
  h = std::min(h, span);
  State<N> y1;
  for (std::size_t i = 0; i < N; ++i) y1[i] = y0[i] + h * f0[i];
  const State<N> f1 = f(t0 + h, y1);
  double der2 = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double sk = cfg.atol + cfg.rtol * std::abs(y0[i]);
    der2 += ((f1[i] - f0[i]) / sk) * ((f1[i] - f0[i]) / sk);
  }
  der2 = all_finite(f1) ? std::sqrt(der2) / h : std::numeric_limits<double>::infinity();
  const double der12 = std::max(der2, std::sqrt(dnf));
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
  h = std::min({100.0 * h, h1, span});
  return std::max(h, 2.0 * cfg.h_min);
}

inline bool crossed(Crossing dir, double g_old, double g_new) noexcept {
  const bool rise = g_old < 0.0 && g_new >= 0.0;
  const bool fall = g_old > 0.0 && g_new <= 0.0;
  switch (dir) {
    case Crossing::Rising: return rise;
    case Crossing::Falling: return fall;
    case Crossing::Any: return rise || fall;
  }
  return false;
}

}  // namespace detail

/**
 * @brief Integrate y' = f(t, y) over [span.start, span.end] (end > start).
 *
 * Local error per step is held below atol + rtol*|y| in the RMS norm. Events are
 * located by bisection on the dense interpolant; the recorded event time is the
 * first point (to ~1e-12 of the step) at which the guard has crossed. The run
 * stops early on a Stop event, a component leaving [floor, ceiling], a step
 * below h_min or below the resolution of t, or the step budget.
 */
template <std::size_t N, class Field>
Trajectory<N> integrate(Field&& field, const State<N>& y0, TimeSpan span, const IntegratorConfig& cfg,
                        std::span<const EventSpec<N>> events = {}) {
  using namespace detail;
  cfg.validate();
  if (!std::isfinite(span.start) || !std::isfinite(span.end) || !(span.end > span.start))
    throw ValidationError("integrate: time span must satisfy start < end");
  if (!all_finite(y0)) throw ValidationError("integrate: initial state must be finite");

  auto& f = field;
  Trajectory<N> traj;
  traj.times.push_back(span.start);
  traj.states.push_back(y0);

  double t = span.start;
  State<N> y = y0;
  State<N> k1 = f(t, y);
  if (!all_finite(k1)) throw NumericalError("integrate: field is not finite at the initial state");

  std::vector<double> g_prev(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) g_prev[e] = events[e].guard(t, y);

  double h = cfg.h_init > 0.0 ? cfg.h_init : initial_step<N>(f, t, y, k1, span.end - span.start, cfg);
  double err_old = 1e-4;
  bool rejected = false;
  std::int64_t since_record = 0;

  State<N> k2, k3, k4, k5, k6, k7, ytmp, ynew;

  auto finish = [&](Termination why) {
    if (traj.times.back() != t) {
      traj.times.push_back(t);
      traj.states.push_back(y);
    }
    traj.termination = why;
  };

  while (true) {
    if (traj.steps_accepted + traj.steps_rejected >= cfg.max_steps) {
      finish(Termination::StepBudget);
      break;
    }
    bool last = false;
    if (t + 1.01 * h >= span.end) {
      h = span.end - t;
      last = true;
    }
    const double t_new = last ? span.end : t + h;
    const double h_act = t_new - t;
    // A step at the resolution of t itself cannot make progress towards a singularity.
    const bool unresolved = h_act < 8.0 * std::numeric_limits<double>::epsilon() * std::abs(t);
    if (h < cfg.h_min || !(h_act > 0.0) || unresolved) {
      finish(Termination::StepUnderflow);
      break;
    }

    for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + h_act * a21 * k1[i];
    k2 = f(t + c2 * h_act, ytmp);
    for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + h_act * (a31 * k1[i] + a32 * k2[i]);
    k3 = f(t + c3 * h_act, ytmp);
    for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + h_act * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    k4 = f(t + c4 * h_act, ytmp);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + h_act * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    k5 = f(t + c5 * h_act, ytmp);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + h_act * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    k6 = f(t_new, ytmp);
    for (std::size_t i = 0; i < N; ++i)
      ynew[i] = y[i] + h_act * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    k7 = f(t_new, ynew);

    double err = 0.0;
    bool finite = all_finite(ynew) && all_finite(k7);
    if (finite) {
      for (std::size_t i = 0; i < N; ++i) {
        const double e =
            h_act * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sk = cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        err += (e / sk) * (e / sk);
      }
      // A finite trial state whose error norm overflows is just a very bad step.
      err = std::sqrt(err / static_cast<double>(N));
      if (std::isnan(err)) finite = false;
    }
    if (!finite) {
      if (h <= cfg.h_min)
        throw IntegrationError<N>("integrate: non-finite field values at the minimum step size", std::move(traj));
      ++traj.steps_rejected;
      h = std::max(h_act * kFacMin, cfg.h_min);
      rejected = true;
      continue;
    }

    if (err > 1.0) {
      ++traj.steps_rejected;
      h = h_act * std::max(kFacMin, kSafety * std::pow(err, -0.2));
      rejected = true;
      continue;
    }

    // Accepted step.
    ++traj.steps_accepted;
    traj.last_step = h_act;
    DenseSegment<N> seg;
    seg.t0 = t;
    seg.h = h_act;
    for (std::size_t i = 0; i < N; ++i) {
      const double ydiff = ynew[i] - y[i];
      const double bspl = h_act * k1[i] - ydiff;
      seg.coeff[0][i] = y[i];
      seg.coeff[1][i] = ydiff;
      seg.coeff[2][i] = bspl;
      seg.coeff[3][i] = ydiff - h_act * k7[i] - bspl;
      seg.coeff[4][i] = h_act * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
    }

    // Event detection on the accepted step, processed in time order.
    bool stop = false;
    double t_stop = t_new;
    if (!events.empty()) {
      struct Hit {
        double time;
        std::size_t idx;
      };
      std::vector<Hit> hits;
      std::vector<double> g_new(events.size());
      for (std::size_t e = 0; e < events.size(); ++e) {
        g_new[e] = events[e].guard(t_new, ynew);
        if (!crossed(events[e].direction, g_prev[e], g_new[e])) continue;
        double lo = t, hi = t_new;
        const double g_lo = g_prev[e];
        const double tol = std::max(1e-12 * h_act, 4.0 * std::numeric_limits<double>::epsilon() * std::abs(t_new));
        for (int it = 0; it < 200 && hi - lo > tol; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (mid <= lo || mid >= hi) break;
          const double gm = events[e].guard(mid, seg.eval(mid));
          if (crossed(events[e].direction, g_lo, gm))
            hi = mid;
          else
            lo = mid;
        }
        hits.push_back({hi, e});
      }
      std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.time < b.time; });
      for (const Hit& hit : hits) {
        const State<N> ye = hit.time == t_new ? ynew : seg.eval(hit.time);
        traj.events.push_back({hit.time, events[hit.idx].id, ye});
        if (events[hit.idx].action == EventAction::Stop) {
          stop = true;
          t_stop = hit.time;
          break;
        }
      }
      g_prev = std::move(g_new);
    }

    if (stop) {
      t = t_stop;
      y = traj.events.back().state;
      if (cfg.dense) traj.segments.push_back(seg);
      traj.times.push_back(t);
      traj.states.push_back(y);
      traj.termination = Termination::EventStop;
      break;
    }

    t = t_new;
    y = ynew;
    k1 = k7;
    if (++since_record >= cfg.record_stride) {
      since_record = 0;
      if (cfg.dense) traj.segments.push_back(seg);
      traj.times.push_back(t);
      traj.states.push_back(y);
    }

    bool above = false, below = false;
    for (double v : y) {
      above = above || std::abs(v) > cfg.component_ceiling;
      below = below || std::abs(v) < cfg.component_floor;
    }
    if (above) {
      finish(Termination::ComponentCeiling);
      break;
    }
    if (below) {
      finish(Termination::ComponentFloor);
      break;
    }
    if (last) {
      finish(Termination::TimeReached);
      break;
    }

    double fac = err > 0.0 ? kSafety * std::pow(err, -kAlpha) * std::pow(err_old, kBeta) : kFacMax;
    fac = std::clamp(fac, kFacMin, kFacMax);
    if (rejected) fac = std::min(fac, 1.0);
    err_old = std::max(err, 1e-4);
    // From the requested step: h_act can sit a rounding below it, which would push a step clamped at h_min under it.
    h = h * fac;
    rejected = false;
  }
  return traj;
}

/// Convenience overload for event lists held in a vector.
template <std::size_t N, class Field>
Trajectory<N> integrate(Field&& field, const State<N>& y0, TimeSpan span, const IntegratorConfig& cfg,
                        const std::vector<EventSpec<N>>& events) {
  return integrate<N>(std::forward<Field>(field), y0, span, cfg, std::span<const EventSpec<N>>(events));
}

}  // namespace geomflow::ode
