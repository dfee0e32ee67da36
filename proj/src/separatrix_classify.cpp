#include "geomflow/separatrix_classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "geomflow/blowup_analysis.hpp"
#include "geomflow/error.hpp"

namespace geomflow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

State2 piece_point(const SeparatrixCurve::Piece& pc, const State2& s) {
  return pc.blowup_chart ? blowup::to_ac({s[0], s[1]}) : s;
}

double param_from(Chart chart, const State2& xy) { return chart == Chart::RicciBC ? xy[0] : xy[1]; }
double value_from(Chart chart, const State2& xy) { return chart == Chart::RicciBC ? xy[1] : xy[0]; }

void fill_params(SeparatrixCurve::Piece& pc, Chart chart) {
  pc.params.clear();
  pc.params.reserve(pc.path.states.size());
  for (const auto& s : pc.path.states) pc.params.push_back(param_from(chart, piece_point(pc, s)));
}

ode::IntegratorConfig trace_config(const SeparatrixOptions& opt, double ceiling) {
  ode::IntegratorConfig cfg;
  cfg.rtol = opt.rtol;
  cfg.atol = opt.atol;
  cfg.component_floor = 0.0;
  cfg.component_ceiling = ceiling;
  return cfg;
}

SeparatrixCurve trace_ricci(const SeparatrixOptions& opt) {
  if (!(opt.delta > 0.0) || !(opt.b_max > 1.0)) throw ValidationError("trace_separatrix: need delta > 0, b_max > 1");
  SeparatrixCurve sc;
  sc.chart = Chart::RicciBC;
  // Stable eigenvector of [[2,-2],[0,-2]] for eigenvalue -2.
  const double n = std::sqrt(5.0);
  sc.tangent_at_saddle = {1.0 / n, 2.0 / n};
  const State2 seed{1.0 + opt.delta / n, 2.0 * opt.delta / n};
  const double b_max = opt.b_max;
  std::vector<ode::EventSpec<2>> ev{{"b_max", [b_max](double, const State2& y) { return y[0] - b_max; },
                                     ode::Crossing::Rising, ode::EventAction::Stop}};
  SeparatrixCurve::Piece pc;
  pc.path = ode::integrate<2>(PlanarField{Chart::RicciBC, -1.0}, seed, {0.0, 1e4},
                              trace_config(opt, std::max(1e13, 10.0 * b_max)), ev);
  if (pc.path.termination != ode::Termination::EventStop)
    throw NumericalError("trace_separatrix: Ricci trace did not reach b_max");
  fill_params(pc, sc.chart);
  sc.pieces.push_back(std::move(pc));
  return sc;
}

SeparatrixCurve trace_xcf(const SeparatrixOptions& opt) {
  if (!(opt.delta > 0.0)) throw ValidationError("trace_separatrix: need delta > 0");
  SeparatrixCurve sc;
  sc.chart = Chart::XcfAC;
  const double ths = blowup::gamma0_saddle_angle();
  const State2 dir = blowup::stable_direction(ths);
  const State2 seed{opt.delta * dir[0], ths + opt.delta * dir[1]};

  // Leave the blow-up circle in the (r, theta) chart, then continue in (a, c).
  constexpr double r_switch = 0.25;
  std::vector<ode::EventSpec<2>> ev1{{"r_switch", [](double, const State2& y) { return y[0] - r_switch; },
                                      ode::Crossing::Rising, ode::EventAction::Stop}};
  SeparatrixCurve::Piece p1;
  p1.blowup_chart = true;
  p1.path = ode::integrate<2>(blowup::FieldX{-1.0}, seed, {0.0, 1e6}, trace_config(opt, 1e13), ev1);
  if (p1.path.termination != ode::Termination::EventStop)
    throw NumericalError("trace_separatrix: blow-up chart trace did not leave the circle");
  fill_params(p1, sc.chart);

  const State2 start = blowup::to_ac({p1.path.states.back()[0], p1.path.states.back()[1]});
  constexpr double c_stop = 1e-10;
  std::vector<ode::EventSpec<2>> ev2{{"c_small", [](double, const State2& y) { return y[1] - c_stop; },
                                      ode::Crossing::Falling, ode::EventAction::Stop}};
  SeparatrixCurve::Piece p2;
  p2.path = ode::integrate<2>(PlanarField{Chart::XcfAC, -1.0}, start, {0.0, 1e6}, trace_config(opt, 1e13), ev2);
  if (p2.path.termination != ode::Termination::EventStop)
    throw NumericalError("trace_separatrix: cross curvature trace did not reach (1,0)");
  fill_params(p2, sc.chart);

  // Tangent at (0,1) in (a, c): the curve leaves along -e_c (a = O((c-1)^2)).
  sc.tangent_at_saddle = {0.0, -1.0};
  sc.pieces.push_back(std::move(p1));
  sc.pieces.push_back(std::move(p2));
  return sc;
}

void finish_curve(SeparatrixCurve& sc) {
  sc.samples.clear();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < sc.pieces.size(); ++k) {
    const auto& pc = sc.pieces[k];
    // Each later piece starts at the previous piece's end point.
    for (std::size_t i = k == 0 ? 0 : 1; i < pc.path.states.size(); ++i) {
      const State2 xy = piece_point(pc, pc.path.states[i]);
      sc.samples.push_back({xy[0], xy[1], sc.chart});
    }
    for (double p : pc.params) {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
  }
  sc.param_min = lo;
  sc.param_max = hi;
}

}  // namespace

double SeparatrixCurve::param_of(const PlanarPoint& p) const noexcept { return param_from(chart, p.as_array()); }

double SeparatrixCurve::value_at(double param) const {
  if (!covers(param)) throw ValidationError("SeparatrixCurve::value_at: parameter outside the traced range");
  for (const auto& pc : pieces) {
    const auto& ps = pc.params;
    if (ps.size() < 2) continue;
    const bool increasing = ps.back() > ps.front();
    const double lo = std::min(ps.front(), ps.back()), hi = std::max(ps.front(), ps.back());
    if (param < lo || param > hi) continue;
    // Node index k with param between ps[k] and ps[k+1].
    std::size_t k;
    if (increasing) {
      k = static_cast<std::size_t>(std::upper_bound(ps.begin(), ps.end(), param) - ps.begin());
    } else {
      k = static_cast<std::size_t>(
          std::upper_bound(ps.begin(), ps.end(), param, [](double v, double e) { return v > e; }) - ps.begin());
    }
    if (k == 0) k = 1;
    if (k >= ps.size()) k = ps.size() - 1;
    const auto& path = pc.path;
    if (ps[k - 1] == param) return value_from(chart, piece_point(pc, path.states[k - 1]));
    if (ps[k] == param) return value_from(chart, piece_point(pc, path.states[k]));
    double t0 = path.times[k - 1], t1 = path.times[k];
    const double sgn = increasing ? 1.0 : -1.0;
    State2 xy = piece_point(pc, path.states[k]);
    for (int it = 0; it < 200 && t1 - t0 > 0.0; ++it) {
      const double tm = 0.5 * (t0 + t1);
      if (tm <= t0 || tm >= t1) break;
      xy = piece_point(pc, path.segments[k - 1].eval(tm));
      if (sgn * (param_from(chart, xy) - param) < 0.0)
        t0 = tm;
      else
        t1 = tm;
    }
    return value_from(chart, xy);
  }
  throw NumericalError("SeparatrixCurve::value_at: parameter not bracketed by any traced piece");
}

double SeparatrixCurve::offset(const PlanarPoint& p) const {
  return value_from(chart, p.as_array()) - value_at(param_of(p));
}

SeparatrixCurve trace_separatrix(Flow flow, const SeparatrixOptions& opt) {
  auto trace = [flow](const SeparatrixOptions& o) {
    SeparatrixCurve sc = flow == Flow::RicciNormalized ? trace_ricci(o) : trace_xcf(o);
    finish_curve(sc);
    return sc;
  };
  SeparatrixCurve sc = trace(opt);
  sc.seed_shift = kNaN;
  if (opt.richardson) {
    SeparatrixOptions fine = opt;
    fine.delta = opt.delta / 10.0;
    fine.richardson = false;
    const SeparatrixCurve sf = trace(fine);
    const double lo = std::max(sc.param_min, sf.param_min), hi = std::min(sc.param_max, sf.param_max);
    double shift = 0.0;
    constexpr int probes = 64;
    for (int i = 1; i < probes; ++i) {
      const double p = lo + (hi - lo) * i / probes;
      shift = std::max(shift, std::abs(sc.value_at(p) - sf.value_at(p)));
    }
    sc.seed_shift = shift;
  }
  return sc;
}

const SeparatrixCurve& default_separatrix(Flow flow) {
  if (flow == Flow::RicciNormalized) {
    static const SeparatrixCurve ricci = trace_separatrix(Flow::RicciNormalized);
    return ricci;
  }
  static const SeparatrixCurve xcf = trace_separatrix(Flow::CrossCurvature);
  return xcf;
}

std::string_view to_string(CaseLabel c) noexcept {
  switch (c) {
    case CaseLabel::Q1: return "Q1";
    case CaseLabel::Q2: return "Q2";
    case CaseLabel::NearS0: return "NearS0";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Power-law fits

namespace {

struct Regression {
  double slope = 0.0, intercept = 0.0, rss = 0.0, se = 0.0;
};

Regression regress(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  Regression r;
  r.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  r.intercept = my - r.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (r.intercept + r.slope * x[i]);
    r.rss += e * e;
  }
  r.se = (x.size() > 2 && sxx > 0.0) ? std::sqrt(r.rss / (n - 2.0) / sxx) : 0.0;
  return r;
}

struct FitProblem {
  std::vector<double> d;                // s_last - s
  std::vector<std::vector<double>> ly;  // log of each series
};

double objective(const FitProblem& fp, double delta) {
  std::vector<double> x(fp.d.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::log(delta + fp.d[i]);
  double total = 0.0;
  for (const auto& y : fp.ly) total += regress(x, y).rss;
  return total;
}

// Golden-section minimization over log(delta) after a coarse scan.
double best_delta(const FitProblem& fp, double lo, double hi) {
  constexpr int scan = 96;
  const double llo = std::log(lo), lhi = std::log(hi);
  std::vector<double> grid(scan + 1), val(scan + 1);
  int best = 0;
  for (int i = 0; i <= scan; ++i) {
    grid[i] = llo + (lhi - llo) * i / scan;
    val[i] = objective(fp, std::exp(grid[i]));
    if (val[i] < val[best]) best = i;
  }
  double a = grid[std::max(best - 1, 0)], b = grid[std::min(best + 1, scan)];
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = objective(fp, std::exp(x1)), f2 = objective(fp, std::exp(x2));
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = objective(fp, std::exp(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = objective(fp, std::exp(x2));
    }
  }
  return std::exp(0.5 * (a + b));
}

FitProblem select(std::span<const double> s, const std::vector<std::vector<double>>& series, double d_max) {
  FitProblem fp;
  fp.ly.resize(series.size());
  const double s_last = s.back();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = s_last - s[i];
    if (d > d_max) continue;
    fp.d.push_back(d);
    for (std::size_t j = 0; j < series.size(); ++j) fp.ly[j].push_back(std::log(series[j][i]));
  }
  return fp;
}

}  // namespace

PowerLawFit fit_power_laws(std::span<const double> s, const std::vector<std::vector<double>>& series,
                           const FitOptions& opt) {
  if (series.empty()) throw ValidationError("fit_power_laws: no observable series");
  if (s.size() < 2) throw ValidationError("fit_power_laws: need at least two samples");
  for (const auto& y : series) {
    if (y.size() != s.size()) throw ValidationError("fit_power_laws: series length mismatch");
    for (double v : y)
      if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("fit_power_laws: observables must be positive");
  }
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i] > s[i - 1])) throw ValidationError("fit_power_laws: sample times must increase");
  if (!(opt.decades > 0.0)) throw ValidationError("fit_power_laws: decades must be positive");

  const double span = s.back() - s.front();
  // Smallest positive distance from the last sample sets the scale of the window.
  const double d_lo = s.back() - s[s.size() - 2];
  const double widen = std::pow(10.0, opt.decades);

  // Pass 1: window measured from the last sample; pass 2: from the fitted T_b.
  FitProblem fp = select(s, series, std::min(span, d_lo * widen));
  if (fp.d.size() < opt.min_samples) throw ValidationError("fit_power_laws: too few tail samples");
  double delta = best_delta(fp, d_lo * 1e-8, std::max(span, d_lo) * 10.0);
  const double d_max = std::min(span, (delta + d_lo) * widen - delta);
  fp = select(s, series, std::max(d_max, d_lo));
  if (fp.d.size() < opt.min_samples) throw ValidationError("fit_power_laws: too few tail samples");
  delta = best_delta(fp, d_lo * 1e-8, std::max(span, d_lo) * 10.0);

  PowerLawFit out;
  out.Tb = s.back() + delta;
  out.samples = fp.d.size();
  std::vector<double> x(fp.d.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::log(delta + fp.d[i]);
  for (const auto& y : fp.ly) {
    const Regression r = regress(x, y);
    out.exponents.push_back(r.slope);
    out.half_widths.push_back(2.0 * r.se);
    out.etas.push_back(std::exp(r.intercept));
    out.rss += r.rss;
  }
  out.tau_min = delta + *std::min_element(fp.d.begin(), fp.d.end());
  out.tau_max = delta + *std::max_element(fp.d.begin(), fp.d.end());
  return out;
}

namespace {

// Samples on a geometric grid of distances s_cut - s, from the last step size
// up to `decades` decades (or the start of the run), plus the node at s_cut.
void geometric_tail(const ode::Trajectory<3>& traj, double s_cut, const FitOptions& opt, std::vector<double>& s,
                    std::vector<State3>& y) {
  if (!traj.has_dense()) throw ValidationError("fit: trajectory needs dense output");
  auto it = std::upper_bound(traj.times.begin(), traj.times.end(), s_cut);
  const auto idx = static_cast<std::size_t>(it - traj.times.begin());
  if (idx < 2) throw ValidationError("fit: too few steps before the cut");
  const double d_lo = std::max(s_cut - traj.times[idx - 2], std::numeric_limits<double>::min());
  const double d_hi = std::min(s_cut - traj.t_begin(), d_lo * std::pow(10.0, opt.decades + 2.0));
  const std::size_t n = std::max<std::size_t>(opt.tail_samples, 2);
  s.clear();
  y.clear();
  for (std::size_t k = n; k-- > 0;) {
    const double d = d_lo * std::pow(d_hi / d_lo, static_cast<double>(k) / static_cast<double>(n - 1));
    const double t = s_cut - d;
    if (!s.empty() && !(t > s.back())) continue;
    s.push_back(t);
    y.push_back(traj.dense_eval(std::max(t, traj.t_begin())));
  }
  s.push_back(s_cut);
  y.push_back(traj.dense_eval(s_cut));
}

}  // namespace

PowerLawFit fit_asymptotics(const ode::Trajectory<3>& traj, const FitOptions& opt) {
  if (!ode::is_blowup(traj.termination))
    throw ValidationError("fit_asymptotics: trajectory did not terminate by blow-up detection");
  std::vector<double> s;
  std::vector<State3> y;
  geometric_tail(traj, traj.t_end(), opt, s, y);
  std::vector<std::vector<double>> series(3, std::vector<double>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i)
    for (int j = 0; j < 3; ++j) series[j][i] = y[i][j];
  return fit_power_laws(s, series, opt);
}

// ---------------------------------------------------------------------------
// Classification

std::array<double, 2> case_guards(Flow flow, const State3& y) noexcept {
  const double a = y[0], b = y[1], c = y[2];
  if (flow == Flow::RicciNormalized) return {a - b, (b - c) - a};
  return {a - (b - c), (2.0 * std::sqrt(b * b - b * c + c * c) - b - c) / 3.0 - a};
}

double saddle_distance(Flow flow, const State3& y) noexcept {
  if (flow == Flow::RicciNormalized) return std::hypot(y[1] / y[0] - 1.0, y[2] / y[0]);
  // Distance to the blow-up saddle (r = 0, theta = theta_s) measured in the (r, theta) chart.
  const double u = std::sqrt(y[0] / y[1]), v = y[2] / y[1] - 1.0;
  return std::hypot(std::hypot(u, v), std::atan2(v, u) - blowup::gamma0_saddle_angle());
}

namespace {

// Step budget for following a run past its trigger; runs that land next to the
// stiff invariant line B = C would otherwise crawl for ~1e12 steps.
constexpr std::int64_t kFollowBudget = 5'000'000;

std::optional<TriggerInfo> trigger_at_start(Flow flow, const State3& y) {
  const auto g = case_guards(flow, y);
  if (g[0] >= 0.0) return TriggerInfo{CaseLabel::Q1, 0.0, y, true};
  const bool q2 = flow == Flow::RicciNormalized ? g[1] >= 0.0 : g[1] > 0.0;
  if (q2) return TriggerInfo{CaseLabel::Q2, 0.0, y, true};
  return std::nullopt;
}

double separatrix_gap(const SeparatrixCurve& sc, const PlanarPoint& p) {
  const double q = sc.param_of(p);
  if (sc.covers(q)) return std::abs(sc.offset(p));
  // Outside the traced range: distance to the nearest traced sample.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : sc.samples) best = std::min(best, std::hypot(s.x - p.x, s.y - p.y));
  return best;
}

}  // namespace

ClassificationReport classify(Flow flow, const MetricDiag& m0, const ClassifyOptions& opt) {
  ClassificationReport rep;
  rep.flow = flow;
  rep.swapped = m0.b() < m0.c();
  rep.initial = rep.swapped ? m0.swapped_bc() : m0;
  const State3 y0 = rep.initial.as_array();
  const double radius = opt.near_s0_radius;

  rep.trigger = trigger_at_start(flow, y0);
  rep.min_saddle_distance = saddle_distance(flow, y0);
  const bool need_run = !rep.trigger || !opt.stop_on_trigger || opt.fit || opt.keep_trajectory;
  if (!need_run) {
    rep.case_label = rep.trigger->side;
    return rep;
  }

  // The step floor is measured against the problem's own time scale so small
  // metrics (short T_b) are resolved as deeply as large ones.
  ode::IntegratorConfig cfg = opt.integrator;
  const FlowField field{{flow, Direction::Backward}};
  const State3 f0 = field(0.0, y0);
  double rate = 0.0;
  for (int i = 0; i < 3; ++i) rate = std::max(rate, std::abs(f0[i] / y0[i]));
  if (rate > 0.0 && std::isfinite(rate)) cfg.h_min = std::min(cfg.h_min, cfg.h_min / rate);

  // Scaling g by lambda rescales time by lambda^-2 (Ricci) or lambda^2 (cross curvature).
  const double scale = std::cbrt(rep.initial.volume());
  const double horizon = opt.horizon * (flow == Flow::RicciNormalized ? 1.0 / (scale * scale) : scale * scale);

  // Phase 1: up to the first trigger.
  ode::Trajectory<3> traj;
  if (rep.trigger) {
    traj.times = {0.0};
    traj.states = {y0};
  } else {
    std::vector<ode::EventSpec<3>> ev;
    ev.push_back({"Q1", [flow](double, const State3& y) { return case_guards(flow, y)[0]; }, ode::Crossing::Rising,
                  ode::EventAction::Stop});
    ev.push_back({"Q2", [flow](double, const State3& y) { return case_guards(flow, y)[1]; }, ode::Crossing::Rising,
                  ode::EventAction::Stop});
    traj = ode::integrate<3>(field, y0, {0.0, horizon}, cfg, ev);
    if (!traj.events.empty()) {
      const auto& e = traj.events.front();
      rep.trigger = TriggerInfo{e.id == "Q1" ? CaseLabel::Q1 : CaseLabel::Q2, e.time, e.state, false};
    }
  }

  std::size_t i_min = 0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double d = saddle_distance(flow, traj.states[i]);
    if (d < rep.min_saddle_distance) {
      rep.min_saddle_distance = d;
      i_min = i;
    }
  }

  if (rep.trigger && (rep.trigger->at_start || !(rep.min_saddle_distance < radius))) {
    rep.case_label = rep.trigger->side;
  } else {
    rep.case_label = CaseLabel::NearS0;
    const auto& y = traj.states[i_min];
    const SeparatrixCurve& sc = opt.separatrix ? *opt.separatrix : default_separatrix(flow);
    rep.separatrix_distance = separatrix_gap(sc, project(chart_for(flow), MetricDiag(y[0], y[1], y[2])));
  }

  // Phase 2: a genuine trigger is followed on to blow-up when asked. A trigger
  // after a close pass of the saddle is numerical departure and is not followed.
  const bool follow = rep.trigger && rep.case_label != CaseLabel::NearS0 && (!opt.stop_on_trigger || opt.fit);
  if (follow) {
    ode::IntegratorConfig cfg2 = cfg;
    cfg2.max_steps = std::min<std::int64_t>(cfg.max_steps, kFollowBudget);
    const double t0 = traj.t_end();
    auto tail = ode::integrate<3>(field, traj.states.back(), {t0, t0 + horizon}, cfg2);
    const bool dense = traj.has_dense() || traj.times.size() == 1;
    traj.times.insert(traj.times.end(), tail.times.begin() + 1, tail.times.end());
    traj.states.insert(traj.states.end(), tail.states.begin() + 1, tail.states.end());
    if (dense) traj.segments.insert(traj.segments.end(), tail.segments.begin(), tail.segments.end());
    traj.steps_accepted += tail.steps_accepted;
    traj.steps_rejected += tail.steps_rejected;
    traj.last_step = tail.last_step;
    traj.termination = tail.termination;
  }
  rep.termination = traj.termination;
  rep.t_end = traj.t_end();
  rep.Tb_estimate = rep.t_end;

  if (opt.fit && ode::is_blowup(traj.termination)) {
    rep.fit = fit_asymptotics(traj);
    rep.Tb_estimate = rep.fit->Tb;
  }
  if (opt.keep_trajectory) rep.trajectory = std::move(traj);
  return rep;
}

// ---------------------------------------------------------------------------
// Case 3

namespace {

// A, B non-decreasing and C non-increasing in forward time, so reversed along a backward run.
bool monotone_backward(std::span<const State3> states) {
  constexpr double slack = 1e-12;
  for (std::size_t i = 1; i < states.size(); ++i) {
    const auto& p = states[i - 1];
    const auto& q = states[i];
    if (q[0] > p[0] * (1.0 + slack) || q[1] > p[1] * (1.0 + slack) || q[2] < p[2] * (1.0 - slack)) return false;
  }
  return true;
}

}  // namespace

Case3Report case3_diagnostics(std::span<const double> s, std::span<const State3> states, Flow flow,
                              const FitOptions& opt) {
  if (s.size() != states.size() || s.empty()) throw ValidationError("case3_diagnostics: bad sample arrays");
  std::vector<std::vector<double>> series;
  if (flow == Flow::RicciNormalized) {
    series.assign(3, std::vector<double>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i)
      for (int j = 0; j < 3; ++j) series[j][i] = states[i][j];
  } else {
    series.assign(2, std::vector<double>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) {
      series[0][i] = states[i][0];
      series[1][i] = states[i][1] - states[i][2];
    }
  }
  const PowerLawFit fit = fit_power_laws(s, series, opt);

  Case3Report rep;
  rep.flow = flow;
  rep.Tb = fit.Tb;
  rep.samples = fit.samples;
  const State3& y = states.back();
  const double tau = fit.Tb - s.back();
  rep.tau_min = tau;
  if (flow == Flow::RicciNormalized) {
    rep.ratio_AB = y[0] / y[1];
    rep.C_over_tau = y[2] / tau;
    rep.A_sqrt_tau = y[0] * std::sqrt(tau);
  } else {
    rep.eta = 0.5 * (y[1] + y[2]);
    rep.diff_over_sqrt = (y[1] - y[2]) / std::sqrt(tau);
    rep.A_eta_over_tau = y[0] * rep.eta / tau;
  }
  rep.monotone = monotone_backward(states);
  return rep;
}

Case3Report case3_diagnostics(const ClassificationReport& rep, const FitOptions& opt) {
  if (rep.case_label != CaseLabel::NearS0) throw ValidationError("case3_diagnostics: report is not NearS0");
  if (!rep.trajectory) throw ValidationError("case3_diagnostics: report carries no trajectory");
  const auto& traj = *rep.trajectory;
  std::size_t i_min = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double d = saddle_distance(rep.flow, traj.states[i]);
    if (d < best) {
      best = d;
      i_min = i;
    }
  }
  std::vector<double> s;
  std::vector<State3> y;
  geometric_tail(traj, traj.times[i_min], opt, s, y);
  Case3Report out = case3_diagnostics(s, y, rep.flow, opt);
  // Monotonicity is a statement about the whole run up to the cut, not just the tail grid.
  out.monotone = monotone_backward(std::span<const State3>(traj.states.data(), i_min + 1));
  return out;
}

// ---------------------------------------------------------------------------
// Bisection and asymptotes

BisectionResult separatrix_bisection(Flow flow, const PlanarPoint& p, const PlanarPoint& q, double tol,
                                     const ClassifyOptions& opt) {
  if (!(tol > 0.0)) throw ValidationError("separatrix_bisection: tolerance must be positive");
  const Chart chart = chart_for(flow);
  if (p.chart != chart || q.chart != chart) throw ValidationError("separatrix_bisection: wrong chart for the flow");
  ClassifyOptions o = opt;
  o.stop_on_trigger = true;
  o.fit = false;
  o.keep_trajectory = false;
  auto side = [&](const PlanarPoint& x) -> std::optional<CaseLabel> {
    const auto r = classify(flow, lift(x), o);
    if (!r.trigger) return std::nullopt;
    return r.trigger->side;
  };
  const auto sp = side(p), sq = side(q);
  if (!sp || !sq) throw NumericalError("separatrix_bisection: an endpoint triggered no case condition");
  if (*sp == *sq) throw ValidationError("separatrix_bisection: both endpoints lie on the same side");

  PlanarPoint lo = p, hi = q;
  BisectionResult res;
  while (std::hypot(hi.x - lo.x, hi.y - lo.y) > tol && res.iterations < 200) {
    const PlanarPoint mid{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y), chart};
    if ((mid.x == lo.x && mid.y == lo.y) || (mid.x == hi.x && mid.y == hi.y)) break;
    const auto sm = side(mid);
    ++res.iterations;
    if (!sm) {
      lo = hi = mid;
      break;
    }
    if (*sm == *sp)
      lo = mid;
    else
      hi = mid;
  }
  res.point = {0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y), chart};
  res.bracket = std::hypot(hi.x - lo.x, hi.y - lo.y);
  return res;
}

AsymptoteResult planar_asymptote(Chart chart, const PlanarPoint& p, AsymptoteAxis axis, double escape) {
  if (!(escape > 0.0) || !std::isfinite(escape)) throw ValidationError("planar_asymptote: escape must be positive");
  const int k = axis == AsymptoteAxis::Horizontal ? 0 : 1;
  // Escaping orbits leave in finite rescaled time, so run until the integrator gives up and
  // read the other coordinate where it stopped.
  ode::IntegratorConfig cfg;
  cfg.component_floor = 0.0;
  cfg.component_ceiling = 1e13;
  ode::Trajectory<2> traj;
  try {
    traj = ode::integrate<2>(PlanarField{chart, 1.0}, p.as_array(), {0.0, 1e3}, cfg);
  } catch (const ode::IntegrationError<2>& e) {
    // Far out the blow-up time drops below h_min; where it got to is still the answer.
    traj = e.partial();
  }
  AsymptoteResult r;
  r.reached = traj.states.back()[k];
  r.limit = traj.states.back()[1 - k];
  r.escaped = r.reached >= escape;
  return r;
}

}  // namespace geomflow
