#include "geomflow/projective_reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geomflow/error.hpp"

namespace geomflow {

std::string_view to_string(Chart c) noexcept { return c == Chart::RicciBC ? "ricci_bc" : "xcf_ac"; }

Chart chart_for(Flow f) noexcept { return f == Flow::RicciNormalized ? Chart::RicciBC : Chart::XcfAC; }

Flow flow_for(Chart c) noexcept { return c == Chart::RicciBC ? Flow::RicciNormalized : Flow::CrossCurvature; }

std::string_view to_string(EquilibriumKind k) noexcept {
  switch (k) {
    case EquilibriumKind::Attracting: return "attracting";
    case EquilibriumKind::Repelling: return "repelling";
    case EquilibriumKind::Saddle: return "saddle";
    case EquilibriumKind::Degenerate: return "degenerate";
  }
  return "unknown";
}

bool PlanarPoint::in_domain() const noexcept {
  if (chart == Chart::RicciBC) return x > y && y > 0.0 && std::isfinite(x);
  return x > 0.0 && y > 0.0 && y < 1.0 && std::isfinite(x);
}

PlanarPoint project(Chart chart, const MetricDiag& m) noexcept {
  if (chart == Chart::RicciBC) return {m.b() / m.a(), m.c() / m.a(), chart};
  return {m.a() / m.b(), m.c() / m.b(), chart};
}

MetricDiag lift(const PlanarPoint& p, double volume) {
  if (!(p.x > 0.0) || !(p.y > 0.0) || !std::isfinite(p.x) || !std::isfinite(p.y))
    throw ValidationError("lift: planar coordinates must be positive");
  if (!(volume > 0.0) || !std::isfinite(volume)) throw ValidationError("lift: volume must be positive");
  const double base = std::cbrt(volume / (p.x * p.y));
  if (p.chart == Chart::RicciBC) return MetricDiag(base, p.x * base, p.y * base);
  return MetricDiag(p.x * base, base, p.y * base);
}

Mat2 planar_jacobian(Chart chart, const State2& p) noexcept {
  const double x = p[0], y = p[1];
  if (chart == Chart::RicciBC) {
    const double b = x, c = y;
    return {{{3.0 * b * b - 2.0 * b * c - c - 1.0, -b * b - b}, {-c * c - c, 3.0 * c * c - 2.0 * b * c - b - 1.0}}};
  }
  const double a = x, c = y;
  const double phi1 = -3.0 * a * a + 1.0 + c * c - 2.0 * c - 2.0 * a * c - 2.0 * a;
  const double phi3 = -3.0 * c * c + a * a + 1.0 + 2.0 * c - 2.0 * a * c + 2.0 * a;
  const double y11 = (3.0 * a * a + 2.0 * a * c + c - 1.0) * phi3 + 2.0 * a * (a + 1.0) * (a + c - 1.0) * (a - c + 1.0);
  const double y12 = a * (a + 1.0) * (phi3 + 2.0 * (a + c - 1.0) * (-3.0 * c + 1.0 - a));
  const double y21 = -c * (1.0 - c) * (phi1 - 2.0 * (a + c + 1.0) * (3.0 * a + c + 1.0));
  const double y22 =
      (3.0 * c * c + 2.0 * a * c - a - 1.0) * phi1 - 2.0 * c * (1.0 - c) * (a + c + 1.0) * (c - 1.0 - a);
  return {{{y11, y12}, {y21, y22}}};
}

State2 induced_planar_velocity(Chart chart, const MetricDiag& m) noexcept {
  const Flow flow = flow_for(chart);
  const State3 d = field({flow, Direction::Backward}, m);
  const double la = d[0] / m.a(), lb = d[1] / m.b(), lc = d[2] / m.c();
  const PlanarPoint p = project(chart, m);
  if (chart == Chart::RicciBC) return {p.x * (lb - la), p.y * (lc - la)};
  return {p.x * (la - lb), p.y * (lc - lb)};
}

std::array<std::complex<double>, 2> eigenvalues(const Mat2& j) noexcept {
  const double tr = j[0][0] + j[1][1];
  const double det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
  const double disc = 0.25 * tr * tr - det;
  const std::complex<double> root = std::sqrt(std::complex<double>(disc, 0.0));
  return {0.5 * tr + root, 0.5 * tr - root};
}

EquilibriumKind classify_eigenvalues(const std::array<std::complex<double>, 2>& ev) noexcept {
  const double r0 = ev[0].real(), r1 = ev[1].real();
  if (r0 == 0.0 || r1 == 0.0) return EquilibriumKind::Degenerate;
  if (r0 < 0.0 && r1 < 0.0) return EquilibriumKind::Attracting;
  if (r0 > 0.0 && r1 > 0.0) return EquilibriumKind::Repelling;
  return EquilibriumKind::Saddle;
}

std::vector<EquilibriumReport> find_equilibria(Chart chart) {
  std::vector<PlanarPoint> points;
  if (chart == Chart::RicciBC)
    points = {{0.0, 0.0, chart}, {1.0, 0.0, chart}};
  else
    points = {{0.0, 0.0, chart}, {1.0, 0.0, chart}, {0.0, 1.0, chart}};
  std::vector<EquilibriumReport> out;
  for (const auto& p : points) {
    EquilibriumReport r;
    r.location = p;
    r.jacobian = planar_jacobian(chart, p.as_array());
    r.eigenvalues = eigenvalues(r.jacobian);
    r.kind = classify_eigenvalues(r.eigenvalues);
    out.push_back(r);
  }
  return out;
}

namespace {

struct Polyline {
  std::vector<State2> pts;
  std::vector<double> arc;  // cumulative arc length

  void push(const State2& p) {
    if (pts.empty()) {
      arc.push_back(0.0);
    } else {
      arc.push_back(arc.back() + std::hypot(p[0] - pts.back()[0], p[1] - pts.back()[1]));
    }
    pts.push_back(p);
  }

  void truncate(double length) {
    auto it = std::upper_bound(arc.begin(), arc.end(), length);
    auto keep = static_cast<std::size_t>(it - arc.begin());
    if (keep >= pts.size()) return;
    const State2 a = pts[keep - 1], b = pts[keep];
    const double seg = arc[keep] - arc[keep - 1];
    const double s = seg > 0.0 ? (length - arc[keep - 1]) / seg : 0.0;
    pts.resize(keep);
    arc.resize(keep);
    push({a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])});
  }
};

double point_segment_distance(const State2& p, const State2& a, const State2& b) {
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  double s = len2 > 0.0 ? ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return std::hypot(p[0] - (a[0] + s * dx), p[1] - (a[1] + s * dy));
}

// One-sided distance sup_{p in from} dist(p, to), searching segments of `to` near the same arc length.
double directed_distance(const Polyline& from, const Polyline& to, double window) {
  double worst = 0.0;
  for (std::size_t i = 0; i < from.pts.size(); ++i) {
    const double s = from.arc[i];
    auto lo = std::lower_bound(to.arc.begin(), to.arc.end(), s - window);
    auto hi = std::upper_bound(to.arc.begin(), to.arc.end(), s + window);
    std::size_t j0 = lo == to.arc.begin() ? 0 : static_cast<std::size_t>(lo - to.arc.begin()) - 1;
    std::size_t j1 = std::min(static_cast<std::size_t>(hi - to.arc.begin()), to.pts.size() - 1);
    double best = std::numeric_limits<double>::infinity();
    if (to.pts.size() == 1) best = std::hypot(from.pts[i][0] - to.pts[0][0], from.pts[i][1] - to.pts[0][1]);
    for (std::size_t j = j0; j < j1; ++j)
      best = std::min(best, point_segment_distance(from.pts[i], to.pts[j], to.pts[j + 1]));
    worst = std::max(worst, best);
  }
  return worst;
}

// Sub-samples per step. The comparison sees the chord sagitta of the sampled
// polylines, which falls like 1/kSub^2; at 8 it dominated the orbit deviation.
constexpr int kSub = 64;

template <class ToPlane>
Polyline sample_dense(const ode::Trajectory<3>& tr, ToPlane&& to_plane, double box) {
  Polyline line;
  auto inside = [box](const State2& p) { return std::abs(p[0]) <= box && std::abs(p[1]) <= box; };
  for (std::size_t i = 0; i + 1 < tr.times.size(); ++i) {
    for (int k = 0; k < kSub; ++k) {
      const double t = tr.times[i] + (tr.times[i + 1] - tr.times[i]) * k / kSub;
      const State2 p = to_plane(k == 0 ? tr.states[i] : tr.segments[i].eval(t));
      if (!inside(p)) return line;
      line.push(p);
    }
  }
  const State2 last = to_plane(tr.states.back());
  if (inside(last)) line.push(last);
  return line;
}

Polyline sample_dense(const ode::Trajectory<2>& tr, double box) {
  Polyline line;
  auto inside = [box](const State2& p) { return std::abs(p[0]) <= box && std::abs(p[1]) <= box; };
  for (std::size_t i = 0; i + 1 < tr.times.size(); ++i) {
    for (int k = 0; k < kSub; ++k) {
      const double t = tr.times[i] + (tr.times[i + 1] - tr.times[i]) * k / kSub;
      const State2 p = k == 0 ? tr.states[i] : tr.segments[i].eval(t);
      if (!inside(p)) return line;
      line.push(p);
    }
  }
  if (inside(tr.states.back())) line.push(tr.states.back());
  return line;
}

}  // namespace

OrbitComparison orbit_correspondence_check(Flow flow, const MetricDiag& m0, const ode::IntegratorConfig& cfg,
                                           double box) {
  const Chart chart = chart_for(flow);
  const PlanarPoint p0 = project(chart, m0);
  if (!p0.in_domain()) throw ValidationError("orbit_correspondence_check: initial metric projects outside the chart domain");

  auto to_plane = [chart](const State3& s) {
    return chart == Chart::RicciBC ? State2{s[1] / s[0], s[2] / s[0]} : State2{s[0] / s[1], s[2] / s[1]};
  };
  auto leaves_box = [box, to_plane](double, const State3& s) {
    const State2 p = to_plane(s);
    return std::max(std::abs(p[0]), std::abs(p[1])) - 2.0 * box;
  };
  const std::vector<ode::EventSpec<3>> ev3{{"box", leaves_box, ode::Crossing::Rising, ode::EventAction::Stop}};
  const auto tr3 = ode::integrate<3>(FlowField{{flow, Direction::Backward}}, m0.as_array(), {0.0, 1e6}, cfg, ev3);

  ode::IntegratorConfig pcfg = cfg;
  pcfg.component_floor = 0.0;
  auto leaves_box2 = [box](double, const State2& p) { return std::max(std::abs(p[0]), std::abs(p[1])) - 2.0 * box; };
  const std::vector<ode::EventSpec<2>> ev2{{"box", leaves_box2, ode::Crossing::Rising, ode::EventAction::Stop}};
  auto near_rest = [chart](double, const State2& p) {
    const auto d = planar_field(chart, p);
    return std::hypot(d[0], d[1]) - 1e-14;
  };
  std::vector<ode::EventSpec<2>> ev2b = ev2;
  ev2b.push_back({"rest", near_rest, ode::Crossing::Falling, ode::EventAction::Stop});
  const auto tr2 = ode::integrate<2>(PlanarField{chart, 1.0}, p0.as_array(), {0.0, 1e4}, pcfg, ev2b);

  Polyline a = sample_dense(tr3, to_plane, box);
  Polyline b = sample_dense(tr2, box);
  if (a.pts.size() < 2 || b.pts.size() < 2) throw NumericalError("orbit_correspondence_check: orbit too short to compare");
  const double common = std::min(a.arc.back(), b.arc.back());
  a.truncate(common);
  b.truncate(common);
  const double window = 1e-2 * common + 1e-9;
  OrbitComparison out;
  out.deviation = std::max(directed_distance(a, b, window), directed_distance(b, a, window));
  out.common_length = common;
  out.samples_3d = a.pts.size();
  out.samples_planar = b.pts.size();
  return out;
}

}  // namespace geomflow
