#include "portrait.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <optional>
#include <thread>

#include <spdlog/spdlog.h>

#include "geomflow/error.hpp"
#include "geomflow/ode_engine.hpp"
#include "geomflow/separatrix_classify.hpp"

namespace geomflow::cli {

namespace {

double parse_number(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(v))
    throw ValidationError("grid: bad " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

AxisRange parse_axis(std::string_view s) {
  const auto p1 = s.find(':');
  const auto p2 = p1 == std::string_view::npos ? p1 : s.find(':', p1 + 1);
  if (p2 == std::string_view::npos) throw ValidationError("grid: expected lo:hi:count, got '" + std::string(s) + "'");
  AxisRange r;
  r.lo = parse_number(s.substr(0, p1), "lower bound");
  r.hi = parse_number(s.substr(p1 + 1, p2 - p1 - 1), "upper bound");
  const auto cnt = s.substr(p2 + 1);
  unsigned long n = 0;
  const auto res = std::from_chars(cnt.data(), cnt.data() + cnt.size(), n);
  if (res.ec != std::errc{} || res.ptr != cnt.data() + cnt.size() || n > 10000)
    throw ValidationError("grid: bad count '" + std::string(cnt) + "'");
  if (r.hi < r.lo) throw ValidationError("grid: upper bound below lower bound");
  r.count = n;
  return r;
}

bool in_portrait_domain(Chart chart, double x, double y) {
  if (chart == Chart::RicciBC) return y > 0.0 && x > y;
  return x > 0.0 && y > 0.0;
}

LineEnd classify_end(Chart chart, const State2& p, double box) {
  if (p[0] >= box) return LineEnd::EscapeRight;
  if (p[1] >= box) return LineEnd::EscapeUp;
  constexpr double near = 1e-3;
  if (std::hypot(p[0], p[1]) < near) return LineEnd::Origin;
  if (chart == Chart::RicciBC && std::hypot(p[0] - 1.0, p[1]) < near) return LineEnd::Saddle;
  if (chart == Chart::XcfAC && std::hypot(p[0], p[1] - 1.0) < near) return LineEnd::Degenerate;
  if (p[0] <= 0.0 || p[1] <= 0.0) return LineEnd::Boundary;
  return LineEnd::Unresolved;
}

ode::Trajectory<2> half_line(Chart chart, const State2& p0, double sign, const PortraitOptions& opt) {
  ode::IntegratorConfig cfg;
  cfg.rtol = opt.rtol;
  cfg.atol = opt.atol;
  cfg.component_floor = 0.0;
  cfg.component_ceiling = 1e13;
  cfg.dense = false;
  const double box = opt.box;
  std::vector<ode::EventSpec<2>> ev{
      {"box", [box](double, const State2& y) { return std::max(y[0], y[1]) - box; }, ode::Crossing::Rising,
       ode::EventAction::Stop}};
  // A line that has settled on an equilibrium would otherwise keep stepping until the horizon.
  for (const auto& eq : find_equilibria(chart)) {
    const double ex = eq.location.x, ey = eq.location.y;
    ev.push_back({"settled", [ex, ey](double, const State2& y) { return std::hypot(y[0] - ex, y[1] - ey) - 1e-8; },
                  ode::Crossing::Falling, ode::EventAction::Stop});
  }
  return ode::integrate<2>(PlanarField{chart, sign}, p0, {0.0, opt.horizon}, cfg, ev);
}

void append_thinned(std::vector<State2>& out, const State2& p, double spacing, bool force) {
  if (!out.empty() && !force && std::hypot(p[0] - out.back()[0], p[1] - out.back()[1]) < spacing) return;
  out.push_back(p);
}

PortraitLine trace_line(Chart chart, std::size_t id, const PlanarPoint& p, const PortraitOptions& opt) {
  const auto fwd = half_line(chart, p.as_array(), 1.0, opt);
  const auto bwd = half_line(chart, p.as_array(), -1.0, opt);
  PortraitLine line;
  line.id = id;
  const auto& b = bwd.states;
  const auto& f = fwd.states;
  for (std::size_t i = b.size(); i-- > 0;) append_thinned(line.points, b[i], opt.spacing, i + 1 == b.size() || i == 0);
  for (std::size_t i = 1; i < f.size(); ++i) append_thinned(line.points, f[i], opt.spacing, i + 1 == f.size());
  line.forward_end = classify_end(chart, fwd.states.back(), opt.box);
  return line;
}

PortraitLine separatrix_line(Chart chart, double box) {
  const auto& sep = default_separatrix(flow_for(chart));
  PortraitLine line;
  line.id = 0;
  for (const auto& s : sep.samples)
    if (s.x <= box && s.y <= box) line.points.push_back(s.as_array());
  // Ordered from the saddle outwards; the flow runs the other way.
  std::reverse(line.points.begin(), line.points.end());
  line.forward_end = chart == Chart::RicciBC ? LineEnd::Saddle : LineEnd::Degenerate;
  return line;
}

}  // namespace

std::string_view to_string(LineEnd e) noexcept {
  switch (e) {
    case LineEnd::Origin: return "origin";
    case LineEnd::EscapeRight: return "escape_right";
    case LineEnd::EscapeUp: return "escape_up";
    case LineEnd::Saddle: return "saddle";
    case LineEnd::Degenerate: return "degenerate";
    case LineEnd::Boundary: return "boundary";
    case LineEnd::Unresolved: return "unresolved";
  }
  return "unresolved";
}

GridSpec parse_grid(std::string_view text) {
  const auto comma = text.find(',');
  if (comma == std::string_view::npos) throw ValidationError("grid: expected 'x0:x1:nx,y0:y1:ny'");
  return {parse_axis(text.substr(0, comma)), parse_axis(text.substr(comma + 1))};
}

GridSpec default_grid(Chart chart) noexcept {
  if (chart == Chart::RicciBC) return {{0.5, 5.0, 10}, {0.25, 4.75, 10}};
  return {{0.1, 2.0, 10}, {0.05, 0.95, 10}};
}

std::vector<std::pair<std::size_t, PlanarPoint>> grid_points(Chart chart, const GridSpec& grid) {
  std::vector<std::pair<std::size_t, PlanarPoint>> pts;
  for (std::size_t i = 0; i < grid.x.count; ++i) {
    for (std::size_t j = 0; j < grid.y.count; ++j) {
      const double x = grid.x.at(i), y = grid.y.at(j);
      if (in_portrait_domain(chart, x, y)) pts.emplace_back(i * grid.y.count + j + 1, PlanarPoint{x, y, chart});
    }
  }
  return pts;
}

std::vector<PortraitLine> compute_portrait(Chart chart, const GridSpec& grid, const PortraitOptions& opt) {
  const auto pts = grid_points(chart, grid);
  std::vector<PortraitLine> out;
  if (pts.empty()) return out;

  std::vector<std::optional<PortraitLine>> slots(pts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < pts.size(); k = next++) {
      try {
        slots[k] = trace_line(chart, pts[k].first, pts[k].second, opt);
      } catch (const std::exception& e) {
        spdlog::warn("portrait: line {} from ({}, {}) failed: {}", pts[k].first, pts[k].second.x, pts[k].second.y,
                     e.what());
      }
    }
  };
  unsigned n = opt.threads != 0 ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, pts.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  try {
    out.push_back(separatrix_line(chart, opt.box));
  } catch (const std::exception& e) {
    spdlog::warn("portrait: separatrix failed: {}", e.what());
  }
  for (auto& s : slots)
    if (s) out.push_back(std::move(*s));
  return out;
}

}  // namespace geomflow::cli
