/**
 * @file portrait.hpp
 * @brief Flow-line diagrams of the planar systems: one polyline through each
 * grid point plus the traced separatrix.
 */
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "geomflow/projective_reduction.hpp"

namespace geomflow::cli {

struct AxisRange {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;

  [[nodiscard]] double at(std::size_t i) const noexcept {
    return count <= 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
};

struct GridSpec {
  AxisRange x;
  AxisRange y;
};

/// "x0:x1:nx,y0:y1:ny". @throws ValidationError on malformed text or inverted ranges.
[[nodiscard]] GridSpec parse_grid(std::string_view text);
[[nodiscard]] GridSpec default_grid(Chart chart) noexcept;

/// Where the forward half of a line ended up.
enum class LineEnd { Origin, EscapeRight, EscapeUp, Saddle, Degenerate, Boundary, Unresolved };
[[nodiscard]] std::string_view to_string(LineEnd e) noexcept;

struct PortraitLine {
  std::size_t id = 0;  ///< 0 is the separatrix, grid lines count from 1 in grid order
  std::vector<State2> points;
  LineEnd forward_end = LineEnd::Unresolved;
};

struct PortraitOptions {
  double box = 20.0;       ///< lines stop when a coordinate leaves [0, box]
  double horizon = 1e6;    ///< rescaled time in each direction
  double spacing = 1e-3;   ///< emitted points are at least this far apart (line ends always kept)
  double rtol = 1e-9;
  double atol = 1e-12;
  unsigned threads = 0;    ///< 0 picks hardware_concurrency
};

/// Points of the grid inside the portrait domain (Ricci b > c > 0; cross curvature a > 0, c > 0), in grid order.
[[nodiscard]] std::vector<std::pair<std::size_t, PlanarPoint>> grid_points(Chart chart, const GridSpec& grid);

/// Traces all lines. Per-line failures are logged and the line is dropped; the result is sorted by id.
[[nodiscard]] std::vector<PortraitLine> compute_portrait(Chart chart, const GridSpec& grid,
                                                         const PortraitOptions& opt = {});

}  // namespace geomflow::cli
