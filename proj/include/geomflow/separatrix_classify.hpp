/**
 * @file separatrix_classify.hpp
 * @brief Separatrices of the projectivized backward flows, classification of
 * initial metrics into the generic blow-up cases, and power-law fits of the
 * blow-up asymptotics.
 *
 * Ricci: gamma is the stable manifold of the saddle (1,0) of the (b,c) system,
 * the graph c = phi(b) over [1, b_max]. Cross curvature: gamma0 is the stable
 * manifold of the blow-up saddle at cos^2 = 1/3, sin < 0, which leaves (0,1)
 * tangent to a = (c-1)^2/2 and ends at the repelling node (1,0); it is the
 * graph a = a_gamma(c) over (0,1).
 */
#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geomflow/flow_fields.hpp"
#include "geomflow/milnor_geometry.hpp"
#include "geomflow/ode_engine.hpp"
#include "geomflow/projective_reduction.hpp"

namespace geomflow {

struct SeparatrixOptions {
  double delta = 1e-8;       ///< seed offset from the saddle along the stable eigendirection
  double b_max = 1e3;        ///< Ricci: trace until b reaches this value
  double rtol = 1e-13;
  double atol = 1e-15;
  bool richardson = true;    ///< re-trace from delta/10 and record the curve shift
};

/**
 * @brief A traced separatrix. The curve is a graph over its parameter (b for
 * Ricci, c for cross curvature) and is evaluated from the dense output of the
 * tracing runs, so value_at() carries integration accuracy, not sampling accuracy.
 */
class SeparatrixCurve {
 public:
  struct Piece {
    ode::Trajectory<2> path;
    bool blowup_chart = false;  ///< states are {r, theta} and map through blowup::to_ac
    std::vector<double> params; ///< graph parameter at each node
  };

  Chart chart = Chart::RicciBC;
  std::vector<PlanarPoint> samples;  ///< ordered away from the saddle
  State2 tangent_at_saddle{};        ///< unit tangent in the chart at the saddle end
  double param_min = 0.0;
  double param_max = 0.0;
  /// Max |value difference| between the delta and delta/10 traces on a probe grid (NaN when not checked).
  double seed_shift = 0.0;

  /// phi(b) for Ricci, a_gamma(c) for cross curvature. @throws ValidationError outside the parameter range.
  [[nodiscard]] double value_at(double param) const;
  [[nodiscard]] bool covers(double param) const noexcept { return param >= param_min && param <= param_max; }
  /// Graph parameter of a planar point (b or c).
  [[nodiscard]] double param_of(const PlanarPoint& p) const noexcept;
  /// Signed vertical offset from the curve: c - phi(b) (Ricci) or a - a_gamma(c) (cross curvature).
  [[nodiscard]] double offset(const PlanarPoint& p) const;

  std::vector<Piece> pieces;
};

[[nodiscard]] SeparatrixCurve trace_separatrix(Flow flow, const SeparatrixOptions& opt = {});

/// Separatrix traced once per flow with default options (thread-safe lazy init).
[[nodiscard]] const SeparatrixCurve& default_separatrix(Flow flow);

enum class CaseLabel { Q1, Q2, NearS0 };
[[nodiscard]] std::string_view to_string(CaseLabel c) noexcept;

struct PowerLawFit {
  double Tb = 0.0;
  std::vector<double> exponents;
  std::vector<double> half_widths;  ///< 2 standard errors of each slope
  std::vector<double> etas;         ///< exp(intercept) of each log-log regression
  double tau_min = 0.0;             ///< window of T_b - s actually used
  double tau_max = 0.0;
  std::size_t samples = 0;
  double rss = 0.0;
};

struct FitOptions {
  double decades = 10.0;        ///< width of the tail window in decades of T_b - s
  std::size_t tail_samples = 400;
  std::size_t min_samples = 50;
};

/**
 * @brief Joint fit of T_b and log y_j = log eta_j + p_j log(T_b - s) for each
 * observable series. T_b = s_last + delta with delta found by a coarse scan
 * followed by golden-section search on log delta.
 * @throws ValidationError for mismatched sizes, non-positive observables, or
 * fewer than min_samples tail samples.
 */
[[nodiscard]] PowerLawFit fit_power_laws(std::span<const double> s, const std::vector<std::vector<double>>& series,
                                         const FitOptions& opt = {});

/// fit_power_laws on (A, B, C) sampled geometrically towards the end of a blow-up run.
[[nodiscard]] PowerLawFit fit_asymptotics(const ode::Trajectory<3>& traj, const FitOptions& opt = {});

struct TriggerInfo {
  CaseLabel side = CaseLabel::Q1;  ///< which condition fired (Q1 or Q2)
  double time = 0.0;
  State3 state{};
  bool at_start = false;
};

struct ClassifyOptions {
  ode::IntegratorConfig integrator{};
  bool stop_on_trigger = true;   ///< false integrates on to blow-up (needed for fitting)
  bool fit = false;
  bool keep_trajectory = false;
  /// saddle_distance() below which a later trigger counts as numerical departure from the
  /// separatrix (label NearS0). 0 keeps the strict rule: NearS0 only without any trigger.
  double near_s0_radius = 0.0;
  double horizon = 1e6;  ///< backward time limit, in the time units of the rescaled metric with ABC = 1
  const SeparatrixCurve* separatrix = nullptr;  ///< used for NearS0 distances; default_separatrix() if null
};

struct ClassificationReport {
  Flow flow = Flow::RicciNormalized;
  MetricDiag initial{1.0, 1.0, 1.0};  ///< canonical initial metric (B >= C)
  bool swapped = false;
  CaseLabel case_label = CaseLabel::NearS0;
  std::optional<TriggerInfo> trigger;
  ode::Termination termination = ode::Termination::TimeReached;
  double t_end = 0.0;
  double Tb_estimate = 0.0;           ///< fitted when a fit ran, else the last integration time
  double min_saddle_distance = 0.0;   ///< closest planar approach to the distinguished saddle
  double separatrix_distance = 0.0;   ///< |offset| from the separatrix at the closest approach (NearS0 only)
  std::optional<PowerLawFit> fit;
  std::optional<ode::Trajectory<3>> trajectory;
};

/**
 * @brief Integrates the backward flow from m0 (B, C swapped if B < C) with the
 * case conditions as events and labels the outcome.
 *
 * Ricci: Q1 when A - B >= 0, Q2 when (B - C) - A >= 0. Cross curvature: Q1 when
 * A - (B - C) >= 0, Q2 when (2 sqrt(B^2 - BC + C^2) - B - C)/3 - A > 0. NearS0
 * when neither fires before blow-up, or (near_s0_radius > 0) when the first
 * trigger happens only after the orbit came within near_s0_radius of the saddle.
 */
[[nodiscard]] ClassificationReport classify(Flow flow, const MetricDiag& m0, const ClassifyOptions& opt = {});

/// Value of the two case guards (g1 >= 0 means Q1, g2 >= 0 (Ricci) or > 0 (XCF) means Q2).
[[nodiscard]] std::array<double, 2> case_guards(Flow flow, const State3& y) noexcept;

/// Distance to the distinguished saddle: |(b,c) - (1,0)| for Ricci; for cross curvature hypot(r, theta -
/// theta_s) in the blow-up chart u = sqrt(a) = r cos theta, c - 1 = r sin theta.
[[nodiscard]] double saddle_distance(Flow flow, const State3& y) noexcept;

struct Case3Report {
  Flow flow = Flow::RicciNormalized;
  double Tb = 0.0;
  double tau_min = 0.0;     ///< smallest T_b - s at which the limits were read
  std::size_t samples = 0;
  // Ricci
  double ratio_AB = 0.0;    ///< A / B
  double C_over_tau = 0.0;  ///< C / (T_b - s), expected 32/3
  double A_sqrt_tau = 0.0;  ///< A sqrt(T_b - s), expected sqrt(6)/4
  // Cross curvature
  double eta = 0.0;             ///< (B + C) / 2
  double diff_over_sqrt = 0.0;  ///< (B - C) / sqrt(T_b - s), expected 8 sqrt(2)
  double A_eta_over_tau = 0.0;  ///< A eta / (T_b - s), expected 64
  /// A, B non-decreasing and C non-increasing in forward time, i.e. A, B non-increasing and
  /// C non-decreasing along the backward run (the cross curvature case-3 statement).
  bool monotone = true;
};

/// The case-3 orbit only settles into its power laws close to the saddle, so the window is narrower.
[[nodiscard]] inline FitOptions case3_fit_options() noexcept { return FitOptions{3.0, 400, 50}; }

/**
 * @brief Case-3 limits on a run that follows the separatrix. Uses the part of
 * the run up to the closest approach to the saddle; T_b comes from a power-law
 * fit of (A, B, C) (Ricci) or (A, B - C) (cross curvature) on that part.
 * @throws ValidationError if the report is not NearS0 or carries no trajectory.
 */
[[nodiscard]] Case3Report case3_diagnostics(const ClassificationReport& rep, const FitOptions& opt = case3_fit_options());

/// Same diagnostics on raw samples (all of them are used).
[[nodiscard]] Case3Report case3_diagnostics(std::span<const double> s, std::span<const State3> states, Flow flow,
                                            const FitOptions& opt = case3_fit_options());

struct BisectionResult {
  PlanarPoint point;
  double bracket = 0.0;
  int iterations = 0;
};

/**
 * @brief Bisects the planar segment [p, q] (lifted with volume 4) until the
 * bracket between a Q1 and a Q2 end is below tol.
 * @throws ValidationError if both ends trigger the same condition.
 */
[[nodiscard]] BisectionResult separatrix_bisection(Flow flow, const PlanarPoint& p, const PlanarPoint& q,
                                                   double tol = 1e-10, const ClassifyOptions& opt = {});

enum class AsymptoteAxis { Horizontal, Vertical };

struct AsymptoteResult {
  double limit = 0.0;   ///< c_inf (horizontal) or a_inf (vertical)
  double reached = 0.0; ///< value of the escaping coordinate where integration stopped
  bool escaped = false;
};

/**
 * @brief Follows the forward planar flow from p until the integrator stops and
 * returns the other coordinate where it stopped (a hard integration failure
 * counts as stopping there). The orbit counts as escaped
 * when the escaping coordinate (x for Horizontal, y for Vertical) got past `escape`.
 */
[[nodiscard]] AsymptoteResult planar_asymptote(Chart chart, const PlanarPoint& p, AsymptoteAxis axis,
                                               double escape = 1e3);

}  // namespace geomflow
