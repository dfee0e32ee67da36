/**
 * @file milnor_geometry.hpp
 * @brief Curvature of a left-invariant metric on SL(2,R) diagonal in a Milnor frame.
 *
 * Frame convention: [f2,f3] = -2 f1, [f3,f1] = 2 f2, [f1,f2] = 2 f3, and
 * g = A f^1(x)f^1 + B f^2(x)f^2 + C f^3(x)f^3.
 */
#pragma once

#include <array>

namespace geomflow {

/// Positive metric coefficients (A, B, C) in a fixed Milnor frame.
class MetricDiag {
 public:
  /// @throws ValidationError unless all three coefficients are finite and positive.
  MetricDiag(double a, double b, double c);

  [[nodiscard]] double a() const noexcept { return a_; }
  [[nodiscard]] double b() const noexcept { return b_; }
  [[nodiscard]] double c() const noexcept { return c_; }
  [[nodiscard]] double volume() const noexcept { return a_ * (b_ * c_); }  // grouped so the B<->C swap is exact
  [[nodiscard]] std::array<double, 3> as_array() const noexcept { return {a_, b_, c_}; }

  /// The same metric written in the Milnor frame (-f1, f3, f2): swaps B and C.
  [[nodiscard]] MetricDiag swapped_bc() const noexcept { return MetricDiag(a_, c_, b_, Unchecked{}); }
  [[nodiscard]] MetricDiag scaled(double lambda) const;

  friend bool operator==(const MetricDiag&, const MetricDiag&) = default;

 private:
  struct Unchecked {};
  MetricDiag(double a, double b, double c, Unchecked) noexcept : a_(a), b_(b), c_(c) {}
  double a_, b_, c_;
};

struct CurvatureReport {
  std::array<double, 3> k{};      ///< K(f2^f3), K(f3^f1), K(f1^f2)
  std::array<double, 3> f{};      ///< F_i = k_i * ABC
  std::array<double, 3> ricci{};  ///< R_ii = k_j + k_l
  std::array<double, 3> cross{};  ///< h_ii = k_j * k_l
  double scalar = 0.0;            ///< 2 (k1 + k2 + k3)
};

/// Degree-2 polynomials F1, F2, F3 (raw coefficients, no validation; hot path of the flows).
[[nodiscard]] inline std::array<double, 3> f_polynomials(double a, double b, double c) noexcept {
  // Written so that swapping b and c maps F1 to itself and F2 to F3 bit-for-bit.
  const double f1 = -3.0 * a * a + (b * b + c * c) - 2.0 * b * c - 2.0 * a * (b + c);
  const double f2 = a * a - 3.0 * b * b + c * c + 2.0 * b * c + 2.0 * a * (c - b);
  const double f3 = a * a - 3.0 * c * c + b * b + 2.0 * c * b + 2.0 * a * (b - c);
  return {f1, f2, f3};
}

[[nodiscard]] std::array<double, 3> f_polynomials(const MetricDiag& m) noexcept;
[[nodiscard]] std::array<double, 3> sectional_curvatures(const MetricDiag& m) noexcept;
[[nodiscard]] CurvatureReport curvature_report(const MetricDiag& m) noexcept;

}  // namespace geomflow
