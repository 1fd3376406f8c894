#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace hjlab {

/// A real number extended with the two infinities.
///
/// Infinite values are tagged, never stored as IEEE infinities, so that
/// 0 * inf style NaNs cannot leak out of quadrature or DP accumulations.
/// Addition of opposite infinities is rejected.
class ExtendedReal {
 public:
  enum class Kind : std::uint8_t { NegInf, Finite, PosInf };

  constexpr ExtendedReal() = default;
  constexpr ExtendedReal(double v) : value_(v) {}  // NOLINT(implicit)

  static constexpr ExtendedReal pos_inf() { return ExtendedReal(Kind::PosInf); }
  static constexpr ExtendedReal neg_inf() { return ExtendedReal(Kind::NegInf); }

  constexpr Kind kind() const { return kind_; }
  constexpr bool is_finite() const { return kind_ == Kind::Finite; }
  constexpr bool is_pos_inf() const { return kind_ == Kind::PosInf; }
  constexpr bool is_neg_inf() const { return kind_ == Kind::NegInf; }

  /// Finite payload; throws std::logic_error on an infinity.
  double value() const;
  /// Finite payload or +-HUGE_VAL, for printing and plotting only.
  double to_double() const;

  /// "inf", "-inf" or the value with 17 significant digits.
  std::string to_string() const;

  ExtendedReal operator-() const;
  ExtendedReal& operator+=(ExtendedReal rhs);
  friend ExtendedReal operator+(ExtendedReal lhs, ExtendedReal rhs) { return lhs += rhs; }
  friend ExtendedReal operator-(ExtendedReal lhs, ExtendedReal rhs) { return lhs += -rhs; }

  friend std::partial_ordering operator<=>(const ExtendedReal& lhs, const ExtendedReal& rhs);
  friend bool operator==(const ExtendedReal& lhs, const ExtendedReal& rhs);

 private:
  constexpr explicit ExtendedReal(Kind k) : kind_(k) {}

  Kind kind_ = Kind::Finite;
  double value_ = 0.0;
};

ExtendedReal max(ExtendedReal a, ExtendedReal b);
ExtendedReal min(ExtendedReal a, ExtendedReal b);

/// Parses the output of to_string(); also accepts "+inf", "MASKED" as -inf.
ExtendedReal parse_extended_real(const std::string& text);

}  // namespace hjlab
