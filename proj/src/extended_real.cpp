#include "hjlab/extended_real.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace hjlab {

double ExtendedReal::value() const {
  if (kind_ != Kind::Finite) {
    throw std::logic_error("ExtendedReal::value() called on an infinite value");
  }
  return value_;
}

double ExtendedReal::to_double() const {
  switch (kind_) {
    case Kind::PosInf:
      return HUGE_VAL;
    case Kind::NegInf:
      return -HUGE_VAL;
    case Kind::Finite:
      break;
  }
  return value_;
}

std::string ExtendedReal::to_string() const {
  if (kind_ == Kind::PosInf) return "inf";
  if (kind_ == Kind::NegInf) return "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value_);
  return buf;
}

ExtendedReal ExtendedReal::operator-() const {
  switch (kind_) {
    case Kind::PosInf:
      return neg_inf();
    case Kind::NegInf:
      return pos_inf();
    case Kind::Finite:
      break;
  }
  return ExtendedReal(-value_);
}

ExtendedReal& ExtendedReal::operator+=(ExtendedReal rhs) {
  if (kind_ == Kind::Finite && rhs.kind_ == Kind::Finite) {
    value_ += rhs.value_;
    return *this;
  }
  if ((kind_ == Kind::PosInf && rhs.kind_ == Kind::NegInf) ||
      (kind_ == Kind::NegInf && rhs.kind_ == Kind::PosInf)) {
    throw std::domain_error("ExtendedReal: inf + (-inf) is undefined");
  }
  if (kind_ == Kind::Finite) {
    kind_ = rhs.kind_;
  }
  value_ = 0.0;
  return *this;
}

std::partial_ordering operator<=>(const ExtendedReal& lhs, const ExtendedReal& rhs) {
  if (lhs.kind_ != rhs.kind_) {
    return static_cast<int>(lhs.kind_) <=> static_cast<int>(rhs.kind_);
  }
  if (lhs.kind_ != ExtendedReal::Kind::Finite) return std::partial_ordering::equivalent;
  return lhs.value_ <=> rhs.value_;
}

bool operator==(const ExtendedReal& lhs, const ExtendedReal& rhs) {
  return (lhs <=> rhs) == std::partial_ordering::equivalent;
}

ExtendedReal max(ExtendedReal a, ExtendedReal b) { return (a < b) ? b : a; }
ExtendedReal min(ExtendedReal a, ExtendedReal b) { return (b < a) ? b : a; }

ExtendedReal parse_extended_real(const std::string& text) {
  if (text == "inf" || text == "+inf") return ExtendedReal::pos_inf();
  if (text == "-inf" || text == "MASKED") return ExtendedReal::neg_inf();
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size() || !std::isfinite(v)) {
    throw std::invalid_argument("not an extended real: '" + text + "'");
  }
  return ExtendedReal(v);
}

}  // namespace hjlab
