#pragma once

#include <string>

namespace pdl {

// Value kinds. Bool is distinct from Bits<1>; String only appears inside
// assembly definitions and string-returning functions.
enum class Kind { Bits, UInt, SInt, Bool, String };

struct Type {
  Kind kind = Kind::Bits;
  unsigned width = 0;  // Bool has width 1; String has width 0

  bool operator==(const Type&) const = default;

  bool isSigned() const { return kind == Kind::SInt; }
  bool isNumeric() const { return kind == Kind::Bits || kind == Kind::UInt || kind == Kind::SInt; }

  static Type bits(unsigned w) { return {Kind::Bits, w}; }
  static Type uint_(unsigned w) { return {Kind::UInt, w}; }
  static Type sint(unsigned w) { return {Kind::SInt, w}; }
  static Type boolean() { return {Kind::Bool, 1}; }
  static Type string() { return {Kind::String, 0}; }

  std::string str() const;
};

}  // namespace pdl
