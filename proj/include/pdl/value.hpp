#pragma once

#include <cassert>
#include <cstdint>
#include <string>

namespace pdl {

// A bit vector of up to 64 bits. All arithmetic is two's-complement modulo
// 2^width; `bits` always has the unused high bits cleared.
struct Value {
  uint64_t bits = 0;
  unsigned width = 0;

  bool operator==(const Value&) const = default;
};

inline uint64_t maskOf(unsigned width) {
  assert(width >= 1 && width <= 64);
  return width == 64 ? ~uint64_t{0} : (uint64_t{1} << width) - 1;
}

inline Value makeValue(uint64_t bits, unsigned width) {
  return Value{bits & maskOf(width), width};
}

// Two's-complement reading of the payload.
inline int64_t asSigned(Value v) {
  if (v.width < 64 && (v.bits >> (v.width - 1)) & 1)
    return static_cast<int64_t>(v.bits | ~maskOf(v.width));
  return static_cast<int64_t>(v.bits);
}

inline Value signExtend(Value v, unsigned width) {
  return makeValue(static_cast<uint64_t>(asSigned(v)), width);
}

inline Value zeroExtend(Value v, unsigned width) { return makeValue(v.bits, width); }

// Bits [hi..lo] of v, as a (hi-lo+1)-bit value.
inline Value sliceValue(Value v, unsigned hi, unsigned lo) {
  assert(hi >= lo && hi < v.width);
  return makeValue(v.bits >> lo, hi - lo + 1);
}

// `hi` occupies the most significant bits of the result.
inline Value concatValue(Value hi, Value lo) {
  assert(hi.width + lo.width <= 64);
  return makeValue((hi.bits << lo.width) | lo.bits, hi.width + lo.width);
}

std::string toHex(Value v);     // zero-padded to the value's width
std::string toHex(uint64_t bits, unsigned width);

}  // namespace pdl
