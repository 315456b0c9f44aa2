#include <fmt/format.h>

#include "pdl/diag.hpp"
#include "pdl/frontend.hpp"
#include "pdl/type.hpp"
#include "pdl/value.hpp"

namespace pdl {

const char* codeName(Code c) {
  switch (c) {
    case Code::SyntaxError: return "SyntaxError";
    case Code::MacroTypeError: return "MacroTypeError";
    case Code::MacroRecursionError: return "MacroRecursionError";
    case Code::UnknownModel: return "UnknownModel";
    case Code::NameError: return "NameError";
    case Code::TypeError: return "TypeError";
    case Code::FormatOverlapError: return "FormatOverlapError";
    case Code::WriteBeforeReadError: return "WriteBeforeReadError";
    case Code::DoubleWriteError: return "DoubleWriteError";
    case Code::UnsupportedFeature: return "UnsupportedFeature";
    case Code::EncodingWidthError: return "EncodingWidthError";
    case Code::AmbiguityError: return "AmbiguityError";
    case Code::DuplicatePatternError: return "DuplicatePatternError";
    case Code::MissingOperand: return "MissingOperand";
    case Code::DomainTooLarge: return "DomainTooLarge";
    case Code::NonInjective: return "NonInjective";
    case Code::ParseError: return "ParseError";
    case Code::NoMatchingInstruction: return "NoMatchingInstruction";
    case Code::OperandRangeError: return "OperandRangeError";
    case Code::PredicateViolation: return "PredicateViolation";
    case Code::UnknownInstructionWord: return "UnknownInstructionWord";
    case Code::AddressOverflow: return "AddressOverflow";
    case Code::InvalidInstruction: return "InvalidInstruction";
    case Code::MisalignedFetch: return "MisalignedFetch";
    case Code::DoubleWriteFault: return "DoubleWriteFault";
    case Code::ResidualSemanticsError: return "ResidualSemanticsError";
    case Code::NotReadyError: return "NotReadyError";
    case Code::UnsupportedMapping: return "UnsupportedMapping";
    case Code::PortConflict: return "PortConflict";
    case Code::DivergenceError: return "DivergenceError";
    case Code::MaxCycles: return "MaxCycles";
    case Code::IoError: return "IoError";
  }
  return "Error";
}

std::string Diag::render(const std::string& file) const {
  std::string loc;
  if (!file.empty()) loc += file + ":";
  if (span.line > 0) loc += fmt::format("{}:{}:", span.line, span.col);
  if (!loc.empty()) loc += " ";
  return fmt::format("{}error: {}: {}", loc, codeName(code), message);
}

std::string SpecError::summarize(const std::vector<Diag>& all) {
  std::string s = fmt::format("{}: {}", codeName(all.front().code), all.front().message);
  if (all.size() > 1) s += fmt::format(" (+{} more)", all.size() - 1);
  return s;
}

SpecError::SpecError(Code code, Span span, std::string message)
    : std::runtime_error(fmt::format("{}: {}", codeName(code), message)),
      diags{Diag{code, span, std::move(message)}} {}

SpecError::SpecError(std::vector<Diag> all)
    : std::runtime_error(summarize(all)), diags(std::move(all)) {}

std::string toHex(uint64_t bits, unsigned width) {
  unsigned digits = (width + 3) / 4;
  return fmt::format("{:0{}x}", bits, digits);
}

std::string toHex(Value v) { return toHex(v.bits, v.width); }

std::string Type::str() const {
  switch (kind) {
    case Kind::Bits: return fmt::format("Bits<{}>", width);
    case Kind::UInt: return fmt::format("UInt<{}>", width);
    case Kind::SInt: return fmt::format("SInt<{}>", width);
    case Kind::Bool: return "Bool";
    case Kind::String: return "String";
  }
  return "?";
}

}  // namespace pdl

namespace pdl::frontend {

Value Field::extract(uint64_t word) const {
  Value acc{0, 0};
  for (auto [hi, lo] : ranges) {
    Value part = makeValue(word >> lo, hi - lo + 1);
    acc = acc.width == 0 ? part : concatValue(acc, part);
  }
  return acc;
}

uint64_t Field::insert(uint64_t word, Value v) const {
  // Ranges are MSB-first: consume the value's high bits first.
  unsigned consumed = 0;
  for (auto [hi, lo] : ranges) {
    unsigned w = hi - lo + 1;
    uint64_t part = (v.bits >> (width - consumed - w)) & maskOf(w);
    word = (word & ~(maskOf(w) << lo)) | (part << lo);
    consumed += w;
  }
  return word;
}

const Field* Format::field(const std::string& n) const {
  for (const auto& f : fields)
    if (f.name == n) return &f;
  return nullptr;
}

const AccessFn* Format::accessFn(const std::string& n) const {
  for (const auto& f : accessFns)
    if (f.name == n) return &f;
  return nullptr;
}

const Value* Enum::member(const std::string& n) const {
  for (const auto& [name, v] : members)
    if (name == n) return &v;
  return nullptr;
}

const RegFile* Isa::regFile(const std::string& n) const {
  for (const auto& f : regFiles)
    if (f.name == n) return &f;
  return nullptr;
}

int Isa::instrIndex(const std::string& n) const {
  for (size_t i = 0; i < instructions.size(); i++)
    if (instructions[i].name == n) return static_cast<int>(i);
  return -1;
}

}  // namespace pdl::frontend
