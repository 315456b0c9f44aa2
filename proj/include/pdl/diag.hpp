#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pdl {

// Source location (1-based; 0 means "no location").
struct Span {
  int line = 0;
  int col = 0;
};

// Every error category the toolkit can report. The enumerator name is the
// stable, user-visible code printed in diagnostics.
enum class Code {
  // frontend
  SyntaxError,
  MacroTypeError,
  MacroRecursionError,
  UnknownModel,
  NameError,
  TypeError,
  FormatOverlapError,
  WriteBeforeReadError,
  DoubleWriteError,
  UnsupportedFeature,
  // decode
  EncodingWidthError,
  AmbiguityError,
  DuplicatePatternError,
  // assembly
  MissingOperand,
  DomainTooLarge,
  NonInjective,
  ParseError,
  NoMatchingInstruction,
  OperandRangeError,
  PredicateViolation,
  UnknownInstructionWord,
  // simulation
  AddressOverflow,
  InvalidInstruction,
  MisalignedFetch,
  DoubleWriteFault,
  // microarchitecture
  ResidualSemanticsError,
  NotReadyError,
  UnsupportedMapping,
  PortConflict,
  // cycle-accurate simulation
  DivergenceError,
  MaxCycles,
  // tooling
  IoError,
};

const char* codeName(Code c);

// One reportable problem.
struct Diag {
  Code code = Code::SyntaxError;
  Span span;
  std::string message;

  // "file:line:col: error: CodeName: message" (location parts omitted when
  // unknown).
  std::string render(const std::string& file) const;
};

// Exception carrying one or more diagnostics. Analyses that keep going after
// the first problem (e.g. the read/write discipline checks) aggregate all of
// them into a single throw.
class SpecError : public std::runtime_error {
 public:
  SpecError(Code code, Span span, std::string message);
  explicit SpecError(std::vector<Diag> all);

  Code code() const { return diags.front().code; }
  const std::string& message() const { return diags.front().message; }

  std::vector<Diag> diags;

 private:
  static std::string summarize(const std::vector<Diag>& all);
};

[[noreturn]] inline void fail(Code code, Span span, std::string message) {
  throw SpecError(code, span, std::move(message));
}

[[noreturn]] inline void fail(Code code, std::string message) {
  throw SpecError(code, Span{}, std::move(message));
}

}  // namespace pdl
