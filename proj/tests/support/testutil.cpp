#include "support/testutil.hpp"

#include <fmt/format.h>

namespace pdl::testutil {

const frontend::SpecModel& corpus() {
  static frontend::SpecModel model = frontend::loadSpec(PDL_SPEC_DIR "/rv32i.pdl");
  return model;
}

std::string wrapIsa(const std::string& body) {
  return fmt::format(
      "instruction set architecture T = {{\n"
      "using Regs = Bits<32>\n"
      "using Byte = Bits<8>\n"
      "[X(0) = 0]\n"
      "register file X : Bits<5> -> Regs\n"
      "program counter PC : Regs\n"
      "[littleEndian]\n"
      "memory MEM : Bits<32> -> Byte\n"
      "{}\n"
      "}}\n",
      body);
}

frontend::SpecModel elabText(const std::string& text) {
  ast::SpecAst spec = frontend::parseSpec(text, "<test>");
  return frontend::elaborate(spec);
}

std::string expectError(Code code, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const SpecError& e) {
    if (e.code() != code)
      throw std::runtime_error(fmt::format("expected {} but got: {}", codeName(code), e.what()));
    return e.message();
  }
  throw std::runtime_error(fmt::format("expected {} but no error was raised", codeName(code)));
}

std::mt19937_64& rng() {
  static std::mt19937_64 gen(0xbadc0ffee0ddf00dULL);
  return gen;
}

}  // namespace pdl::testutil
