#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fmt/format.h>

#include "pdl/decode.hpp"
#include "pdl/frontend.hpp"
#include "support/oracle.hpp"
#include "support/testutil.hpp"

using namespace pdl;
using pdl::decode::Decoder;
using pdl::testutil::corpus;
using pdl::testutil::elabText;
using pdl::testutil::expectError;
using pdl::testutil::wrapIsa;

TEST_CASE("patterns pin exactly the encoding-constant bits") {
  const auto& m = corpus();
  Decoder d = Decoder::build(m.isa);
  REQUIRE(d.patterns().size() == 37);
  for (const auto& p : d.patterns()) {
    oracle::RefPattern ref = oracle::refPattern(m.isa, m.isa.instructions[p.instr]);
    CHECK(p.mask == ref.mask);
    CHECK(p.value == ref.value);
  }

  int add = m.isa.instrIndex("ADD");
  CHECK(d.patterns()[add].mask == 0xfe00707f);
  CHECK(d.patterns()[add].value == 0x00000033);
  int addi = m.isa.instrIndex("ADDI");
  CHECK(d.patterns()[addi].mask == 0x0000707f);
  CHECK(d.patterns()[addi].value == 0x00000013);
}

TEST_CASE("tree decode agrees with the linear reference scan") {
  const auto& m = corpus();
  Decoder d = Decoder::build(m.isa);
  auto& gen = testutil::rng();
  std::uniform_int_distribution<uint64_t> dist(0, 0xffffffffULL);

  // Uniformly random words (mostly invalid).
  for (int i = 0; i < 30000; i++) {
    uint64_t w = dist(gen);
    CHECK(d.decode(w) == oracle::refDecode(m.isa, w));
  }

  // Valid words: random operand bits under each instruction's pattern.
  for (const auto& p : d.patterns()) {
    for (int i = 0; i < 200; i++) {
      uint64_t w = (dist(gen) & ~p.mask) | p.value;
      CHECK(d.decode(w) == oracle::refDecode(m.isa, w));
      CHECK(d.decode(w) == p.instr);
    }
  }

  // Near-miss words: flip one pinned bit of a valid word.
  for (const auto& p : d.patterns()) {
    for (unsigned bit = 0; bit < 32; bit++) {
      if (!((p.mask >> bit) & 1)) continue;
      uint64_t w = p.value ^ (uint64_t{1} << bit);
      CHECK(d.decode(w) == oracle::refDecode(m.isa, w));
    }
  }
}

TEST_CASE("bundled firmware words decode to the expected instructions") {
  const auto& m = corpus();
  Decoder d = Decoder::build(m.isa);
  CHECK(d.decode(0x00c584b3) == m.isa.instrIndex("ADD"));
  CHECK(d.decode(0xe00003b7) == m.isa.instrIndex("LUI"));
  CHECK(d.decode(0x00038067) == m.isa.instrIndex("JALR"));
  // and classic invalid words fall out
  CHECK(d.decode(0x00000000) == -1);
  CHECK(d.decode(0xffffffff) == -1);
}

TEST_CASE("function bits separate same-opcode instructions") {
  const auto& m = corpus();
  Decoder d = Decoder::build(m.isa);
  // ADD vs SUB: same opcode and funct3, split by the high function field.
  CHECK(d.decode(0x00c584b3) == m.isa.instrIndex("ADD"));
  CHECK(d.decode(0x40c584b3) == m.isa.instrIndex("SUB"));
  // SRLI vs SRAI under the shift opcode.
  CHECK(d.decode(0x0054d493) == m.isa.instrIndex("SRLI"));
  CHECK(d.decode(0x4054d493) == m.isa.instrIndex("SRAI"));
}

static std::string twoInstr(const std::string& encA, const std::string& encB) {
  return wrapIsa(fmt::format(
      "format F : Bits<32> = {{ a [31..28], b [27..24], rest [23..0] }}\n"
      "instruction IA : F = {{ PC := PC }}\n"
      "encoding IA = {{ {} }}\n"
      "assembly IA = (mnemonic)\n"
      "instruction IB : F = {{ PC := PC }}\n"
      "encoding IB = {{ {} }}\n"
      "assembly IB = (mnemonic)\n",
      encA, encB));
}

TEST_CASE("identical patterns are rejected") {
  auto m = elabText(twoInstr("a = 1", "a = 1"));
  std::string msg =
      expectError(Code::DuplicatePatternError, [&] { Decoder::build(m.isa); });
  CHECK(msg.find("IA") != std::string::npos);
  CHECK(msg.find("IB") != std::string::npos);
}

TEST_CASE("incomparable overlapping patterns are rejected with a witness") {
  auto m = elabText(twoInstr("a = 1", "b = 2"));
  std::string msg =
      expectError(Code::AmbiguityError, [&] { Decoder::build(m.isa); });
  CHECK(msg.find("witness") != std::string::npos);
  CHECK(msg.find("0x12000000") != std::string::npos);
}

TEST_CASE("strictly more specific patterns win their overlap") {
  auto m = elabText(twoInstr("a = 1", "a = 1, b = 2"));
  Decoder d = Decoder::build(m.isa);
  CHECK(d.decode(0x12000000) == 1);  // both match; IB pins more bits
  CHECK(d.decode(0x13000000) == 0);  // only IA
  CHECK(d.decode(0x23000000) == -1);
  auto& gen = testutil::rng();
  std::uniform_int_distribution<uint64_t> dist(0, 0xffffffffULL);
  for (int i = 0; i < 5000; i++) {
    uint64_t w = dist(gen);
    CHECK(d.decode(w) == oracle::refDecode(m.isa, w));
  }
}

TEST_CASE("decoder listing prints one mask/value line per instruction") {
  const auto& m = corpus();
  Decoder d = Decoder::build(m.isa);
  std::string listing = d.listing();
  size_t lines = std::count(listing.begin(), listing.end(), '\n');
  CHECK(lines == 37);
  CHECK(listing.rfind("ADD 0xfe00707f 0x00000033\n", 0) == 0);
  CHECK(listing.find("\nLUI 0x0000007f 0x00000037\n") != std::string::npos);
}
