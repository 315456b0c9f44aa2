#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdl/frontend.hpp"

namespace pdl::decode {

// Fixed-bit pattern of one instruction: `mask` selects the bits pinned by
// encoding constants and `value` gives their required contents.
struct Pattern {
  uint64_t mask = 0;
  uint64_t value = 0;
  int instr = -1;

  bool matches(uint64_t word) const { return (word & mask) == value; }
};

// A decision-tree decoder over the instruction word. Interior nodes index a
// table by bits that every remaining candidate pins; leaves hold candidates
// ordered most-specific-first for a short linear scan.
//
// Building validates the instruction set:
//  - two instructions with identical patterns  -> DuplicatePatternError
//  - overlapping patterns where neither set of pinned bits contains the
//    other (no most-specific winner exists)    -> AmbiguityError, including
//    a witness word that matches both
// A pattern whose pinned bits strictly extend another's is a valid
// specialization and wins on the overlap.
class Decoder {
 public:
  static Decoder build(const frontend::Isa& isa);

  // Index of the decoded instruction, or -1 for an unknown word.
  int decode(uint64_t word) const;

  const std::vector<Pattern>& patterns() const { return pats; }

  // One line per instruction, declaration order: "NAME 0x<mask> 0x<value>",
  // hex zero-padded to the instruction width.
  std::string listing() const;

 private:
  struct TreeNode {
    std::vector<unsigned> bits;  // examined word-bit positions, low to high
    std::vector<int> table;      // child node per bit combination, -1 = none
    std::vector<int> leafPats;   // leaf: pattern indexes, most specific first
  };

  const frontend::Isa* isa = nullptr;
  std::vector<Pattern> pats;
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int buildNode(std::vector<int> candidates, uint64_t consumed);
};

}  // namespace pdl::decode
