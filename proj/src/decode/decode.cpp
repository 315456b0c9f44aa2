#include <algorithm>
#include <bit>

#include <fmt/format.h>

#include "pdl/decode.hpp"
#include "pdl/diag.hpp"

namespace pdl::decode {

namespace {

// The instruction's fixed bits: every encoding constant stamped into a zero
// word, with the union of the constant fields' bit positions as the mask.
Pattern patternOf(const frontend::Isa& isa, const frontend::Instruction& ins, int idx) {
  const frontend::Format& fmt = isa.formats[ins.format];
  Pattern p;
  p.instr = idx;
  for (const auto& ec : ins.encoding) {
    const frontend::Field* f = fmt.field(ec.field);
    p.value = f->insert(p.value, ec.value);
    for (auto [hi, lo] : f->ranges) p.mask |= maskOf(hi - lo + 1) << lo;
  }
  return p;
}

}  // namespace

Decoder Decoder::build(const frontend::Isa& isa) {
  Decoder d;
  d.isa = &isa;
  for (size_t i = 0; i < isa.instructions.size(); i++)
    d.pats.push_back(patternOf(isa, isa.instructions[i], static_cast<int>(i)));

  // Pairwise pattern analysis.
  for (size_t i = 0; i < d.pats.size(); i++) {
    for (size_t j = i + 1; j < d.pats.size(); j++) {
      const Pattern& a = d.pats[i];
      const Pattern& b = d.pats[j];
      uint64_t common = a.mask & b.mask;
      if ((a.value & common) != (b.value & common)) continue;  // disjoint
      if (a.mask == b.mask)
        fail(Code::DuplicatePatternError, isa.instructions[j].span,
             fmt::format("instructions '{}' and '{}' share the encoding pattern "
                         "mask=0x{:x} value=0x{:x}",
                         isa.instructions[i].name, isa.instructions[j].name,
                         a.mask, a.value));
      bool aInB = (a.mask & b.mask) == a.mask;  // b pins strictly more bits
      bool bInA = (a.mask & b.mask) == b.mask;
      if (!aInB && !bInA) {
        uint64_t witness = a.value | b.value;
        fail(Code::AmbiguityError, isa.instructions[j].span,
             fmt::format("instructions '{}' and '{}' overlap without a most-"
                         "specific winner; witness word 0x{:0{}x} matches both",
                         isa.instructions[i].name, isa.instructions[j].name,
                         witness, isa.instrWidth / 4));
      }
    }
  }

  std::vector<int> all(d.pats.size());
  for (size_t i = 0; i < all.size(); i++) all[i] = static_cast<int>(i);
  d.buildNode(std::move(all), 0);
  return d;
}

int Decoder::buildNode(std::vector<int> candidates, uint64_t consumed) {
  int id = static_cast<int>(nodes.size());
  nodes.emplace_back();

  // Bits pinned by every remaining candidate and not yet examined.
  uint64_t common = ~uint64_t{0};
  for (int c : candidates) common &= pats[c].mask;
  common &= ~consumed;

  if (common == 0 || candidates.size() <= 1) {
    std::sort(candidates.begin(), candidates.end(), [&](int x, int y) {
      int px = std::popcount(pats[x].mask);
      int py = std::popcount(pats[y].mask);
      return px != py ? px > py : x < y;
    });
    nodes[id].leafPats = std::move(candidates);
    return id;
  }

  // Examine up to eight of the shared fixed bits at once.
  std::vector<unsigned> bits;
  for (unsigned pos = 0; pos < 64 && bits.size() < 8; pos++)
    if ((common >> pos) & 1) bits.push_back(pos);
  uint64_t chosen = 0;
  for (unsigned pos : bits) chosen |= uint64_t{1} << pos;

  std::vector<std::vector<int>> buckets(size_t{1} << bits.size());
  for (int c : candidates) {
    size_t idx = 0;
    for (size_t k = 0; k < bits.size(); k++)
      idx |= ((pats[c].value >> bits[k]) & 1) << k;
    buckets[idx].push_back(c);
  }

  nodes[id].bits = bits;
  nodes[id].table.assign(buckets.size(), -1);
  for (size_t idx = 0; idx < buckets.size(); idx++) {
    if (buckets[idx].empty()) continue;
    int child = buildNode(std::move(buckets[idx]), consumed | chosen);
    nodes[id].table[idx] = child;
  }
  return id;
}

int Decoder::decode(uint64_t word) const {
  int at = 0;
  while (true) {
    const TreeNode& n = nodes[at];
    if (n.bits.empty()) {
      for (int p : n.leafPats)
        if (pats[p].matches(word)) return pats[p].instr;
      return -1;
    }
    size_t idx = 0;
    for (size_t k = 0; k < n.bits.size(); k++)
      idx |= ((word >> n.bits[k]) & 1) << k;
    at = n.table[idx];
    if (at < 0) return -1;
  }
}

std::string Decoder::listing() const {
  std::string out;
  unsigned digits = isa->instrWidth / 4;
  for (const Pattern& p : pats)
    out += fmt::format("{} 0x{:0{}x} 0x{:0{}x}\n", isa->instructions[p.instr].name,
                       p.mask, digits, p.value, digits);
  return out;
}

}  // namespace pdl::decode
