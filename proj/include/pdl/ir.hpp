#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pdl/frontend.hpp"
#include "pdl/type.hpp"
#include "pdl/value.hpp"

namespace pdl::ir {

// A behavior graph is a pure data-flow representation of one instruction's
// semantics (or, after unioning, of a whole instruction set): leaves are
// encoding fields, operand access functions and architectural reads; interior
// nodes are operators; sinks are architectural writes collected by a single
// End node in program order. Writes may carry a guard as their last input;
// an absent guard means the write always happens.

using NodeId = uint32_t;

enum class Op {
  Start,      // entry marker, always node 0
  End,        // sink; inputs are the write nodes in program order
  Const,      // literal value (cval)
  Field,      // encoding field leaf (name + bit ranges)
  AccessFn,   // operand access function leaf (scope = format, name = fn)
  ReadReg,    // register file read (inputs: index) or PC read (no inputs)
  ReadMem,    // memory read of `units` memory units (inputs: address)
  Builtin,    // arithmetic/logic/compare operator (bop)
  Cast,       // width/kind conversion to `type`
  Slice,      // bits hi..lo of the input
  Concat,     // MSB-first concatenation of the inputs
  Select,     // inputs: {cond, then, else}
  Mux,        // union graphs: value selected by instruction identity
  InstrKind,  // union graphs: identity of the decoded instruction
  WriteReg,   // inputs: {index, value[, guard]}
  WriteMem,   // inputs: {address, value[, guard]}
  WritePc,    // inputs: {value[, guard]}
};

enum class BOp {
  None,
  Add, Sub, Mul, RemU, RemS,
  And, Or, Xor,
  Shl, ShrU, ShrA,
  Eq, Ne, LtU, LtS, LeU, LeS,
  Not, Neg,
};

const char* opName(Op op);
const char* bopName(BOp op);

struct Node {
  Op op = Op::Start;
  BOp bop = BOp::None;
  Type type;  // result type; for writes, the type of the written value
  std::vector<NodeId> inputs;

  Value cval;         // Const
  std::string name;   // Field/AccessFn name; ReadReg/WriteReg file or PC name
  std::string scope;  // AccessFn: owning format
  std::vector<std::pair<unsigned, unsigned>> ranges;  // Field: MSB-first ranges
  unsigned hi = 0, lo = 0;  // Slice bounds
  unsigned units = 0;       // ReadMem/WriteMem width in memory units
  bool hasGuard = false;    // writes: last input is a Bool guard

  // Union graphs: bit i set when instruction i contributes this node.
  uint64_t origin = 0;
  // Mux: per-input origin mask; the alternative whose mask contains the
  // decoded instruction is selected.
  std::vector<uint64_t> muxOrigins;

  bool isWrite() const {
    return op == Op::WriteReg || op == Op::WriteMem || op == Op::WritePc;
  }
  bool pure() const { return !isWrite() && op != Op::End && op != Op::Start; }
  NodeId guardInput() const { return inputs.back(); }
};

struct Graph {
  std::vector<Node> nodes;
  NodeId end = 0;

  size_t size() const { return nodes.size(); }
  const Node& operator[](NodeId id) const { return nodes[id]; }
  Node& operator[](NodeId id) { return nodes[id]; }
  const std::vector<NodeId>& effects() const { return nodes[end].inputs; }
};

// Evaluates one pure operator application. The operator's signedness is baked
// into the BOp at graph-build time, so only the operand payloads are needed.
Value evalBuiltin(BOp op, const std::vector<Value>& in);

// Width/kind conversion: truncate when narrowing, sign- or zero-extend by
// target kind when widening, reinterpret at equal width.
Value evalCast(Value v, Type target);

// Hash-consing node factory with eager constant folding. Pure nodes that are
// structurally identical intern to the same id (commutative operators compare
// operands order-insensitively); origin masks of merged nodes accumulate.
// Write nodes are never shared.
class GraphBuilder {
 public:
  explicit GraphBuilder(Graph& g);

  // Pure nodes: interned and folded.
  NodeId intern(Node n);
  // Effect nodes (writes): appended verbatim, except that a constant-true
  // guard is dropped; returns the id, or kNone for a constant-false guard.
  NodeId effect(Node n);
  // Builds the End node over `writes` and finalizes the graph.
  void finish(const std::vector<NodeId>& writes);

  const Graph& graphOf() const { return *g; }

  NodeId konst(Value v);
  NodeId boolConst(bool b);
  NodeId builtin(BOp op, Type t, std::vector<NodeId> in);
  NodeId notOf(NodeId a);
  NodeId andOf(NodeId a, NodeId b);  // Bool conjunction
  NodeId select(NodeId cond, NodeId t, NodeId f);

  static constexpr NodeId kNone = ~NodeId{0};

 private:
  Graph* g;
  std::map<std::string, NodeId> memo;

  std::string keyOf(const Node& n) const;
  std::optional<Value> fold(const Node& n) const;
};

// Builds the canonical behavior graph of one instruction: operators fold over
// constants, structurally equal subtrees share one node, comparisons are
// normalized to </<=, function calls are inlined, and if/else assignments to
// the same destination merge into a Select-fed write.
Graph buildGraph(const frontend::Isa& isa, const frontend::Instruction& ins);

// Re-canonicalizes after surgery: constant folding, common-subexpression
// elimination, dead-node removal, and a topological renumbering.
void canonicalize(Graph& g);

// ------------------------------------------------------------- evaluation --

struct Effect {
  enum class Kind { Reg, Mem, Pc };
  Kind kind;
  std::string file;   // Reg: register file name
  uint64_t index = 0; // Reg: register index; Mem: byte address
  Value value;
  unsigned units = 0; // Mem: width in memory units
};

struct EvalCtx {
  const frontend::Isa* isa = nullptr;
  uint64_t word = 0;    // encoded instruction (Field / AccessFn leaves)
  uint64_t pc = 0;      // current program counter
  int instrIndex = -1;  // union graphs: selects Mux alternatives
  std::function<Value(const std::string& file, uint64_t index)> readReg;
  std::function<uint64_t(unsigned units, uint64_t addr)> readMem;
};

// Runs the graph against a read-only machine snapshot and returns the writes
// whose guards held, in program order. Nothing is applied to the machine.
std::vector<Effect> evalGraph(const Graph& g, const EvalCtx& ctx);

// Computes a single node from already-computed operand values; `vals` must
// hold entries for every input of the node. Write nodes yield their written
// value. Used by simulators that schedule node evaluation themselves.
Value evalNode(const Graph& g, NodeId id, const EvalCtx& ctx,
               const std::vector<Value>& vals);

// Evaluates every node (for per-stage evaluation in timing simulation);
// returns the per-node values. Write nodes store their written value.
std::vector<Value> evalAllNodes(const Graph& g, const EvalCtx& ctx);

// ------------------------------------------------------------------- dot --

// Graphviz rendering; writes appear as boxes labeled "write <resource>".
std::string toDot(const Graph& g, const std::string& title);

}  // namespace pdl::ir
