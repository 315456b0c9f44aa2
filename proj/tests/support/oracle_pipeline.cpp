#include <algorithm>

#include "support/oracle.hpp"

// Completion-time recurrence for an in-order pipeline with push-forward
// next-PC prediction, operand stalls and redirect flushes.
//
//   e[s][j] = cycle in which instruction j completes stage s (1 cycle/stage)
//   e[s][j] = max(e[s-1][j] + 1, e[s+1][j-1])        structural progression
//   e[0][j] = max(e[0][j-1] + 1, e[1][j-1], redirect)
//   e[k][j] is defined as e[k-1][j] + 1 (the slot past retirement).
//
// Operand readiness delays the read stage: with forwarding the producer's
// value-stage completion, otherwise the cycle after the producer retires.
namespace pdl::oracle {

PipeCost refTiming(const PipeShape& shape, const std::vector<TimedOp>& ops) {
  const unsigned k = shape.stages;
  PipeCost cost;
  if (ops.empty()) return cost;

  size_t n = ops.size();
  std::vector<std::vector<uint64_t>> e(n, std::vector<uint64_t>(k + 1, 0));
  // Completion cycle of each architectural register's producer.
  struct Producer {
    size_t op;
    bool valid = false;
  };
  std::map<std::pair<std::string, uint64_t>, Producer> lastWriter;

  uint64_t redirect = 0;  // earliest fetch-completion after a taken redirect
  for (size_t j = 0; j < n; j++) {
    const TimedOp& op = ops[j];

    for (unsigned s = 0; s < k; s++) {
      uint64_t t = s == 0 ? 1 : e[j][s - 1] + 1;
      if (j > 0) {
        if (s == 0) {
          t = std::max(t, e[j - 1][0] + 1);
          t = std::max(t, e[j - 1][1]);
        } else if (s + 1 <= k) {
          t = std::max(t, e[j - 1][s + 1]);
        }
      }
      if (s == 0) t = std::max(t, redirect);

      if (s == shape.readStage) {
        uint64_t ready = 0;
        for (const auto& r : op.reads) {
          auto it = lastWriter.find(r);
          if (it == lastWriter.end() || !it->second.valid) continue;
          const TimedOp& prod = ops[it->second.op];
          uint64_t avail;
          if (shape.forwarding) {
            unsigned vs = prod.isLoad ? shape.memValueStage : shape.aluValueStage;
            avail = e[it->second.op][vs];
          } else {
            avail = e[it->second.op][k - 1] + 1;  // after retirement commit
          }
          ready = std::max(ready, avail);
        }
        if (ready > t) {
          cost.stalls += ready - t;
          t = ready;
        }
      }
      e[j][s] = t;
      if (s == k - 1) e[j][k] = t + 1;
    }

    if (op.write) lastWriter[*op.write] = {j, true};
    if (op.redirects) {
      redirect = e[j][shape.verifyStage] + 1;
      cost.flushes += 1;
    }
  }

  cost.cycles = e[n - 1][k - 1];
  return cost;
}

}  // namespace pdl::oracle
