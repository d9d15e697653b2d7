#pragma once

#include <set>
#include <vector>

#include "archstamp/analysis.hpp"
#include "archstamp/machine.hpp"
#include "archstamp/nas.hpp"
#include "archstamp/search.hpp"
#include "archstamp/watermark.hpp"

namespace archstamp::testing {

// Canonical hand-crafted key used by the pipeline tests: the normal stamp
// walks input B through all four nodes, the reduction stamp walks input A,
// ending in a skip.
inline MarkingKey demo_key(const CellSupernet& space) {
  Stamp normal;
  normal.edges = {{kInputB, 2}, {2, 3}, {3, 4}, {4, 5}};
  normal.ops = {Operation::avg_pool(), Operation::sep_conv(5),
                Operation::dil_sep_conv(3), Operation::sep_conv(3)};
  Stamp reduction;
  reduction.edges = {{kInputA, 2}, {2, 3}, {3, 4}, {4, 5}};
  reduction.ops = {Operation::dil_sep_conv(3), Operation::sep_conv(3),
                   Operation::sep_conv(3), Operation::skip()};
  return make_key(space, normal, reduction);
}

// Independent path oracle: depth-first enumeration of every consecutive
// edge path of the requested length, no shared code with get_path.
inline std::set<std::vector<Edge>> brute_force_paths(const CellSupernet& g,
                                                     int length) {
  std::set<std::vector<Edge>> out;
  std::vector<Edge> cur;
  auto extend = [&](auto&& self, NodeId from) -> void {
    if (static_cast<int>(cur.size()) == length) {
      out.insert(cur);
      return;
    }
    for (NodeId t = std::max<NodeId>(from + 1, g.first_node()); t <= g.last_node();
         ++t) {
      if (from >= t) continue;
      cur.push_back({from, t});
      self(self, t);
      cur.pop_back();
    }
  };
  for (NodeId start = 0; start <= g.last_node(); ++start) extend(extend, start);
  return out;
}

struct ExpectedOp {
  OpClass cls;
  int kernel;
  int channels;
  PoolType pool;
};

// Ground truth straight from the architecture: what the analyzer should
// recover per window, in execution order. Skips are invisible.
inline std::vector<std::vector<ExpectedOp>> expected_windows(
    const Architecture& arch) {
  auto shapes = propagate_shapes(arch);
  std::vector<std::vector<ExpectedOp>> out;
  for (int ci = 0; ci < arch.cell_count(); ++ci) {
    const Cell& cell = arch.cells[ci];
    std::vector<ExpectedOp> ops;
    for (int pos = 0; pos < static_cast<int>(cell.order.size()); ++pos) {
      const Operation& op = cell.at(pos).op;
      switch (op.kind) {
        case OpKind::SepConv:
          ops.push_back(
              {OpClass::SC, op.kernel, shapes[ci].channels, PoolType::Unknown});
          break;
        case OpKind::DilSepConv:
          ops.push_back(
              {OpClass::DS, op.kernel, shapes[ci].channels, PoolType::Unknown});
          break;
        case OpKind::AvgPool:
          ops.push_back({OpClass::Pool, 0, 0, PoolType::Avg});
          break;
        case OpKind::MaxPool:
          ops.push_back({OpClass::Pool, 0, 0, PoolType::Max});
          break;
        default:
          break;
      }
    }
    out.push_back(std::move(ops));
  }
  return out;
}

inline long long count_ops(const std::vector<std::vector<ExpectedOp>>& truth) {
  long long n = 0;
  for (const auto& w : truth) n += static_cast<long long>(w.size());
  return n;
}

// Operations the analyzer got wrong (GapOnly entries ignored); a window
// count mismatch charges the whole window.
inline int mismatched_ops(const RecoveredArchitecture& rec,
                          const std::vector<std::vector<ExpectedOp>>& truth,
                          bool require_kernel = true) {
  if (rec.windows.size() != truth.size()) return 1 << 20;
  int bad = 0;
  for (size_t w = 0; w < truth.size(); ++w) {
    std::vector<const RecoveredOp*> got;
    for (const auto& op : rec.windows[w].ops)
      if (op.cls != OpClass::GapOnly) got.push_back(&op);
    if (got.size() != truth[w].size()) {
      bad += static_cast<int>(std::max(got.size(), truth[w].size()));
      continue;
    }
    for (size_t i = 0; i < got.size(); ++i) {
      const ExpectedOp& want = truth[w][i];
      const RecoveredOp& have = *got[i];
      bool ok = have.cls == want.cls;
      if (ok && (want.cls == OpClass::SC || want.cls == OpClass::DS)) {
        ok = have.channels == want.channels;
        if (ok && require_kernel) ok = have.kernel == want.kernel;
      }
      if (ok && want.cls == OpClass::Pool) ok = have.pool == want.pool;
      if (!ok) ++bad;
    }
  }
  return bad;
}

}  // namespace archstamp::testing
