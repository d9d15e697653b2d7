#include "archstamp/attacks.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "archstamp/rng.hpp"

namespace archstamp {

AttackSpec AttackSpec::parse(const std::string& text, uint64_t seed, bool oracle) {
  AttackSpec s;
  s.seed = seed;
  s.oracle = oracle;
  auto colon = text.find(':');
  std::string head = text.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto bad_arg = [&]() -> Error {
    return {"usage", "bad attack argument in '" + text + "'"};
  };
  auto to_double = [&](const std::string& v) {
    try {
      return std::stod(v);
    } catch (const std::exception&) {
      throw bad_arg();
    }
  };
  auto to_int = [&](const std::string& v) {
    try {
      return std::stoi(v);
    } catch (const std::exception&) {
      throw bad_arg();
    }
  };
  if (head == "shuffle") {
    s.kind = AttackKind::ShuffleParallelOps;
  } else if (head == "useless-op") {
    s.kind = AttackKind::InjectUselessOp;
  } else if (head == "useless-cell") {
    s.kind = AttackKind::InjectUselessCell;
  } else if (head == "prune") {
    s.kind = AttackKind::WeightPrune;
    s.rate = arg.empty() ? 0.9 : to_double(arg);
    if (s.rate < 0.0 || s.rate > 1.0)
      throw Error("usage", "prune rate must lie in [0, 1]");
  } else if (head == "binarize") {
    s.kind = AttackKind::Binarize;
  } else if (head == "structured") {
    s.kind = AttackKind::StructuredPrune;
    s.count = arg.empty() ? 1 : to_int(arg);
    if (s.count < 0) throw Error("usage", "structured prune count must be >= 0");
  } else if (head == "noise") {
    s.kind = AttackKind::GaussianNoise;
    s.sigma = arg.empty() ? 0.3 : to_double(arg);
    if (s.sigma < 0.0 || s.sigma > 0.5)
      throw Error("usage", "noise sigma must lie in [0, 0.5]");
  } else {
    throw Error("usage", "unknown attack kind: " + text);
  }
  return s;
}

std::string AttackSpec::name() const {
  switch (kind) {
    case AttackKind::ShuffleParallelOps:
      return "shuffle";
    case AttackKind::InjectUselessOp:
      return "useless-op";
    case AttackKind::InjectUselessCell:
      return "useless-cell";
    case AttackKind::WeightPrune:
      return "prune:" + std::to_string(rate);
    case AttackKind::Binarize:
      return "binarize";
    case AttackKind::StructuredPrune:
      return "structured:" + std::to_string(count) + (oracle ? ":oracle" : "");
    case AttackKind::GaussianNoise:
      return "noise:" + std::to_string(sigma);
  }
  return "?";
}

namespace {

// Random topological order over the cell's edges: an edge becomes ready once
// every edge feeding its source node has executed.
void shuffle_cell_order(Cell& cell, Rng& rng) {
  std::map<NodeId, int> pending;
  for (const auto& ce : cell.edges) pending[ce.edge.dst]++;
  auto available = [&](NodeId n) {
    return n == kInputA || n == kInputB || pending.find(n) == pending.end() ||
           pending[n] == 0;
  };
  std::vector<int> remaining(cell.edges.size());
  for (size_t i = 0; i < remaining.size(); ++i) remaining[i] = static_cast<int>(i);
  std::vector<int> order;
  while (order.size() < cell.edges.size()) {
    std::vector<int> ready;
    for (int idx : remaining)
      if (available(cell.edges[idx].edge.src)) ready.push_back(idx);
    if (ready.empty())
      throw Error("invalid-architecture", "cell has a dependency cycle");
    int pick = ready[rng.uniform(ready.size())];
    order.push_back(pick);
    pending[cell.edges[pick].edge.dst]--;
    remaining.erase(std::find(remaining.begin(), remaining.end(), pick));
  }
  cell.order = order;
}

void inject_useless_op(Cell& cell, Rng& rng) {
  // An extra separable convolution whose output nobody consumes: it reads
  // an existing value and feeds a fresh sink node.
  NodeId max_node = 2;
  for (const auto& ce : cell.edges) max_node = std::max(max_node, ce.edge.dst);
  NodeId sink = max_node + 1;
  NodeId src = static_cast<NodeId>(rng.uniform(max_node + 1));
  int new_idx = static_cast<int>(cell.edges.size());
  cell.edges.push_back({{src, sink}, Operation::sep_conv(3)});

  // Valid order slots: after every edge feeding src has run.
  int min_pos = 0;
  for (size_t pos = 0; pos < cell.order.size(); ++pos)
    if (cell.edges[cell.order[pos]].edge.dst == src)
      min_pos = static_cast<int>(pos) + 1;
  int slot = min_pos + static_cast<int>(
                           rng.uniform(cell.order.size() - min_pos + 1));
  cell.order.insert(cell.order.begin() + slot, new_idx);
}

void structured_prune(Cell& cell, const Stamp& stamp, int count, bool oracle,
                      Rng& rng) {
  std::vector<int> candidates;
  if (oracle) {
    // Stamp operations, preferring ones that actually leave a footprint in
    // the trace; removing a skip is unobservable by construction.
    std::vector<int> visible, any;
    for (size_t i = 0; i < cell.edges.size(); ++i) {
      const auto& ce = cell.edges[i];
      for (size_t s = 0; s < stamp.edges.size(); ++s)
        if (ce.edge == stamp.edges[s] && ce.op == stamp.ops[s]) {
          any.push_back(static_cast<int>(i));
          if (ce.op.kind != OpKind::Skip) visible.push_back(static_cast<int>(i));
        }
    }
    candidates = visible.empty() ? any : visible;
  } else {
    for (size_t i = 0; i < cell.edges.size(); ++i)
      candidates.push_back(static_cast<int>(i));
  }
  rng.shuffle(candidates);
  int take = std::min<int>(count, static_cast<int>(candidates.size()));
  std::set<int> doomed(candidates.begin(), candidates.begin() + take);

  std::vector<ChosenEdge> kept;
  std::vector<int> remap(cell.edges.size(), -1);
  for (size_t i = 0; i < cell.edges.size(); ++i)
    if (!doomed.count(static_cast<int>(i))) {
      remap[i] = static_cast<int>(kept.size());
      kept.push_back(cell.edges[i]);
    }
  std::vector<int> order;
  for (int idx : cell.order)
    if (remap[idx] >= 0) order.push_back(remap[idx]);
  cell.edges = std::move(kept);
  cell.order = std::move(order);
}

}  // namespace

Architecture apply_attack(const Architecture& arch, const AttackSpec& spec,
                          const MarkingKey* mk) {
  Rng rng(spec.seed);
  Architecture out = arch;
  switch (spec.kind) {
    case AttackKind::ShuffleParallelOps:
      for (auto& c : out.cells) shuffle_cell_order(c, rng);
      return out;
    case AttackKind::InjectUselessOp:
      for (auto& c : out.cells) inject_useless_op(c, rng);
      return out;
    case AttackKind::InjectUselessCell: {
      // Decoy window: a copy of a normal cell with freshly randomized
      // operations, dropped at a random position.
      const Cell* tmpl = nullptr;
      for (const auto& c : out.cells)
        if (c.kind == CellKind::Normal) {
          tmpl = &c;
          break;
        }
      if (!tmpl) throw Error("invalid-architecture", "no normal cell to copy");
      Cell decoy = *tmpl;
      for (auto& ce : decoy.edges)
        ce.op = out.candidate_ops[rng.uniform(out.candidate_ops.size())];
      size_t pos = rng.uniform(out.cells.size() + 1);
      out.cells.insert(out.cells.begin() + pos, decoy);
      out.cell_scale.insert(out.cell_scale.begin() + pos, 1.0);
      return out;
    }
    case AttackKind::WeightPrune:
      for (auto& s : out.cell_scale) s = 1.0 - 0.5 * spec.rate;
      return out;
    case AttackKind::Binarize:
      out.speedup_hint = 20.0;
      return out;
    case AttackKind::StructuredPrune:
      for (int i = 0; i < out.cell_count(); ++i) {
        const Stamp* stamp = nullptr;
        if (spec.oracle) {
          if (!mk)
            throw Error("usage", "oracle structured prune needs the marking key");
          stamp = &mk->stamp_for(out.cells[i].kind, i);
        }
        static const Stamp kEmpty{};
        structured_prune(out.cells[i], stamp ? *stamp : kEmpty, spec.count,
                         spec.oracle, rng);
      }
      return out;
    case AttackKind::GaussianNoise:
      throw Error("usage", "noise is a trace-level attack; pass a trace");
  }
  return out;
}

Trace apply_attack(const Trace& trace, const AttackSpec& spec) {
  if (spec.kind != AttackKind::GaussianNoise)
    throw Error("usage", spec.name() + " is an architecture-level attack");
  return apply_interval_noise(trace, spec.sigma, spec.seed);
}

}  // namespace archstamp
