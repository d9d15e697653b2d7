#include "archstamp/search.hpp"

#include <algorithm>
#include <set>

#include "archstamp/rng.hpp"

namespace archstamp {

RestrictedSpace RestrictedSpace::restrict_space(const CellSupernet& base,
                                                const Stamp& fixed) {
  auto violations = validate_stamp(fixed, base, "stamp");
  if (!violations.empty()) throw Error("invalid-key", violations.front());
  return {base, fixed};
}

std::vector<Edge> RestrictedSpace::free_edges() const {
  std::set<Edge> stamped(fixed.edges.begin(), fixed.edges.end());
  std::vector<Edge> out;
  for (const Edge& e : base.all_edges())
    if (!stamped.count(e)) out.push_back(e);
  return out;
}

int RestrictedSpace::free_slots_for(NodeId node) const {
  int stamped_in = 0;
  for (const Edge& e : fixed.edges)
    if (e.dst == node) ++stamped_in;
  return 2 - stamped_in;
}

SearchStrategy SearchStrategy::parse(const std::string& name) {
  if (name == "random" || name == "uniform") return {Strategy::UniformRandom, 8};
  if (name == "greedy" || name == "greedy-mock") return {Strategy::GreedyMock, 8};
  throw Error("usage", "unknown search strategy: " + name);
}

std::string SearchStrategy::name() const {
  return kind == Strategy::UniformRandom ? "random" : "greedy";
}

Cell complete_cell(const RestrictedSpace& space, CellKind kind, Rng& rng) {
  const CellSupernet& g = space.base;
  if (g.candidate_ops.empty())
    throw Error("search-infeasible", "no candidate operations to fill free slots");
  std::vector<ChosenEdge> edges;
  for (size_t i = 0; i < space.fixed.edges.size(); ++i)
    edges.push_back({space.fixed.edges[i], space.fixed.ops[i]});

  for (NodeId t = g.first_node(); t <= g.last_node(); ++t) {
    std::set<NodeId> used;
    for (const Edge& e : space.fixed.edges)
      if (e.dst == t) used.insert(e.src);
    int need = 2 - static_cast<int>(used.size());
    std::vector<NodeId> pool;
    for (NodeId s : g.admissible_sources(t))
      if (!used.count(s)) pool.push_back(s);
    if (static_cast<int>(pool.size()) < need)
      throw Error("search-infeasible",
                  "node " + std::to_string(t) + " cannot fill its input slots");
    rng.shuffle(pool);
    for (int i = 0; i < need; ++i) {
      Operation op = g.candidate_ops[rng.uniform(g.candidate_ops.size())];
      edges.push_back({{pool[i], t}, op});
    }
  }
  return Cell::make(kind, std::move(edges));
}

Cell sample_uniform_cell(const CellSupernet& space, CellKind kind, Rng& rng) {
  RestrictedSpace free{space, Stamp{}};
  return complete_cell(free, kind, rng);
}

double pseudo_score(const Architecture& arch) {
  // FNV-1a over the canonical serialization, mapped to [0, 1).
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_json_string(arch)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

namespace {

Architecture complete_architecture(const MarkingKey& mk, const CellSupernet& space,
                                   const MacroParams& macro, Rng& rng) {
  if (!mk.per_cell.empty()) {
    // General per-cell form: every position gets its own stamp.
    Architecture shape = stack_architecture(
        complete_cell(RestrictedSpace::restrict_space(space, mk.normal),
                      CellKind::Normal, rng),
        complete_cell(RestrictedSpace::restrict_space(space, mk.reduction),
                      CellKind::Reduction, rng),
        macro, space);
    if (mk.per_cell.size() != shape.cells.size())
      throw Error("invalid-key", "per-cell key size does not match macro cell count");
    for (size_t i = 0; i < shape.cells.size(); ++i) {
      CellKind kind = shape.cells[i].kind;
      auto restricted = RestrictedSpace::restrict_space(space, mk.per_cell[i]);
      shape.cells[i] = complete_cell(restricted, kind, rng);
    }
    return shape;
  }
  Cell normal = complete_cell(RestrictedSpace::restrict_space(space, mk.normal),
                              CellKind::Normal, rng);
  Cell reduction = complete_cell(RestrictedSpace::restrict_space(space, mk.reduction),
                                 CellKind::Reduction, rng);
  return stack_architecture(normal, reduction, macro, space);
}

}  // namespace

Architecture mark(const MarkingKey& mk, const CellSupernet& space,
                  const SearchStrategy& strategy, uint64_t seed,
                  const MacroParams& macro) {
  Rng rng(seed);
  if (strategy.kind == Strategy::UniformRandom)
    return complete_architecture(mk, space, macro, rng);

  int k = std::max(1, strategy.candidates);
  Architecture best;
  double best_score = -1.0;
  for (int i = 0; i < k; ++i) {
    Architecture cand = complete_architecture(mk, space, macro, rng);
    double s = pseudo_score(cand);
    if (s > best_score) {
      best_score = s;
      best = std::move(cand);
    }
  }
  return best;
}

bool cell_contains_stamp(const Cell& cell, const Stamp& stamp) {
  for (size_t i = 0; i < stamp.edges.size(); ++i) {
    bool found = false;
    for (const auto& ce : cell.edges)
      if (ce.edge == stamp.edges[i] && ce.op == stamp.ops[i]) {
        found = true;
        break;
      }
    if (!found) return false;
  }
  return true;
}

bool contains_stamp(const Architecture& arch, const MarkingKey& mk) {
  for (int i = 0; i < arch.cell_count(); ++i) {
    const Cell& c = arch.cells[i];
    if (!cell_contains_stamp(c, mk.stamp_for(c.kind, i))) return false;
  }
  return true;
}

}  // namespace archstamp
