#pragma once

#include <cstdint>
#include <vector>

#include "archstamp/nas.hpp"
#include "archstamp/watermark.hpp"

namespace archstamp {
class Rng;

// Cell search space with the stamp edges pinned: free_edges = all admissible
// edges minus the stamped pairs. Nodes on the stamp path keep one free
// incoming slot, the others two.
struct RestrictedSpace {
  CellSupernet base;
  Stamp fixed;

  static RestrictedSpace restrict_space(const CellSupernet& base, const Stamp& fixed);
  std::vector<Edge> free_edges() const;
  int free_slots() const { return base.key_edge_slots() - fixed.size(); }
  int free_slots_for(NodeId node) const;
};

enum class Strategy { UniformRandom, GreedyMock };

// Search strategy over the restricted space. GreedyMock draws `candidates`
// random completions and keeps the one with the best hash-based pseudo
// score; it stands in for trained estimators, which are out of scope.
struct SearchStrategy {
  Strategy kind = Strategy::UniformRandom;
  int candidates = 8;

  static SearchStrategy parse(const std::string& name);
  std::string name() const;
};

// Completes one cell of the given kind around its stamp.
Cell complete_cell(const RestrictedSpace& space, CellKind kind, Rng& rng);

// Uniform sample of a full cell (no stamp), used by the collision studies.
Cell sample_uniform_cell(const CellSupernet& space, CellKind kind, Rng& rng);

// Watermark embedding: stamps pinned verbatim, remaining slots filled by the
// strategy, cells stacked into the default macro structure.
Architecture mark(const MarkingKey& mk, const CellSupernet& space,
                  const SearchStrategy& strategy, uint64_t seed,
                  const MacroParams& macro = {});

// Ground-truth containment: every cell holds its stamp's exact
// edge-operation pairs.
bool contains_stamp(const Architecture& arch, const MarkingKey& mk);
bool cell_contains_stamp(const Cell& cell, const Stamp& stamp);

// Deterministic pseudo-score used by GreedyMock.
double pseudo_score(const Architecture& arch);

}  // namespace archstamp
