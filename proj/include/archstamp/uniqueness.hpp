#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "archstamp/search.hpp"
#include "archstamp/watermark.hpp"

namespace archstamp {

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double p) const { return p >= lo && p <= hi; }
};

// 95% score interval for `hits` successes in `trials` draws.
WilsonInterval wilson_interval(long long hits, long long trials, double z = 1.96);

struct CollisionStats {
  double analytic_per_cell = 0.0;
  bool analytic_clamped = false;  // raw bound exceeded 1
  double analytic_joint = 0.0;
  double exact_normal = 0.0;
  double exact_reduction = 0.0;
  double exact_joint = 0.0;
  long long trials = 0;
  long long hits_normal = 0;
  long long hits_reduction = 0;
  long long hits_joint = 0;
  WilsonInterval wilson_normal;
  WilsonInterval wilson_reduction;
  WilsonInterval wilson_joint;
  // Operation choice counts per edge slot over the sampled normal cells,
  // indexed [edge][op].
  std::vector<std::vector<long long>> edge_op_histogram;
  std::vector<Edge> histogram_edges;
};

// Upper bound on the per-cell stamp collision probability:
// C(2B, n_s) * |O|^(-n_s). Values above 1 are clamped and flagged.
double analytic_bound(int num_nodes, int n_s, int num_ops, bool* clamped = nullptr);

// Exact probability that a uniformly sampled cell contains the given stamp:
// each node picks two distinct incoming edges uniformly, operations i.i.d.
// uniform. Per-node inclusion probabilities multiply along the path.
double exact_collision(const CellSupernet& space, const Stamp& stamp);

// Produces one (normal, reduction) cell pair per trial.
using CellPairSampler = std::function<std::pair<Cell, Cell>(Rng&)>;

// Samples `trials` architectures (a normal + reduction cell pair per trial)
// and counts stamp containment. Deterministic for a given (seed, trials)
// regardless of evaluation order: every trial runs on its own substream.
// The default sampler draws uniformly from the supernet.
CollisionStats monte_carlo(const CellSupernet& space, const MarkingKey& mk,
                           long long trials, uint64_t seed,
                           const CellPairSampler& sampler = {});

std::string to_json_string(const CollisionStats& stats,
                           const CellSupernet& space);

}  // namespace archstamp
