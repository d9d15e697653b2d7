#include "archstamp/uniqueness.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "archstamp/rng.hpp"

namespace archstamp {

using nlohmann::json;

WilsonInterval wilson_interval(long long hits, long long trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  double n = static_cast<double>(trials);
  double p = static_cast<double>(hits) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2.0 * n)) / denom;
  double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double analytic_bound(int num_nodes, int n_s, int num_ops, bool* clamped) {
  if (n_s < 1 || n_s > num_nodes)
    throw Error("invalid-stamp-size", "n_s outside [1, B]");
  if (num_ops < 1) throw Error("invalid-supernet", "operation set is empty");
  // C(2B, n_s): the sampled cell exposes two chosen edges per node.
  double comb = 1.0;
  for (int i = 0; i < n_s; ++i)
    comb = comb * (2.0 * num_nodes - i) / (i + 1);
  double denom = 1.0;  // |O|^n_s, exact for small integer op counts
  for (int i = 0; i < n_s; ++i) denom *= num_ops;
  double bound = comb / denom;
  bool over = bound > 1.0;
  if (clamped) *clamped = over;
  return over ? 1.0 : bound;
}

double exact_collision(const CellSupernet& space, const Stamp& stamp) {
  auto violations = validate_stamp(stamp, space, "stamp");
  if (!violations.empty()) throw Error("invalid-key", violations.front());
  // P(node keeps a fixed incoming edge) = C(A-1, 1) / C(A, 2) = 2 / A,
  // where A counts the node's admissible sources; choices are independent
  // across nodes, operations are uniform per kept edge.
  double p = 1.0;
  for (const Edge& e : stamp.edges) {
    double sources = static_cast<double>(space.admissible_sources(e.dst).size());
    p *= 2.0 / sources;
  }
  for (int i = 0; i < stamp.size(); ++i)
    p /= static_cast<double>(space.candidate_ops.size());
  return p;
}

CollisionStats monte_carlo(const CellSupernet& space, const MarkingKey& mk,
                           long long trials, uint64_t seed,
                           const CellPairSampler& sampler) {
  if (trials < 1) throw Error("usage", "trials must be >= 1");
  CollisionStats stats;
  stats.trials = trials;
  stats.analytic_per_cell = analytic_bound(
      space.num_nodes, mk.n_s, static_cast<int>(space.candidate_ops.size()),
      &stats.analytic_clamped);
  stats.analytic_joint = stats.analytic_per_cell * stats.analytic_per_cell;
  stats.exact_normal = exact_collision(space, mk.normal);
  stats.exact_reduction = exact_collision(space, mk.reduction);
  stats.exact_joint = stats.exact_normal * stats.exact_reduction;

  stats.histogram_edges = space.all_edges();
  stats.edge_op_histogram.assign(
      stats.histogram_edges.size(),
      std::vector<long long>(space.candidate_ops.size(), 0));
  // Flat (src, dst) -> slot table; the inner loop runs millions of times.
  const int nodes = space.total_nodes();
  std::vector<int> slot_of(static_cast<size_t>(nodes) * nodes, -1);
  for (size_t i = 0; i < stats.histogram_edges.size(); ++i) {
    const Edge& e = stats.histogram_edges[i];
    slot_of[static_cast<size_t>(e.src) * nodes + e.dst] = static_cast<int>(i);
  }
  auto op_index = [&](const Operation& op) -> int {
    for (size_t i = 0; i < space.candidate_ops.size(); ++i)
      if (space.candidate_ops[i] == op) return static_cast<int>(i);
    return -1;
  };

  for (long long t = 0; t < trials; ++t) {
    Rng rng(Rng::mix(seed, static_cast<uint64_t>(t)));
    std::pair<Cell, Cell> pair =
        sampler ? sampler(rng)
                : std::pair<Cell, Cell>{
                      sample_uniform_cell(space, CellKind::Normal, rng),
                      sample_uniform_cell(space, CellKind::Reduction, rng)};
    bool hit_n = cell_contains_stamp(pair.first, mk.normal);
    bool hit_r = cell_contains_stamp(pair.second, mk.reduction);
    stats.hits_normal += hit_n;
    stats.hits_reduction += hit_r;
    stats.hits_joint += hit_n && hit_r;
    for (const auto& ce : pair.first.edges) {
      int e = slot_of[static_cast<size_t>(ce.edge.src) * nodes + ce.edge.dst];
      int o = op_index(ce.op);
      if (e >= 0 && o >= 0) stats.edge_op_histogram[e][o]++;
    }
  }

  stats.wilson_normal = wilson_interval(stats.hits_normal, trials);
  stats.wilson_reduction = wilson_interval(stats.hits_reduction, trials);
  stats.wilson_joint = wilson_interval(stats.hits_joint, trials);
  return stats;
}

std::string to_json_string(const CollisionStats& stats,
                           const CellSupernet& space) {
  json j;
  j["analytic_per_cell"] = stats.analytic_per_cell;
  j["analytic_clamped"] = stats.analytic_clamped;
  j["analytic_joint"] = stats.analytic_joint;
  j["exact"] = {{"normal", stats.exact_normal},
                {"reduction", stats.exact_reduction},
                {"joint", stats.exact_joint}};
  j["trials"] = stats.trials;
  j["hits"] = {{"normal", stats.hits_normal},
               {"reduction", stats.hits_reduction},
               {"joint", stats.hits_joint}};
  auto wi = [](const WilsonInterval& w) {
    return json{{"lo", w.lo}, {"hi", w.hi}};
  };
  j["wilson95"] = {{"normal", wi(stats.wilson_normal)},
                   {"reduction", wi(stats.wilson_reduction)},
                   {"joint", wi(stats.wilson_joint)}};
  json hist = json::array();
  for (size_t e = 0; e < stats.edge_op_histogram.size(); ++e) {
    json row;
    row["edge"] = {stats.histogram_edges[e].src, stats.histogram_edges[e].dst};
    json counts = json::object();
    for (size_t o = 0; o < stats.edge_op_histogram[e].size(); ++o)
      counts[space.candidate_ops[o].name()] = stats.edge_op_histogram[e][o];
    row["ops"] = counts;
    hist.push_back(row);
  }
  j["edge_op_histogram"] = hist;
  return j.dump(2);
}

}  // namespace archstamp
