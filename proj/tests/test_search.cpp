#include <doctest.h>

#include <algorithm>
#include <set>

#include "archstamp/rng.hpp"
#include "archstamp/search.hpp"

#include "helpers.hpp"

using namespace archstamp;
using archstamp::testing::demo_key;

TEST_CASE("restricted space removes exactly the stamped pairs") {
  auto g = build_default_supernet(4);
  MarkingKey mk = demo_key(g);
  auto rs = RestrictedSpace::restrict_space(g, mk.normal);
  auto free_edges = rs.free_edges();
  CHECK(free_edges.size() == g.all_edges().size() - 4);
  for (const Edge& e : mk.normal.edges)
    CHECK(std::find(free_edges.begin(), free_edges.end(), e) == free_edges.end());

  CHECK(rs.free_slots() == 2 * 4 - 4);
  // Every node lies on the full-length path: one free slot each.
  for (NodeId t = g.first_node(); t <= g.last_node(); ++t)
    CHECK(rs.free_slots_for(t) == 1);

  Stamp one;
  one.edges = {{0, 3}};
  one.ops = {Operation::sep_conv(3)};
  auto rs1 = RestrictedSpace::restrict_space(g, one);
  CHECK(rs1.free_slots_for(3) == 1);
  CHECK(rs1.free_slots_for(2) == 2);
  CHECK(rs1.free_slots() == 7);
}

TEST_CASE("marked architectures always contain the stamp") {
  auto g = build_default_supernet(4);
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto [mk, vk] = wmgen(4, g, seed);
    Architecture a = mark(mk, g, {Strategy::UniformRandom}, seed * 31 + 7);
    CHECK(contains_stamp(a, mk));
    for (const auto& c : a.cells) CHECK(c.order_is_topological());
  }
}

TEST_CASE("stamp containment holds for every strategy") {
  auto g = build_default_supernet(4);
  auto [mk, vk] = wmgen(3, g, 11);
  for (auto strat : {Strategy::UniformRandom, Strategy::GreedyMock}) {
    Architecture a = mark(mk, g, {strat, 8}, 99);
    CHECK(contains_stamp(a, mk));
  }
}

TEST_CASE("free-slot filling varies across seeds") {
  auto g = build_default_supernet(4);
  auto [mk, vk] = wmgen(4, g, 1);
  std::set<std::string> serialized;
  for (uint64_t seed = 0; seed < 20; ++seed)
    serialized.insert(to_json_string(mark(mk, g, {Strategy::UniformRandom}, seed)));
  CHECK(serialized.size() > 1);
}

TEST_CASE("mark is deterministic for a fixed seed") {
  auto g = build_default_supernet(4);
  auto [mk, vk] = wmgen(4, g, 5);
  CHECK(to_json_string(mark(mk, g, {Strategy::UniformRandom}, 77)) ==
        to_json_string(mark(mk, g, {Strategy::UniformRandom}, 77)));
  CHECK(to_json_string(mark(mk, g, {Strategy::GreedyMock, 8}, 77)) ==
        to_json_string(mark(mk, g, {Strategy::GreedyMock, 8}, 77)));
}

TEST_CASE("forced completion when the space admits one filling") {
  auto g = build_default_supernet(1, {Operation::sep_conv(3)});
  Stamp s;
  s.edges = {{0, 2}};
  s.ops = {Operation::sep_conv(3)};
  MarkingKey mk = make_key(g, s, s);
  MacroParams macro;
  macro.blocks = 1;
  macro.cells_per_block = 1;
  Architecture a = mark(mk, g, {Strategy::UniformRandom}, 0, macro);
  REQUIRE(a.cells.size() == 1);
  REQUIRE(a.cells[0].edges.size() == 2);
  // Node 2 must take both inputs: the stamped a-edge plus the b-edge.
  std::set<NodeId> sources;
  for (const auto& ce : a.cells[0].edges) sources.insert(ce.edge.src);
  CHECK(sources == std::set<NodeId>{0, 1});
}

TEST_CASE("contains_stamp rejects a replaced stamp operation") {
  auto g = build_default_supernet(4);
  auto [mk, vk] = wmgen(4, g, 9);
  Architecture a = mark(mk, g, {Strategy::UniformRandom}, 3);
  REQUIRE(contains_stamp(a, mk));

  Architecture tampered = a;
  for (auto& ce : tampered.cells[0].edges)
    if (ce.edge == mk.normal.edges[1]) {
      ce.op = ce.op == Operation::max_pool() ? Operation::avg_pool()
                                             : Operation::max_pool();
      break;
    }
  CHECK(!contains_stamp(tampered, mk));
}

TEST_CASE("unrelated architectures almost never contain the stamp") {
  auto g = build_default_supernet(4);
  auto [mk, vk] = wmgen(4, g, 1);
  int hits = 0;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    Architecture a = stack_architecture(sample_uniform_cell(g, CellKind::Normal, rng),
                                        sample_uniform_cell(g, CellKind::Reduction, rng),
                                        MacroParams{}, g);
    hits += contains_stamp(a, mk);
  }
  CHECK(hits == 0);  // joint probability ~ 3e-9 per trial
}

TEST_CASE("per-cell keys mark each position with its own stamp") {
  auto g = build_default_supernet(4);
  auto [mk, vk] = wmgen_per_cell(4, g, 20, 17);
  Architecture a = mark(mk, g, {Strategy::UniformRandom}, 4);
  REQUIRE(a.cell_count() == 20);
  CHECK(contains_stamp(a, mk));
  for (int i = 0; i < 20; ++i)
    CHECK(cell_contains_stamp(a.cells[i], mk.per_cell[i]));
}
