#include <doctest.h>

#include <map>
#include <set>

#include "archstamp/rng.hpp"
#include "archstamp/watermark.hpp"

#include "helpers.hpp"

using namespace archstamp;
using archstamp::testing::brute_force_paths;
using archstamp::testing::demo_key;

TEST_CASE("get_path matches exhaustive enumeration for every size") {
  for (int nodes : {1, 2, 3, 4, 5}) {
    auto g = build_default_supernet(nodes);
    for (int n_s = 1; n_s <= nodes; ++n_s) {
      auto got = get_path(g, n_s);
      auto want = brute_force_paths(g, n_s);
      CHECK(std::set<std::vector<Edge>>(got.begin(), got.end()) == want);
      CHECK(got.size() == want.size());
      for (const auto& p : got) CHECK(p.size() == static_cast<size_t>(n_s));
    }
  }
}

TEST_CASE("get_path on the default four-node supernet") {
  auto g = build_default_supernet(4);

  auto full = get_path(g, 4);
  REQUIRE(full.size() == 2);
  std::vector<Edge> via_a{{0, 2}, {2, 3}, {3, 4}, {4, 5}};
  std::vector<Edge> via_b{{1, 2}, {2, 3}, {3, 4}, {4, 5}};
  CHECK((full[0] == via_a || full[1] == via_a));
  CHECK((full[0] == via_b || full[1] == via_b));

  // Length-1 paths are exactly the admissible edges of the DAG.
  auto singles = get_path(g, 1);
  CHECK(singles.size() == g.all_edges().size());
  CHECK(singles.size() == 14);

  CHECK_THROWS_WITH_AS(get_path(g, 0), doctest::Contains("stamp size"), Error);
  CHECK_THROWS_AS(get_path(g, 5), Error);
}

TEST_CASE("get_path on a single-node supernet") {
  auto g = build_default_supernet(1, {Operation::skip()});
  auto paths = get_path(g, 1);
  REQUIRE(paths.size() == 2);
  CHECK(paths[0] == std::vector<Edge>{{0, 2}});
  CHECK(paths[1] == std::vector<Edge>{{1, 2}});
}

TEST_CASE("every generated stamp is a consecutive path of the right length") {
  auto g = build_default_supernet(4);
  for (uint64_t seed = 0; seed < 50; ++seed) {
    for (int n_s = 1; n_s <= 4; ++n_s) {
      auto [mk, vk] = wmgen(n_s, g, seed);
      CHECK(mk.n_s == n_s);
      CHECK(mk.normal.consecutive());
      CHECK(mk.reduction.consecutive());
      CHECK(mk.normal.size() == n_s);
      CHECK(validate_key(mk, g).empty());
      CHECK(vk.normal == mk.normal.ops);
      CHECK(vk.reduction == mk.reduction.ops);
    }
  }
}

TEST_CASE("wmgen is deterministic in the seed") {
  auto g = build_default_supernet(4);
  auto [mk1, vk1] = wmgen(4, g, 1234);
  auto [mk2, vk2] = wmgen(4, g, 1234);
  CHECK(mk1.normal == mk2.normal);
  CHECK(mk1.reduction == mk2.reduction);
  auto [mk3, vk3] = wmgen(4, g, 1235);
  CHECK((mk1.normal.edges != mk3.normal.edges || mk1.normal.ops != mk3.normal.ops ||
         mk1.reduction.edges != mk3.reduction.edges ||
         mk1.reduction.ops != mk3.reduction.ops));
}

TEST_CASE("wmgen with a forced single operation") {
  auto g = build_default_supernet(1, {Operation::sep_conv(3)});
  auto [mk, vk] = wmgen(1, g, 99);
  CHECK(vk.normal == std::vector<Operation>{Operation::sep_conv(3)});
}

TEST_CASE("path sampling is uniform over the enumeration (chi-squared)") {
  auto g = build_default_supernet(4);
  auto paths = get_path(g, 2);
  REQUIRE(paths.size() == 16);
  std::map<std::vector<Edge>, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto [mk, vk] = wmgen(2, g, 777000 + i);
    counts[mk.normal.edges]++;
  }
  double expected = static_cast<double>(draws) / paths.size();
  double chi2 = 0.0;
  for (const auto& p : paths) {
    double d = counts[p] - expected;
    chi2 += d * d / expected;
  }
  // 15 degrees of freedom: mean 15, sd sqrt(30); 3 sigma above is ~31.4.
  CHECK(chi2 < 31.5);
  CHECK(counts.size() == paths.size());
}

TEST_CASE("operation sampling is uniform over the candidate set (chi-squared)") {
  auto g = build_default_supernet(4);
  std::map<std::string, int> counts;
  const int draws = 5000;
  for (int i = 0; i < draws; ++i) {
    auto [mk, vk] = wmgen(4, g, 13000 + i);
    for (const auto& op : mk.normal.ops) counts[op.name()]++;
  }
  double expected = draws * 4.0 / 7.0;
  double chi2 = 0.0;
  for (const auto& op : g.candidate_ops) {
    double d = counts[op.name()] - expected;
    chi2 += d * d / expected;
  }
  // 6 degrees of freedom: 3 sigma above the mean is ~16.4.
  CHECK(chi2 < 16.5);
}

TEST_CASE("validate_key reports broken paths and unknown operations") {
  auto g = build_default_supernet(4);
  MarkingKey mk = demo_key(g);
  CHECK(validate_key(mk, g).empty());

  MarkingKey broken = mk;
  broken.normal.edges[2] = {1, 4};  // target of edge 1 is node 3, not 1
  auto v1 = validate_key(broken, g);
  REQUIRE(!v1.empty());
  CHECK(v1.front().find("path broken at index 2") != std::string::npos);

  MarkingKey alien = mk;
  alien.reduction.ops[0] = Operation::normal_conv(7);
  auto v2 = validate_key(alien, g);
  REQUIRE(!v2.empty());
  CHECK(v2.front().find("unknown operation") != std::string::npos);
}

TEST_CASE("verification key is a pure projection of the marking key") {
  auto g = build_default_supernet(4);
  auto [mk, vk] = wmgen(3, g, 5);
  VerificationKey again = verification_key(mk);
  CHECK(again.normal == vk.normal);
  CHECK(again.reduction == vk.reduction);
  CHECK(again.n_s == vk.n_s);
}

TEST_CASE("key json round-trip, vk file has no edges") {
  auto g = build_default_supernet(4);
  auto [mk, vk] = wmgen(4, g, 21);
  std::string mk_text = to_json_string(mk);
  std::string vk_text = to_json_string(vk);
  CHECK(mk_text.find("\"edges\"") != std::string::npos);
  CHECK(vk_text.find("\"edges\"") == std::string::npos);
  CHECK(vk_text.find("\"n_s\"") != std::string::npos);

  MarkingKey mk2 = marking_key_from_json_string(mk_text);
  CHECK(mk2.normal == mk.normal);
  CHECK(mk2.reduction == mk.reduction);
  VerificationKey vk2 = verification_key_from_json_string(vk_text);
  CHECK(vk2.normal == vk.normal);
  CHECK(vk2.reduction == vk.reduction);
}

TEST_CASE("per-cell generation keeps one stamp per position") {
  auto g = build_default_supernet(4);
  auto [mk, vk] = wmgen_per_cell(4, g, 20, 3);
  CHECK(mk.per_cell.size() == 20);
  CHECK(vk.per_cell.size() == 20);
  for (const auto& s : mk.per_cell) {
    CHECK(s.consecutive());
    CHECK(s.size() == 4);
  }
  MarkingKey rt = marking_key_from_json_string(to_json_string(mk));
  CHECK(rt.per_cell.size() == 20);
  CHECK(rt.per_cell == mk.per_cell);
}
