#include <doctest.h>

#include "archstamp/attacks.hpp"
#include "archstamp/rng.hpp"
#include "archstamp/search.hpp"
#include "archstamp/trace.hpp"
#include "archstamp/verify.hpp"

#include "helpers.hpp"

using namespace archstamp;
using archstamp::testing::demo_key;

namespace {

struct Pipeline {
  CellSupernet g = build_default_supernet(4);
  MachineProfile profile;
  MarkingKey mk;
  VerificationKey vk;
  Architecture arch;

  explicit Pipeline(uint64_t seed = 42, bool demo = true) {
    if (demo) {
      mk = demo_key(g);
      vk = verification_key(mk);
    } else {
      std::tie(mk, vk) = wmgen(4, g, seed);
    }
    arch = mark(mk, g, {Strategy::UniformRandom}, seed);
  }

  Trace trace(uint64_t seed, double sigma) const {
    return simulate(arch, profile, seed, sigma);
  }
};

}  // namespace

TEST_CASE("match_op pairs recovered classes with stamp operations") {
  RecoveredOp sc5;
  sc5.cls = OpClass::SC;
  sc5.kernel = 5;
  sc5.channels = 33;
  CHECK(match_op(sc5, Operation::sep_conv(5)));
  CHECK(!match_op(sc5, Operation::sep_conv(3)));
  CHECK(!match_op(sc5, Operation::dil_sep_conv(5)));

  RecoveredOp ds3;
  ds3.cls = OpClass::DS;
  ds3.kernel = 3;
  CHECK(!match_op(ds3, Operation::sep_conv(3)));
  CHECK(match_op(ds3, Operation::dil_sep_conv(3)));

  RecoveredOp unresolved;
  unresolved.cls = OpClass::SC;
  unresolved.kernel = 0;
  CHECK(match_op(unresolved, Operation::sep_conv(3)));
  CHECK(match_op(unresolved, Operation::sep_conv(5)));

  RecoveredOp pool_avg;
  pool_avg.cls = OpClass::Pool;
  pool_avg.pool = PoolType::Avg;
  CHECK(match_op(pool_avg, Operation::avg_pool()));
  CHECK(!match_op(pool_avg, Operation::max_pool()));
  RecoveredOp pool_unknown;
  pool_unknown.cls = OpClass::Pool;
  pool_unknown.pool = PoolType::Unknown;
  CHECK(match_op(pool_unknown, Operation::avg_pool()));
  CHECK(match_op(pool_unknown, Operation::max_pool()));

  RecoveredOp gap;
  gap.cls = OpClass::GapOnly;
  CHECK(match_op(gap, Operation::skip()));
  CHECK(!match_op(gap, Operation::sep_conv(3)));
}

TEST_CASE("expected cell kinds mirror the macro structure") {
  auto kinds = expected_cell_kinds(3, 6);
  REQUIRE(kinds.size() == 20);
  CHECK(kinds[6] == CellKind::Reduction);
  CHECK(kinds[13] == CellKind::Reduction);
  CHECK(expected_cell_kinds(1, 1).size() == 1);
}

TEST_CASE("clean traces of marked architectures verify") {
  Pipeline pl;
  VerifyReport r = verify(pl.vk, pl.trace(1, 0.0), pl.profile);
  CHECK(r.verified);
  CHECK(r.nas_like);
  CHECK(r.verified_windows == 20);
  CHECK(r.expected_windows == 20);
}

TEST_CASE("random keys verify across seeds at sigma zero") {
  for (uint64_t seed = 0; seed < 15; ++seed) {
    Pipeline pl(seed, false);
    VerifyReport r = verify(pl.vk, pl.trace(seed + 1, 0.0), pl.profile);
    CHECK(r.verified);
  }
}

TEST_CASE("verification survives interval noise") {
  Pipeline pl;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    VerifyReport r = verify(pl.vk, pl.trace(seed, 0.3), pl.profile);
    CHECK(r.verified);
  }
}

TEST_CASE("wrong keys do not verify") {
  Pipeline pl;
  auto [other_mk, other_vk] = wmgen(4, pl.g, 909);
  VerifyReport r = verify(other_vk, pl.trace(1, 0.0), pl.profile);
  CHECK(!r.verified);
  CHECK(r.nas_like);
}

TEST_CASE("traces of unmarked architectures do not verify") {
  Pipeline pl;
  Rng rng(5);
  Architecture random_arch = stack_architecture(
      sample_uniform_cell(pl.g, CellKind::Normal, rng),
      sample_uniform_cell(pl.g, CellKind::Reduction, rng), MacroParams{}, pl.g);
  Trace t = simulate(random_arch, pl.profile, 2, 0.0);
  VerifyReport r = verify(pl.vk, t, pl.profile);
  CHECK(!r.verified);
}

TEST_CASE("decoy cell windows are skipped without spending a key") {
  Pipeline pl;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Architecture attacked =
        apply_attack(pl.arch, AttackSpec::parse("useless-cell", seed), &pl.mk);
    Trace t = simulate(attacked, pl.profile, seed, 0.0);
    VerifyReport r = verify(pl.vk, t, pl.profile);
    CHECK(r.verified);
  }
}

TEST_CASE("shuffle and useless-op obfuscation keep the verdict") {
  Pipeline pl;
  for (const char* kind : {"shuffle", "useless-op"}) {
    for (uint64_t seed = 0; seed < 5; ++seed) {
      Architecture attacked =
          apply_attack(pl.arch, AttackSpec::parse(kind, seed), &pl.mk);
      Trace t = simulate(attacked, pl.profile, seed, 0.0);
      VerifyReport r = verify(pl.vk, t, pl.profile);
      CHECK(r.verified);
    }
  }
}

TEST_CASE("weight pruning and binarization keep the verdict") {
  Pipeline pl;
  for (const char* kind : {"prune:0.9", "binarize"}) {
    Architecture attacked = apply_attack(pl.arch, AttackSpec::parse(kind, 3), &pl.mk);
    Trace t = simulate(attacked, pl.profile, 3, 0.0);
    VerifyReport r = verify(pl.vk, t, pl.profile);
    CHECK(r.verified);
  }
}

TEST_CASE("oracle structured pruning defeats verification, and is detected") {
  Pipeline pl;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Architecture attacked = apply_attack(
        pl.arch, AttackSpec::parse("structured:1", seed, true), &pl.mk);
    Trace t = simulate(attacked, pl.profile, seed, 0.0);
    VerifyReport r = verify(pl.vk, t, pl.profile);
    CHECK(!r.verified);
    CHECK(r.nas_like);
  }
}

TEST_CASE("skip stamp operations match gap intervals under the default rule") {
  Pipeline pl;  // the demo reduction stamp ends with a skip
  REQUIRE(pl.vk.reduction.back() == Operation::skip());
  VerifyReport with_rule = verify(pl.vk, pl.trace(1, 0.0), pl.profile);
  CHECK(with_rule.verified);

  // Strict mode consumes a literal gap interval instead.
  RecoveredOp sc3;
  sc3.cls = OpClass::SC;
  sc3.kernel = 3;
  RecoveredOp gap;
  gap.cls = OpClass::GapOnly;
  RecoveredArchitecture rec;
  rec.windows.resize(1);
  rec.windows[0].ops = {sc3, gap, sc3};
  VerificationKey vk;
  vk.n_s = 2;
  vk.normal = {Operation::sep_conv(3), Operation::skip()};
  vk.reduction = vk.normal;
  VerifyConfig strict;
  strict.skip_match_rule = false;
  strict.blocks = 1;
  strict.cells_per_block = 1;
  CHECK(verify(vk, rec, strict).verified);
  // A trailing skip with no interval after it cannot match strictly.
  rec.windows[0].ops = {gap, sc3};
  CHECK(!verify(vk, rec, strict).verified);
}

TEST_CASE("adding non-stamp operations never flips a verifying window") {
  // Subsequence matching is monotone under insertion.
  std::vector<RecoveredOp> ops;
  RecoveredOp sc3;
  sc3.cls = OpClass::SC;
  sc3.kernel = 3;
  RecoveredOp pool;
  pool.cls = OpClass::Pool;
  pool.pool = PoolType::Avg;
  ops = {pool, sc3};
  std::vector<Operation> stamp{Operation::avg_pool(), Operation::sep_conv(3)};

  RecoveredArchitecture rec;
  rec.windows.resize(1);
  rec.windows[0].ops = ops;
  VerificationKey vk;
  vk.n_s = 2;
  vk.normal = stamp;
  vk.reduction = stamp;
  VerifyConfig cfg;
  cfg.blocks = 1;
  cfg.cells_per_block = 1;
  CHECK(verify(vk, rec, cfg).verified);

  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    auto padded = ops;
    RecoveredOp extra;
    extra.cls = trial % 2 ? OpClass::DS : OpClass::NormalConvOrFc;
    extra.kernel = 5;
    padded.insert(padded.begin() + rng.uniform(padded.size() + 1), extra);
    rec.windows[0].ops = padded;
    CHECK(verify(vk, rec, cfg).verified);
  }
}

TEST_CASE("segmentation failure reports a not-a-nas verdict") {
  Pipeline pl;
  Trace flat;
  for (int i = 0; i < 100; ++i)
    flat.events.push_back({i * 2000, EventSource::Blas,
                           i % 2 ? EventApi::Oncopy : EventApi::Itcopy});
  VerifyReport r = verify(pl.vk, flat, pl.profile);
  CHECK(!r.verified);
  CHECK(!r.nas_like);
  CHECK(!r.reason.empty());
}

TEST_CASE("per-cell keys verify against their own window sequence") {
  auto g = build_default_supernet(4);
  auto [mk, vk] = wmgen_per_cell(4, g, 20, 3);
  Architecture a = mark(mk, g, {Strategy::UniformRandom}, 5);
  MachineProfile profile;
  VerifyReport r = verify(vk, simulate(a, profile, 1, 0.0), profile);
  CHECK(r.verified);
  CHECK(r.expected_windows == 20);
}

TEST_CASE("report serialization carries the verdict and match detail") {
  Pipeline pl;
  VerifyReport r = verify(pl.vk, pl.trace(1, 0.0), pl.profile);
  std::string text = to_json_string(r);
  CHECK(text.find("\"verified\": true") != std::string::npos);
  CHECK(text.find("\"verified_windows\": 20") != std::string::npos);
  CHECK(text.find("\"windows\"") != std::string::npos);
}
