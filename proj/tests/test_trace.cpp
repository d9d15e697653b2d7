#include <doctest.h>

#include <filesystem>

#include "archstamp/rng.hpp"
#include "archstamp/search.hpp"
#include "archstamp/trace.hpp"

#include "helpers.hpp"

using namespace archstamp;
using archstamp::testing::demo_key;

namespace {

Architecture demo_arch(uint64_t seed = 42) {
  auto g = build_default_supernet(4);
  return mark(demo_key(g), g, {Strategy::UniformRandom}, seed);
}

std::vector<EventApi> api_sequence(const Trace& t) {
  std::vector<EventApi> s;
  for (const auto& e : t.events) s.push_back(e.api);
  return s;
}

}  // namespace

TEST_CASE("gemm event pattern follows the loop structure") {
  MachineProfile p;

  GemmPlan plan;
  plan.iter2 = 1;
  plan.iter3 = 3;
  plan.iter4 = 9;
  plan.duration = 1000.0;
  auto pattern = gemm_event_pattern(plan);
  REQUIRE(pattern.size() == 13);  // I O^9 I^3
  CHECK(pattern[0] == EventApi::Itcopy);
  for (int i = 1; i <= 9; ++i) CHECK(pattern[i] == EventApi::Oncopy);
  for (int i = 10; i <= 12; ++i) CHECK(pattern[i] == EventApi::Itcopy);

  GemmPlan tiny;
  tiny.iter2 = 2;
  tiny.iter3 = 0;
  tiny.iter4 = 1;
  auto four = gemm_event_pattern(tiny);
  REQUIRE(four.size() == 4);  // I O I O
  CHECK(four[0] == EventApi::Itcopy);
  CHECK(four[1] == EventApi::Oncopy);
  CHECK(four[2] == EventApi::Itcopy);
  CHECK(four[3] == EventApi::Oncopy);
}

TEST_CASE("emitted copy counts obey the closed form for random dims") {
  MachineProfile p;
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    GemmDims d{static_cast<long long>(1 + rng.uniform(3000)),
               static_cast<long long>(1 + rng.uniform(500)),
               static_cast<long long>(1 + rng.uniform(3000))};
    GemmPlan plan = plan_gemm(d, p);
    auto pattern = gemm_event_pattern(plan);
    long long itcopy = 0, oncopy = 0;
    for (auto a : pattern) (a == EventApi::Itcopy ? itcopy : oncopy)++;
    CHECK(itcopy == static_cast<long long>(plan.iter2) * (1 + plan.iter3));
    CHECK(oncopy == static_cast<long long>(plan.iter2) * plan.iter4);
    auto events = emit_gemm(plan, 1000.0);
    CHECK(events.size() == pattern.size());
    CHECK(events.front().t == 1000);
    CHECK(events.back().t == doctest::Approx(1000.0 + plan.duration).epsilon(1e-9));
  }
}

TEST_CASE("simulation is bitwise reproducible") {
  Architecture a = demo_arch();
  MachineProfile p;
  Trace t1 = simulate(a, p, 9, 0.3);
  Trace t2 = simulate(a, p, 9, 0.3);
  CHECK(t1.events == t2.events);
  CHECK(t1.meta.profile_fp == p.fingerprint());

  Trace t3 = simulate(a, p, 10, 0.3);
  CHECK(t1.events != t3.events);
}

TEST_CASE("noise perturbs timestamps but never the event-type sequence") {
  Architecture a = demo_arch();
  MachineProfile p;
  Trace clean = simulate(a, p, 5, 0.0);
  for (double sigma : {0.1, 0.3}) {
    Trace noisy = simulate(a, p, 5, sigma);
    CHECK(api_sequence(noisy) == api_sequence(clean));
    CHECK(noisy.events != clean.events);
  }
  CHECK_THROWS_AS(simulate(a, p, 5, 0.7), Error);
}

TEST_CASE("timestamps are quantized and non-decreasing") {
  Architecture a = demo_arch();
  MachineProfile p;
  for (double sigma : {0.0, 0.3}) {
    Trace t = simulate(a, p, 3, sigma);
    REQUIRE(!t.events.empty());
    long long prev = t.events.front().t;
    for (const auto& e : t.events) {
      CHECK(e.t % p.granularity == 0);
      CHECK(e.t >= prev);
      prev = e.t;
    }
  }
}

TEST_CASE("pooling stretches the surrounding gap and leaves one framework access") {
  auto g = build_default_supernet(4);
  // One-cell architecture: conv, pool, conv in a row.
  Stamp s;
  s.edges = {{0, 2}, {2, 3}, {3, 4}, {4, 5}};
  s.ops = {Operation::sep_conv(3), Operation::avg_pool(), Operation::sep_conv(3),
           Operation::max_pool()};
  MarkingKey mk = make_key(g, s, s);
  Architecture a = mark(mk, g, {Strategy::UniformRandom}, 1);
  MachineProfile p;
  Trace t = simulate(a, p, 0, 0.0);

  int pool_events = 0;
  for (const auto& e : t.events)
    if (e.src == EventSource::Framework) ++pool_events;
  int pool_ops = 0;
  for (const auto& c : a.cells)
    for (const auto& ce : c.edges)
      if (ce.op.is_pool()) ++pool_ops;
  CHECK(pool_events == pool_ops);
  CHECK(pool_events >= 2 * 20);  // the stamp alone plants two per cell

  // Every framework access sits inside a blas gap of at least 1.4 base gaps.
  for (size_t i = 0; i < t.events.size(); ++i) {
    if (t.events[i].src != EventSource::Framework) continue;
    size_t before = i, after = i;
    while (before > 0 && t.events[before - 1].src != EventSource::Blas) --before;
    while (after + 1 < t.events.size() &&
           t.events[after + 1].src != EventSource::Blas)
      ++after;
    if (before == 0 || after + 1 >= t.events.size()) continue;
    double gap =
        static_cast<double>(t.events[after + 1].t - t.events[before - 1].t);
    CHECK(gap >= 1.4 * p.base_gap);
  }
}

TEST_CASE("binarization speedup compresses the whole trace twenty-fold") {
  Architecture a = demo_arch();
  MachineProfile p;
  Trace normal = simulate(a, p, 2, 0.0);

  Architecture fast = a;
  fast.speedup_hint = 20.0;
  Trace quick = simulate(fast, p, 2, 0.0);
  CHECK(api_sequence(quick) == api_sequence(normal));
  CHECK(quick.meta.speedup == doctest::Approx(20.0));

  double full = static_cast<double>(normal.events.back().t - normal.events.front().t);
  double compressed =
      static_cast<double>(quick.events.back().t - quick.events.front().t);
  CHECK(compressed / full == doctest::Approx(1.0 / 20.0).epsilon(0.1));
}

TEST_CASE("pruning scale shortens clusters without touching the event sequence") {
  Architecture a = demo_arch();
  MachineProfile p;
  Trace base = simulate(a, p, 2, 0.0);

  Architecture pruned = a;
  for (auto& s : pruned.cell_scale) s = 0.55;
  Trace shorter = simulate(pruned, p, 2, 0.0);
  CHECK(api_sequence(shorter) == api_sequence(base));
  CHECK(shorter.events.back().t < base.events.back().t);
}

TEST_CASE("trace file round-trip is lossless") {
  Architecture a = demo_arch();
  MachineProfile p;
  Trace t = simulate(a, p, 11, 0.2);
  std::string path = (std::filesystem::temp_directory_path() /
                      "archstamp_trace_roundtrip.jsonl")
                         .string();
  save_trace(t, path);
  Trace back = load_trace(path);
  CHECK(back.events == t.events);
  CHECK(back.meta.seed == t.meta.seed);
  CHECK(back.meta.sigma == doctest::Approx(t.meta.sigma));
  CHECK(back.meta.profile_fp == t.meta.profile_fp);
  CHECK(back.meta.speedup == doctest::Approx(t.meta.speedup));
  std::filesystem::remove(path);
}

TEST_CASE("malformed trace files are rejected with line numbers") {
  CHECK_THROWS_WITH_AS(
      trace_from_jsonl("{\"meta\":{}}\n"
                       "{\"t\": 4000, \"src\": \"blas\", \"api\": \"itcopy\"}\n"
                       "{\"t\": 2000, \"src\": \"blas\", \"api\": \"oncopy\"}\n"),
      doctest::Contains("line 3"), Error);
  CHECK_THROWS_WITH_AS(trace_from_jsonl("not json\n"), doctest::Contains("line 1"),
                       Error);
  CHECK_THROWS_WITH_AS(
      trace_from_jsonl("{\"t\": 0, \"src\": \"blas\", \"api\": \"pool_avg\"}\n"),
      doctest::Contains("itcopy/oncopy"), Error);

  Trace empty = trace_from_jsonl("");
  CHECK(empty.events.empty());
  CHECK(empty.meta.sigma == 0.0);
  CHECK(empty.meta.speedup == 1.0);
}

TEST_CASE("interval re-noising preserves order and event types") {
  Architecture a = demo_arch();
  MachineProfile p;
  Trace clean = simulate(a, p, 4, 0.0);
  Trace noised = apply_interval_noise(clean, 0.3, 123);
  CHECK(api_sequence(noised) == api_sequence(clean));
  CHECK(noised.meta.sigma == doctest::Approx(0.3));
  long long prev = noised.events.front().t;
  for (const auto& e : noised.events) {
    CHECK(e.t >= prev);
    prev = e.t;
  }
  CHECK(apply_interval_noise(clean, 0.3, 123).events == noised.events);
}
