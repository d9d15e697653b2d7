#include "archstamp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

namespace archstamp {

using nlohmann::json;

namespace {

double window_gap_threshold(const MachineProfile& p, const AnalysisConfig& cfg) {
  // Placed below the noise-floor of the cell gap (interval noise is clamped
  // at 0.1x) and far above the upper tail of pooling gaps.
  if (cfg.window_gap_override) return *cfg.window_gap_override;
  return 0.09 * p.cell_gap_factor * p.base_gap;
}

double group_gap_threshold(const MachineProfile& p, const AnalysisConfig& cfg) {
  // Same construction one level down: below the inter-operation gap's
  // clamp floor, above the intra-operation gap's tail.
  if (cfg.group_gap_override) return *cfg.group_gap_override;
  return 0.09 * p.base_gap;
}

// Grammar parse of one blas event stream into xI-yO-zI clusters. The last
// itcopy of a trailing run heads the next cluster when an oncopy follows.
std::vector<Cluster> parse_clusters(const std::vector<TraceEvent>& ev,
                                    int* malformed) {
  std::vector<Cluster> out;
  size_t i = 0;
  const size_t n = ev.size();
  auto is_i = [&](size_t idx) { return ev[idx].api == EventApi::Itcopy; };
  while (i < n) {
    if (!is_i(i)) {  // stray oncopy run
      size_t j = i;
      while (j < n && !is_i(j)) ++j;
      if (malformed) ++*malformed;
      Cluster c;
      c.first_event = i;
      c.event_count = j - i;
      c.well_formed = false;
      c.start = static_cast<double>(ev[i].t);
      c.duration = static_cast<double>(ev[j - 1].t - ev[i].t);
      out.push_back(c);
      i = j;
      continue;
    }
    size_t head = i;
    ++i;
    size_t o_run = 0;
    while (i < n && !is_i(i)) {
      ++o_run;
      ++i;
    }
    size_t i_run = 0;
    while (i + i_run < n && is_i(i + i_run)) ++i_run;
    size_t trailing;
    if (i + i_run < n) {
      // More oncopies follow: the run's last itcopy opens the next cluster.
      trailing = i_run > 0 ? i_run - 1 : 0;
    } else {
      trailing = i_run;
    }
    Cluster c;
    c.first_event = head;
    c.event_count = 1 + o_run + trailing;
    c.iter2 = 1;
    c.iter4 = static_cast<int>(o_run);
    c.iter3 = static_cast<int>(trailing);
    c.well_formed = o_run > 0;
    if (!c.well_formed && malformed) ++*malformed;
    c.start = static_cast<double>(ev[head].t);
    c.duration =
        static_cast<double>(ev[head + c.event_count - 1].t - ev[head].t);
    out.push_back(c);
    i += trailing;
  }
  return out;
}

}  // namespace

long long snap_spatial(const ValueRange& m_range) {
  // NAS inputs are square with power-of-two sides; report the largest such
  // patch count inside the range.
  long long best = 0;
  for (long long side = 1; side * side <= m_range.hi; side *= 2)
    if (m_range.contains(side * side)) best = side * side;
  return best > 0 ? best : m_range.hi;
}

DimRanges recover_dims(const Cluster& cluster, const MachineProfile& profile) {
  if (!cluster.well_formed)
    throw Error("malformed-cluster", "cluster lacks an xI-yO-zI decomposition");
  return invert_iterations(cluster.iter2, cluster.iter3, cluster.iter4, profile);
}

RecoveredArchitecture segment(const Trace& trace, const MachineProfile& profile,
                              const AnalysisConfig& cfg) {
  RecoveredArchitecture rec;
  rec.speedup = trace.meta.speedup > 0 ? trace.meta.speedup : 1.0;
  const double theta2 = window_gap_threshold(profile, cfg) / rec.speedup;

  if (trace.events.empty()) {
    rec.nas_like = false;
    rec.reason = "empty trace";
    return rec;
  }

  std::vector<std::pair<size_t, size_t>> segments;  // [first, last] event index
  size_t begin = 0;
  for (size_t i = 1; i < trace.events.size(); ++i) {
    if (static_cast<double>(trace.events[i].t - trace.events[i - 1].t) >= theta2) {
      segments.emplace_back(begin, i - 1);
      begin = i;
    }
  }
  segments.emplace_back(begin, trace.events.size() - 1);

  size_t needed = 1 + (cfg.expect_prologue ? 1 : 0) + (cfg.expect_epilogue ? 1 : 0);
  if (segments.size() < needed) {
    rec.nas_like = false;
    rec.reason = "no cell-window structure detectable";
    return rec;
  }

  size_t first_window = 0, last_window = segments.size() - 1;
  auto clusters_of = [&](size_t seg) {
    std::vector<TraceEvent> blas;
    for (size_t i = segments[seg].first; i <= segments[seg].second; ++i)
      if (trace.events[i].src == EventSource::Blas) blas.push_back(trace.events[i]);
    return parse_clusters(blas, nullptr);
  };
  if (cfg.expect_prologue) {
    rec.prologue = clusters_of(0);
    first_window = 1;
  }
  if (cfg.expect_epilogue) {
    rec.epilogue = clusters_of(segments.size() - 1);
    last_window = segments.size() - 2;
  }

  bool any_content = false;
  for (size_t s = first_window; s <= last_window; ++s) {
    CellWindow w;
    for (size_t i = segments[s].first; i <= segments[s].second; ++i) {
      const TraceEvent& e = trace.events[i];
      if (e.src == EventSource::Blas)
        w.blas_events.push_back(e);
      else
        w.framework_events.push_back(e);
    }
    w.start = static_cast<double>(trace.events[segments[s].first].t);
    w.end = static_cast<double>(trace.events[segments[s].second].t);
    w.clusters = parse_clusters(w.blas_events, &w.malformed_clusters);
    for (const auto& c : w.clusters)
      if (c.well_formed) any_content = true;
    if (!w.framework_events.empty()) any_content = true;
    rec.windows.push_back(std::move(w));
  }

  if (rec.windows.empty() || !any_content) {
    rec.nas_like = false;
    rec.reason = "windows carry no recognizable GEMM or framework activity";
  }
  return rec;
}

namespace {

struct Pass {
  size_t dw_begin = 0;  // cluster indices inside the chunk
  size_t dw_count = 0;
  size_t pw = 0;
  bool has_pw = false;
};

struct ClusterSig {
  int iter2, iter3, iter4;
  bool operator==(const ClusterSig&) const = default;
};

ClusterSig sig_of(const Cluster& c) { return {c.iter2, c.iter3, c.iter4}; }

// Splits a same-operation chunk into depthwise-run + pointwise passes.
std::vector<Pass> parse_passes(const std::vector<Cluster>& clusters,
                               const std::vector<size_t>& chunk) {
  std::vector<Pass> passes;
  size_t i = 0;
  while (i < chunk.size()) {
    size_t run = 1;
    while (i + run < chunk.size() &&
           sig_of(clusters[chunk[i + run]]) == sig_of(clusters[chunk[i]]))
      ++run;
    Pass p;
    p.dw_begin = i;
    p.dw_count = run;
    if (i + run < chunk.size()) {
      p.pw = i + run;
      p.has_pw = true;
      i += run + 1;
    } else {
      i += run;
    }
    passes.push_back(p);
  }
  return passes;
}

double cluster_sum(const std::vector<Cluster>& clusters,
                   const std::vector<size_t>& chunk, size_t begin, size_t count) {
  double s = 0.0;
  for (size_t i = 0; i < count; ++i) s += clusters[chunk[begin + i]].duration;
  return s;
}

// Expected depthwise/pointwise duration ratio for a candidate kernel size,
// built from the same forward model the simulator uses. Pruning scale and
// capture speedup cancel in the measured ratio, so predictions run at 1x.
double predicted_ratio(int kernel, long long m, int channels, long long n_out,
                       bool dilated, const MachineProfile& profile) {
  GemmPlan dw = plan_gemm({m, 1, static_cast<long long>(kernel) * kernel}, profile,
                          dilated, 1.0, 1.0);
  GemmPlan pw = plan_gemm({m, n_out, channels}, profile, dilated, 1.0, 1.0);
  return channels * dw.duration / pw.duration;
}

// Output channel count of the pointwise step: the cell channel count for
// stride-1 cells, twice that for reduction cells; the recovered n-range
// disambiguates.
long long estimate_out_channels(int channels, const DimRanges& dims) {
  if (dims.n.contains(channels)) return channels;
  if (dims.n.contains(2LL * channels)) return 2LL * channels;
  return dims.n.hi;
}

}  // namespace

std::vector<RecoveredOp> classify_cluster_group(CellWindow& window,
                                                const MachineProfile& profile,
                                                double speedup,
                                                const AnalysisConfig& cfg,
                                                bool trace_has_framework) {
  const double tau = group_gap_threshold(profile, cfg) / speedup;
  const double base = profile.base_gap / speedup;
  const double g = static_cast<double>(profile.granularity);

  // Link clusters separated by intra-operation gaps into chunks.
  std::vector<std::vector<size_t>> chunks;
  for (size_t i = 0; i < window.clusters.size(); ++i) {
    const Cluster& c = window.clusters[i];
    if (!c.well_formed) continue;
    bool linked = false;
    if (!chunks.empty()) {
      const Cluster& prev = window.clusters[chunks.back().back()];
      double gap = c.start - (prev.start + prev.duration);
      linked = gap < tau;
    }
    if (linked)
      chunks.back().push_back(i);
    else
      chunks.push_back({i});
  }

  std::vector<RecoveredOp> ops;

  for (const auto& chunk : chunks) {
    const Cluster& first = window.clusters[chunk.front()];
    const Cluster& last = window.clusters[chunk.back()];
    RecoveredOp op;
    op.start = first.start;
    op.duration = last.start + last.duration - first.start;
    op.cluster_count = static_cast<int>(chunk.size());

    if (chunk.size() == 1) {
      op.cls = OpClass::NormalConvOrFc;
      op.dims = recover_dims(first, profile);
      op.snapped_m = snap_spatial(op.dims.m);
      ops.push_back(op);
      continue;
    }

    auto passes = parse_passes(window.clusters, chunk);
    bool two_identical =
        passes.size() == 2 && passes[0].has_pw && passes[1].has_pw &&
        passes[0].dw_count == passes[1].dw_count &&
        sig_of(window.clusters[chunk[passes[0].dw_begin]]) ==
            sig_of(window.clusters[chunk[passes[1].dw_begin]]);
    bool single = passes.size() == 1 && passes[0].has_pw && passes[0].dw_count >= 2;

    if (!two_identical && !single) {
      op.cls = OpClass::NormalConvOrFc;
      op.dims = recover_dims(first, profile);
      op.snapped_m = snap_spatial(op.dims.m);
      ops.push_back(op);
      continue;
    }

    op.cls = two_identical ? OpClass::SC : OpClass::DS;
    op.channels = static_cast<int>(passes[0].dw_count);
    const Cluster& pw = window.clusters[chunk[passes[0].pw]];
    op.dims = recover_dims(pw, profile);
    op.snapped_m = snap_spatial(op.dims.m);

    // Kernel size from timing: the depthwise/pointwise duration ratio is
    // invariant to pruning scale and speedup.
    double dw_sum = 0.0, pw_sum = 0.0;
    size_t dw_clusters = 0;
    for (const Pass& p : passes) {
      dw_sum += cluster_sum(window.clusters, chunk, p.dw_begin, p.dw_count);
      dw_clusters += p.dw_count;
      if (p.has_pw) pw_sum += window.clusters[chunk[p.pw]].duration;
    }
    double mean_dw = dw_clusters > 0 ? dw_sum / dw_clusters : 0.0;
    bool measurable = mean_dw >= g && pw_sum >= 10.0 * g;
    if (measurable && pw_sum > 0.0) {
      double observed = op.channels * (dw_sum / dw_clusters) /
                        (pw_sum / static_cast<double>(passes.size()));
      long long n_out = estimate_out_channels(op.channels, op.dims);
      std::map<int, double> candidates;
      for (int k : {3, 5})
        candidates[k] = predicted_ratio(k, op.snapped_m, op.channels, n_out,
                                        op.cls == OpClass::DS, profile);
      if (auto k = kernel_size_from_timing(candidates, observed)) op.kernel = *k;
    }
    ops.push_back(op);
  }

  // Pools: framework accesses pin them; the latency rule covers imported
  // GEMM-only traces. The capture either monitored the framework or it did
  // not, so the choice is per trace, not per window.
  bool have_framework = cfg.use_framework_events && trace_has_framework;
  if (have_framework) {
    for (const auto& e : window.framework_events) {
      RecoveredOp op;
      op.cls = OpClass::Pool;
      op.pool = e.api == EventApi::PoolAvg ? PoolType::Avg : PoolType::Max;
      op.kernel = 3;
      op.start = static_cast<double>(e.t);
      ops.push_back(op);
    }
  }

  // Residual long stretches between content: pools (when silent) or
  // candidate skips.
  std::vector<std::pair<double, double>> stretches;  // (gap start, length)
  for (size_t i = 0; i + 1 < chunks.size(); ++i) {
    const Cluster& a = window.clusters[chunks[i].back()];
    const Cluster& b = window.clusters[chunks[i + 1].front()];
    double from = a.start + a.duration;
    stretches.emplace_back(from, b.start - from);
  }
  for (const auto& [from, len] : stretches) {
    bool covered = false;
    for (const auto& e : window.framework_events)
      if (static_cast<double>(e.t) >= from && static_cast<double>(e.t) <= from + len)
        covered = true;
    if (covered) continue;
    RecoveredOp op;
    op.start = from;
    op.duration = len;
    if (!have_framework && len >= 1.25 * base) {
      // A run of k adjacent pools stretches the latency to (k+1) half-gaps.
      double half = 0.5 * profile.pool_gap_factor * base;
      int count = std::max(1, static_cast<int>(std::llround(len / half)) - 1);
      for (int i = 0; i < count; ++i) {
        op.cls = OpClass::Pool;
        op.pool = PoolType::Unknown;
        op.start = from + (i + 1) * len / (count + 1);
        ops.push_back(op);
      }
    } else if (len >= 0.7 * base && len < 1.25 * base) {
      op.cls = OpClass::GapOnly;
      ops.push_back(op);
    }
  }

  std::sort(ops.begin(), ops.end(),
            [](const RecoveredOp& a, const RecoveredOp& b) { return a.start < b.start; });
  return ops;
}

RecoveredArchitecture analyze(const Trace& trace, const MachineProfile& profile,
                              const AnalysisConfig& cfg) {
  RecoveredArchitecture rec = segment(trace, profile, cfg);
  if (!rec.nas_like) return rec;
  bool has_framework = false;
  for (const auto& e : trace.events)
    if (e.src == EventSource::Framework) has_framework = true;
  for (auto& w : rec.windows)
    w.ops = classify_cluster_group(w, profile, rec.speedup, cfg, has_framework);
  return rec;
}

std::vector<std::pair<OpClass, int>> window_signature(const CellWindow& w) {
  std::vector<std::pair<OpClass, int>> sig;
  for (const auto& op : w.ops)
    if (op.cls != OpClass::GapOnly) sig.emplace_back(op.cls, op.kernel);
  return sig;
}

namespace {

const char* class_name(OpClass c) {
  switch (c) {
    case OpClass::SC:
      return "separable_conv";
    case OpClass::DS:
      return "dilated_separable_conv";
    case OpClass::NormalConvOrFc:
      return "conv_or_fc";
    case OpClass::Pool:
      return "pool";
    case OpClass::GapOnly:
      return "gap_only";
  }
  return "?";
}

json range_to_json(const ValueRange& r) {
  return json{{"lo_exclusive", r.lo}, {"hi_inclusive", r.hi}};
}

json op_to_json(const RecoveredOp& op) {
  json j;
  j["class"] = class_name(op.cls);
  if (op.cls == OpClass::Pool)
    j["pool_type"] = op.pool == PoolType::Avg   ? "avg"
                     : op.pool == PoolType::Max ? "max"
                                                : "unknown";
  if (op.kernel > 0)
    j["kernel"] = op.kernel;
  else if (op.cls == OpClass::SC || op.cls == OpClass::DS)
    j["kernel"] = "unresolved";
  if (op.channels > 0) j["channels"] = op.channels;
  if (op.cls == OpClass::SC || op.cls == OpClass::DS ||
      op.cls == OpClass::NormalConvOrFc) {
    j["m_range"] = range_to_json(op.dims.m);
    j["n_range"] = range_to_json(op.dims.n);
    j["k_range"] = range_to_json(op.dims.k);
    j["k_uninformative"] = op.dims.k_uninformative;
    j["m_snapped"] = op.snapped_m;
  }
  j["start"] = op.start;
  j["duration"] = op.duration;
  return j;
}

}  // namespace

std::string to_json_string(const RecoveredArchitecture& rec) {
  json j;
  j["nas_like"] = rec.nas_like;
  if (!rec.reason.empty()) j["reason"] = rec.reason;
  j["speedup"] = rec.speedup;
  j["window_count"] = rec.windows.size();
  j["prologue_clusters"] = rec.prologue.size();
  j["epilogue_clusters"] = rec.epilogue.size();
  json windows = json::array();
  for (const auto& w : rec.windows) {
    json wj;
    wj["start"] = w.start;
    wj["end"] = w.end;
    wj["cluster_count"] = w.clusters.size();
    wj["malformed_clusters"] = w.malformed_clusters;
    json ops = json::array();
    for (const auto& op : w.ops) ops.push_back(op_to_json(op));
    wj["ops"] = ops;
    windows.push_back(wj);
  }
  j["windows"] = windows;
  return j.dump(2);
}

}  // namespace archstamp
