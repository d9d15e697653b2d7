#include "archstamp/trace.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "archstamp/rng.hpp"

namespace archstamp {

using nlohmann::json;

const char* to_string(EventSource s) {
  return s == EventSource::Blas ? "blas" : "framework";
}

const char* to_string(EventApi a) {
  switch (a) {
    case EventApi::Itcopy:
      return "itcopy";
    case EventApi::Oncopy:
      return "oncopy";
    case EventApi::PoolAvg:
      return "pool_avg";
    case EventApi::PoolMax:
      return "pool_max";
  }
  return "?";
}

namespace {

EventApi api_from_string(const std::string& s) {
  if (s == "itcopy") return EventApi::Itcopy;
  if (s == "oncopy") return EventApi::Oncopy;
  if (s == "pool_avg") return EventApi::PoolAvg;
  if (s == "pool_max") return EventApi::PoolMax;
  throw Error("parse", "unknown api: " + s);
}

EventSource source_from_string(const std::string& s) {
  if (s == "blas") return EventSource::Blas;
  if (s == "framework") return EventSource::Framework;
  throw Error("parse", "unknown source: " + s);
}

}  // namespace

std::vector<EventApi> gemm_event_pattern(const GemmPlan& plan) {
  std::vector<EventApi> out;
  out.reserve(plan.event_count());
  for (int l = 0; l < plan.iter2; ++l) {
    out.push_back(EventApi::Itcopy);
    for (int j = 0; j < plan.iter4; ++j) out.push_back(EventApi::Oncopy);
    for (int i = 0; i < plan.iter3; ++i) out.push_back(EventApi::Itcopy);
  }
  return out;
}

std::vector<TraceEvent> emit_gemm(const GemmPlan& plan, double t0) {
  auto pattern = gemm_event_pattern(plan);
  std::vector<TraceEvent> out;
  out.reserve(pattern.size());
  double step = pattern.size() > 1 ? plan.duration / (pattern.size() - 1) : 0.0;
  for (size_t i = 0; i < pattern.size(); ++i)
    out.push_back({static_cast<long long>(std::llround(t0 + step * i)),
                   EventSource::Blas, pattern[i]});
  return out;
}

namespace {

// Cursor over simulated time; every advance is stretched by one noise draw.
class Timeline {
 public:
  Timeline(uint64_t seed, double sigma) : rng_(seed), sigma_(sigma) {}

  void advance(double dt) { t_ += dt * noise(); }

  void emit(EventSource src, EventApi api) {
    raw_.push_back({t_, src, api});
  }

  void emit_cluster(const GemmPlan& plan) {
    auto pattern = gemm_event_pattern(plan);
    double step = pattern.size() > 1 ? plan.duration / (pattern.size() - 1) : 0.0;
    for (size_t i = 0; i < pattern.size(); ++i) {
      if (i > 0) advance(step);
      emit(EventSource::Blas, pattern[i]);
    }
  }

  std::vector<TraceEvent> quantized(long long granularity) const {
    std::vector<TraceEvent> out;
    out.reserve(raw_.size());
    for (const auto& r : raw_)
      out.push_back({static_cast<long long>(std::llround(r.t / granularity)) *
                         granularity,
                     r.src, r.api});
    return out;
  }

 private:
  double noise() {
    if (sigma_ <= 0.0) return 1.0;
    return std::max(0.1, rng_.normal(1.0, sigma_));
  }

  struct Raw {
    double t;
    EventSource src;
    EventApi api;
  };
  std::vector<Raw> raw_;
  Rng rng_;
  double sigma_;
  double t_ = 0.0;
};

}  // namespace

Trace simulate(const Architecture& arch, const MachineProfile& profile,
               uint64_t seed, double sigma) {
  if (sigma < 0.0 || sigma > 0.5)
    throw Error("invalid-noise", "sigma must lie in [0, 0.5]");
  const double speedup = profile.speedup * arch.speedup_hint;
  const double base_gap = profile.base_gap / speedup;
  const double sub_gap = profile.sub_gap_factor * base_gap;
  const double cell_gap = profile.cell_gap_factor * base_gap;

  Timeline tl(seed, sigma);
  auto shapes = propagate_shapes(arch);

  // Stem: one kernel-3 convolution extending the channels, then 1x1
  // convolutions, all at the input resolution.
  TensorShape stem_in{arch.macro.input_width, arch.macro.input_height, 3};
  for (int i = 0; i < arch.macro.preprocessing; ++i) {
    if (i > 0) tl.advance(base_gap);
    auto gs = i == 0 ? conv_gemms(3, stem_in, 1, arch.macro.initial_channels)
                     : conv_gemms(1,
                                  {stem_in.width, stem_in.height,
                                   arch.macro.initial_channels},
                                  1, arch.macro.initial_channels);
    for (const auto& g : gs)
      tl.emit_cluster(plan_gemm(g.dims, profile, g.dilated, 1.0, speedup));
  }

  for (int ci = 0; ci < arch.cell_count(); ++ci) {
    const Cell& cell = arch.cells[ci];
    const double scale =
        ci < static_cast<int>(arch.cell_scale.size()) ? arch.cell_scale[ci] : 1.0;
    tl.advance(cell_gap);
    double pending = 0.0;  // gap owed before the next GEMM burst
    for (int pos = 0; pos < static_cast<int>(cell.order.size()); ++pos) {
      const ChosenEdge& ce = cell.at(pos);
      const Operation& op = ce.op;
      if (op.is_conv()) {
        if (pending > 0.0) tl.advance(pending);
        auto gemms = op_to_gemms(op, shapes[ci], cell_stride(cell.kind));
        for (size_t gi = 0; gi < gemms.size(); ++gi) {
          if (gi > 0) tl.advance(sub_gap);
          tl.emit_cluster(
              plan_gemm(gemms[gi].dims, profile, gemms[gi].dilated, scale, speedup));
        }
        pending = base_gap;
      } else if (op.is_pool()) {
        // A pool stretches the surrounding inter-GEMM latency to
        // pool_gap_factor * base_gap, with one framework access inside.
        double half = 0.5 * profile.pool_gap_factor * base_gap;
        tl.advance(half);
        tl.emit(EventSource::Framework, op.kind == OpKind::AvgPool
                                            ? EventApi::PoolAvg
                                            : EventApi::PoolMax);
        pending = half;
      } else {
        // Skip: indistinguishable from the plain inter-GEMM latency.
        pending = std::max(pending, base_gap);
      }
    }
  }

  // Classifier on the globally pooled features.
  tl.advance(cell_gap);
  TensorShape last = shapes.empty()
                         ? TensorShape{arch.macro.input_width,
                                       arch.macro.input_height,
                                       arch.macro.initial_channels}
                         : shapes.back();
  int feature_channels =
      arch.cells.empty() || arch.cells.back().kind != CellKind::Reduction
          ? last.channels
          : last.channels * 2;
  auto fc = fc_gemm(arch.macro.classifier_neurons, feature_channels,
                    arch.macro.classifier_batch);
  tl.emit_cluster(plan_gemm(fc.dims, profile, false, 1.0, speedup));

  Trace trace;
  trace.events = tl.quantized(profile.granularity);
  trace.meta.profile_fp = profile.fingerprint();
  trace.meta.seed = seed;
  trace.meta.sigma = sigma;
  trace.meta.speedup = speedup;
  return trace;
}

Trace apply_interval_noise(const Trace& trace, double sigma, uint64_t seed) {
  if (sigma < 0.0 || sigma > 0.5)
    throw Error("invalid-noise", "sigma must lie in [0, 0.5]");
  Trace out;
  out.meta = trace.meta;
  out.meta.sigma = sigma;
  out.meta.seed = seed;
  if (trace.events.empty()) return out;
  Rng rng(seed);
  double t = static_cast<double>(trace.events.front().t);
  out.events.push_back(trace.events.front());
  for (size_t i = 1; i < trace.events.size(); ++i) {
    double dt = static_cast<double>(trace.events[i].t - trace.events[i - 1].t);
    double factor = sigma <= 0.0 ? 1.0 : std::max(0.1, rng.normal(1.0, sigma));
    t += dt * factor;
    out.events.push_back({static_cast<long long>(std::llround(t)),
                          trace.events[i].src, trace.events[i].api});
  }
  return out;
}

std::string to_jsonl(const Trace& trace) {
  std::ostringstream os;
  json meta;
  meta["meta"] = {{"version", trace.meta.version},
                  {"profile_fp", trace.meta.profile_fp},
                  {"seed", trace.meta.seed},
                  {"sigma", trace.meta.sigma},
                  {"speedup", trace.meta.speedup}};
  os << meta.dump() << "\n";
  for (const auto& e : trace.events) {
    json r;
    r["t"] = e.t;
    r["src"] = to_string(e.src);
    r["api"] = to_string(e.api);
    os << r.dump() << "\n";
  }
  return os.str();
}

Trace trace_from_jsonl(const std::string& text) {
  Trace trace;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  bool meta_seen = false;
  long long last_t = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("parse",
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!meta_seen && j.contains("meta")) {
      const json& m = j.at("meta");
      if (m.contains("version")) trace.meta.version = m.at("version").get<int>();
      if (m.contains("profile_fp"))
        trace.meta.profile_fp = m.at("profile_fp").get<std::string>();
      if (m.contains("seed")) trace.meta.seed = m.at("seed").get<uint64_t>();
      if (m.contains("sigma")) trace.meta.sigma = m.at("sigma").get<double>();
      if (m.contains("speedup")) trace.meta.speedup = m.at("speedup").get<double>();
      meta_seen = true;
      continue;
    }
    try {
      TraceEvent e;
      e.t = j.at("t").get<long long>();
      e.src = source_from_string(j.at("src").get<std::string>());
      e.api = api_from_string(j.at("api").get<std::string>());
      if (!trace.events.empty() && e.t < last_t)
        throw Error("parse", "line " + std::to_string(line_no) +
                                 ": non-monotonic timestamp");
      if (e.src == EventSource::Blas && e.api != EventApi::Itcopy &&
          e.api != EventApi::Oncopy)
        throw Error("parse", "line " + std::to_string(line_no) +
                                 ": blas events must be itcopy/oncopy");
      last_t = e.t;
      trace.events.push_back(e);
    } catch (const json::exception& e) {
      throw Error("parse", "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

void save_trace(const Trace& trace, const std::string& path) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw Error("io", "cannot open " + tmp.string() + " for writing");
    f << to_jsonl(trace);
    if (!f) throw Error("io", "write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

Trace load_trace(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return trace_from_jsonl(ss.str());
}

}  // namespace archstamp
