#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "archstamp/machine.hpp"
#include "archstamp/nas.hpp"

namespace archstamp {

enum class EventSource { Blas, Framework };
enum class EventApi { Itcopy, Oncopy, PoolAvg, PoolMax };

const char* to_string(EventSource s);
const char* to_string(EventApi a);

struct TraceEvent {
  long long t = 0;  // cycles, quantized to the sampling granularity
  EventSource src = EventSource::Blas;
  EventApi api = EventApi::Itcopy;
  bool operator==(const TraceEvent&) const = default;
};

struct TraceMeta {
  int version = 1;
  std::string profile_fp;
  uint64_t seed = 0;
  double sigma = 0.0;
  double speedup = 1.0;  // effective speedup the capture ran at
};

struct Trace {
  std::vector<TraceEvent> events;
  TraceMeta meta;
};

// itcopy/oncopy pattern of one blocked GEMM, in call order.
std::vector<EventApi> gemm_event_pattern(const GemmPlan& plan);

// Reference noise-free emission: events spread uniformly over the plan
// duration starting at t0 (unquantized cycles).
std::vector<TraceEvent> emit_gemm(const GemmPlan& plan, double t0);

// Full side-channel trace of one inference pass: stem convolutions, each
// cell's operations in execution order, the classifier, with gaps and
// multiplicative interval noise (mean 1, sd sigma, floored at 0.1).
Trace simulate(const Architecture& arch, const MachineProfile& profile,
               uint64_t seed, double sigma);

// Re-noises an existing trace's inter-event intervals (the trace-level
// robustness transform).
Trace apply_interval_noise(const Trace& trace, double sigma, uint64_t seed);

// Line-oriented JSON: one meta header line, one record per event.
// Writes are atomic (temp file + rename).
void save_trace(const Trace& trace, const std::string& path);
Trace load_trace(const std::string& path);
std::string to_jsonl(const Trace& trace);
Trace trace_from_jsonl(const std::string& text);

}  // namespace archstamp
