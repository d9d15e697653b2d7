#pragma once

#include <optional>
#include <string>
#include <vector>

#include "archstamp/machine.hpp"
#include "archstamp/trace.hpp"

namespace archstamp {

struct AnalysisConfig {
  // Gap thresholds derive from the profile; overrides are in cycles at
  // speedup 1 (they scale with the capture's recorded speedup).
  std::optional<double> window_gap_override;  // cell-window split
  std::optional<double> group_gap_override;   // same-operation linking
  bool expect_prologue = true;   // leading stem clusters outside the windows
  bool expect_epilogue = true;   // trailing classifier cluster
  // Pool recognition uses framework events when the trace has them; the
  // latency rule is the fallback for imported GEMM-only traces.
  bool use_framework_events = true;
};

// One GEMM burst: its event slice and the recovered loop counts.
struct Cluster {
  size_t first_event = 0;  // index into the window's blas events
  size_t event_count = 0;
  int iter2 = 1;
  int iter3 = 0;
  int iter4 = 0;
  double start = 0.0;
  double duration = 0.0;
  bool well_formed = true;
};

enum class OpClass { SC, DS, NormalConvOrFc, Pool, GapOnly };

enum class PoolType { Avg, Max, Unknown };

struct RecoveredOp {
  OpClass cls = OpClass::GapOnly;
  int kernel = 0;  // 0 = unresolved
  int channels = 0;
  DimRanges dims;
  long long snapped_m = 0;
  PoolType pool = PoolType::Unknown;
  double start = 0.0;
  double duration = 0.0;
  int cluster_count = 0;
};

struct CellWindow {
  std::vector<TraceEvent> blas_events;
  std::vector<TraceEvent> framework_events;
  std::vector<Cluster> clusters;
  std::vector<RecoveredOp> ops;
  double start = 0.0;
  double end = 0.0;
  int malformed_clusters = 0;
};

struct RecoveredArchitecture {
  bool nas_like = true;
  std::string reason;
  std::vector<CellWindow> windows;
  std::vector<Cluster> prologue;
  std::vector<Cluster> epilogue;
  double speedup = 1.0;  // capture speedup the thresholds were scaled by
};

// Splits the trace into prologue / cell windows / epilogue by gap
// thresholding. nas_like=false when no window structure is detectable.
RecoveredArchitecture segment(const Trace& trace, const MachineProfile& profile,
                              const AnalysisConfig& cfg = {});

// Parses a window's clusters into operations: depthwise groups repeated
// twice are separable convolutions, single groups dilated ones, framework
// accesses pin the pools, residual base-length gaps are reported as
// GapOnly (candidate skips). trace_has_framework selects event-based pool
// recognition over the latency fallback.
std::vector<RecoveredOp> classify_cluster_group(CellWindow& window,
                                                const MachineProfile& profile,
                                                double speedup,
                                                const AnalysisConfig& cfg = {},
                                                bool trace_has_framework = true);

// Dimension ranges of one cluster, with the spatial size snapped to the
// most plausible square in range.
DimRanges recover_dims(const Cluster& cluster, const MachineProfile& profile);
long long snap_spatial(const ValueRange& m_range);

// Full pipeline: segment + classify every window.
RecoveredArchitecture analyze(const Trace& trace, const MachineProfile& profile,
                              const AnalysisConfig& cfg = {});

// Class/kernel signature used to compare windows across blocks (channel
// counts differ per block by design).
std::vector<std::pair<OpClass, int>> window_signature(const CellWindow& w);

std::string to_json_string(const RecoveredArchitecture& rec);

}  // namespace archstamp
