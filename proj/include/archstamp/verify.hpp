#pragma once

#include <string>
#include <vector>

#include "archstamp/analysis.hpp"
#include "archstamp/machine.hpp"
#include "archstamp/trace.hpp"
#include "archstamp/watermark.hpp"

namespace archstamp {

struct VerifyConfig {
  // Macro structure the per-type key is replayed against.
  int blocks = 3;
  int cells_per_block = 6;
  // Skip leaves no footprint; under the default rule it matches the
  // inter-GEMM interval at its position.
  bool skip_match_rule = true;
  // Robustness target: documented constant, reported alongside the verdict.
  double delta = 0.01;
  AnalysisConfig analysis;
};

struct WindowMatch {
  int window = 0;
  int key_index = -1;   // which expanded key this window verified, -1 = skipped
  bool verified = false;
  std::vector<int> matched_ops;  // recovered-op index per stamp position, -1 = gap
};

struct VerifyReport {
  bool verified = false;
  bool nas_like = true;
  std::string reason;
  int verified_windows = 0;
  int expected_windows = 0;
  std::vector<WindowMatch> windows;
};

// Class-level agreement between a recovered operation and a stamp
// operation. Kernel must agree when it was resolved; pool type must agree
// only when framework events pinned it.
bool match_op(const RecoveredOp& recovered, const Operation& stamp_op);

// Expanded per-window key sequence for the macro structure.
std::vector<CellKind> expected_cell_kinds(int blocks, int cells_per_block);

// Scans each window for the stamp operations as an in-order subsequence;
// windows that fail are skipped without advancing the key index, so decoy
// windows cannot poison the scan. Verdict: every expected key matched.
VerifyReport verify(const VerificationKey& vk, const Trace& trace,
                    const MachineProfile& profile, const VerifyConfig& cfg = {});

VerifyReport verify(const VerificationKey& vk, const RecoveredArchitecture& rec,
                    const VerifyConfig& cfg = {});

std::string to_json_string(const VerifyReport& report);

}  // namespace archstamp
