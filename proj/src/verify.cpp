#include "archstamp/verify.hpp"

#include <json.hpp>

namespace archstamp {

using nlohmann::json;

bool match_op(const RecoveredOp& recovered, const Operation& stamp_op) {
  switch (stamp_op.kind) {
    case OpKind::SepConv:
      return recovered.cls == OpClass::SC &&
             (recovered.kernel == 0 || recovered.kernel == stamp_op.kernel);
    case OpKind::DilSepConv:
      return recovered.cls == OpClass::DS &&
             (recovered.kernel == 0 || recovered.kernel == stamp_op.kernel);
    case OpKind::AvgPool:
      return recovered.cls == OpClass::Pool &&
             (recovered.pool == PoolType::Unknown || recovered.pool == PoolType::Avg);
    case OpKind::MaxPool:
      return recovered.cls == OpClass::Pool &&
             (recovered.pool == PoolType::Unknown || recovered.pool == PoolType::Max);
    case OpKind::Skip:
      return recovered.cls == OpClass::GapOnly;
    case OpKind::NormalConv:
    case OpKind::FullyConnected:
      return recovered.cls == OpClass::NormalConvOrFc;
  }
  return false;
}

std::vector<CellKind> expected_cell_kinds(int blocks, int cells_per_block) {
  std::vector<CellKind> kinds;
  for (int b = 0; b < blocks; ++b) {
    for (int i = 0; i < cells_per_block; ++i) kinds.push_back(CellKind::Normal);
    if (b + 1 < blocks) kinds.push_back(CellKind::Reduction);
  }
  return kinds;
}

namespace {

// In-order scan of the stamp sequence over the window's recovered ops.
bool window_matches(const std::vector<RecoveredOp>& ops,
                    const std::vector<Operation>& stamp_ops, bool skip_rule,
                    std::vector<int>* matched) {
  if (matched) matched->assign(stamp_ops.size(), -1);
  size_t cursor = 0;
  for (size_t s = 0; s < stamp_ops.size(); ++s) {
    const Operation& want = stamp_ops[s];
    if (want.kind == OpKind::Skip && skip_rule) {
      // Matches the inter-GEMM interval at the current position; intervals
      // exist between any two operations, so the scan just moves on.
      continue;
    }
    bool found = false;
    while (cursor < ops.size()) {
      if (match_op(ops[cursor], want)) {
        if (matched) (*matched)[s] = static_cast<int>(cursor);
        ++cursor;
        found = true;
        break;
      }
      ++cursor;
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace

VerifyReport verify(const VerificationKey& vk, const RecoveredArchitecture& rec,
                    const VerifyConfig& cfg) {
  VerifyReport report;
  if (!rec.nas_like) {
    report.nas_like = false;
    report.reason = rec.reason;
    return report;
  }

  std::vector<std::vector<Operation>> keys;
  if (!vk.per_cell.empty()) {
    keys = vk.per_cell;
  } else {
    for (CellKind kind : expected_cell_kinds(cfg.blocks, cfg.cells_per_block))
      keys.push_back(kind == CellKind::Normal ? vk.normal : vk.reduction);
  }
  report.expected_windows = static_cast<int>(keys.size());

  size_t key_idx = 0;
  for (size_t w = 0; w < rec.windows.size() && key_idx < keys.size(); ++w) {
    WindowMatch m;
    m.window = static_cast<int>(w);
    if (window_matches(rec.windows[w].ops, keys[key_idx], cfg.skip_match_rule,
                       &m.matched_ops)) {
      m.verified = true;
      m.key_index = static_cast<int>(key_idx);
      ++report.verified_windows;
      ++key_idx;
    }
    report.windows.push_back(std::move(m));
  }

  report.verified = report.verified_windows == report.expected_windows;
  if (!report.verified && report.reason.empty())
    report.reason = "only " + std::to_string(report.verified_windows) + " of " +
                    std::to_string(report.expected_windows) + " stamps verified";
  return report;
}

VerifyReport verify(const VerificationKey& vk, const Trace& trace,
                    const MachineProfile& profile, const VerifyConfig& cfg) {
  RecoveredArchitecture rec = analyze(trace, profile, cfg.analysis);
  return verify(vk, rec, cfg);
}

std::string to_json_string(const VerifyReport& report) {
  json j;
  j["verified"] = report.verified;
  j["nas_like"] = report.nas_like;
  if (!report.reason.empty()) j["reason"] = report.reason;
  j["verified_windows"] = report.verified_windows;
  j["expected_windows"] = report.expected_windows;
  json windows = json::array();
  for (const auto& w : report.windows) {
    json wj;
    wj["window"] = w.window;
    wj["verified"] = w.verified;
    if (w.key_index >= 0) wj["key_index"] = w.key_index;
    if (w.verified) wj["matched_ops"] = w.matched_ops;
    windows.push_back(wj);
  }
  j["windows"] = windows;
  return j.dump(2);
}

}  // namespace archstamp
