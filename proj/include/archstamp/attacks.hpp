#pragma once

#include <cstdint>
#include <string>

#include "archstamp/nas.hpp"
#include "archstamp/trace.hpp"
#include "archstamp/watermark.hpp"

namespace archstamp {

enum class AttackKind {
  ShuffleParallelOps,
  InjectUselessOp,
  InjectUselessCell,
  WeightPrune,
  Binarize,
  StructuredPrune,
  GaussianNoise,
};

struct AttackSpec {
  AttackKind kind = AttackKind::ShuffleParallelOps;
  double rate = 0.0;   // WeightPrune, in [0, 1]
  double sigma = 0.0;  // GaussianNoise, in [0, 0.5]
  int count = 1;       // StructuredPrune, in [0, n_s]
  bool oracle = false; // StructuredPrune picks stamp operations when true
  uint64_t seed = 0;

  // "shuffle" | "useless-op" | "useless-cell" | "prune:0.9" | "binarize" |
  // "structured:2" | "noise:0.3"
  static AttackSpec parse(const std::string& text, uint64_t seed,
                          bool oracle = false);
  std::string name() const;
  bool is_trace_level() const { return kind == AttackKind::GaussianNoise; }
};

// Architecture-level transforms. The marking key is consulted only by the
// oracle variant of StructuredPrune.
Architecture apply_attack(const Architecture& arch, const AttackSpec& spec,
                          const MarkingKey* mk = nullptr);

// Trace-level transform (GaussianNoise).
Trace apply_attack(const Trace& trace, const AttackSpec& spec);

}  // namespace archstamp
