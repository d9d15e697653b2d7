#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "archstamp/nas.hpp"

namespace archstamp {

// GEMM blocking constants and timing coefficients of the simulated host.
// P, Q, R, UNROLL and the 2000-cycle sampling granularity match the
// published OpenBLAS configuration; the cost/gap coefficients are free
// parameters of the machine.
struct MachineProfile {
  int block_p = 320;
  int block_q = 320;
  long long block_r = 104512;
  int unroll = 4;
  long long granularity = 2000;  // trace sampling interval, cycles

  double kernel_cost = 10.0;   // cycles per multiply-accumulate
  double copy_cost = 200.0;    // cycles per itcopy/oncopy call
  double base_gap = 1.0e6;     // inter-GEMM latency, cycles
  double pool_gap_factor = 1.5;
  double cell_gap_factor = 150.0;
  double sub_gap_factor = 0.02;  // gap between GEMMs of one operation
  double dilation_speedup = 0.84;  // dilated conv vs. twice-applied separable
  double speedup = 1.0;            // 1.0 normal, ~20 binarized

  std::string fingerprint() const;
};

std::string to_json_string(const MachineProfile& p);
MachineProfile profile_from_json_string(const std::string& text);
void save_profile(const MachineProfile& p, const std::string& path);
MachineProfile load_profile(const std::string& path);

// C[m x n] = A[m x k] * B[k x n].
struct GemmDims {
  long long m = 1;
  long long n = 1;
  long long k = 1;
  bool operator==(const GemmDims&) const = default;
};

enum class GemmRole { Normal, Depthwise, Pointwise, Fc };

struct TaggedGemm {
  GemmDims dims;
  GemmRole role = GemmRole::Normal;
  bool dilated = false;
};

// Loop iteration counts of the blocked multiplication and the modeled
// duration. Per outer (k) iteration the packing calls are: one itcopy,
// iter4 oncopy, iter3 itcopy.
struct GemmPlan {
  GemmDims dims;
  int iter2 = 1;  // ceil(k / Q)
  int iter3 = 0;  // ceil((m - P) / P), floored at 0
  int iter4 = 1;  // ceil(min(n, R) / (3 * UNROLL))
  double duration = 0.0;  // cycles

  int itcopy_count() const { return iter2 * (1 + iter3); }
  int oncopy_count() const { return iter2 * iter4; }
  int event_count() const { return itcopy_count() + oncopy_count(); }
};

// scale covers weight pruning (shorter compute on zeroed weights); speedup
// divides everything (binarization accelerates the whole inference).
GemmPlan plan_gemm(const GemmDims& dims, const MachineProfile& p,
                   bool dilated = false, double scale = 1.0,
                   double speedup_override = 0.0);

// Matrix dimensions of one operation at the given input, in execution
// order. Separable convolutions contribute their depthwise batch plus the
// pointwise step, twice; dilated variants once. Pools and skip contribute
// nothing.
std::vector<TaggedGemm> op_to_gemms(const Operation& op, const TensorShape& input,
                                    int stride);

// Explicit-output-channel variant for stem convolutions.
std::vector<TaggedGemm> conv_gemms(int kernel, const TensorShape& input, int stride,
                                   int out_channels);
TaggedGemm fc_gemm(int neurons, int input_size, int batch);

struct ValueRange {
  long long lo = 0;  // exclusive
  long long hi = 0;  // inclusive
  bool contains(long long v) const { return v > lo && v <= hi; }
  bool operator==(const ValueRange&) const = default;
};

struct DimRanges {
  ValueRange m, n, k;
  bool k_uninformative = false;  // single k-block, leaks nothing
};

// Interval arithmetic back from observed loop counts.
DimRanges invert_iterations(int iter2, int iter3, int iter4, const MachineProfile& p);

// Nearest-duration classification among candidate kernel sizes. Returns
// nullopt when the observation ties between two candidates.
std::optional<int> kernel_size_from_timing(const std::map<int, double>& candidates,
                                           double observed);

}  // namespace archstamp
