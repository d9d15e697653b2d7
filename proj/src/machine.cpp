#include "archstamp/machine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace archstamp {

using nlohmann::json;

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

long long ceil_div(long long a, long long b) { return (a + b - 1) / b; }

}  // namespace

std::string MachineProfile::fingerprint() const {
  char buf[17];
  snprintf(buf, sizeof buf, "%016llx",
           static_cast<unsigned long long>(fnv1a(to_json_string(*this))));
  return buf;
}

std::string to_json_string(const MachineProfile& p) {
  json j;
  j["block_p"] = p.block_p;
  j["block_q"] = p.block_q;
  j["block_r"] = p.block_r;
  j["unroll"] = p.unroll;
  j["granularity"] = p.granularity;
  j["kernel_cost"] = p.kernel_cost;
  j["copy_cost"] = p.copy_cost;
  j["base_gap"] = p.base_gap;
  j["pool_gap_factor"] = p.pool_gap_factor;
  j["cell_gap_factor"] = p.cell_gap_factor;
  j["sub_gap_factor"] = p.sub_gap_factor;
  j["dilation_speedup"] = p.dilation_speedup;
  j["speedup"] = p.speedup;
  return j.dump(2);
}

MachineProfile profile_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("parse", std::string("bad profile json: ") + e.what());
  }
  MachineProfile p;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("block_p", p.block_p);
  get("block_q", p.block_q);
  get("block_r", p.block_r);
  get("unroll", p.unroll);
  get("granularity", p.granularity);
  get("kernel_cost", p.kernel_cost);
  get("copy_cost", p.copy_cost);
  get("base_gap", p.base_gap);
  get("pool_gap_factor", p.pool_gap_factor);
  get("cell_gap_factor", p.cell_gap_factor);
  get("sub_gap_factor", p.sub_gap_factor);
  get("dilation_speedup", p.dilation_speedup);
  get("speedup", p.speedup);
  if (p.block_p <= 0 || p.block_q <= 0 || p.block_r <= 0 || p.unroll <= 0 ||
      p.granularity <= 0 || p.kernel_cost <= 0 || p.base_gap <= 0 || p.speedup <= 0)
    throw Error("parse", "profile constants must be positive");
  return p;
}

void save_profile(const MachineProfile& p, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("io", "cannot open " + path + " for writing");
  f << to_json_string(p) << "\n";
}

MachineProfile load_profile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return profile_from_json_string(ss.str());
}

GemmPlan plan_gemm(const GemmDims& dims, const MachineProfile& p, bool dilated,
                   double scale, double speedup_override) {
  if (dims.m < 1 || dims.n < 1 || dims.k < 1)
    throw Error("invalid-shape", "gemm dims must be >= 1");
  GemmPlan plan;
  plan.dims = dims;
  plan.iter2 = static_cast<int>(ceil_div(dims.k, p.block_q));
  plan.iter3 = static_cast<int>(std::max<long long>(
      0, ceil_div(dims.m - p.block_p, p.block_p)));
  plan.iter4 = static_cast<int>(
      ceil_div(std::min<long long>(dims.n, p.block_r), 3LL * p.unroll));
  // A dilated depthwise step runs once where the separable one runs twice;
  // the factor keeps the whole-operation duration ratio at dilation_speedup.
  double work = p.kernel_cost * static_cast<double>(dims.m) *
                static_cast<double>(dims.n) * static_cast<double>(dims.k);
  if (dilated) work *= 2.0 * p.dilation_speedup;
  double speedup = speedup_override > 0.0 ? speedup_override : p.speedup;
  plan.duration = scale * (work + p.copy_cost * plan.event_count()) / speedup;
  return plan;
}

namespace {

void check_kernel_fits(const Operation& op, const TensorShape& in) {
  if (op.kernel > in.width || op.kernel > in.height)
    throw Error("invalid-shape", op.name() + " kernel exceeds " +
                                     std::to_string(in.width) + "x" +
                                     std::to_string(in.height) + " input");
}

long long patches(const TensorShape& in, int stride) {
  // NAS padding preserves spatial resolution, so the patch grid is the
  // strided output grid.
  return static_cast<long long>((in.width + stride - 1) / stride) *
         ((in.height + stride - 1) / stride);
}

}  // namespace

std::vector<TaggedGemm> conv_gemms(int kernel, const TensorShape& input, int stride,
                                   int out_channels) {
  long long m = patches(input, stride);
  long long k = static_cast<long long>(kernel) * kernel * input.channels;
  return {{{m, out_channels, k}, GemmRole::Normal, false}};
}

TaggedGemm fc_gemm(int neurons, int input_size, int batch) {
  return {{neurons, batch, input_size}, GemmRole::Fc, false};
}

std::vector<TaggedGemm> op_to_gemms(const Operation& op, const TensorShape& input,
                                    int stride) {
  if (stride != 1 && stride != 2)
    throw Error("invalid-shape", "stride must be 1 or 2");
  if (input.width < 1 || input.height < 1 || input.channels < 1)
    throw Error("invalid-shape", "degenerate input tensor");

  const int d_in = input.channels;
  const int d_out = stride == 2 ? 2 * d_in : d_in;

  switch (op.kind) {
    case OpKind::Skip:
    case OpKind::AvgPool:
    case OpKind::MaxPool:
      return {};  // no GEMM traffic
    case OpKind::NormalConv: {
      check_kernel_fits(op, input);
      return conv_gemms(op.kernel, input, stride, d_out);
    }
    case OpKind::SepConv:
    case OpKind::DilSepConv: {
      check_kernel_fits(op, input);
      const bool dilated = op.kind == OpKind::DilSepConv;
      const int passes = dilated ? 1 : 2;
      long long m = patches(input, stride);
      long long k_dw = static_cast<long long>(op.kernel) * op.kernel;
      std::vector<TaggedGemm> out;
      for (int pass = 0; pass < passes; ++pass) {
        for (int c = 0; c < d_in; ++c)
          out.push_back({{m, 1, k_dw}, GemmRole::Depthwise, dilated});
        out.push_back({{m, d_out, d_in}, GemmRole::Pointwise, dilated});
      }
      return out;
    }
    case OpKind::FullyConnected:
      throw Error("invalid-shape",
                  "fully connected layers are planned via fc_gemm, not cell shapes");
  }
  return {};
}

DimRanges invert_iterations(int iter2, int iter3, int iter4,
                            const MachineProfile& p) {
  DimRanges r;
  r.k = {static_cast<long long>(iter2 - 1) * p.block_q,
         static_cast<long long>(iter2) * p.block_q};
  r.m = {static_cast<long long>(iter3) * p.block_p,
         static_cast<long long>(iter3 + 1) * p.block_p};
  r.n = {static_cast<long long>(iter4 - 1) * 3 * p.unroll,
         static_cast<long long>(iter4) * 3 * p.unroll};
  r.k_uninformative = iter2 <= 1;
  return r;
}

std::optional<int> kernel_size_from_timing(const std::map<int, double>& candidates,
                                           double observed) {
  if (candidates.empty()) return std::nullopt;
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  double second_d = std::numeric_limits<double>::infinity();
  for (const auto& [kernel, duration] : candidates) {
    double d = std::abs(duration - observed);
    if (d < best_d) {
      second_d = best_d;
      best_d = d;
      best = kernel;
    } else if (d < second_d) {
      second_d = d;
    }
  }
  if (candidates.size() > 1 && std::isfinite(second_d)) {
    double span = std::max(best_d, second_d);
    if (best_d == second_d || (span > 0.0 && second_d - best_d <= 1e-9 * span))
      return std::nullopt;  // dead middle, unresolved
  }
  return best;
}

}  // namespace archstamp
