#include "archstamp/cli.hpp"

#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "archstamp/analysis.hpp"
#include "archstamp/attacks.hpp"
#include "archstamp/machine.hpp"
#include "archstamp/nas.hpp"
#include "archstamp/search.hpp"
#include "archstamp/trace.hpp"
#include "archstamp/uniqueness.hpp"
#include "archstamp/verify.hpp"
#include "archstamp/watermark.hpp"

namespace archstamp {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

uint64_t fnv1a_bytes(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string file_hash(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return "missing";
  std::stringstream ss;
  ss << f.rdbuf();
  char buf[22];
  snprintf(buf, sizeof buf, "fnv:%016llx",
           static_cast<unsigned long long>(fnv1a_bytes(ss.str())));
  return buf;
}

// One manifest per run: the subcommand, its flags, and the content hashes of
// everything read and written. Equal manifests imply byte-equal outputs.
class Manifest {
 public:
  Manifest(std::string subcommand) {
    j_["tool"] = "archstamp";
    j_["version"] = kVersion;
    j_["subcommand"] = std::move(subcommand);
    j_["args"] = json::object();
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
  }
  template <typename T>
  void arg(const std::string& name, const T& value) {
    j_["args"][name] = value;
  }
  void input(const std::string& path) { j_["inputs"][path] = file_hash(path); }
  void output(const std::string& path) { j_["outputs"][path] = file_hash(path); }
  void set(const std::string& key, const json& value) { j_[key] = value; }

  json body() const { return j_; }

  // Writes next to the primary output, or folds into the stream report.
  void emit(const std::string& primary_out, std::ostream& out) const {
    if (!primary_out.empty()) {
      std::ofstream f(primary_out + ".manifest.json", std::ios::trunc);
      f << j_.dump(2) << "\n";
    } else {
      out << json{{"manifest", j_}}.dump(2) << "\n";
    }
  }

 private:
  json j_;
};

MachineProfile resolve_profile(const std::string& flag, Manifest& manifest) {
  std::string path = flag;
  if (path.empty()) {
    if (const char* env = std::getenv("ARCHSTAMP_PROFILE")) path = env;
  }
  if (path.empty()) {
    manifest.arg("profile", "builtin-default");
    return MachineProfile{};
  }
  manifest.arg("profile", path);
  manifest.input(path);
  return load_profile(path);
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("io", "cannot open " + path + " for writing");
  f << body;
  if (!body.empty() && body.back() != '\n') f << "\n";
}

int cmd_genkey(int ns, uint64_t seed, const std::string& out, int nodes,
               int per_cell, std::ostream& os) {
  Manifest m("genkey");
  m.arg("ns", ns);
  m.arg("seed", seed);
  m.arg("nodes", nodes);
  m.arg("per_cell", per_cell);
  auto space = build_default_supernet(nodes);
  auto [mk, vk] = per_cell > 0 ? wmgen_per_cell(ns, space, per_cell, seed)
                               : wmgen(ns, space, seed);
  std::string mk_path = out + ".mk.json";
  std::string vk_path = out + ".vk.json";
  save_key(mk, mk_path);
  save_key(vk, vk_path);
  m.output(mk_path);
  m.output(vk_path);
  m.emit(mk_path, os);
  os << "wrote " << mk_path << " and " << vk_path << "\n";
  return kExitVerified;
}

int cmd_mark(const std::string& key_path, const std::string& strategy_name,
             uint64_t seed, const std::string& out, const MacroParams& macro,
             int nodes, std::ostream& os) {
  Manifest m("mark");
  m.arg("key", key_path);
  m.arg("strategy", strategy_name);
  m.arg("seed", seed);
  m.input(key_path);
  MarkingKey mk = load_marking_key(key_path);
  auto space = build_default_supernet(nodes);
  auto violations = validate_key(mk, space);
  if (!violations.empty()) throw Error("invalid-key", violations.front());
  Architecture arch =
      mark(mk, space, SearchStrategy::parse(strategy_name), seed, macro);
  save_architecture(arch, out);
  m.output(out);
  m.emit(out, os);
  os << "wrote " << out << "\n";
  return kExitVerified;
}

int cmd_trace(const std::string& arch_path, const std::string& profile_path,
              uint64_t seed, double noise, const std::string& out,
              std::ostream& os) {
  if (noise < 0.0 || noise > 0.5)
    throw Error("usage", "--noise must lie in [0, 0.5]");
  Manifest m("trace");
  m.arg("arch", arch_path);
  m.arg("seed", seed);
  m.arg("noise", noise);
  m.input(arch_path);
  MachineProfile profile = resolve_profile(profile_path, m);
  Architecture arch = load_architecture(arch_path);
  Trace t = simulate(arch, profile, seed, noise);
  save_trace(t, out);
  m.output(out);
  m.emit(out, os);
  os << "wrote " << out << " (" << t.events.size() << " events)\n";
  return kExitVerified;
}

int cmd_attack(const std::string& arch_path, const std::string& trace_path,
               const std::string& kind, uint64_t seed, bool oracle,
               const std::string& key_path, const std::string& out,
               std::ostream& os) {
  Manifest m("attack");
  m.arg("kind", kind);
  m.arg("seed", seed);
  m.arg("oracle", oracle);
  AttackSpec spec = AttackSpec::parse(kind, seed, oracle);
  if (spec.is_trace_level()) {
    if (trace_path.empty())
      throw Error("usage", "noise attacks transform a trace; pass --trace");
    m.arg("trace", trace_path);
    m.input(trace_path);
    Trace t = load_trace(trace_path);
    save_trace(apply_attack(t, spec), out);
  } else {
    if (arch_path.empty())
      throw Error("usage", kind + " transforms an architecture; pass --arch");
    m.arg("arch", arch_path);
    m.input(arch_path);
    Architecture arch = load_architecture(arch_path);
    MarkingKey mk;
    const MarkingKey* mk_ptr = nullptr;
    if (oracle) {
      if (key_path.empty())
        throw Error("usage", "oracle structured pruning needs --key");
      m.arg("key", key_path);
      m.input(key_path);
      mk = load_marking_key(key_path);
      mk_ptr = &mk;
    }
    save_architecture(apply_attack(arch, spec, mk_ptr), out);
  }
  m.output(out);
  m.emit(out, os);
  os << "wrote " << out << "\n";
  return kExitVerified;
}

int cmd_analyze(const std::string& trace_path, const std::string& profile_path,
                const std::string& report_path, std::ostream& os) {
  Manifest m("analyze");
  m.arg("trace", trace_path);
  m.input(trace_path);
  MachineProfile profile = resolve_profile(profile_path, m);
  Trace t = load_trace(trace_path);
  RecoveredArchitecture rec = analyze(t, profile);
  std::string body = to_json_string(rec);
  if (!report_path.empty()) {
    write_text(report_path, body);
    m.output(report_path);
    m.emit(report_path, os);
  } else {
    os << body << "\n";
    m.emit("", os);
  }
  return rec.nas_like ? kExitVerified : kExitNotNas;
}

int cmd_verify(const std::string& vk_path, const std::string& trace_path,
               const std::string& profile_path, const std::string& report_path,
               int blocks, int cells_per_block, std::ostream& os) {
  Manifest m("verify");
  m.arg("vk", vk_path);
  m.arg("trace", trace_path);
  m.arg("blocks", blocks);
  m.arg("cells_per_block", cells_per_block);
  m.input(vk_path);
  m.input(trace_path);
  MachineProfile profile = resolve_profile(profile_path, m);
  VerificationKey vk = load_verification_key(vk_path);
  Trace t = load_trace(trace_path);
  VerifyConfig cfg;
  cfg.blocks = blocks;
  cfg.cells_per_block = cells_per_block;
  VerifyReport report = verify(vk, t, profile, cfg);
  std::string body = to_json_string(report);
  if (!report_path.empty()) {
    write_text(report_path, body);
    m.output(report_path);
    m.emit(report_path, os);
  } else {
    os << body << "\n";
    m.emit("", os);
  }
  if (!report.nas_like) return kExitNotNas;
  return report.verified ? kExitVerified : kExitNotVerified;
}

int cmd_collide(const std::string& key_path, long long trials, uint64_t seed,
                const std::string& report_path, int nodes, std::ostream& os) {
  Manifest m("collide");
  m.arg("key", key_path);
  m.arg("trials", trials);
  m.arg("seed", seed);
  m.input(key_path);
  MarkingKey mk = load_marking_key(key_path);
  auto space = build_default_supernet(nodes);
  CollisionStats stats = monte_carlo(space, mk, trials, seed);
  std::string body = to_json_string(stats, space);
  if (!report_path.empty()) {
    write_text(report_path, body);
    m.output(report_path);
    m.emit(report_path, os);
  } else {
    os << body << "\n";
    m.emit("", os);
  }
  return kExitVerified;
}

const char* op_class_label(OpClass c) {
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

int cmd_report(const std::string& trace_path, const std::string& profile_path,
               const std::string& out_prefix, std::ostream& os) {
  Manifest m("report");
  m.arg("trace", trace_path);
  m.input(trace_path);
  MachineProfile profile = resolve_profile(profile_path, m);
  Trace t = load_trace(trace_path);
  RecoveredArchitecture rec = analyze(t, profile);

  // Cluster timeline: which window, when, how long, classified as what.
  std::ostringstream clusters;
  clusters << "window,cluster,start,duration,class\n";
  std::ostringstream gemms;
  gemms << "window,op,class,kernel,channels,duration\n";
  std::ostringstream latencies;
  latencies << "window,gap,start,length,relative_to_base\n";
  const double base = profile.base_gap / rec.speedup;
  for (size_t w = 0; w < rec.windows.size(); ++w) {
    const CellWindow& win = rec.windows[w];
    for (size_t c = 0; c < win.clusters.size(); ++c) {
      const Cluster& cl = win.clusters[c];
      const char* label = "unassigned";
      for (const auto& op : win.ops)
        if (cl.start >= op.start && cl.start <= op.start + op.duration &&
            op.cls != OpClass::GapOnly && op.cls != OpClass::Pool)
          label = op_class_label(op.cls);
      clusters << w << "," << c << "," << cl.start << "," << cl.duration << ","
               << label << "\n";
    }
    for (size_t o = 0; o < win.ops.size(); ++o) {
      const RecoveredOp& op = win.ops[o];
      if (op.cls == OpClass::GapOnly) continue;
      gemms << w << "," << o << "," << op_class_label(op.cls) << ","
            << (op.kernel > 0 ? std::to_string(op.kernel) : "unresolved") << ","
            << op.channels << "," << op.duration << "\n";
    }
    for (size_t c = 0; c + 1 < win.clusters.size(); ++c) {
      const Cluster& a = win.clusters[c];
      const Cluster& b = win.clusters[c + 1];
      double from = a.start + a.duration;
      double len = b.start - from;
      latencies << w << "," << c << "," << from << "," << len << ","
                << (base > 0 ? len / base : 0.0) << "\n";
    }
  }
  std::string c_path = out_prefix + ".clusters.csv";
  std::string g_path = out_prefix + ".gemms.csv";
  std::string l_path = out_prefix + ".latencies.csv";
  write_text(c_path, clusters.str());
  write_text(g_path, gemms.str());
  write_text(l_path, latencies.str());
  m.output(c_path);
  m.output(g_path);
  m.output(l_path);
  m.emit(c_path, os);
  os << "wrote " << c_path << ", " << g_path << ", " << l_path << "\n";
  return kExitVerified;
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Path-stamped architecture watermarking toolkit"};
  app.require_subcommand(1);

  // genkey
  auto* genkey = app.add_subcommand("genkey", "Generate a marking/verification key pair");
  int ns = 4, nodes = 4, per_cell = 0;
  uint64_t seed = 0;
  std::string out_path;
  genkey->add_option("--ns", ns, "Stamp size (edges per cell)");
  genkey->add_option("--seed", seed, "Random seed");
  genkey->add_option("--nodes", nodes, "Computing nodes per cell");
  genkey->add_option("--per-cell", per_cell,
                     "Generate one stamp per cell position (count)");
  genkey->add_option("--out", out_path, "Output basename")->required();

  // mark
  auto* mark_cmd = app.add_subcommand("mark", "Embed the key into a searched architecture");
  std::string key_path, strategy = "random", arch_out;
  uint64_t mark_seed = 0;
  MacroParams macro;
  int mark_nodes = 4;
  mark_cmd->add_option("--key", key_path, "Marking key (.mk.json)")->required();
  mark_cmd->add_option("--strategy", strategy, "random | greedy");
  mark_cmd->add_option("--seed", mark_seed, "Random seed");
  mark_cmd->add_option("--nodes", mark_nodes, "Computing nodes per cell");
  mark_cmd->add_option("--blocks", macro.blocks, "Normal blocks");
  mark_cmd->add_option("--cells-per-block", macro.cells_per_block, "Normal cells per block");
  mark_cmd->add_option("--channels", macro.initial_channels, "Initial channels");
  mark_cmd->add_option("--out", arch_out, "Output architecture json")->required();

  // trace
  auto* trace_cmd = app.add_subcommand("trace", "Simulate the side-channel event trace");
  std::string trace_arch, trace_profile, trace_out;
  uint64_t trace_seed = 0;
  double noise = 0.0;
  trace_cmd->add_option("--arch", trace_arch, "Architecture json")->required();
  trace_cmd->add_option("--profile", trace_profile, "Machine profile json");
  trace_cmd->add_option("--seed", trace_seed, "Random seed");
  trace_cmd->add_option("--noise", noise, "Interval noise sigma in [0, 0.5]");
  trace_cmd->add_option("--out", trace_out, "Output trace jsonl")->required();

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "Apply an adversarial transformation");
  std::string attack_arch, attack_trace, attack_kind, attack_key, attack_out;
  uint64_t attack_seed = 0;
  bool oracle = false;
  attack_cmd->add_option("--arch", attack_arch, "Architecture json input");
  attack_cmd->add_option("--trace", attack_trace, "Trace jsonl input (noise attack)");
  attack_cmd->add_option("--kind", attack_kind,
                         "shuffle|useless-op|useless-cell|prune:R|binarize|structured:C|noise:S")
      ->required();
  attack_cmd->add_option("--seed", attack_seed, "Random seed");
  attack_cmd->add_flag("--oracle", oracle, "Structured pruning targets stamp operations");
  attack_cmd->add_option("--key", attack_key, "Marking key (oracle mode)");
  attack_cmd->add_option("--out", attack_out, "Output path")->required();

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Recover operations from a trace");
  std::string an_trace, an_profile, an_report;
  analyze_cmd->add_option("--trace", an_trace, "Trace jsonl")->required();
  analyze_cmd->add_option("--profile", an_profile, "Machine profile json");
  analyze_cmd->add_option("--report", an_report, "Report json path (stdout if omitted)");

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "Verify ownership against a trace");
  std::string v_vk, v_trace, v_profile, v_report;
  int v_blocks = 3, v_cpb = 6;
  verify_cmd->add_option("--vk", v_vk, "Verification key (.vk.json)")->required();
  verify_cmd->add_option("--trace", v_trace, "Trace jsonl")->required();
  verify_cmd->add_option("--profile", v_profile, "Machine profile json");
  verify_cmd->add_option("--report", v_report, "Report json path (stdout if omitted)");
  verify_cmd->add_option("--blocks", v_blocks, "Expected normal blocks");
  verify_cmd->add_option("--cells-per-block", v_cpb, "Expected normal cells per block");

  // collide
  auto* collide_cmd = app.add_subcommand("collide", "Collision probability study");
  std::string c_key, c_report;
  long long trials = 100;
  uint64_t c_seed = 0;
  int c_nodes = 4;
  collide_cmd->add_option("--key", c_key, "Marking key (.mk.json)")->required();
  collide_cmd->add_option("--trials", trials, "Monte-Carlo trials");
  collide_cmd->add_option("--seed", c_seed, "Random seed");
  collide_cmd->add_option("--nodes", c_nodes, "Computing nodes per cell");
  collide_cmd->add_option("--report", c_report, "Report json path (stdout if omitted)");

  // report
  auto* report_cmd = app.add_subcommand("report", "Emit plot data (CSV) for a trace");
  std::string r_trace, r_profile, r_out;
  report_cmd->add_option("--trace", r_trace, "Trace jsonl")->required();
  report_cmd->add_option("--profile", r_profile, "Machine profile json");
  report_cmd->add_option("--out", r_out, "Output prefix")->required();

  std::vector<std::string> reversed(argv.rbegin(), argv.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help() << "\n";
    return kExitVerified;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help() << "\n";
    return kExitUsage;
  }

  try {
    if (genkey->parsed())
      return cmd_genkey(ns, seed, out_path, nodes, per_cell, out);
    if (mark_cmd->parsed())
      return cmd_mark(key_path, strategy, mark_seed, arch_out, macro, mark_nodes, out);
    if (trace_cmd->parsed())
      return cmd_trace(trace_arch, trace_profile, trace_seed, noise, trace_out, out);
    if (attack_cmd->parsed())
      return cmd_attack(attack_arch, attack_trace, attack_kind, attack_seed, oracle,
                        attack_key, attack_out, out);
    if (analyze_cmd->parsed()) return cmd_analyze(an_trace, an_profile, an_report, out);
    if (verify_cmd->parsed())
      return cmd_verify(v_vk, v_trace, v_profile, v_report, v_blocks, v_cpb, out);
    if (collide_cmd->parsed())
      return cmd_collide(c_key, trials, c_seed, c_report, c_nodes, out);
    if (report_cmd->parsed()) return cmd_report(r_trace, r_profile, r_out, out);
  } catch (const Error& e) {
    err << "error [" << e.code << "]: " << e.what() << "\n";
    return e.code == "usage" ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  err << "no subcommand\n";
  return kExitUsage;
}

}  // namespace archstamp
