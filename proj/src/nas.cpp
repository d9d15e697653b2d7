#include "archstamp/nas.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace archstamp {

using nlohmann::json;

std::string Operation::name() const {
  switch (kind) {
    case OpKind::Skip:
      return "skip_connect";
    case OpKind::SepConv:
      return "sep_conv_" + std::to_string(kernel) + "x" + std::to_string(kernel);
    case OpKind::DilSepConv: {
      std::string base =
          "dil_conv_" + std::to_string(kernel) + "x" + std::to_string(kernel);
      if (dilation != 1) base += "_d" + std::to_string(dilation);
      return base;
    }
    case OpKind::AvgPool:
      return "avg_pool_" + std::to_string(kernel) + "x" + std::to_string(kernel);
    case OpKind::MaxPool:
      return "max_pool_" + std::to_string(kernel) + "x" + std::to_string(kernel);
    case OpKind::NormalConv:
      return "conv_" + std::to_string(kernel) + "x" + std::to_string(kernel);
    case OpKind::FullyConnected:
      return "fully_connected";
  }
  return "unknown";
}

Operation Operation::parse(const std::string& name) {
  auto kernel_of = [&](size_t prefix_len) {
    // "..._KxK" or "..._KxK_dD"
    std::string rest = name.substr(prefix_len);
    size_t x = rest.find('x');
    if (x == std::string::npos) throw Error("parse", "bad operation name: " + name);
    int k = std::stoi(rest.substr(0, x));
    return k;
  };
  auto dilation_of = [&]() {
    size_t d = name.rfind("_d");
    if (d == std::string::npos) return 1;
    return std::stoi(name.substr(d + 2));
  };
  if (name == "skip_connect" || name == "skip") return skip();
  if (name == "fully_connected") return fully_connected();
  if (name.rfind("sep_conv_", 0) == 0) return sep_conv(kernel_of(9));
  if (name.rfind("dil_conv_", 0) == 0) return dil_sep_conv(kernel_of(9), dilation_of());
  if (name.rfind("avg_pool_", 0) == 0) return {OpKind::AvgPool, kernel_of(9), 0};
  if (name.rfind("max_pool_", 0) == 0) return {OpKind::MaxPool, kernel_of(9), 0};
  if (name.rfind("conv_", 0) == 0) return normal_conv(kernel_of(5));
  throw Error("parse", "unknown operation name: " + name);
}

std::vector<Operation> default_candidate_ops() {
  return {Operation::skip(),         Operation::sep_conv(3),
          Operation::sep_conv(5),    Operation::dil_sep_conv(3),
          Operation::dil_sep_conv(5), Operation::avg_pool(),
          Operation::max_pool()};
}

std::vector<NodeId> CellSupernet::admissible_sources(NodeId node) const {
  if (node < first_node() || node > last_node())
    throw Error("invalid-supernet", "node id out of range");
  std::vector<NodeId> out;
  out.reserve(static_cast<size_t>(node));
  for (NodeId s = 0; s < node; ++s) out.push_back(s);
  return out;
}

std::vector<Edge> CellSupernet::all_edges() const {
  std::vector<Edge> out;
  for (NodeId t = first_node(); t <= last_node(); ++t)
    for (NodeId s = 0; s < t; ++s) out.push_back({s, t});
  return out;
}

bool CellSupernet::admissible(const Edge& e) const {
  return e.dst >= first_node() && e.dst <= last_node() && e.src >= 0 && e.src < e.dst;
}

CellSupernet build_default_supernet(int num_nodes, std::vector<Operation> ops) {
  if (num_nodes < 1) throw Error("invalid-supernet", "need at least one computing node");
  if (ops.empty()) throw Error("invalid-supernet", "candidate operation set is empty");
  CellSupernet s;
  s.num_nodes = num_nodes;
  s.candidate_ops = std::move(ops);
  return s;
}

Cell Cell::make(CellKind kind, std::vector<ChosenEdge> edges) {
  Cell c;
  c.kind = kind;
  c.edges = std::move(edges);
  c.reset_default_order();
  return c;
}

void Cell::reset_default_order() {
  order.resize(edges.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [this](int a, int b) {
    const Edge& ea = edges[a].edge;
    const Edge& eb = edges[b].edge;
    if (ea.dst != eb.dst) return ea.dst < eb.dst;
    if (ea.src != eb.src) return ea.src < eb.src;
    return a < b;
  });
}

bool Cell::order_is_topological() const {
  if (order.size() != edges.size()) return false;
  std::set<int> seen(order.begin(), order.end());
  if (seen.size() != edges.size()) return false;
  // A node is available once all edges feeding it have executed.
  std::map<NodeId, int> pending;
  for (const auto& ce : edges) pending[ce.edge.dst]++;
  auto available = [&](NodeId n) {
    return n == kInputA || n == kInputB || pending[n] == 0;
  };
  for (int idx : order) {
    const Edge& e = edges[idx].edge;
    if (!available(e.src)) return false;
    pending[e.dst]--;
  }
  return true;
}

TensorShape reduce_shape(TensorShape s) {
  return {(s.width + 1) / 2, (s.height + 1) / 2, s.channels * 2};
}

Architecture stack_architecture(const Cell& normal, const Cell& reduction,
                                const MacroParams& macro,
                                const CellSupernet& space) {
  if (normal.kind != CellKind::Normal)
    throw Error("invalid-architecture", "first cell must be a normal cell");
  if (macro.blocks > 1 && reduction.kind != CellKind::Reduction)
    throw Error("invalid-architecture", "second cell must be a reduction cell");
  if (macro.blocks < 1 || macro.cells_per_block < 1)
    throw Error("invalid-architecture", "macro structure must be positive");
  Architecture a;
  a.macro = macro;
  a.num_nodes = space.num_nodes;
  a.candidate_ops = space.candidate_ops;
  for (int b = 0; b < macro.blocks; ++b) {
    for (int i = 0; i < macro.cells_per_block; ++i) a.cells.push_back(normal);
    if (b + 1 < macro.blocks) a.cells.push_back(reduction);
  }
  a.cell_scale.assign(a.cells.size(), 1.0);
  return a;
}

std::vector<TensorShape> propagate_shapes(const Architecture& arch) {
  std::vector<TensorShape> out;
  out.reserve(arch.cells.size());
  TensorShape cur{arch.macro.input_width, arch.macro.input_height,
                  arch.macro.initial_channels};
  for (const Cell& c : arch.cells) {
    if (cur.width <= 0 || cur.height <= 0)
      throw Error("shape-underflow", "spatial size exhausted before the last cell");
    out.push_back(cur);
    if (c.kind == CellKind::Reduction) cur = reduce_shape(cur);
  }
  return out;
}

namespace {

json cell_to_json(const Cell& c) {
  json edges = json::array();
  for (const auto& ce : c.edges)
    edges.push_back({ce.edge.src, ce.edge.dst, ce.op.name()});
  json j;
  j["kind"] = c.kind == CellKind::Normal ? "normal" : "reduction";
  j["edges"] = edges;
  j["order"] = c.order;
  return j;
}

Cell cell_from_json(const json& j) {
  Cell c;
  c.kind = j.at("kind").get<std::string>() == "reduction" ? CellKind::Reduction
                                                          : CellKind::Normal;
  for (const auto& e : j.at("edges")) {
    ChosenEdge ce;
    ce.edge.src = e.at(0).get<int>();
    ce.edge.dst = e.at(1).get<int>();
    ce.op = Operation::parse(e.at(2).get<std::string>());
    c.edges.push_back(ce);
  }
  if (j.contains("order"))
    c.order = j.at("order").get<std::vector<int>>();
  else
    c.reset_default_order();
  if (c.order.size() != c.edges.size())
    throw Error("parse", "cell order length does not match edge count");
  return c;
}

}  // namespace

std::string to_json_string(const Architecture& arch) {
  json ops = json::array();
  for (const auto& op : arch.candidate_ops) ops.push_back(op.name());
  json cells = json::array();
  for (size_t i = 0; i < arch.cells.size(); ++i) {
    json c = cell_to_json(arch.cells[i]);
    if (arch.cell_scale.size() == arch.cells.size() && arch.cell_scale[i] != 1.0)
      c["scale"] = arch.cell_scale[i];
    cells.push_back(c);
  }
  json j;
  j["nodes"] = arch.num_nodes;
  j["ops"] = ops;
  j["cells"] = cells;
  j["macro"] = {{"blocks", arch.macro.blocks},
                {"cells_per_block", arch.macro.cells_per_block},
                {"initial_channels", arch.macro.initial_channels},
                {"input", {arch.macro.input_width, arch.macro.input_height}},
                {"preprocessing", arch.macro.preprocessing},
                {"classifier",
                 {{"neurons", arch.macro.classifier_neurons},
                  {"batch", arch.macro.classifier_batch}}}};
  if (arch.speedup_hint != 1.0) j["speedup"] = arch.speedup_hint;
  return j.dump(2);
}

Architecture architecture_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("parse", std::string("bad architecture json: ") + e.what());
  }
  Architecture a;
  a.num_nodes = j.at("nodes").get<int>();
  for (const auto& n : j.at("ops")) a.candidate_ops.push_back(Operation::parse(n));
  for (const auto& c : j.at("cells")) {
    a.cells.push_back(cell_from_json(c));
    a.cell_scale.push_back(c.contains("scale") ? c.at("scale").get<double>() : 1.0);
  }
  const json& m = j.at("macro");
  a.macro.blocks = m.at("blocks").get<int>();
  a.macro.cells_per_block = m.at("cells_per_block").get<int>();
  a.macro.initial_channels = m.at("initial_channels").get<int>();
  a.macro.input_width = m.at("input").at(0).get<int>();
  a.macro.input_height = m.at("input").at(1).get<int>();
  a.macro.preprocessing = m.at("preprocessing").get<int>();
  a.macro.classifier_neurons = m.at("classifier").at("neurons").get<int>();
  a.macro.classifier_batch = m.at("classifier").at("batch").get<int>();
  if (j.contains("speedup")) a.speedup_hint = j.at("speedup").get<double>();
  return a;
}

void save_architecture(const Architecture& arch, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("io", "cannot open " + path + " for writing");
  f << to_json_string(arch) << "\n";
}

Architecture load_architecture(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return architecture_from_json_string(ss.str());
}

}  // namespace archstamp
