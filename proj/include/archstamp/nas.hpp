#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace archstamp {

// Error with a stable machine-readable code ("invalid-supernet", ...).
struct Error : std::runtime_error {
  Error(std::string code_, const std::string& what_)
      : std::runtime_error(what_), code(std::move(code_)) {}
  std::string code;
};

enum class OpKind {
  Skip,
  SepConv,
  DilSepConv,
  AvgPool,
  MaxPool,
  NormalConv,
  FullyConnected,
};

// A candidate operation attached to a cell edge. kernel is the square
// kernel side in pixels; dilation counts the spaces inserted between
// kernel elements (> 0 only for DilSepConv).
struct Operation {
  OpKind kind = OpKind::Skip;
  int kernel = 0;
  int dilation = 0;

  bool operator==(const Operation&) const = default;

  // Effective kernel side once dilation spaces are inserted.
  int effective_kernel() const { return kernel + dilation * (kernel - 1); }

  std::string name() const;
  static Operation parse(const std::string& name);

  static Operation skip() { return {OpKind::Skip, 0, 0}; }
  static Operation sep_conv(int k) { return {OpKind::SepConv, k, 0}; }
  static Operation dil_sep_conv(int k, int d = 1) { return {OpKind::DilSepConv, k, d}; }
  static Operation avg_pool() { return {OpKind::AvgPool, 3, 0}; }
  static Operation max_pool() { return {OpKind::MaxPool, 3, 0}; }
  static Operation normal_conv(int k) { return {OpKind::NormalConv, k, 0}; }
  static Operation fully_connected() { return {OpKind::FullyConnected, 0, 0}; }

  bool is_conv() const {
    return kind == OpKind::SepConv || kind == OpKind::DilSepConv ||
           kind == OpKind::NormalConv;
  }
  bool is_pool() const { return kind == OpKind::AvgPool || kind == OpKind::MaxPool; }
};

// The 7 default candidates: skip, 3x3/5x5 separable conv, 3x3/5x5 dilated
// separable conv, 3x3 avg/max pool.
std::vector<Operation> default_candidate_ops();

// Node ids inside a cell: 0 and 1 are the two cell inputs (outputs of the
// previous two cells), 2..B+1 are the computing nodes.
using NodeId = int;
inline constexpr NodeId kInputA = 0;
inline constexpr NodeId kInputB = 1;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

// The cell search-space DAG: node j admits incoming edges from both inputs
// and every earlier computing node. A sampled cell keeps exactly two
// incoming edges per node, so 2*B edge slots participate in a sample.
struct CellSupernet {
  int num_nodes = 4;  // computing nodes (B)
  std::vector<Operation> candidate_ops;

  NodeId first_node() const { return 2; }
  NodeId last_node() const { return num_nodes + 1; }
  int total_nodes() const { return num_nodes + 2; }
  int key_edge_slots() const { return 2 * num_nodes; }

  std::vector<NodeId> admissible_sources(NodeId node) const;
  std::vector<Edge> all_edges() const;
  bool admissible(const Edge& e) const;
};

// Fully-connected cell DAG over `num_nodes` computing nodes.
CellSupernet build_default_supernet(int num_nodes, std::vector<Operation> ops);
inline CellSupernet build_default_supernet(int num_nodes) {
  return build_default_supernet(num_nodes, default_candidate_ops());
}

enum class CellKind { Normal, Reduction };

inline int cell_stride(CellKind k) { return k == CellKind::Normal ? 1 : 2; }

struct ChosenEdge {
  Edge edge;
  Operation op;
  bool operator==(const ChosenEdge&) const = default;
};

// A concrete sampled cell. `order` lists edge indices in execution order;
// the default order is the topological (target node, source node) sort.
struct Cell {
  CellKind kind = CellKind::Normal;
  std::vector<ChosenEdge> edges;
  std::vector<int> order;

  static Cell make(CellKind kind, std::vector<ChosenEdge> edges);
  void reset_default_order();
  bool order_is_topological() const;
  const ChosenEdge& at(int order_pos) const { return edges[order[order_pos]]; }
};

struct MacroParams {
  int blocks = 3;
  int cells_per_block = 6;
  int initial_channels = 33;
  int input_width = 32;
  int input_height = 32;
  int preprocessing = 3;
  int classifier_neurons = 10;
  int classifier_batch = 1;
};

// A stacked model: `blocks` runs of normal cells joined by reduction cells,
// preceded by the stem convolutions and followed by the classifier.
struct Architecture {
  std::vector<Cell> cells;
  MacroParams macro;
  int num_nodes = 4;
  std::vector<Operation> candidate_ops;
  // Per-cell execution-time scale left by weight pruning (1.0 = untouched).
  std::vector<double> cell_scale;
  // Global speedup applied on top of the machine profile (binarized: 20).
  double speedup_hint = 1.0;

  int cell_count() const { return static_cast<int>(cells.size()); }
};

struct TensorShape {
  int width = 0;
  int height = 0;
  int channels = 0;
  bool operator==(const TensorShape&) const = default;
};

// Ceiling halving of the spatial dims, channel doubling.
TensorShape reduce_shape(TensorShape s);

Architecture stack_architecture(const Cell& normal, const Cell& reduction,
                                const MacroParams& macro,
                                const CellSupernet& space);

// Input tensor shape of every cell, in cell order. Pure function of the
// architecture: convolutions inside cells are padded to preserve spatial
// size, reduction cells halve it and double the channels.
std::vector<TensorShape> propagate_shapes(const Architecture& arch);

std::string to_json_string(const Architecture& arch);
Architecture architecture_from_json_string(const std::string& text);
void save_architecture(const Architecture& arch, const std::string& path);
Architecture load_architecture(const std::string& path);

}  // namespace archstamp
