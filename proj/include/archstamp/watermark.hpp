#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "archstamp/nas.hpp"

namespace archstamp {

// A fixed path of edge-operation pairs inside one cell. Edges are
// consecutive: the target of edge i is the source of edge i+1.
struct Stamp {
  std::vector<Edge> edges;
  std::vector<Operation> ops;

  int size() const { return static_cast<int>(edges.size()); }
  bool consecutive() const;
  bool operator==(const Stamp&) const = default;
};

// Secret marking key: one stamp per cell type by default (the per-cell
// general form is kept in `per_cell` when generated that way).
struct MarkingKey {
  int n_s = 0;
  Stamp normal;
  Stamp reduction;
  std::vector<Stamp> per_cell;

  const Stamp& stamp_for(CellKind kind, int cell_index) const;
};

// Public verification key: the stamp operation sequences with the edges
// withheld.
struct VerificationKey {
  int n_s = 0;
  std::vector<Operation> normal;
  std::vector<Operation> reduction;
  std::vector<std::vector<Operation>> per_cell;

  const std::vector<Operation>& ops_for(CellKind kind, int cell_index) const;
};

// All consecutive edge paths of length exactly n_s in the supernet,
// in a canonical (lexicographic) order.
std::vector<std::vector<Edge>> get_path(const CellSupernet& g, int n_s);

// Samples one uniform path and n_s i.i.d. uniform operations per cell type.
std::pair<MarkingKey, VerificationKey> wmgen(int n_s, const CellSupernet& space,
                                             uint64_t seed);

// General form: a fresh stamp per cell position.
std::pair<MarkingKey, VerificationKey> wmgen_per_cell(int n_s,
                                                      const CellSupernet& space,
                                                      int num_cells, uint64_t seed);

// Owner-crafted keys; validates the stamps against the supernet.
MarkingKey make_key(const CellSupernet& space, Stamp normal, Stamp reduction);

VerificationKey verification_key(const MarkingKey& mk);

// Report-style validation: returns human-readable violations, empty = valid.
std::vector<std::string> validate_key(const MarkingKey& mk, const CellSupernet& space);
std::vector<std::string> validate_stamp(const Stamp& s, const CellSupernet& space,
                                        const std::string& label);

std::string to_json_string(const MarkingKey& mk);
std::string to_json_string(const VerificationKey& vk);
MarkingKey marking_key_from_json_string(const std::string& text);
VerificationKey verification_key_from_json_string(const std::string& text);
void save_key(const MarkingKey& mk, const std::string& path);    // *.mk.json
void save_key(const VerificationKey& vk, const std::string& path);  // *.vk.json
MarkingKey load_marking_key(const std::string& path);
VerificationKey load_verification_key(const std::string& path);

}  // namespace archstamp
