#include "archstamp/watermark.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "archstamp/rng.hpp"

namespace archstamp {

using nlohmann::json;

bool Stamp::consecutive() const {
  if (edges.size() != ops.size()) return false;
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    if (edges[i].dst != edges[i + 1].src) return false;
  return true;
}

const Stamp& MarkingKey::stamp_for(CellKind kind, int cell_index) const {
  if (!per_cell.empty()) {
    if (cell_index < 0 || cell_index >= static_cast<int>(per_cell.size()))
      throw Error("invalid-key", "per-cell key has no stamp for cell index " +
                                     std::to_string(cell_index));
    return per_cell[cell_index];
  }
  return kind == CellKind::Normal ? normal : reduction;
}

const std::vector<Operation>& VerificationKey::ops_for(CellKind kind,
                                                       int cell_index) const {
  if (!per_cell.empty()) {
    if (cell_index < 0 || cell_index >= static_cast<int>(per_cell.size()))
      throw Error("invalid-key", "per-cell key has no ops for cell index " +
                                     std::to_string(cell_index));
    return per_cell[cell_index];
  }
  return kind == CellKind::Normal ? normal : reduction;
}

std::vector<std::vector<Edge>> get_path(const CellSupernet& g, int n_s) {
  if (n_s < 1 || n_s > g.num_nodes)
    throw Error("invalid-stamp-size",
                "stamp size must be in [1, " + std::to_string(g.num_nodes) + "]");

  // Paths as node sequences. P[t] holds every path ending at node t, built by
  // appending t to all shorter paths and to the bare inputs.
  std::vector<std::vector<std::vector<NodeId>>> paths_to(g.total_nodes());
  for (NodeId t = g.first_node(); t <= g.last_node(); ++t) {
    for (NodeId input : {kInputA, kInputB}) paths_to[t].push_back({input, t});
    for (NodeId v = g.first_node(); v < t; ++v)
      for (const auto& p : paths_to[v]) {
        auto q = p;
        q.push_back(t);
        paths_to[t].push_back(std::move(q));
      }
  }

  // Every length-n_s path is a subpath of some path ending at the last node,
  // so extracting windows from that set enumerates them all.
  std::set<std::vector<NodeId>> unique;
  for (const auto& p : paths_to[g.last_node()]) {
    int len = static_cast<int>(p.size()) - 1;
    if (len < n_s) continue;
    for (size_t i = 0; i + n_s < p.size(); ++i)
      unique.insert(std::vector<NodeId>(p.begin() + i, p.begin() + i + n_s + 1));
  }

  std::vector<std::vector<Edge>> out;
  out.reserve(unique.size());
  for (const auto& nodes : unique) {
    std::vector<Edge> path;
    for (size_t i = 0; i + 1 < nodes.size(); ++i)
      path.push_back({nodes[i], nodes[i + 1]});
    out.push_back(std::move(path));
  }
  return out;
}

namespace {

Stamp sample_stamp(const std::vector<std::vector<Edge>>& paths,
                   const std::vector<Operation>& ops, int n_s, Rng& rng) {
  if (paths.empty()) throw Error("invalid-stamp-size", "no path of requested length");
  Stamp s;
  s.edges = paths[rng.uniform(paths.size())];
  s.ops.reserve(n_s);
  for (int i = 0; i < n_s; ++i) s.ops.push_back(ops[rng.uniform(ops.size())]);
  return s;
}

}  // namespace

std::pair<MarkingKey, VerificationKey> wmgen(int n_s, const CellSupernet& space,
                                             uint64_t seed) {
  auto paths = get_path(space, n_s);
  Rng rng(seed);
  MarkingKey mk;
  mk.n_s = n_s;
  mk.normal = sample_stamp(paths, space.candidate_ops, n_s, rng);
  mk.reduction = sample_stamp(paths, space.candidate_ops, n_s, rng);
  return {mk, verification_key(mk)};
}

std::pair<MarkingKey, VerificationKey> wmgen_per_cell(int n_s,
                                                      const CellSupernet& space,
                                                      int num_cells, uint64_t seed) {
  auto paths = get_path(space, n_s);
  Rng rng(seed);
  MarkingKey mk;
  mk.n_s = n_s;
  for (int i = 0; i < num_cells; ++i)
    mk.per_cell.push_back(sample_stamp(paths, space.candidate_ops, n_s, rng));
  mk.normal = mk.per_cell.front();
  mk.reduction = mk.per_cell.back();
  return {mk, verification_key(mk)};
}

MarkingKey make_key(const CellSupernet& space, Stamp normal, Stamp reduction) {
  MarkingKey mk;
  mk.n_s = normal.size();
  mk.normal = std::move(normal);
  mk.reduction = std::move(reduction);
  auto violations = validate_key(mk, space);
  if (!violations.empty()) throw Error("invalid-key", violations.front());
  return mk;
}

VerificationKey verification_key(const MarkingKey& mk) {
  VerificationKey vk;
  vk.n_s = mk.n_s;
  vk.normal = mk.normal.ops;
  vk.reduction = mk.reduction.ops;
  for (const auto& s : mk.per_cell) vk.per_cell.push_back(s.ops);
  return vk;
}

std::vector<std::string> validate_stamp(const Stamp& s, const CellSupernet& space,
                                        const std::string& label) {
  std::vector<std::string> v;
  if (s.edges.size() != s.ops.size())
    v.push_back(label + ": edge and operation counts differ");
  if (s.size() < 1 || s.size() > space.num_nodes)
    v.push_back(label + ": stamp size " + std::to_string(s.size()) +
                " outside [1, " + std::to_string(space.num_nodes) + "]");
  for (size_t i = 0; i + 1 < s.edges.size(); ++i)
    if (s.edges[i].dst != s.edges[i + 1].src)
      v.push_back(label + ": path broken at index " + std::to_string(i + 1));
  for (size_t i = 0; i < s.edges.size(); ++i)
    if (!space.admissible(s.edges[i]))
      v.push_back(label + ": inadmissible edge at index " + std::to_string(i));
  for (size_t i = 0; i < s.ops.size(); ++i) {
    bool known = std::find(space.candidate_ops.begin(), space.candidate_ops.end(),
                           s.ops[i]) != space.candidate_ops.end();
    if (!known)
      v.push_back(label + ": unknown operation '" + s.ops[i].name() +
                  "' at index " + std::to_string(i));
  }
  return v;
}

std::vector<std::string> validate_key(const MarkingKey& mk, const CellSupernet& space) {
  std::vector<std::string> v;
  auto add = [&](std::vector<std::string> more) {
    v.insert(v.end(), more.begin(), more.end());
  };
  add(validate_stamp(mk.normal, space, "normal"));
  add(validate_stamp(mk.reduction, space, "reduction"));
  if (mk.normal.size() != mk.n_s)
    v.push_back("normal: stamp size differs from key n_s");
  if (mk.reduction.size() != mk.n_s)
    v.push_back("reduction: stamp size differs from key n_s");
  for (size_t i = 0; i < mk.per_cell.size(); ++i)
    add(validate_stamp(mk.per_cell[i], space, "cell " + std::to_string(i)));
  return v;
}

namespace {

json stamp_to_json(const Stamp& s, bool with_edges) {
  json j;
  if (with_edges) {
    json edges = json::array();
    for (const auto& e : s.edges) edges.push_back({e.src, e.dst});
    j["edges"] = edges;
  }
  json ops = json::array();
  for (const auto& op : s.ops) ops.push_back(op.name());
  j["ops"] = ops;
  return j;
}

Stamp stamp_from_json(const json& j, bool with_edges) {
  Stamp s;
  if (with_edges)
    for (const auto& e : j.at("edges"))
      s.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  for (const auto& o : j.at("ops")) s.ops.push_back(Operation::parse(o));
  return s;
}

}  // namespace

std::string to_json_string(const MarkingKey& mk) {
  json j;
  j["n_s"] = mk.n_s;
  j["normal"] = stamp_to_json(mk.normal, true);
  j["reduction"] = stamp_to_json(mk.reduction, true);
  if (!mk.per_cell.empty()) {
    json cells = json::array();
    for (const auto& s : mk.per_cell) cells.push_back(stamp_to_json(s, true));
    j["cells"] = cells;
  }
  return j.dump(2);
}

std::string to_json_string(const VerificationKey& vk) {
  json j;
  j["n_s"] = vk.n_s;
  j["normal"] = json{{"ops", json::array()}};
  for (const auto& o : vk.normal) j["normal"]["ops"].push_back(o.name());
  j["reduction"] = json{{"ops", json::array()}};
  for (const auto& o : vk.reduction) j["reduction"]["ops"].push_back(o.name());
  if (!vk.per_cell.empty()) {
    json cells = json::array();
    for (const auto& ops : vk.per_cell) {
      json c{{"ops", json::array()}};
      for (const auto& o : ops) c["ops"].push_back(o.name());
      cells.push_back(c);
    }
    j["cells"] = cells;
  }
  return j.dump(2);
}

MarkingKey marking_key_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("parse", std::string("bad marking key json: ") + e.what());
  }
  MarkingKey mk;
  mk.n_s = j.at("n_s").get<int>();
  mk.normal = stamp_from_json(j.at("normal"), true);
  mk.reduction = stamp_from_json(j.at("reduction"), true);
  if (j.contains("cells"))
    for (const auto& c : j.at("cells")) mk.per_cell.push_back(stamp_from_json(c, true));
  return mk;
}

VerificationKey verification_key_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("parse", std::string("bad verification key json: ") + e.what());
  }
  VerificationKey vk;
  vk.n_s = j.at("n_s").get<int>();
  vk.normal = stamp_from_json(j.at("normal"), false).ops;
  vk.reduction = stamp_from_json(j.at("reduction"), false).ops;
  if (j.contains("cells"))
    for (const auto& c : j.at("cells"))
      vk.per_cell.push_back(stamp_from_json(c, false).ops);
  return vk;
}

namespace {

void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("io", "cannot open " + path + " for writing");
  f << body << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

void save_key(const MarkingKey& mk, const std::string& path) {
  write_file(path, to_json_string(mk));
}

void save_key(const VerificationKey& vk, const std::string& path) {
  write_file(path, to_json_string(vk));
}

MarkingKey load_marking_key(const std::string& path) {
  return marking_key_from_json_string(read_file(path));
}

VerificationKey load_verification_key(const std::string& path) {
  return verification_key_from_json_string(read_file(path));
}

}  // namespace archstamp
