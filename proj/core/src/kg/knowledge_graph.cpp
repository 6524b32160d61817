#include "kgqa/kg/knowledge_graph.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "kgqa/error.hpp"

namespace kgqa {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::ifstream open_or_throw(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw LoadError("cannot open '" + p.string() + "'");
  return in;
}

using LabelRows = std::vector<std::pair<std::string, std::string>>;

LabelRows read_labels(const std::filesystem::path& p) {
  auto in = open_or_throw(p);
  LabelRows rows;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (line.empty()) continue;
    auto f = split_tabs(line);
    const std::string where = p.string() + ":" + std::to_string(lineno);
    if (f.size() != 2) throw LoadError(where + ": expected id<TAB>label");
    if (f[0].empty()) throw LoadError(where + ": empty id");
    if (f[1].empty()) throw LoadError(where + ": empty label");
    if (!seen.insert(f[0]).second) throw LoadError(where + ": duplicate id '" + f[0] + "'");
    rows.emplace_back(std::move(f[0]), std::move(f[1]));
  }
  return rows;
}

}  // namespace

KnowledgeGraph KnowledgeGraph::load(const std::filesystem::path& triples,
                                    const std::filesystem::path& entity_labels,
                                    const std::filesystem::path& relation_labels) {
  KnowledgeGraphBuilder b;
  for (auto& [key, label] : read_labels(entity_labels)) b.add_entity(key, label);
  for (auto& [key, label] : read_labels(relation_labels)) b.add_relation(key, label);

  auto in = open_or_throw(triples);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    const std::string where = triples.string() + ":" + std::to_string(lineno);
    if (f.size() != 3) throw LoadError(where + ": expected head<TAB>relation<TAB>tail");
    try {
      b.add_triple(f[0], f[1], f[2]);
    } catch (const UnknownIdError& e) {
      throw LoadError(where + ": " + e.what());
    }
  }
  return std::move(b).build();
}

void KnowledgeGraph::check(EntityId e) const {
  if (!contains(e)) throw UnknownIdError("unknown entity id " + std::to_string(e.value));
}

void KnowledgeGraph::check(RelationId r) const {
  if (!contains(r)) throw UnknownIdError("unknown relation id " + std::to_string(r.value));
}

const std::string& KnowledgeGraph::entity_label(EntityId e) const {
  check(e);
  return entity_labels_[e.value];
}

const std::string& KnowledgeGraph::entity_key(EntityId e) const {
  check(e);
  return entity_keys_[e.value];
}

const std::string& KnowledgeGraph::relation_label(RelationId r) const {
  check(r);
  return relation_labels_[r.value];
}

const std::string& KnowledgeGraph::relation_key(RelationId r) const {
  check(r);
  return relation_keys_[r.value];
}

const Triple& KnowledgeGraph::triple(TripleId t) const {
  if (t.value >= triples_.size()) throw UnknownIdError("unknown triple id " + std::to_string(t.value));
  return triples_[t.value];
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view key) const {
  auto it = entity_by_key_.find(std::string(key));
  if (it == entity_by_key_.end()) return std::nullopt;
  return EntityId{it->second};
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view key) const {
  auto it = relation_by_key_.find(std::string(key));
  if (it == relation_by_key_.end()) return std::nullopt;
  return RelationId{it->second};
}

EntityId KnowledgeGraph::entity(std::string_view key) const {
  if (auto e = find_entity(key)) return *e;
  throw UnknownIdError("unknown entity '" + std::string(key) + "'");
}

RelationId KnowledgeGraph::relation(std::string_view key) const {
  if (auto r = find_relation(key)) return *r;
  throw UnknownIdError("unknown relation '" + std::string(key) + "'");
}

std::span<const Incidence> KnowledgeGraph::incidences(EntityId e) const {
  check(e);
  return {incidences_.data() + offsets_[e.value], offsets_[e.value + 1] - offsets_[e.value]};
}

std::vector<RelationLink> KnowledgeGraph::relations_between(EntityId e, EntityId other) const {
  check(e);
  check(other);
  std::vector<RelationLink> links;
  for (const auto& inc : incidences(e)) {
    if (inc.neighbor == other) links.push_back({inc.relation, inc.outgoing, inc.triple});
  }
  std::sort(links.begin(), links.end());
  return links;
}

std::optional<TripleId> KnowledgeGraph::find_triple(const Triple& t) const {
  if (!contains(t.head) || !contains(t.tail)) return std::nullopt;
  for (const auto& inc : incidences(t.head)) {
    if (inc.outgoing && inc.neighbor == t.tail && inc.relation == t.relation) return inc.triple;
  }
  return std::nullopt;
}

void KnowledgeGraph::build_index() {
  const std::size_t n = entity_count();
  std::vector<std::uint32_t> degree(n, 0);
  for (const auto& t : triples_) {
    ++degree[t.head.value];
    ++degree[t.tail.value];
  }
  offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + degree[i];
  incidences_.assign(offsets_[n], Incidence{});
  std::vector<std::uint32_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::uint32_t i = 0; i < triples_.size(); ++i) {
    const auto& t = triples_[i];
    incidences_[cursor[t.head.value]++] = {t.tail, t.relation, TripleId{i}, true};
    incidences_[cursor[t.tail.value]++] = {t.head, t.relation, TripleId{i}, false};
  }
}

void KnowledgeGraph::write(const std::filesystem::path& triples,
                           const std::filesystem::path& entity_labels,
                           const std::filesystem::path& relation_labels) const {
  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw LoadError("cannot write '" + p.string() + "'");
    return out;
  };
  auto te = open(entity_labels);
  for (std::size_t i = 0; i < entity_count(); ++i) te << entity_keys_[i] << '\t' << entity_labels_[i] << '\n';
  auto tr = open(relation_labels);
  for (std::size_t i = 0; i < relation_count(); ++i) {
    tr << relation_keys_[i] << '\t' << relation_labels_[i] << '\n';
  }
  auto tt = open(triples);
  for (const auto& t : triples_) {
    tt << entity_keys_[t.head.value] << '\t' << relation_keys_[t.relation.value] << '\t'
       << entity_keys_[t.tail.value] << '\n';
  }
}

EntityId KnowledgeGraphBuilder::add_entity(std::string key, std::string label) {
  if (key.empty() || label.empty()) throw LoadError("entity key and label must be nonempty");
  const auto id = static_cast<std::uint32_t>(kg_.entity_keys_.size());
  if (!kg_.entity_by_key_.emplace(key, id).second) throw LoadError("duplicate entity id '" + key + "'");
  kg_.entity_keys_.push_back(std::move(key));
  kg_.entity_labels_.push_back(std::move(label));
  return EntityId{id};
}

RelationId KnowledgeGraphBuilder::add_relation(std::string key, std::string label) {
  if (key.empty() || label.empty()) throw LoadError("relation key and label must be nonempty");
  const auto id = static_cast<std::uint32_t>(kg_.relation_keys_.size());
  if (!kg_.relation_by_key_.emplace(key, id).second) {
    throw LoadError("duplicate relation id '" + key + "'");
  }
  kg_.relation_keys_.push_back(std::move(key));
  kg_.relation_labels_.push_back(std::move(label));
  return RelationId{id};
}

void KnowledgeGraphBuilder::add_triple(EntityId head, RelationId relation, EntityId tail) {
  kg_.check(head);
  kg_.check(tail);
  kg_.check(relation);
  kg_.triples_.push_back({head, relation, tail});
}

void KnowledgeGraphBuilder::add_triple(std::string_view head, std::string_view relation,
                                       std::string_view tail) {
  add_triple(kg_.entity(head), kg_.relation(relation), kg_.entity(tail));
}

KnowledgeGraph KnowledgeGraphBuilder::build() && {
  std::set<Triple> seen;
  std::vector<Triple> unique;
  unique.reserve(kg_.triples_.size());
  for (const auto& t : kg_.triples_) {
    if (seen.insert(t).second) unique.push_back(t);
  }
  kg_.triples_ = std::move(unique);
  kg_.build_index();
  return std::move(kg_);
}

}  // namespace kgqa
