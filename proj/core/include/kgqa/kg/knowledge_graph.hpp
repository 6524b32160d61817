#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgqa {

template <class Tag>
struct StrongId {
  std::uint32_t value = 0;
  friend auto operator<=>(StrongId, StrongId) = default;
};

using EntityId = StrongId<struct EntityTag>;
using RelationId = StrongId<struct RelationTag>;
using TripleId = StrongId<struct TripleTag>;

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// One endpoint's view of a triple.
struct Incidence {
  EntityId neighbor;
  RelationId relation;
  TripleId triple;
  bool outgoing;  ///< this entity is the triple's head
};

/// A relation linking two given entities; `forward` means (e, r, e_i) is stored.
struct RelationLink {
  RelationId relation;
  bool forward;
  TripleId triple;
  friend auto operator<=>(const RelationLink&, const RelationLink&) = default;
};

class KnowledgeGraphBuilder;

/// Immutable triple store with a per-entity incidence index.
///
/// Entities and relations carry an external key (the id used in files) and a
/// display label. Every triple appears exactly twice in the index, once under
/// each endpoint; incidence lists are ordered by triple id.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  /// Reads `head<TAB>relation<TAB>tail` triples plus `id<TAB>label` tables.
  /// Throws LoadError on malformed rows, duplicate ids, or dangling references.
  static KnowledgeGraph load(const std::filesystem::path& triples,
                             const std::filesystem::path& entity_labels,
                             const std::filesystem::path& relation_labels);

  std::size_t entity_count() const { return entity_labels_.size(); }
  std::size_t relation_count() const { return relation_labels_.size(); }
  std::size_t triple_count() const { return triples_.size(); }

  const std::string& entity_label(EntityId e) const;
  const std::string& entity_key(EntityId e) const;
  const std::string& relation_label(RelationId r) const;
  const std::string& relation_key(RelationId r) const;
  const Triple& triple(TripleId t) const;
  std::span<const Triple> triples() const { return triples_; }

  std::optional<EntityId> find_entity(std::string_view key) const;
  std::optional<RelationId> find_relation(std::string_view key) const;
  EntityId entity(std::string_view key) const;  ///< throws UnknownIdError
  RelationId relation(std::string_view key) const;

  std::span<const Incidence> incidences(EntityId e) const;
  bool contains(EntityId e) const { return e.value < entity_count(); }
  bool contains(RelationId r) const { return r.value < relation_count(); }

  /// Every relation linking e and other in either direction, sorted.
  std::vector<RelationLink> relations_between(EntityId e, EntityId other) const;

  /// Triple id of a stored (head, relation, tail), if present.
  std::optional<TripleId> find_triple(const Triple& t) const;

  void write(const std::filesystem::path& triples, const std::filesystem::path& entity_labels,
             const std::filesystem::path& relation_labels) const;

 private:
  friend class KnowledgeGraphBuilder;

  void check(EntityId e) const;
  void check(RelationId r) const;
  void build_index();

  std::vector<std::string> entity_keys_;
  std::vector<std::string> entity_labels_;
  std::vector<std::string> relation_keys_;
  std::vector<std::string> relation_labels_;
  std::unordered_map<std::string, std::uint32_t> entity_by_key_;
  std::unordered_map<std::string, std::uint32_t> relation_by_key_;
  std::vector<Triple> triples_;
  std::vector<std::uint32_t> offsets_;  // CSR over incidences_
  std::vector<Incidence> incidences_;
};

/// Incremental construction of a KnowledgeGraph.
class KnowledgeGraphBuilder {
 public:
  EntityId add_entity(std::string key, std::string label);
  RelationId add_relation(std::string key, std::string label);
  /// Duplicate triples are stored once.
  void add_triple(EntityId head, RelationId relation, EntityId tail);
  void add_triple(std::string_view head, std::string_view relation, std::string_view tail);

  KnowledgeGraph build() &&;

 private:
  KnowledgeGraph kg_;
};

}  // namespace kgqa
