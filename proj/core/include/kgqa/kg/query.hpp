#pragma once

#include <span>
#include <vector>

#include "kgqa/kg/knowledge_graph.hpp"
#include "kgqa/kg/paths.hpp"

namespace kgqa {

struct PatternStep {
  RelationId relation;
  bool inverse;
  friend bool operator==(const PatternStep&, const PatternStep&) = default;
};

/// Chain of relation steps leading from the query variable to a fixed anchor.
struct QueryChain {
  std::vector<PatternStep> steps;
  EntityId anchor;
};

/// A subgraph pattern whose answer position is the single query variable.
///
/// Chains share the variable. Entities in the interior of a chain are
/// existential (rebound freely per chain), so the pattern matches every entity
/// reachable by the same relation/direction shape. Bindings follow graph
/// homomorphism semantics: distinct variables may bind the same entity.
struct QueryGraph {
  std::vector<QueryChain> chains;

  /// Turns each path's source into the variable and keeps its target as the anchor.
  static QueryGraph from_paths(std::span<const Path> paths);
};

/// All entities the variable can bind to, ascending. Empty when nothing matches.
std::vector<EntityId> execute_query(const QueryGraph& query, const KnowledgeGraph& kg);

}  // namespace kgqa
