#pragma once

#include <optional>
#include <vector>

#include "kgqa/kg/knowledge_graph.hpp"

namespace kgqa {

/// A triple traversed in a given direction. `inverse` is set when the walk
/// goes from the stored tail to the stored head (written r^-1).
struct PathStep {
  TripleId triple;
  EntityId from;
  RelationId relation;
  EntityId to;
  bool inverse;
  friend bool operator==(const PathStep&, const PathStep&) = default;
};

/// Simple path: consecutive steps share an endpoint and no entity repeats.
struct Path {
  std::vector<PathStep> steps;

  EntityId source() const { return steps.front().from; }
  EntityId target() const { return steps.back().to; }
  std::size_t length() const { return steps.size(); }
  bool empty() const { return steps.empty(); }

  /// Same triples walked the other way, with inverse markers flipped.
  Path reversed() const;

  friend bool operator==(const Path&, const Path&) = default;
  /// Lexicographic by triple id sequence.
  friend bool operator<(const Path& a, const Path& b);
};

/// All simple paths of length 1..max_len from source to target, triples
/// traversable in either direction, sorted lexicographically by triple ids.
/// source == target yields nothing.
std::vector<Path> path_extract(const KnowledgeGraph& kg, EntityId source, EntityId target,
                               std::size_t max_len);

/// Undirected hop distance, nullopt when disconnected.
std::optional<std::size_t> hop_distance(const KnowledgeGraph& kg, EntityId source, EntityId target);

/// All simple paths of minimal length between the two entities.
std::vector<Path> shortest_path_extract(const KnowledgeGraph& kg, EntityId source, EntityId target);

}  // namespace kgqa
