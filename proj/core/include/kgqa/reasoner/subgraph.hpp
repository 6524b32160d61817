#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/kg/knowledge_graph.hpp"
#include "kgqa/kg/paths.hpp"

namespace kgqa {

/// Paths from one candidate answer to each topic entity, in topic order.
struct CandidateSubgraph {
  EntityId answer;
  std::vector<Path> paths;

  /// Distinct triple ids, ascending.
  std::vector<TripleId> triples() const;
  std::vector<EntityId> entities() const;
  std::vector<RelationId> relations() const;

  friend bool operator==(const CandidateSubgraph&, const CandidateSubgraph&) = default;
};

/// For every candidate connected to all topics, the Cartesian product of its
/// per-topic path sets. `fast` restricts each path set to shortest paths.
/// Duplicate candidates are visited once, in first-seen order.
std::vector<CandidateSubgraph> extract_candidates(const KnowledgeGraph& kg,
                                                  std::span<const EntityId> candidates,
                                                  std::span<const EntityId> topics,
                                                  std::size_t max_len, bool fast);

/// First of who/what/when/where/which/whom/whose/why/how in the question,
/// "what" when there is none.
std::string wh_pred(std::string_view question);

struct Rewrite {
  std::string text;
  std::size_t mention_count = 0;  ///< relation mentions + topic label mentions
};

/// Linearizes a subgraph: the wh-word stands for the answer, intermediates
/// become "an entity that", topic entities are named, paths joined by "and".
Rewrite rewrite(const CandidateSubgraph& subgraph, std::string_view question,
                std::span<const EntityId> topics, const KnowledgeGraph& kg);

struct Expression {
  std::string text;
  std::size_t mention_count = 0;
  std::vector<std::size_t> sources;  ///< indices into the subgraph list
};

/// Groups subgraphs by rewritten text; expressions appear in order of first
/// occurrence and each source list is ascending.
std::vector<Expression> build_expression_set(std::span<const CandidateSubgraph> subgraphs,
                                             std::string_view question,
                                             std::span<const EntityId> topics,
                                             const KnowledgeGraph& kg);

/// `text<TAB>mention_count<TAB>id,id,...` per expression.
void dump_expressions(std::ostream& out, std::span<const Expression> expressions);

}  // namespace kgqa
