#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kgqa/kg/knowledge_graph.hpp"

namespace kgqa {

/// One step of an annotated reasoning chain, as stored (head, relation, tail)
/// plus the direction it was traversed in.
struct ChainTriple {
  Triple triple;
  bool inverse = false;
  friend bool operator==(const ChainTriple&, const ChainTriple&) = default;
};

struct QaExample {
  std::string id;
  std::string question;
  std::vector<EntityId> topic_entities;  ///< annotation order is the canonical order
  std::vector<EntityId> answers;         ///< sorted, unique
  std::vector<ChainTriple> gold_chain;   ///< empty when not annotated
};

/// Topic-entity labels, used as the mentions masked out of the question.
std::vector<std::string> topic_mentions(const QaExample& ex, const KnowledgeGraph& kg);

/// Line-delimited JSON: {"id", "question", "topic_entities", "answers",
/// "gold_chain": [[h, r, t, inverse], ...]} with entity and relation keys.
std::vector<QaExample> load_dataset(const std::filesystem::path& path, const KnowledgeGraph& kg);
void write_dataset(const std::filesystem::path& path, const std::vector<QaExample>& examples,
                   const KnowledgeGraph& kg);

}  // namespace kgqa
