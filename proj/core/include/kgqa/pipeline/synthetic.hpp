#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgqa/kg/knowledge_graph.hpp"
#include "kgqa/pipeline/dataset.hpp"

namespace kgqa {

struct SyntheticConfig {
  std::size_t entities = 500;
  std::size_t relations = 12;  ///< taken from a fixed list of relation labels
  std::size_t triples = 1500;
  std::size_t hops = 2;
  std::size_t train = 200;
  std::size_t valid = 50;
  std::size_t test = 50;
  std::size_t max_answers = 3;
  std::uint64_t seed = 7;
};

struct SyntheticBenchmark {
  KnowledgeGraph kg;
  std::vector<QaExample> train, valid, test;
};

/// Random graph plus templated multi-hop questions. Each question is grounded
/// in a random simple walk from its topic entity; its answers are everything
/// the walk's relation pattern reaches from the topic, and its gold chain is
/// the union of the triples of every grounding of that pattern. Questions are
/// rejected when the answers include the topic, exceed `max_answers`, need a
/// non-simple grounding, or when the rewriting of the planted pattern would not
/// be among the weak-label positives. Throws InvalidArgument when the
/// requested number of questions cannot be produced.
SyntheticBenchmark generate_synthetic(const SyntheticConfig& config);

/// Labels available to the generator, in the order relations are taken.
const std::vector<std::string>& synthetic_relation_labels();

}  // namespace kgqa
