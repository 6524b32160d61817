#pragma once

#include <span>
#include <string>
#include <vector>

#include "kgqa/kg/knowledge_graph.hpp"
#include "kgqa/pipeline/dataset.hpp"
#include "kgqa/text/token_provider.hpp"

namespace kgqa {

/// Words the expression rewriter emits on its own, plus the wh-words it copies.
const std::vector<std::string>& expression_function_words();

/// Training-question tokens, relation-label tokens and expression function
/// words. Entity labels only enter through the questions that mention them.
Vocabulary corpus_vocabulary(const KnowledgeGraph& kg, std::span<const QaExample> questions,
                             std::size_t min_count = 1);

}  // namespace kgqa
