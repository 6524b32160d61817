#include "kgqa/pipeline/vocab.hpp"

#include "kgqa/text/tokenizer.hpp"

namespace kgqa {

const std::vector<std::string>& expression_function_words() {
  static const std::vector<std::string> words{
      "is", "the", "of", "has", "an", "entity", "that", "and",
      "who", "what", "when", "where", "which", "whom", "whose", "why", "how"};
  return words;
}

Vocabulary corpus_vocabulary(const KnowledgeGraph& kg, std::span<const QaExample> questions,
                             std::size_t min_count) {
  std::vector<std::string> always = expression_function_words();
  for (std::size_t r = 0; r < kg.relation_count(); ++r) {
    for (auto& t : tokenize(kg.relation_label(RelationId{static_cast<std::uint32_t>(r)}))) {
      always.push_back(std::move(t));
    }
  }
  std::vector<std::vector<std::string>> texts;
  texts.reserve(questions.size());
  for (const auto& ex : questions) texts.push_back(tokenize(ex.question));
  return Vocabulary::build(texts, min_count, always);
}

}  // namespace kgqa
