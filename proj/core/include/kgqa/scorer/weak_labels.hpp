#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kgqa/kg/knowledge_graph.hpp"
#include "kgqa/pipeline/dataset.hpp"
#include "kgqa/reasoner/subgraph.hpp"
#include "kgqa/scorer/text_encoder.hpp"

namespace kgqa {

struct LabeledExpression {
  Expression expression;
  std::vector<EntityId> matched;  ///< union of query results over its subgraphs
  long vote = 0;                  ///< |matched ∩ answers| - |matched \ answers|
  bool positive = false;
};

/// Positive and negative expressions for one question. Every generated
/// expression is in exactly one of the two sets.
struct WeakLabelSet {
  std::string question_id;
  std::vector<LabeledExpression> items;

  std::vector<std::string> positives() const;
  std::vector<std::string> negatives() const;
};

/// Extracts subgraphs for every entity in candidates ∪ answers, executes each
/// as a query with the answer position as the variable, and votes per
/// expression. Positives reach the maximum vote and, among those, the
/// minimum mention count.
WeakLabelSet predict_pos_neg(const QaExample& ex, std::span<const EntityId> candidates,
                             const KnowledgeGraph& kg, std::size_t max_len);

/// One JSON record per line: {"id", "positives", "negatives", "votes": {text: vote},
/// "mentions": {text: mention_count}}. Matched entities and sources are not stored.
void write_label_cache(const std::filesystem::path& path, const std::vector<WeakLabelSet>& labels);
std::vector<WeakLabelSet> load_label_cache(const std::filesystem::path& path);

struct FinetuneExample {
  std::string question;
  std::vector<Expression> expressions;
  std::vector<bool> positive;

  bool usable() const;  ///< has at least one positive and one negative
};

FinetuneExample to_finetune_example(const QaExample& ex, const WeakLabelSet& labels);

/// Fraction of examples (with at least one positive) whose selected
/// expression among positives ∪ negatives is a positive.
double selection_accuracy(const TextEncoder& encoder, std::span<const FinetuneExample> data);

using FinetuneCallback =
    std::function<void(std::size_t epoch, double loss, double valid_accuracy, std::size_t skipped)>;

/// Triplet-loss fine-tuning with per-question Adam updates. Examples lacking
/// positives or negatives are skipped. The epoch with the best validation
/// selection accuracy is kept when validation data is given.
void finetune(TextEncoder& encoder, std::span<const FinetuneExample> train,
              std::span<const FinetuneExample> valid, const FinetuneCallback& on_epoch = {});

}  // namespace kgqa
