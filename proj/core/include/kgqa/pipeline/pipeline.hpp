#pragma once

#include <span>
#include <string>
#include <vector>

#include "kgqa/gnn/gnn_model.hpp"
#include "kgqa/kg/knowledge_graph.hpp"
#include "kgqa/pipeline/dataset.hpp"
#include "kgqa/reasoner/subgraph.hpp"
#include "kgqa/scorer/text_encoder.hpp"

namespace kgqa {

struct PipelineConfig {
  std::size_t top_n = 10;
  std::size_t max_len = 2;
  double multiplier = 1.05;
  bool fast = false;
};

struct AnswerResult {
  std::string question_id;
  EntityId top1;
  std::vector<Candidate> answers;     ///< returned answers with their graph distances
  std::vector<Candidate> candidates;  ///< the top-N candidates of the first step
  std::string expression;             ///< selected expression, empty on fallback
  double similarity = 0.0;
  std::vector<CandidateSubgraph> subgraphs;  ///< every subgraph behind the expression
  bool fallback = false;                     ///< no subgraph found; graph-only answers
};

/// {e : dist(e) <= multiplier * min dist}, in candidate order.
std::vector<Candidate> answer_set(std::span<const Candidate> candidates, double multiplier);

/// Both steps. Without an encoder (`encoder == nullptr`) only the graph step
/// runs and the answers are the multiplier-thresholded candidates.
AnswerResult answer(const QaExample& ex, const KnowledgeGraph& kg, const GraphIndex& graph,
                    const GnnModel& gnn, const TextEncoder* encoder, const PipelineConfig& config);

struct QuestionScore {
  std::string id;
  double hit = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Metrics {
  double hits_at_1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<QuestionScore> per_question;
};

/// Precision, recall and F1 of a predicted set against a gold set; all zero
/// when the prediction is empty.
QuestionScore set_scores(std::vector<std::uint32_t> predicted, std::vector<std::uint32_t> gold);

/// Hits@1 of top1 and macro-averaged answer-set scores.
Metrics score_answers(std::span<const QaExample> data, std::span<const AnswerResult> results);

/// Triple-level scores of the returned subgraphs against gold chains. Hits@1
/// is left at the answer-level value. Throws InvalidArgument when a question
/// has no gold chain.
Metrics score_explanations(std::span<const QaExample> data, std::span<const AnswerResult> results,
                           const KnowledgeGraph& kg);

std::vector<AnswerResult> answer_all(std::span<const QaExample> data, const KnowledgeGraph& kg,
                                     const GnnModel& gnn, const TextEncoder* encoder,
                                     const PipelineConfig& config);

Metrics evaluate_qa(std::span<const QaExample> data, const KnowledgeGraph& kg, const GnnModel& gnn,
                    const TextEncoder* encoder, const PipelineConfig& config);

Metrics evaluate_explanations(std::span<const QaExample> data, const KnowledgeGraph& kg,
                              const GnnModel& gnn, const TextEncoder* encoder,
                              const PipelineConfig& config);

/// {"hits_at_1", "precision", "recall", "f1", "questions": [{"id", ...}]}
std::string metrics_json(const Metrics& m, int indent = 2);

/// Answer, expression and subgraph triples with labels.
std::string answer_json(const AnswerResult& r, const KnowledgeGraph& kg, int indent = 2);

}  // namespace kgqa
