#include "kgqa/pipeline/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include <json.hpp>

#include "kgqa/error.hpp"

namespace kgqa {

using nlohmann::json;

std::vector<Candidate> answer_set(std::span<const Candidate> candidates, double multiplier) {
  if (multiplier < 1.0) throw InvalidArgument("the answer multiplier must be >= 1");
  if (candidates.empty()) return {};
  double best = candidates.front().distance;
  for (const auto& c : candidates) best = std::min(best, c.distance);
  std::vector<Candidate> out;
  for (const auto& c : candidates) {
    if (c.distance <= multiplier * best) out.push_back(c);
  }
  return out;
}

AnswerResult answer(const QaExample& ex, const KnowledgeGraph& kg, const GraphIndex& graph,
                    const GnnModel& gnn, const TextEncoder* encoder, const PipelineConfig& config) {
  AnswerResult r;
  r.question_id = ex.id;
  const auto distances = gnn.distances(graph, ex, kg);
  r.candidates = select_candidates(distances, config.top_n);
  if (r.candidates.empty()) throw InvalidArgument("cannot answer over an empty graph");

  auto graph_only = [&] {
    r.answers = answer_set(r.candidates, config.multiplier);
    r.top1 = r.candidates.front().entity;
  };
  if (encoder == nullptr) {
    graph_only();
    return r;
  }

  std::vector<EntityId> ids;
  for (const auto& c : r.candidates) ids.push_back(c.entity);
  auto subgraphs = extract_candidates(kg, ids, ex.topic_entities, config.max_len, config.fast);
  const auto expressions = build_expression_set(subgraphs, ex.question, ex.topic_entities, kg);
  const auto sel = select_optimal(*encoder, ex.question, expressions);
  if (!sel) {
    r.fallback = true;
    graph_only();
    return r;
  }
  const auto& expr = expressions[sel->index];
  r.expression = expr.text;
  r.similarity = sel->similarity;
  for (const auto s : expr.sources) r.subgraphs.push_back(std::move(subgraphs[s]));
  for (const auto& c : r.candidates) {
    const bool winner = std::any_of(r.subgraphs.begin(), r.subgraphs.end(),
                                    [&](const CandidateSubgraph& sg) { return sg.answer == c.entity; });
    if (winner) r.answers.push_back(c);
  }
  // Candidates are sorted by (distance, id), so the first winner is the top-1.
  r.top1 = r.answers.front().entity;
  return r;
}

QuestionScore set_scores(std::vector<std::uint32_t> predicted, std::vector<std::uint32_t> gold) {
  std::sort(predicted.begin(), predicted.end());
  predicted.erase(std::unique(predicted.begin(), predicted.end()), predicted.end());
  std::sort(gold.begin(), gold.end());
  gold.erase(std::unique(gold.begin(), gold.end()), gold.end());
  QuestionScore s;
  if (predicted.empty() || gold.empty()) return s;
  std::vector<std::uint32_t> common;
  std::set_intersection(predicted.begin(), predicted.end(), gold.begin(), gold.end(),
                        std::back_inserter(common));
  s.precision = static_cast<double>(common.size()) / static_cast<double>(predicted.size());
  s.recall = static_cast<double>(common.size()) / static_cast<double>(gold.size());
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

namespace {

void check_aligned(std::span<const QaExample> data, std::span<const AnswerResult> results) {
  if (data.size() != results.size()) {
    throw InvalidArgument("expected one result per question");
  }
}

void average(Metrics& m) {
  const double n = static_cast<double>(std::max<std::size_t>(1, m.per_question.size()));
  for (const auto& q : m.per_question) {
    m.hits_at_1 += q.hit;
    m.precision += q.precision;
    m.recall += q.recall;
    m.f1 += q.f1;
  }
  m.hits_at_1 /= n;
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
}

}  // namespace

Metrics score_answers(std::span<const QaExample> data, std::span<const AnswerResult> results) {
  check_aligned(data, results);
  Metrics m;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data[i];
    const auto& r = results[i];
    std::vector<std::uint32_t> predicted, gold;
    for (const auto& c : r.answers) predicted.push_back(c.entity.value);
    for (const auto e : ex.answers) gold.push_back(e.value);
    auto s = set_scores(std::move(predicted), std::move(gold));
    s.id = ex.id;
    s.hit = !r.answers.empty() &&
                    std::binary_search(ex.answers.begin(), ex.answers.end(), r.top1)
                ? 1.0
                : 0.0;
    m.per_question.push_back(std::move(s));
  }
  average(m);
  return m;
}

Metrics score_explanations(std::span<const QaExample> data, std::span<const AnswerResult> results,
                           const KnowledgeGraph& kg) {
  check_aligned(data, results);
  Metrics m;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data[i];
    const auto& r = results[i];
    if (ex.gold_chain.empty()) {
      throw InvalidArgument("question " + ex.id + " has no gold reasoning chain");
    }
    std::vector<std::uint32_t> predicted, gold;
    for (const auto& sg : r.subgraphs) {
      for (const auto t : sg.triples()) predicted.push_back(t.value);
    }
    for (const auto& ct : ex.gold_chain) {
      const auto t = kg.find_triple(ct.triple);
      if (!t) throw InvalidArgument("question " + ex.id + ": gold triple not in the graph");
      gold.push_back(t->value);
    }
    auto s = set_scores(std::move(predicted), std::move(gold));
    s.id = ex.id;
    s.hit = !r.answers.empty() &&
                    std::binary_search(ex.answers.begin(), ex.answers.end(), r.top1)
                ? 1.0
                : 0.0;
    m.per_question.push_back(std::move(s));
  }
  average(m);
  return m;
}

std::vector<AnswerResult> answer_all(std::span<const QaExample> data, const KnowledgeGraph& kg,
                                     const GnnModel& gnn, const TextEncoder* encoder,
                                     const PipelineConfig& config) {
  const auto graph = GraphIndex::build(kg, gnn.provider());
  // Models are frozen here, so questions are independent; each worker fills
  // its own slots and the result does not depend on the thread count.
  std::vector<AnswerResult> out(data.size());
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), data.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      out[i] = answer(data[i], kg, graph, gnn, encoder, config);
    }
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < data.size(); i += workers) {
          out[i] = answer(data[i], kg, graph, gnn, encoder, config);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

Metrics evaluate_qa(std::span<const QaExample> data, const KnowledgeGraph& kg, const GnnModel& gnn,
                    const TextEncoder* encoder, const PipelineConfig& config) {
  return score_answers(data, answer_all(data, kg, gnn, encoder, config));
}

Metrics evaluate_explanations(std::span<const QaExample> data, const KnowledgeGraph& kg,
                              const GnnModel& gnn, const TextEncoder* encoder,
                              const PipelineConfig& config) {
  return score_explanations(data, answer_all(data, kg, gnn, encoder, config), kg);
}

std::string metrics_json(const Metrics& m, int indent) {
  json j;
  j["hits_at_1"] = m.hits_at_1;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["questions"] = json::array();
  for (const auto& q : m.per_question) {
    j["questions"].push_back(
        {{"id", q.id}, {"hit", q.hit}, {"precision", q.precision}, {"recall", q.recall}, {"f1", q.f1}});
  }
  return j.dump(indent);
}

std::string answer_json(const AnswerResult& r, const KnowledgeGraph& kg, int indent) {
  json j;
  j["id"] = r.question_id;
  j["top1"] = {{"id", kg.entity_key(r.top1)}, {"label", kg.entity_label(r.top1)}};
  j["answers"] = json::array();
  for (const auto& c : r.answers) {
    j["answers"].push_back({{"id", kg.entity_key(c.entity)},
                            {"label", kg.entity_label(c.entity)},
                            {"distance", c.distance}});
  }
  j["expression"] = r.expression;
  j["similarity"] = r.similarity;
  j["fallback"] = r.fallback;
  j["subgraphs"] = json::array();
  for (const auto& sg : r.subgraphs) {
    json paths = json::array();
    for (const auto& p : sg.paths) {
      json steps = json::array();
      for (const auto& s : p.steps) {
        const auto& t = kg.triple(s.triple);
        steps.push_back({{"head", kg.entity_label(t.head)},
                         {"relation", kg.relation_label(t.relation)},
                         {"tail", kg.entity_label(t.tail)},
                         {"inverse", s.inverse}});
      }
      paths.push_back(std::move(steps));
    }
    j["subgraphs"].push_back({{"answer", kg.entity_label(sg.answer)}, {"paths", std::move(paths)}});
  }
  return j.dump(indent);
}

}  // namespace kgqa
