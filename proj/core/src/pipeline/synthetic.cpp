#include "kgqa/pipeline/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "kgqa/error.hpp"
#include "kgqa/kg/query.hpp"
#include "kgqa/reasoner/subgraph.hpp"
#include "kgqa/scorer/weak_labels.hpp"

namespace kgqa {

const std::vector<std::string>& synthetic_relation_labels() {
  static const std::vector<std::string> labels{
      "birthplace",  "spouse",         "director",     "cast member", "capital",
      "employer",    "founder",        "genre",        "language",    "currency",
      "composer",    "author",         "publisher",    "nationality", "headquarters",
      "award",       "parent company", "home venue",   "record label", "alma mater"};
  return labels;
}

namespace {

using Rng = std::mt19937_64;

std::size_t uniform(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::string make_name(Rng& rng) {
  static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                            "p", "r", "s", "t", "v", "z", "br", "tr"};
  static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  auto word = [&] {
    std::string w;
    const std::size_t syllables = 2 + uniform(rng, 2);
    for (std::size_t i = 0; i < syllables; ++i) {
      w += kOnsets[uniform(rng, std::size(kOnsets))];
      w += kVowels[uniform(rng, std::size(kVowels))];
    }
    w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
  };
  return word() + " " + word();
}

KnowledgeGraph random_graph(const SyntheticConfig& cfg, Rng& rng) {
  const auto& labels = synthetic_relation_labels();
  if (cfg.relations == 0 || cfg.relations > labels.size()) {
    throw InvalidArgument("relation count must be between 1 and " + std::to_string(labels.size()));
  }
  if (cfg.entities < 2) throw InvalidArgument("a synthetic graph needs at least two entities");
  const std::size_t max_triples = cfg.entities * (cfg.entities - 1) * cfg.relations;
  if (cfg.triples > max_triples / 2) throw InvalidArgument("too many triples for the graph size");

  KnowledgeGraphBuilder b;
  std::set<std::string> used;
  for (std::size_t i = 0; i < cfg.entities; ++i) {
    std::string name = make_name(rng);
    while (!used.insert(name).second) name = make_name(rng);
    b.add_entity("e" + std::to_string(i), name);
  }
  for (std::size_t r = 0; r < cfg.relations; ++r) b.add_relation("r" + std::to_string(r), labels[r]);

  std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> seen;
  while (seen.size() < cfg.triples) {
    const auto h = static_cast<std::uint32_t>(uniform(rng, cfg.entities));
    const auto t = static_cast<std::uint32_t>(uniform(rng, cfg.entities));
    const auto r = static_cast<std::uint32_t>(uniform(rng, cfg.relations));
    if (h == t || !seen.emplace(h, r, t).second) continue;
    b.add_triple(EntityId{h}, RelationId{r}, EntityId{t});
  }
  return std::move(b).build();
}

// Every walk from `at` that follows `pattern` and ends at `anchor`.
void groundings(const KnowledgeGraph& kg, EntityId at, EntityId anchor,
                std::span<const PatternStep> pattern, std::vector<PathStep>& prefix,
                std::vector<std::vector<PathStep>>& out) {
  if (prefix.size() == pattern.size()) {
    if (at == anchor) out.push_back(prefix);
    return;
  }
  const auto& step = pattern[prefix.size()];
  for (const auto& inc : kg.incidences(at)) {
    if (inc.relation != step.relation || inc.outgoing == step.inverse) continue;
    prefix.push_back({inc.triple, at, inc.relation, inc.neighbor, step.inverse});
    groundings(kg, inc.neighbor, anchor, pattern, prefix, out);
    prefix.pop_back();
  }
}

bool simple(const std::vector<PathStep>& walk) {
  std::vector<EntityId> nodes{walk.front().from};
  for (const auto& s : walk) nodes.push_back(s.to);
  std::sort(nodes.begin(), nodes.end());
  return std::adjacent_find(nodes.begin(), nodes.end()) == nodes.end();
}

std::string phrase(const PathStep& s, const KnowledgeGraph& kg, Rng& rng) {
  const auto& r = kg.relation_label(s.relation);
  if (s.inverse) {
    switch (uniform(rng, 3)) {
      case 0: return "is the " + r + " of";
      case 1: return "serves as the " + r + " of";
      default: return "is " + r + " for";
    }
  }
  switch (uniform(rng, 3)) {
    case 0: return "has the " + r;
    case 1: return "has " + r;
    default: return "possesses the " + r;
  }
}

std::string question_text(const Path& path, const KnowledgeGraph& kg, Rng& rng) {
  static constexpr const char* kOpeners[] = {"what", "which entity", "who"};
  static constexpr const char* kConnectors[] = {"something that", "some entity that",
                                                "the one that"};
  std::string q = kOpeners[uniform(rng, std::size(kOpeners))];
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    q += " " + phrase(path.steps[i], kg, rng);
    if (i + 1 < path.steps.size()) q += std::string(" ") + kConnectors[uniform(rng, 3)];
  }
  q += " " + kg.entity_label(path.target());
  if (uniform(rng, 2) == 0) q += "?";
  return q;
}

}  // namespace

SyntheticBenchmark generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.hops == 0) throw InvalidArgument("hop count must be at least 1");
  if (cfg.max_answers == 0) throw InvalidArgument("max_answers must be at least 1");
  Rng rng(cfg.seed);
  SyntheticBenchmark out;
  out.kg = random_graph(cfg, rng);
  const auto& kg = out.kg;

  const std::size_t wanted = cfg.train + cfg.valid + cfg.test;
  const std::size_t budget = 200 * std::max<std::size_t>(wanted, 1);
  std::set<std::pair<std::uint32_t, std::vector<std::pair<std::uint32_t, bool>>>> used;
  std::vector<QaExample> made;
  for (std::size_t attempt = 0; made.size() < wanted; ++attempt) {
    if (attempt >= budget) {
      throw InvalidArgument("could not generate " + std::to_string(wanted) + " " +
                            std::to_string(cfg.hops) + "-hop questions; only " +
                            std::to_string(made.size()) + " passed the filters");
    }
    // Random simple walk away from the topic entity.
    const EntityId topic{static_cast<std::uint32_t>(uniform(rng, kg.entity_count()))};
    Path walk;
    std::vector<EntityId> visited{topic};
    EntityId at = topic;
    for (std::size_t h = 0; h < cfg.hops; ++h) {
      std::vector<Incidence> options;
      for (const auto& inc : kg.incidences(at)) {
        if (std::find(visited.begin(), visited.end(), inc.neighbor) == visited.end()) {
          options.push_back(inc);
        }
      }
      if (options.empty()) break;
      const auto& inc = options[uniform(rng, options.size())];
      walk.steps.push_back({inc.triple, at, inc.relation, inc.neighbor, !inc.outgoing});
      visited.push_back(inc.neighbor);
      at = inc.neighbor;
    }
    if (walk.length() != cfg.hops) continue;

    const Path path = walk.reversed();  // answer -> topic
    std::vector<PatternStep> pattern;
    std::vector<std::pair<std::uint32_t, bool>> signature;
    for (const auto& s : path.steps) {
      pattern.push_back({s.relation, s.inverse});
      signature.emplace_back(s.relation.value, s.inverse);
    }
    if (used.contains({topic.value, signature})) continue;

    const auto answers = execute_query(QueryGraph::from_paths(std::span<const Path>(&path, 1)), kg);
    if (answers.empty() || answers.size() > cfg.max_answers) continue;
    if (std::binary_search(answers.begin(), answers.end(), topic)) continue;

    std::vector<std::vector<PathStep>> walks;
    for (const auto a : answers) {
      std::vector<PathStep> prefix;
      groundings(kg, a, topic, pattern, prefix, walks);
    }
    if (!std::all_of(walks.begin(), walks.end(), simple)) continue;

    QaExample ex;
    ex.question = question_text(path, kg, rng);
    ex.topic_entities = {topic};
    ex.answers = answers;
    std::set<std::uint32_t> chain_ids;
    for (const auto& w : walks) {
      for (const auto& s : w) {
        if (chain_ids.insert(s.triple.value).second) {
          ex.gold_chain.push_back({kg.triple(s.triple), s.inverse});
        }
      }
    }

    const CandidateSubgraph planted{path.source(), {path}};
    const auto gold_text = rewrite(planted, ex.question, ex.topic_entities, kg).text;
    const auto labels = predict_pos_neg(ex, {}, kg, cfg.hops);
    const auto pos = labels.positives();
    if (std::find(pos.begin(), pos.end(), gold_text) == pos.end()) continue;

    used.insert({topic.value, signature});
    made.push_back(std::move(ex));
  }

  for (std::size_t i = 0; i < made.size(); ++i) {
    auto& ex = made[i];
    if (i < cfg.train) {
      ex.id = "train-" + std::to_string(i);
      out.train.push_back(std::move(ex));
    } else if (i < cfg.train + cfg.valid) {
      ex.id = "valid-" + std::to_string(i - cfg.train);
      out.valid.push_back(std::move(ex));
    } else {
      ex.id = "test-" + std::to_string(i - cfg.train - cfg.valid);
      out.test.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace kgqa
