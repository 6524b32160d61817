#include "kgqa/reasoner/subgraph.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <ostream>
#include <unordered_map>

#include "kgqa/text/tokenizer.hpp"

namespace kgqa {

std::vector<TripleId> CandidateSubgraph::triples() const {
  std::vector<TripleId> out;
  for (const auto& p : paths) {
    for (const auto& s : p.steps) out.push_back(s.triple);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<EntityId> CandidateSubgraph::entities() const {
  std::vector<EntityId> out{answer};
  for (const auto& p : paths) {
    for (const auto& s : p.steps) {
      out.push_back(s.from);
      out.push_back(s.to);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<RelationId> CandidateSubgraph::relations() const {
  std::vector<RelationId> out;
  for (const auto& p : paths) {
    for (const auto& s : p.steps) out.push_back(s.relation);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<CandidateSubgraph> extract_candidates(const KnowledgeGraph& kg,
                                                  std::span<const EntityId> candidates,
                                                  std::span<const EntityId> topics,
                                                  std::size_t max_len, bool fast) {
  std::vector<CandidateSubgraph> out;
  if (topics.empty()) return out;
  std::vector<EntityId> seen;
  for (const auto a : candidates) {
    if (std::find(seen.begin(), seen.end(), a) != seen.end()) continue;
    seen.push_back(a);

    std::vector<std::vector<Path>> path_sets;
    bool connected = true;
    for (const auto t : topics) {
      auto paths = fast ? shortest_path_extract(kg, a, t) : path_extract(kg, a, t, max_len);
      if (fast && !paths.empty() && paths.front().length() > max_len) paths.clear();
      if (paths.empty()) {
        connected = false;
        break;
      }
      path_sets.push_back(std::move(paths));
    }
    if (!connected) continue;

    // Odometer over the per-topic path sets; the last topic varies fastest.
    std::vector<std::size_t> pick(path_sets.size(), 0);
    while (true) {
      CandidateSubgraph sg{a, {}};
      for (std::size_t i = 0; i < path_sets.size(); ++i) sg.paths.push_back(path_sets[i][pick[i]]);
      out.push_back(std::move(sg));
      bool wrapped = true;
      for (std::size_t i = path_sets.size(); i-- > 0;) {
        if (++pick[i] < path_sets[i].size()) {
          wrapped = false;
          break;
        }
        pick[i] = 0;
      }
      if (wrapped) break;
    }
  }
  return out;
}

std::string wh_pred(std::string_view question) {
  static constexpr std::array<std::string_view, 9> kWords{
      "who", "what", "when", "where", "which", "whom", "whose", "why", "how"};
  for (const auto& tok : tokenize(question)) {
    if (std::find(kWords.begin(), kWords.end(), tok) != kWords.end()) return tok;
  }
  return "what";
}

namespace {

std::string lowercase(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

Rewrite rewrite(const CandidateSubgraph& subgraph, std::string_view question,
                std::span<const EntityId> topics, const KnowledgeGraph& kg) {
  Rewrite out;
  out.text = wh_pred(question);
  for (std::size_t p = 0; p < subgraph.paths.size(); ++p) {
    for (const auto& s : subgraph.paths[p].steps) {
      const auto label = lowercase(kg.relation_label(s.relation));
      if (s.inverse) {
        out.text += " is the " + label + " of";
      } else {
        out.text += " has the " + label;
      }
      ++out.mention_count;
      if (std::find(topics.begin(), topics.end(), s.to) != topics.end()) {
        out.text += " " + kg.entity_label(s.to);
        ++out.mention_count;
      } else {
        out.text += " an entity that";
      }
    }
    if (p + 1 < subgraph.paths.size()) out.text += " and";
  }
  return out;
}

std::vector<Expression> build_expression_set(std::span<const CandidateSubgraph> subgraphs,
                                             std::string_view question,
                                             std::span<const EntityId> topics,
                                             const KnowledgeGraph& kg) {
  std::vector<Expression> out;
  std::unordered_map<std::string, std::size_t> by_text;
  for (std::size_t i = 0; i < subgraphs.size(); ++i) {
    auto r = rewrite(subgraphs[i], question, topics, kg);
    auto [it, inserted] = by_text.try_emplace(r.text, out.size());
    if (inserted) out.push_back({std::move(r.text), r.mention_count, {}});
    out[it->second].sources.push_back(i);
  }
  return out;
}

void dump_expressions(std::ostream& out, std::span<const Expression> expressions) {
  for (const auto& e : expressions) {
    out << e.text << '\t' << e.mention_count << '\t';
    for (std::size_t i = 0; i < e.sources.size(); ++i) out << (i ? "," : "") << e.sources[i];
    out << '\n';
  }
}

}  // namespace kgqa
