#include "kgqa/kg/query.hpp"

#include "kgqa/error.hpp"

namespace kgqa {

QueryGraph QueryGraph::from_paths(std::span<const Path> paths) {
  if (paths.empty()) throw InvalidArgument("a query needs at least one path");
  QueryGraph q;
  for (const auto& p : paths) {
    if (p.empty()) throw InvalidArgument("a query path must be nonempty");
    QueryChain chain;
    chain.anchor = p.target();
    for (const auto& s : p.steps) chain.steps.push_back({s.relation, s.inverse});
    q.chains.push_back(std::move(chain));
  }
  return q;
}

std::vector<EntityId> execute_query(const QueryGraph& query, const KnowledgeGraph& kg) {
  if (query.chains.empty()) throw InvalidArgument("query without chains");
  const std::size_t n = kg.entity_count();
  std::vector<std::uint32_t> hits(n, 0);
  std::vector<char> mark(n, 0);
  for (const auto& chain : query.chains) {
    if (!kg.contains(chain.anchor)) return {};
    // Walk backwards from the anchor: the frontier holds entities that can
    // play the role of the node after the current step.
    std::vector<std::uint32_t> frontier{chain.anchor.value};
    for (auto it = chain.steps.rbegin(); it != chain.steps.rend(); ++it) {
      if (!kg.contains(it->relation)) return {};
      std::vector<std::uint32_t> prev;
      for (const auto y : frontier) {
        for (const auto& inc : kg.incidences(EntityId{y})) {
          // A forward step x -r-> y is stored (x, r, y), so y sees it as incoming.
          if (inc.relation == it->relation && inc.outgoing == it->inverse &&
              !mark[inc.neighbor.value]) {
            mark[inc.neighbor.value] = 1;
            prev.push_back(inc.neighbor.value);
          }
        }
      }
      for (const auto x : prev) mark[x] = 0;
      frontier = std::move(prev);
    }
    for (const auto x : frontier) ++hits[x];
  }
  std::vector<EntityId> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (hits[i] == query.chains.size()) out.push_back(EntityId{i});
  }
  return out;
}

}  // namespace kgqa
