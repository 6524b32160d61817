#include "kgqa/kg/paths.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "kgqa/error.hpp"

namespace kgqa {
namespace {

constexpr std::uint32_t kFar = std::numeric_limits<std::uint32_t>::max();

// Hop distances from `origin`, explored no further than `limit` hops.
std::vector<std::uint32_t> bounded_bfs(const KnowledgeGraph& kg, EntityId origin, std::size_t limit) {
  std::vector<std::uint32_t> dist(kg.entity_count(), kFar);
  std::deque<EntityId> queue{origin};
  dist[origin.value] = 0;
  while (!queue.empty()) {
    const EntityId u = queue.front();
    queue.pop_front();
    if (dist[u.value] >= limit) continue;
    for (const auto& inc : kg.incidences(u)) {
      if (dist[inc.neighbor.value] == kFar) {
        dist[inc.neighbor.value] = dist[u.value] + 1;
        queue.push_back(inc.neighbor);
      }
    }
  }
  return dist;
}

class PathSearch {
 public:
  PathSearch(const KnowledgeGraph& kg, EntityId target, std::size_t max_len, bool exact_length)
      : kg_(kg),
        target_(target),
        max_len_(max_len),
        exact_(exact_length),
        to_target_(bounded_bfs(kg, target, max_len)),
        on_path_(kg.entity_count(), false) {}

  std::vector<Path> run(EntityId source) {
    on_path_[source.value] = true;
    extend(source);
    return std::move(found_);
  }

 private:
  void extend(EntityId at) {
    const std::size_t depth = current_.steps.size();
    for (const auto& inc : kg_.incidences(at)) {
      const EntityId next = inc.neighbor;
      if (on_path_[next.value]) continue;
      const auto remaining = to_target_[next.value];
      if (remaining == kFar || depth + 1 + remaining > max_len_) continue;
      current_.steps.push_back({inc.triple, at, inc.relation, next, !inc.outgoing});
      if (next == target_) {
        if (!exact_ || depth + 1 == max_len_) found_.push_back(current_);
      } else {
        on_path_[next.value] = true;
        extend(next);
        on_path_[next.value] = false;
      }
      current_.steps.pop_back();
    }
  }

  const KnowledgeGraph& kg_;
  EntityId target_;
  std::size_t max_len_;
  bool exact_;
  std::vector<std::uint32_t> to_target_;
  std::vector<bool> on_path_;
  Path current_;
  std::vector<Path> found_;
};

void require(const KnowledgeGraph& kg, EntityId e) {
  if (!kg.contains(e)) throw UnknownIdError("unknown entity id " + std::to_string(e.value));
}

}  // namespace

Path Path::reversed() const {
  Path r;
  r.steps.reserve(steps.size());
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    r.steps.push_back({it->triple, it->to, it->relation, it->from, !it->inverse});
  }
  return r;
}

bool operator<(const Path& a, const Path& b) {
  return std::lexicographical_compare(
      a.steps.begin(), a.steps.end(), b.steps.begin(), b.steps.end(),
      [](const PathStep& x, const PathStep& y) {
        if (x.triple != y.triple) return x.triple < y.triple;
        return x.inverse < y.inverse;
      });
}

std::vector<Path> path_extract(const KnowledgeGraph& kg, EntityId source, EntityId target,
                               std::size_t max_len) {
  require(kg, source);
  require(kg, target);
  if (max_len == 0) throw InvalidArgument("path_extract: max_len must be at least 1");
  if (source == target) return {};
  auto paths = PathSearch(kg, target, max_len, false).run(source);
  std::sort(paths.begin(), paths.end());
  return paths;
}

std::optional<std::size_t> hop_distance(const KnowledgeGraph& kg, EntityId source, EntityId target) {
  require(kg, source);
  require(kg, target);
  const auto dist = bounded_bfs(kg, source, kg.entity_count());
  if (dist[target.value] == kFar) return std::nullopt;
  return dist[target.value];
}

std::vector<Path> shortest_path_extract(const KnowledgeGraph& kg, EntityId source, EntityId target) {
  require(kg, source);
  require(kg, target);
  if (source == target) return {};
  const auto d = hop_distance(kg, source, target);
  if (!d) return {};
  auto paths = PathSearch(kg, target, *d, true).run(source);
  std::sort(paths.begin(), paths.end());
  return paths;
}

}  // namespace kgqa
