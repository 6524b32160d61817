#include "fixtures.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

#include "kgqa/numerics/ops.hpp"
#include "kgqa/reasoner/subgraph.hpp"

namespace kgqa::testing {

namespace {

MovieGraph build_movie(bool beetlejuice, EntityId* bj) {
  KnowledgeGraphBuilder b;
  MovieGraph g;
  g.tim_burton = b.add_entity("Q56008", "Tim Burton");
  g.california = b.add_entity("Q99", "California");
  g.batman = b.add_entity("Q116852", "Batman 1989");
  g.keaton = b.add_entity("Q193070", "Michael Keaton");
  g.nicholson = b.add_entity("Q39792", "Jack Nicholson");
  g.elfman = b.add_entity("Q193338", "Danny Elfman");
  g.scissorhands = b.add_entity("Q223139", "Edward Scissorhands");
  g.depp = b.add_entity("Q37175", "Johnny Depp");
  g.pennsylvania = b.add_entity("Q1400", "Pennsylvania");
  g.new_jersey = b.add_entity("Q1408", "New Jersey");
  g.usa = b.add_entity("Q30", "United States");
  g.kentucky = b.add_entity("Q1603", "Kentucky");
  g.birthplace = b.add_relation("P19", "birthplace");
  g.director = b.add_relation("P57", "director");
  g.cast_member = b.add_relation("P161", "cast member");
  g.composer = b.add_relation("P86", "composer");
  g.country = b.add_relation("P17", "country");

  b.add_triple(g.tim_burton, g.birthplace, g.california);
  b.add_triple(g.batman, g.director, g.tim_burton);
  b.add_triple(g.batman, g.cast_member, g.keaton);
  b.add_triple(g.batman, g.cast_member, g.nicholson);
  b.add_triple(g.batman, g.composer, g.elfman);
  b.add_triple(g.scissorhands, g.director, g.tim_burton);
  b.add_triple(g.scissorhands, g.cast_member, g.depp);
  b.add_triple(g.keaton, g.birthplace, g.pennsylvania);
  b.add_triple(g.nicholson, g.birthplace, g.new_jersey);
  b.add_triple(g.california, g.country, g.usa);
  b.add_triple(g.depp, g.birthplace, g.kentucky);
  if (beetlejuice) {
    const auto b2 = b.add_entity("Q320588", "Beetlejuice");
    b.add_triple(b2, g.director, g.tim_burton);
    b.add_triple(b2, g.cast_member, g.keaton);
    if (bj) *bj = b2;
  }
  g.kg = std::move(b).build();
  return g;
}

// DFS over the raw triple list.
void scan_paths(const KnowledgeGraph& kg, EntityId at, EntityId target, std::size_t max_len,
                std::vector<EntityId>& visited, Path& prefix, std::vector<Path>& out) {
  if (prefix.length() == max_len) return;
  const auto triples = kg.triples();
  for (std::uint32_t i = 0; i < triples.size(); ++i) {
    const auto& t = triples[i];
    for (int dir = 0; dir < 2; ++dir) {
      const bool inverse = dir == 1;
      const EntityId from = inverse ? t.tail : t.head;
      const EntityId to = inverse ? t.head : t.tail;
      if (from != at) continue;
      if (std::find(visited.begin(), visited.end(), to) != visited.end()) continue;
      prefix.steps.push_back({TripleId{i}, from, t.relation, to, inverse});
      if (to == target) {
        out.push_back(prefix);
      } else {
        visited.push_back(to);
        scan_paths(kg, to, target, max_len, visited, prefix, out);
        visited.pop_back();
      }
      prefix.steps.pop_back();
    }
  }
}

bool chain_holds(const KnowledgeGraph& kg, EntityId at, const QueryChain& chain, std::size_t i) {
  if (i == chain.steps.size()) return at == chain.anchor;
  const auto& step = chain.steps[i];
  for (const auto& t : kg.triples()) {
    if (t.relation != step.relation) continue;
    if (!step.inverse && t.head == at && chain_holds(kg, t.tail, chain, i + 1)) return true;
    if (step.inverse && t.tail == at && chain_holds(kg, t.head, chain, i + 1)) return true;
  }
  return false;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

MovieGraph movie_graph() { return build_movie(false, nullptr); }

MovieGraph movie_graph_with_beetlejuice(EntityId* beetlejuice) {
  return build_movie(true, beetlejuice);
}

UniversityGraph university_graph() {
  KnowledgeGraphBuilder b;
  UniversityGraph g;
  g.missouri = b.add_entity("m.04ykg", "Missouri");
  g.st_louis = b.add_entity("m.06wxw", "St. Louis");
  g.slu = b.add_entity("m.01qdhx", "Saint Louis University");
  g.usa = b.add_entity("m.09c7w0", "United States of America");
  g.library = b.add_entity("m.0pius", "Pius XII Memorial Library");
  g.admin_parent = b.add_relation("location.administrative_division.country",
                                  "administrative parent");
  g.containedby = b.add_relation("location.location.containedby", "containedby");
  g.state = b.add_relation("location.citytown.state", "state");
  b.add_triple(g.missouri, g.admin_parent, g.usa);
  b.add_triple(g.slu, g.containedby, g.usa);
  b.add_triple(g.st_louis, g.state, g.missouri);
  b.add_triple(g.slu, g.containedby, g.st_louis);
  b.add_triple(g.library, g.containedby, g.slu);
  g.kg = std::move(b).build();
  return g;
}

Path planted_path(const QaExample& ex, const KnowledgeGraph& kg, std::size_t hops) {
  if (ex.gold_chain.size() < hops) throw std::runtime_error(ex.id + ": gold chain too short");
  Path p;
  for (std::size_t i = 0; i < hops; ++i) {
    const auto& c = ex.gold_chain[i];
    const auto id = kg.find_triple(c.triple);
    if (!id) throw std::runtime_error(ex.id + ": gold triple not in the graph");
    const auto from = c.inverse ? c.triple.tail : c.triple.head;
    const auto to = c.inverse ? c.triple.head : c.triple.tail;
    p.steps.push_back({*id, from, c.triple.relation, to, c.inverse});
  }
  return p;
}

MetricFixture metric_fixture() {
  MetricFixture f;
  KnowledgeGraphBuilder b;
  for (int i = 0; i <= 11; ++i) b.add_entity("n" + std::to_string(i), "node " + std::to_string(i));
  const auto r = b.add_relation("next", "next");
  for (std::uint32_t i = 0; i <= 10; ++i) b.add_triple(EntityId{i}, r, EntityId{i + 1});
  f.kg = std::move(b).build();

  auto triple_id = [&](std::uint32_t i) {
    return *f.kg.find_triple({EntityId{i}, r, EntityId{i + 1}});
  };
  auto add = [&](std::vector<std::uint32_t> gold, std::vector<std::uint32_t> predicted,
                 std::uint32_t top1) {
    QaExample ex;
    ex.id = "q" + std::to_string(f.data.size() + 1);
    for (const auto g : gold) {
      ex.answers.push_back(EntityId{g});
      ex.gold_chain.push_back({f.kg.triple(triple_id(g)), false});
    }
    AnswerResult res;
    res.question_id = ex.id;
    res.top1 = EntityId{top1};
    for (const auto p : predicted) {
      res.answers.push_back({EntityId{p}, 0.0});
      const auto t = triple_id(p);
      res.subgraphs.push_back({EntityId{p}, {Path{{{t, EntityId{p}, r, EntityId{p + 1}, false}}}}});
    }
    f.data.push_back(std::move(ex));
    f.results.push_back(std::move(res));
  };
  add({1}, {1}, 1);
  add({1, 2}, {1, 3}, 3);
  add({4}, {}, 4);
  add({1, 2, 3}, {2}, 2);
  add({5}, {6, 7}, 6);
  add({2, 3}, {3, 2}, 3);
  add({7}, {7, 8, 9, 10}, 7);
  add({1, 2}, {5, 2}, 5);
  add({9}, {9}, 9);
  add({3, 4}, {4}, 4);
  // Sums in question order, as the scorer accumulates them.
  f.hits_at_1 = 0.6;
  f.precision = (1 + 0.5 + 0 + 1 + 0 + 1 + 0.25 + 0.5 + 1 + 1.0) / 10;
  f.recall = (1 + 0.5 + 0 + 1.0 / 3 + 0 + 1 + 1 + 0.5 + 1 + 0.5) / 10;
  f.f1 = (1 + 0.5 + 0 + 0.5 + 0 + 1 + 0.4 + 0.5 + 1 + 2.0 / 3) / 10;
  return f;
}

KnowledgeGraph random_graph(std::size_t entities, std::size_t relations, std::size_t triples,
                            std::mt19937_64& rng) {
  KnowledgeGraphBuilder b;
  for (std::size_t i = 0; i < entities; ++i) {
    b.add_entity("e" + std::to_string(i), "entity " + std::to_string(i));
  }
  for (std::size_t r = 0; r < relations; ++r) {
    b.add_relation("r" + std::to_string(r), "relation " + std::to_string(r));
  }
  std::uniform_int_distribution<std::uint32_t> ent(0, static_cast<std::uint32_t>(entities - 1));
  std::uniform_int_distribution<std::uint32_t> rel(0, static_cast<std::uint32_t>(relations - 1));
  for (std::size_t i = 0; i < triples; ++i) {
    const auto h = ent(rng), t = ent(rng), r = rel(rng);
    if (h != t) b.add_triple(EntityId{h}, RelationId{r}, EntityId{t});
  }
  return std::move(b).build();
}

std::vector<Path> oracle_paths(const KnowledgeGraph& kg, EntityId s, EntityId t,
                               std::size_t max_len) {
  std::vector<Path> out;
  if (s == t) return out;
  std::vector<EntityId> visited{s};
  Path prefix;
  scan_paths(kg, s, t, max_len, visited, prefix, out);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Path> oracle_shortest(const KnowledgeGraph& kg, EntityId s, EntityId t) {
  if (s == t) return {};
  // Hop distance by repeated sweeps over the raw triple list, so the
  // enumeration below never searches past it (or at all when t is unreachable).
  std::vector<std::size_t> dist(kg.entity_count(), SIZE_MAX);
  dist[s.value] = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::uint32_t i = 0; i < kg.triple_count(); ++i) {
      const auto& tr = kg.triple(TripleId{i});
      for (const auto [a, b] : {std::pair{tr.head, tr.tail}, std::pair{tr.tail, tr.head}}) {
        if (dist[a.value] != SIZE_MAX && dist[a.value] + 1 < dist[b.value]) {
          dist[b.value] = dist[a.value] + 1;
          changed = true;
        }
      }
    }
  }
  if (dist[t.value] == SIZE_MAX) return {};
  auto all = oracle_paths(kg, s, t, dist[t.value]);
  std::erase_if(all, [&](const Path& p) { return p.length() != dist[t.value]; });
  return all;
}

std::vector<EntityId> oracle_query(const QueryGraph& q, const KnowledgeGraph& kg) {
  std::vector<EntityId> out;
  for (std::uint32_t e = 0; e < kg.entity_count(); ++e) {
    const bool all = std::all_of(q.chains.begin(), q.chains.end(), [&](const QueryChain& c) {
      return chain_holds(kg, EntityId{e}, c, 0);
    });
    if (all) out.push_back(EntityId{e});
  }
  return out;
}

std::string oracle_rewrite(const std::vector<Path>& paths, const std::string& question,
                           const std::vector<EntityId>& topics, const KnowledgeGraph& kg,
                           std::size_t* mentions) {
  std::string wh = "what";
  std::string word;
  const std::string lowered = lower(question) + " ";
  for (const char c : lowered) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      word += c;
      continue;
    }
    if (word == "who" || word == "what" || word == "when" || word == "where" || word == "which" ||
        word == "whom" || word == "whose" || word == "why" || word == "how") {
      wh = word;
      break;
    }
    word.clear();
  }
  std::size_t count = 0;
  std::string text = wh;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    if (p > 0) text += " and";
    for (const auto& s : paths[p].steps) {
      const auto label = lower(kg.relation_label(s.relation));
      text += s.inverse ? " is the " + label + " of" : " has the " + label;
      ++count;
      if (std::find(topics.begin(), topics.end(), s.to) != topics.end()) {
        text += " " + kg.entity_label(s.to);
        ++count;
      } else {
        text += " an entity that";
      }
    }
  }
  if (mentions) *mentions = count;
  return text;
}

OracleLabels oracle_weak_labels(const QaExample& ex, const std::vector<EntityId>& candidates,
                                const KnowledgeGraph& kg, std::size_t max_len) {
  std::set<EntityId> pool(candidates.begin(), candidates.end());
  pool.insert(ex.answers.begin(), ex.answers.end());
  const std::set<EntityId> gold(ex.answers.begin(), ex.answers.end());

  std::map<std::string, std::set<EntityId>> matched;
  OracleLabels out;
  for (const auto a : pool) {
    std::vector<std::vector<Path>> per_topic;
    for (const auto t : ex.topic_entities) per_topic.push_back(oracle_paths(kg, a, t, max_len));
    if (std::any_of(per_topic.begin(), per_topic.end(), [](const auto& v) { return v.empty(); })) {
      continue;
    }
    // Every combination, by recursion over topics.
    std::vector<Path> chosen;
    std::function<void(std::size_t)> combine = [&](std::size_t i) {
      if (i == per_topic.size()) {
        std::size_t mentions = 0;
        const auto text = oracle_rewrite(chosen, ex.question, ex.topic_entities, kg, &mentions);
        out.mentions[text] = mentions;
        const auto hits = oracle_query(QueryGraph::from_paths(chosen), kg);
        matched[text].insert(hits.begin(), hits.end());
        return;
      }
      for (const auto& p : per_topic[i]) {
        chosen.push_back(p);
        combine(i + 1);
        chosen.pop_back();
      }
    };
    combine(0);
  }
  if (matched.empty()) return out;
  long best = std::numeric_limits<long>::min();
  for (const auto& [text, ents] : matched) {
    long v = 0;
    for (const auto e : ents) v += gold.contains(e) ? 1 : -1;
    out.votes[text] = v;
    best = std::max(best, v);
  }
  std::size_t shortest = std::numeric_limits<std::size_t>::max();
  for (const auto& [text, v] : out.votes) {
    if (v == best) shortest = std::min(shortest, out.mentions[text]);
  }
  for (const auto& [text, v] : out.votes) {
    if (v == best && out.mentions[text] == shortest) {
      out.positives.insert(text);
    } else {
      out.negatives.insert(text);
    }
  }
  return out;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheck check_gradients(nn::ParameterStore& store,
                          const std::function<nn::Var(nn::Tape&)>& loss, double step) {
  store.zero_grad();
  {
    nn::Tape tape;
    tape.backward(loss(tape));
  }
  auto evaluate = [&] {
    nn::Tape tape(nn::Tape::Mode::inference);
    return loss(tape).value().item();
  };
  const double base = evaluate();
  GradCheck res;
  for (auto& [name, p] : store) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = evaluate();
      p.value[i] = saved - step;
      const double down = evaluate();
      p.value[i] = saved;
      double err = relative_error(p.grad[i], (up - down) / (2.0 * step));
      // One-sided slopes that disagree mean a kink (leaky ReLU, hinge) lies
      // inside the stencil; the analytic value must then match the side that
      // does not cross it.
      const double right = (up - base) / step, left = (base - down) / step;
      if (relative_error(right, left) > 1e-2) {
        const double one_sided =
            std::min(relative_error(p.grad[i], right), relative_error(p.grad[i], left));
        if (one_sided < err) {
          ++res.kinks;
          err = one_sided;
        }
      }
      ++res.checked;
      if (res.worst.empty() || err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

GradCheck check_input_gradients(std::vector<nn::Tensor> inputs,
                                const std::function<nn::Var(nn::Tape&, std::vector<nn::Var>&)>& f,
                                double step) {
  nn::ParameterStore store;
  std::vector<nn::Parameter*> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "in%02zu", i);
    params.push_back(&store.add(name, std::move(inputs[i])));
  }
  return check_gradients(
      store,
      [&](nn::Tape& tape) {
        std::vector<nn::Var> vars;
        for (auto* p : params) vars.push_back(tape.parameter(*p));
        return f(tape, vars);
      },
      step);
}

nn::Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo,
                         double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  nn::Tensor t(rows, cols);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("kgqa_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace kgqa::testing
