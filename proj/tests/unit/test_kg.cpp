#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "kgqa/error.hpp"
#include "kgqa/kg/knowledge_graph.hpp"

using namespace kgqa;
using kgqa::testing::TempDir;
using kgqa::testing::write_file;

namespace {

KnowledgeGraph load_dir(const TempDir& dir) {
  return KnowledgeGraph::load(dir / "triples.tsv", dir / "entities.tsv", dir / "relations.tsv");
}

void write_small(const TempDir& dir, const std::string& triples) {
  write_file(dir / "entities.tsv", "a\tAlpha\nb\tBeta\nc\tGamma\n");
  write_file(dir / "relations.tsv", "r\trel one\ns\trel two\n");
  write_file(dir / "triples.tsv", triples);
}

}  // namespace

TEST_CASE("movie graph shape") {
  const auto g = kgqa::testing::movie_graph();
  CHECK(g.kg.entity_count() == 12);
  CHECK(g.kg.relation_count() == 5);
  CHECK(g.kg.triple_count() == 11);
  CHECK(g.kg.entity_label(g.tim_burton) == "Tim Burton");
  CHECK(g.kg.relation_label(g.cast_member) == "cast member");
  CHECK(g.kg.entity("Q56008") == g.tim_burton);
  CHECK_FALSE(g.kg.find_entity("nope").has_value());
  CHECK_THROWS_AS(g.kg.entity("nope"), UnknownIdError);
  CHECK_THROWS_AS(g.kg.entity_label(EntityId{99}), UnknownIdError);
}

TEST_CASE("load and write round trip") {
  const auto g = kgqa::testing::movie_graph();
  TempDir dir;
  g.kg.write(dir / "triples.tsv", dir / "entities.tsv", dir / "relations.tsv");
  const auto back = load_dir(dir);
  REQUIRE(back.entity_count() == g.kg.entity_count());
  REQUIRE(back.relation_count() == g.kg.relation_count());
  REQUIRE(back.triple_count() == g.kg.triple_count());
  for (std::uint32_t i = 0; i < back.entity_count(); ++i) {
    CHECK(back.entity_key(EntityId{i}) == g.kg.entity_key(EntityId{i}));
    CHECK(back.entity_label(EntityId{i}) == g.kg.entity_label(EntityId{i}));
  }
  for (std::size_t i = 0; i < back.triple_count(); ++i) CHECK(back.triples()[i] == g.kg.triples()[i]);

  TempDir again;
  back.write(again / "triples.tsv", again / "entities.tsv", again / "relations.tsv");
  for (const char* f : {"triples.tsv", "entities.tsv", "relations.tsv"}) {
    CHECK(kgqa::testing::read_file(dir / f) == kgqa::testing::read_file(again / f));
  }
}

TEST_CASE("loading edge cases") {
  TempDir dir;
  SUBCASE("empty triples file gives isolated entities") {
    write_small(dir, "");
    const auto kg = load_dir(dir);
    CHECK(kg.entity_count() == 3);
    CHECK(kg.triple_count() == 0);
    CHECK(kg.incidences(EntityId{0}).empty());
  }
  SUBCASE("blank lines and CRLF are tolerated") {
    write_small(dir, "a\tr\tb\r\n\nb\ts\tc\n");
    CHECK(load_dir(dir).triple_count() == 2);
  }
  SUBCASE("duplicate triples are stored once") {
    write_small(dir, "a\tr\tb\na\tr\tb\n");
    CHECK(load_dir(dir).triple_count() == 1);
  }
  SUBCASE("unknown entity") {
    write_small(dir, "a\tr\tz\n");
    CHECK_THROWS_AS(load_dir(dir), LoadError);
  }
  SUBCASE("unknown relation") {
    write_small(dir, "a\tq\tb\n");
    CHECK_THROWS_AS(load_dir(dir), LoadError);
  }
  SUBCASE("malformed triple row") {
    write_small(dir, "a\tr\n");
    CHECK_THROWS_AS(load_dir(dir), LoadError);
  }
  SUBCASE("duplicate entity id") {
    write_small(dir, "");
    write_file(dir / "entities.tsv", "a\tAlpha\na\tAgain\n");
    CHECK_THROWS_AS(load_dir(dir), LoadError);
  }
  SUBCASE("empty label") {
    write_small(dir, "");
    write_file(dir / "relations.tsv", "r\t\n");
    CHECK_THROWS_AS(load_dir(dir), LoadError);
  }
  SUBCASE("missing file") {
    write_small(dir, "");
    CHECK_THROWS_AS(
        KnowledgeGraph::load(dir / "absent.tsv", dir / "entities.tsv", dir / "relations.tsv"),
        LoadError);
  }
}

TEST_CASE("relations between two entities") {
  const auto g = kgqa::testing::movie_graph();
  const auto links = g.kg.relations_between(g.tim_burton, g.california);
  REQUIRE(links.size() == 1);
  CHECK(links[0].relation == g.birthplace);
  CHECK(links[0].forward);
  const auto back = g.kg.relations_between(g.california, g.tim_burton);
  REQUIRE(back.size() == 1);
  CHECK_FALSE(back[0].forward);
  CHECK(g.kg.relations_between(g.tim_burton, g.keaton).empty());

  KnowledgeGraphBuilder b;
  const auto x = b.add_entity("x", "X"), y = b.add_entity("y", "Y");
  const auto r = b.add_relation("r", "r"), s = b.add_relation("s", "s");
  b.add_triple(x, r, y);
  b.add_triple(x, s, y);
  b.add_triple(y, r, x);
  const auto kg = std::move(b).build();
  const auto parallel = kg.relations_between(x, y);
  REQUIRE(parallel.size() == 3);
  CHECK(std::count_if(parallel.begin(), parallel.end(), [](auto l) { return l.forward; }) == 2);
  CHECK(kg.find_triple({x, s, y}).has_value());
  CHECK_FALSE(kg.find_triple({y, s, x}).has_value());
}

TEST_CASE("incidence index covers every triple twice") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto kg = kgqa::testing::random_graph(30, 4, 80, rng);
    std::map<std::uint32_t, int> seen;
    for (std::uint32_t e = 0; e < kg.entity_count(); ++e) {
      std::uint32_t last = 0;
      bool first = true;
      for (const auto& inc : kg.incidences(EntityId{e})) {
        ++seen[inc.triple.value];
        const auto& t = kg.triple(inc.triple);
        CHECK((inc.outgoing ? t.head : t.tail) == EntityId{e});
        CHECK((inc.outgoing ? t.tail : t.head) == inc.neighbor);
        CHECK(t.relation == inc.relation);
        CHECK((first || inc.triple.value >= last));
        last = inc.triple.value;
        first = false;
      }
    }
    CHECK(seen.size() == kg.triple_count());
    for (const auto& [t, n] : seen) CHECK(n == 2);
  }
}
