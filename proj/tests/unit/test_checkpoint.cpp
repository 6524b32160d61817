#include <doctest.h>

#include <filesystem>
#include <random>

#include "fixtures.hpp"
#include "kgqa/error.hpp"
#include "kgqa/io/checkpoint.hpp"
#include "kgqa/pipeline/vocab.hpp"

using namespace kgqa;
using kgqa::testing::read_file;
using kgqa::testing::TempDir;
using kgqa::testing::write_file;

namespace {

struct Models {
  kgqa::testing::MovieGraph g = kgqa::testing::movie_graph();
  QaExample ex{"q", "who directed the film with michael keaton", {g.keaton}, {g.tim_burton}, {}};
  std::shared_ptr<const TokenProvider> provider = std::make_shared<const TokenProvider>(
      TokenProvider::trainable(corpus_vocabulary(g.kg, std::vector<QaExample>{ex}), 6));
};

bool same_params(const nn::ParameterStore& a, const nn::ParameterStore& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, p] : a) {
    if (!b.contains(name) || !(b.get(name).value == p.value)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("raw checkpoint round trip") {
  TempDir dir;
  std::mt19937_64 rng(1);
  Checkpoint c{R"({"kind":"test"})",
               {{"a", kgqa::testing::random_tensor(3, 2, rng)}, {"empty", nn::Tensor(0, 4)}}};
  write_checkpoint(dir / "c.bin", c);
  const auto back = read_checkpoint(dir / "c.bin");
  CHECK(back.meta == c.meta);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0].first == "a");
  CHECK(back.tensors[0].second == c.tensors[0].second);  // bit-exact doubles
  CHECK(back.tensors[1].second.rows() == 0);
  CHECK(back.tensors[1].second.cols() == 4);
}

TEST_CASE("graph model round trip") {
  Models m;
  GnnConfig cfg{.layers = 2, .dim = 6, .margin = 0.5, .epochs = 3, .learning_rate = 2e-3, .seed = 11};
  GnnModel model(m.provider, cfg);
  TempDir dir;
  save_gnn(dir / "g.ckpt", model);
  const auto back = load_gnn(dir / "g.ckpt");
  CHECK(same_params(back.params(), model.params()));
  CHECK(back.config().layers == 2);
  CHECK(back.config().dim == 6);
  CHECK(back.config().margin == 0.5);
  CHECK(back.config().epochs == 3);
  CHECK(back.config().learning_rate == 2e-3);
  CHECK(back.config().seed == 11);
  CHECK(back.provider().vocab().tokens() == m.provider->vocab().tokens());
  const auto graph = GraphIndex::build(m.g.kg, *m.provider);
  CHECK(back.distances(graph, m.ex, m.g.kg) == model.distances(graph, m.ex, m.g.kg));

  // Saving what was loaded reproduces the file byte for byte.
  save_gnn(dir / "again.ckpt", back);
  CHECK(read_file(dir / "g.ckpt") == read_file(dir / "again.ckpt"));
}

TEST_CASE("file-backed providers travel with the checkpoint") {
  Vocabulary v;
  for (const char* t : {"who", "directed", "the", "film", "with", "director", "cast", "member"}) v.add(t);
  std::mt19937_64 rng(5);
  auto vectors = kgqa::testing::random_tensor(v.size(), 4, rng);
  auto provider = std::make_shared<const TokenProvider>(TokenProvider::file_backed(v, vectors));
  GnnModel model(provider, GnnConfig{.layers = 1, .dim = 3});
  CHECK_FALSE(model.params().contains("question.tokens"));
  TempDir dir;
  save_gnn(dir / "g.ckpt", model);
  const auto back = load_gnn(dir / "g.ckpt");
  CHECK(back.provider().mode() == TokenProvider::Mode::file_backed);
  CHECK(back.provider().vectors() == vectors);
  CHECK(same_params(back.params(), model.params()));

  TextEncoder enc(provider, {.dim = 3});
  save_text_encoder(dir / "t.ckpt", enc);
  const auto tb = load_text_encoder(dir / "t.ckpt");
  CHECK(tb.provider().vectors() == vectors);
  CHECK(tb.encode_text("who directed the film") == enc.encode_text("who directed the film"));
}

TEST_CASE("text encoder round trip") {
  Models m;
  TextEncoder enc(m.provider, {.dim = 5, .margin = 0.3, .epochs = 4, .seed = 2});
  TempDir dir;
  save_text_encoder(dir / "t.ckpt", enc);
  const auto fresh = load_text_encoder(dir / "t.ckpt");
  CHECK(same_params(fresh.params(), enc.params()));
  CHECK(fresh.config().dim == 5);
  CHECK(fresh.config().margin == 0.3);
  const auto shared = load_text_encoder(dir / "t.ckpt", m.provider);
  CHECK(shared.provider_ptr() == m.provider);

  Vocabulary other;
  other.add("unrelated");
  CHECK_THROWS_AS(load_text_encoder(dir / "t.ckpt",
                                    std::make_shared<const TokenProvider>(TokenProvider::trainable(other, 6))),
                  LoadError);
  save_text_encoder(dir / "t2.ckpt", shared);
  CHECK(read_file(dir / "t.ckpt") == read_file(dir / "t2.ckpt"));
}

TEST_CASE("damaged checkpoints are rejected") {
  Models m;
  GnnModel model(m.provider, GnnConfig{.layers = 1, .dim = 3});
  TempDir dir;
  save_gnn(dir / "g.ckpt", model);
  const auto bytes = read_file(dir / "g.ckpt");

  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    write_file(dir / "bad.ckpt", b);
    CHECK_THROWS_AS(load_gnn(dir / "bad.ckpt"), LoadError);
  }
  SUBCASE("unknown version") {
    auto b = bytes;
    b[8] = 9;
    write_file(dir / "bad.ckpt", b);
    CHECK_THROWS_AS(read_checkpoint(dir / "bad.ckpt"), LoadError);
  }
  SUBCASE("truncated at every tenth byte") {
    for (std::size_t n = 0; n < bytes.size(); n += std::max<std::size_t>(1, bytes.size() / 10)) {
      write_file(dir / "bad.ckpt", bytes.substr(0, n));
      CHECK_THROWS_AS(load_gnn(dir / "bad.ckpt"), LoadError);
    }
    write_file(dir / "bad.ckpt", bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(load_gnn(dir / "bad.ckpt"), LoadError);
  }
  SUBCASE("trailing bytes") {
    write_file(dir / "bad.ckpt", bytes + "x");
    CHECK_THROWS_AS(load_gnn(dir / "bad.ckpt"), LoadError);
  }
  SUBCASE("wrong kind") {
    TextEncoder enc(m.provider, {.dim = 3});
    save_text_encoder(dir / "t.ckpt", enc);
    CHECK_THROWS_AS(load_gnn(dir / "t.ckpt"), LoadError);
    CHECK_THROWS_AS(load_text_encoder(dir / "g.ckpt"), LoadError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_gnn(dir / "none.ckpt"), LoadError);
  }
}
