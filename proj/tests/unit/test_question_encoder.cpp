#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "kgqa/error.hpp"
#include "kgqa/numerics/ops.hpp"
#include "kgqa/pipeline/dataset.hpp"
#include "kgqa/text/question_encoder.hpp"
#include "kgqa/text/tokenizer.hpp"

using namespace kgqa;
using namespace kgqa::nn;
using Tokens = std::vector<std::string>;

TEST_CASE("tokenizer") {
  CHECK(tokenize("What state is Saint-Louis University in?") ==
        Tokens{"what", "state", "is", "saint", "louis", "university", "in"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("  ?! ").empty());
  CHECK(tokenize("Zürich 2024") == Tokens{"zürich", "2024"});
}

TEST_CASE("mention masking") {
  const Tokens slu{"Saint Louis University"};
  CHECK(tokenize_and_mask("what state is saint louis university in?", slu) ==
        Tokens{"what", "state", "is", "in"});
  const Tokens two{"Tim Burton", "Michael Keaton"};
  CHECK(tokenize_and_mask("who was born in california and directed michael keaton films", two) ==
        Tokens{"who", "was", "born", "in", "california", "and", "directed", "films"});
  // Longest mention wins at a position.
  const Tokens nested{"Saint Louis", "Saint Louis University"};
  CHECK(tokenize_and_mask("saint louis university", nested).empty() == false);
  CHECK(tokenize_and_mask("in saint louis university now", nested) == Tokens{"in", "now"});
  // A question made only of the mention keeps its tokens.
  CHECK(tokenize_and_mask("Saint Louis University", slu) ==
        Tokens{"saint", "louis", "university"});
  CHECK(tokenize_and_mask("who directed it", {}) == Tokens{"who", "directed", "it"});
}

TEST_CASE("vocabulary") {
  Vocabulary v;
  CHECK(v.size() == 1);
  CHECK(v.tokens()[0] == Vocabulary::kUnkToken);
  CHECK(v.index("anything") == Vocabulary::kUnk);
  const auto a = v.add("a");
  CHECK(v.add("a") == a);
  CHECK(v.contains("a"));

  const std::vector<Tokens> texts{{"x", "y", "x"}, {"z", "y", "w"}};
  const Tokens always{"keep"};
  const auto built = Vocabulary::build(texts, 2, always);
  CHECK(built.tokens() == Tokens{"<unk>", "keep", "x", "y"});
  const auto all = Vocabulary::build(texts, 1);
  CHECK(all.tokens() == Tokens{"<unk>", "x", "y", "z", "w"});
}

TEST_CASE("token providers") {
  kgqa::testing::TempDir dir;
  SUBCASE("file with an unk row") {
    kgqa::testing::write_file(dir / "tok.txt", "2\n<unk>\t0.5 0.5\nwho\t1 0\nfilm\t0 -1\n");
    const auto p = TokenProvider::load_file(dir / "tok.txt");
    CHECK(p.mode() == TokenProvider::Mode::file_backed);
    CHECK(p.dim() == 2);
    CHECK(p.ids(Tokens{"who", "zzz", "film"}) == std::vector<std::uint32_t>{1, 0, 2});
    Tape tape;
    BoundEmbedding emb(tape, p, nullptr);
    const auto steps = emb.steps(std::vector<std::uint32_t>{2, 0});
    REQUIRE(steps.size() == 2);
    CHECK(steps[0].value() == Tensor::row({0, -1}));
    CHECK(steps[1].value() == Tensor::row({0.5, 0.5}));
  }
  SUBCASE("file without an unk row maps OOV to zeros") {
    kgqa::testing::write_file(dir / "tok.txt", "3\nwho\t1 2 3\n");
    const auto p = TokenProvider::load_file(dir / "tok.txt");
    Tape tape;
    BoundEmbedding emb(tape, p, nullptr);
    CHECK(emb.steps(std::vector<std::uint32_t>{0})[0].value() == Tensor::row({0, 0, 0}));
  }
  SUBCASE("malformed files") {
    kgqa::testing::write_file(dir / "bad.txt", "2\nwho\t1\n");
    CHECK_THROWS_AS(TokenProvider::load_file(dir / "bad.txt"), LoadError);
    kgqa::testing::write_file(dir / "bad2.txt", "x\n");
    CHECK_THROWS_AS(TokenProvider::load_file(dir / "bad2.txt"), LoadError);
    CHECK_THROWS_AS(TokenProvider::load_file(dir / "missing.txt"), LoadError);
  }
  SUBCASE("trainable tables are parameters") {
    Vocabulary v;
    v.add("who");
    const auto p = TokenProvider::trainable(v, 4);
    ParameterStore store;
    Rng rng(1);
    auto* table = create_token_table(p, store, "tok", rng);
    REQUIRE(table != nullptr);
    CHECK(table->value.rows() == 2);
    CHECK(table->value.cols() == 4);
    Tape tape;
    BoundEmbedding emb(tape, p, table);
    const std::vector<std::vector<std::uint32_t>> batch{{1, 0}, {0, 1}};
    const auto steps = emb.steps(batch);
    REQUIRE(steps.size() == 2);
    CHECK(steps[0].rows() == 2);
    CHECK(steps[0].value().row_span(0)[0] == table->value(1, 0));
    CHECK(steps[0].value().row_span(1)[0] == table->value(0, 0));
  }
}

namespace {

struct EncoderFixture {
  TokenProvider provider;
  ParameterStore store;
  QuestionEncoderParams params;

  explicit EncoderFixture(std::size_t dim = 5) {
    std::vector<Tokens> texts{{"what", "state", "is", "in", "who", "directed", "films"}};
    provider = TokenProvider::trainable(Vocabulary::build(texts, 1), dim);
    Rng rng(9);
    params = QuestionEncoderParams::create(store, provider, dim, rng);
  }
};

}  // namespace

TEST_CASE("general and layer-wise encodings follow the recurrences") {
  EncoderFixture f;
  Tape tape;
  BoundQuestionEncoder enc(tape, f.provider, f.params);
  const auto q = enc.encode("what state is saint louis university in?",
                            Tokens{"Saint Louis University"});
  REQUIRE(q.tokens.size() == 4);
  CHECK(q.token_ids == f.provider.ids(Tokens{"what", "state", "is", "in"}));
  CHECK(q.layers.empty());

  const auto zero = tape.constant(Tensor(1, 5));
  const auto general = bigru_encode(bind(tape, f.params.general_fwd),
                                    bind(tape, f.params.general_bwd), q.tokens, zero, zero);
  CHECK(q.q.value() == general.mean.value());
  CHECK(enc.encode_general(q.tokens).value() == general.mean.value());

  const auto lf = bind(tape, f.params.layer_fwd), lb = bind(tape, f.params.layer_bwd);
  const auto first = enc.encode_layerwise(q.tokens, 1, nullptr);
  const auto expect1 = bigru_encode(lf, lb, q.tokens, zero, zero);
  CHECK(first.q.value() == expect1.mean.value());
  CHECK(first.c0.value() == expect1.forward_final.value());
  CHECK(first.c1.value() == expect1.backward_final.value());
  // k == 1 ignores whatever is passed as previous.
  CHECK(enc.encode_layerwise(q.tokens, 1, &first).q.value() == first.q.value());

  const auto second = enc.encode_layerwise(q.tokens, 2, &first);
  const auto expect2 = bigru_encode(lf, lb, q.tokens, first.c0, first.c1);
  CHECK(second.q.value() == expect2.mean.value());
  CHECK_FALSE(second.q.value() == first.q.value());
  const auto third = enc.encode_layerwise(q.tokens, 3, &second);
  CHECK(third.q.value() == bigru_encode(lf, lb, q.tokens, second.c0, second.c1).mean.value());
  // Without a carried pair any layer starts from zero states.
  CHECK(enc.encode_layerwise(q.tokens, 2, nullptr).q.value() == first.q.value());
  CHECK_THROWS_AS(enc.encode_layerwise(q.tokens, 0, nullptr), InvalidArgument);
}

TEST_CASE("masked questions about different entities encode identically") {
  EncoderFixture f;
  Tape tape;
  BoundQuestionEncoder enc(tape, f.provider, f.params);
  const auto a = enc.encode("what state is Saint Louis University in", Tokens{"Saint Louis University"});
  const auto b = enc.encode("what state is Harvard in", Tokens{"Harvard"});
  CHECK(a.q.value() == b.q.value());
  const auto c = enc.encode("who directed films", {});
  CHECK_FALSE(a.q.value() == c.q.value());
}

TEST_CASE("encoding is deterministic across tapes and stores") {
  EncoderFixture f1, f2;
  Tape t1, t2(Tape::Mode::inference);
  BoundQuestionEncoder e1(t1, f1.provider, f1.params), e2(t2, f2.provider, f2.params);
  const auto a = e1.encode("who directed films", {});
  const auto b = e2.encode("who directed films", {});
  CHECK(a.q.value() == b.q.value());
  auto again = QuestionEncoderParams::attach(f1.store, f1.provider);
  CHECK(again.tokens == f1.params.tokens);
  CHECK(again.dim() == 5);
}

TEST_CASE("question encoder gradients") {
  EncoderFixture f(3);
  const auto res = kgqa::testing::check_gradients(f.store, [&](Tape& tape) {
    BoundQuestionEncoder enc(tape, f.provider, f.params);
    const auto q = enc.encode("who directed films in state", {});
    const auto l1 = enc.encode_layerwise(q.tokens, 1, nullptr);
    const auto l2 = enc.encode_layerwise(q.tokens, 2, &l1);
    return add(dot(q.q, l2.q), sum(mul(l1.q, tape.constant(Tensor::row({0.4, -0.7, 1.1})))));
  });
  CAPTURE(res.worst);
  CHECK(res.checked == f.store.scalar_count());
  CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("dataset round trip") {
  const auto g = kgqa::testing::movie_graph();
  QaExample ex;
  ex.id = "q1";
  ex.question = "who directed the film starring michael keaton?";
  ex.topic_entities = {g.keaton};
  ex.answers = {g.tim_burton};
  ex.gold_chain = {{{g.batman, g.cast_member, g.keaton}, true},
                   {{g.batman, g.director, g.tim_burton}, false}};
  QaExample bare{"q2", "what is it", {g.batman}, {}, {}};
  kgqa::testing::TempDir dir;
  write_dataset(dir / "d.jsonl", {ex, bare}, g.kg);
  const auto back = load_dataset(dir / "d.jsonl", g.kg);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "q1");
  CHECK(back[0].question == ex.question);
  CHECK(back[0].topic_entities == ex.topic_entities);
  CHECK(back[0].answers == ex.answers);
  CHECK(back[0].gold_chain == ex.gold_chain);
  CHECK(back[1].answers.empty());
  CHECK(back[1].gold_chain.empty());
  CHECK(topic_mentions(ex, g.kg) == Tokens{"Michael Keaton"});

  kgqa::testing::write_file(dir / "bad.jsonl", "{\"id\": \"x\", \"question\": \"q\", "
                                               "\"topic_entities\": [\"nope\"], \"answers\": []}\n");
  CHECK_THROWS_AS(load_dataset(dir / "bad.jsonl", g.kg), LoadError);
  kgqa::testing::write_file(dir / "bad2.jsonl", "not json\n");
  CHECK_THROWS_AS(load_dataset(dir / "bad2.jsonl", g.kg), LoadError);
}
