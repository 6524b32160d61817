#include "kgqa/gnn/gnn_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "kgqa/error.hpp"
#include "kgqa/numerics/ops.hpp"
#include "kgqa/text/tokenizer.hpp"

namespace kgqa {

using nn::Var;

GnnLayerParams GnnLayerParams::create(nn::ParameterStore& store, const std::string& prefix,
                                      std::size_t dim, nn::Rng& rng) {
  const double wide = 1.0 / std::sqrt(2.0 * static_cast<double>(dim));
  const double narrow = 1.0 / std::sqrt(static_cast<double>(dim));
  GnnLayerParams p;
  p.w_m = &store.add(prefix + ".w_m", nn::uniform_tensor(dim, 2 * dim, wide, rng));
  p.b_m = &store.add(prefix + ".b_m", nn::uniform_tensor(1, dim, wide, rng));
  p.a = &store.add(prefix + ".a", nn::uniform_tensor(1, dim, narrow, rng));
  p.w_a = &store.add(prefix + ".w_a", nn::uniform_tensor(dim, 2 * dim, wide, rng));
  p.b_a = &store.add(prefix + ".b_a", nn::uniform_tensor(1, dim, wide, rng));
  p.a_u = &store.add(prefix + ".a_u", nn::uniform_tensor(1, dim, narrow, rng));
  p.w_u = &store.add(prefix + ".w_u", nn::uniform_tensor(dim, 2 * dim, wide, rng));
  p.b_u = &store.add(prefix + ".b_u", nn::uniform_tensor(1, dim, wide, rng));
  return p;
}

GnnLayerParams GnnLayerParams::attach(nn::ParameterStore& store, const std::string& prefix,
                                      std::size_t dim) {
  auto get = [&](const char* suffix, std::size_t rows, std::size_t cols) {
    auto& p = store.get(prefix + suffix);
    if (p.value.rows() != rows || p.value.cols() != cols) {
      throw DimensionError("parameter '" + p.name + "' has shape " + nn::shape_string(p.value));
    }
    return &p;
  };
  GnnLayerParams p;
  p.w_m = get(".w_m", dim, 2 * dim);
  p.b_m = get(".b_m", 1, dim);
  p.a = get(".a", 1, dim);
  p.w_a = get(".w_a", dim, 2 * dim);
  p.b_a = get(".b_a", 1, dim);
  p.a_u = get(".a_u", 1, dim);
  p.w_u = get(".w_u", dim, 2 * dim);
  p.b_u = get(".b_u", 1, dim);
  return p;
}

BoundLayer bind(nn::Tape& tape, const GnnLayerParams& p) {
  return {tape.parameter(*p.w_m), tape.parameter(*p.b_m), tape.parameter(*p.a),
          tape.parameter(*p.w_a), tape.parameter(*p.b_a), tape.parameter(*p.a_u),
          tape.parameter(*p.w_u), tape.parameter(*p.b_u)};
}

GraphIndex GraphIndex::build(const KnowledgeGraph& kg, const TokenProvider& provider) {
  GraphIndex g;
  g.entities = kg.entity_count();
  g.relations = kg.relation_count();
  g.has_neighbor.assign(g.entities, false);
  const auto triples = kg.triples();
  g.src.reserve(2 * triples.size());
  g.rel.reserve(2 * triples.size());
  g.dst.reserve(2 * triples.size());
  for (const auto& t : triples) {
    g.src.push_back(t.head.value);
    g.rel.push_back(t.relation.value);
    g.dst.push_back(t.tail.value);
    g.src.push_back(t.tail.value);
    g.rel.push_back(t.relation.value);
    g.dst.push_back(t.head.value);
    g.has_neighbor[t.head.value] = true;
    g.has_neighbor[t.tail.value] = true;
  }
  g.relation_tokens.reserve(g.relations);
  for (std::uint32_t r = 0; r < g.relations; ++r) {
    auto ids = provider.ids(tokenize(kg.relation_label(RelationId{r})));
    if (ids.empty()) ids.push_back(Vocabulary::kUnk);
    g.relation_tokens.push_back(std::move(ids));
  }
  return g;
}

namespace {

Var broadcast_row(Var row, std::size_t n) {
  const std::vector<std::uint32_t> zeros(n, 0);
  return nn::gather_rows(row, zeros);
}

}  // namespace

Var compute_message(const BoundLayer& layer, Var e_i, Var r_j) {
  return nn::tanh(nn::add_row(nn::linear(nn::concat_cols(e_i, r_j), layer.w_m), layer.b_m));
}

AttentionResult attend_aggregate(const BoundLayer& layer, Var messages, Var q_k) {
  if (messages.rows() == 0) throw InvalidArgument("attend_aggregate needs at least one message");
  const std::size_t n = messages.rows();
  const auto joint = nn::concat_cols(messages, broadcast_row(q_k, n));
  const auto hidden = nn::leaky_relu(nn::add_row(nn::linear(joint, layer.w_a), layer.b_a));
  const auto scores = nn::linear(hidden, layer.a);
  const std::vector<std::uint32_t> one_segment(n, 0);
  const auto weights = nn::segment_softmax(scores, one_segment, 1);
  const auto message = nn::segment_sum(nn::scale_rows(messages, weights), one_segment, 1);
  return {message, weights};
}

GateResult gated_update(const BoundLayer& layer, Var message, Var e_prev, Var q) {
  auto score = [&](Var x) {
    const auto hidden =
        nn::leaky_relu(nn::add(nn::linear(nn::concat_cols(x, q), layer.w_u), layer.b_u));
    return nn::linear(hidden, layer.a_u);
  };
  const auto scores = nn::concat_rows(score(message), score(e_prev));
  const std::vector<std::uint32_t> pair{0, 0};
  const auto weights = nn::segment_softmax(scores, pair, 1);
  const auto out =
      nn::segment_sum(nn::scale_rows(nn::concat_rows(message, e_prev), weights), pair, 1);
  return {out, weights};
}

std::vector<Candidate> select_candidates(const nn::Tensor& distances, std::size_t n) {
  if (n == 0) throw InvalidArgument("select_candidates needs n >= 1");
  std::vector<Candidate> all;
  all.reserve(distances.size());
  for (std::uint32_t i = 0; i < distances.size(); ++i) all.push_back({EntityId{i}, distances[i]});
  const auto less = [](const Candidate& a, const Candidate& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.entity < b.entity;
  };
  n = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), less);
  all.resize(n);
  return all;
}

GnnModel::GnnModel(std::shared_ptr<const TokenProvider> provider, GnnConfig config)
    : provider_(std::move(provider)), config_(config) {
  if (!provider_) throw InvalidArgument("graph model needs a token provider");
  if (config_.layers == 0 || config_.dim == 0) throw InvalidArgument("layers and dim must be >= 1");
  nn::Rng rng(config_.seed);
  question_ = QuestionEncoderParams::create(params_, *provider_, config_.dim, rng);
  relation_gru_ = nn::GruParams::create(params_, "relation_gru", provider_->dim(), config_.dim, rng);
  shared_init_ = &params_.add(
      "entity_init",
      nn::uniform_tensor(1, config_.dim, 1.0 / std::sqrt(static_cast<double>(config_.dim)), rng));
  for (std::size_t k = 1; k <= config_.layers; ++k) {
    layers_.push_back(
        GnnLayerParams::create(params_, "layer" + std::to_string(k), config_.dim, rng));
  }
}

GnnModel::GnnModel(std::shared_ptr<const TokenProvider> provider, GnnConfig config,
                   nn::ParameterStore params)
    : provider_(std::move(provider)), config_(config), params_(std::move(params)) {
  if (!provider_) throw InvalidArgument("graph model needs a token provider");
  attach();
}

void GnnModel::attach() {
  question_ = QuestionEncoderParams::attach(params_, *provider_);
  if (question_.dim() != config_.dim) {
    throw DimensionError("stored question encoder has width " + std::to_string(question_.dim()));
  }
  relation_gru_ = nn::GruParams::attach(params_, "relation_gru");
  shared_init_ = &params_.get("entity_init");
  layers_.clear();
  for (std::size_t k = 1; k <= config_.layers; ++k) {
    layers_.push_back(
        GnnLayerParams::attach(params_, "layer" + std::to_string(k), config_.dim));
  }
}

LayerState GnnModel::init_embeddings(nn::Tape& tape, const GraphIndex& graph, Var q,
                                     std::span<const EntityId> topics) const {
  // E^0: row 0 of the source table is the shared vector, row 1 is q.
  std::vector<std::uint32_t> pick(graph.entities, 0);
  for (const auto e : topics) {
    if (e.value >= graph.entities) {
      throw UnknownIdError("topic entity " + std::to_string(e.value) + " is not in the graph");
    }
    pick[e.value] = 1;
  }
  const auto table = nn::concat_rows(tape.parameter(*shared_init_), q);
  LayerState st;
  st.entities = nn::gather_rows(table, pick);

  // R^0: one GRU pass per relation label, batched by label length.
  if (graph.relations == 0) {
    st.relations = tape.constant(nn::Tensor(0, config_.dim));
    return st;
  }
  const BoundEmbedding embed(tape, *provider_, question_.tokens);
  const auto gru = nn::bind(tape, relation_gru_);
  std::map<std::size_t, std::vector<std::uint32_t>> by_length;
  for (std::uint32_t r = 0; r < graph.relations; ++r) {
    by_length[graph.relation_tokens[r].size()].push_back(r);
  }
  Var stacked;
  std::vector<std::uint32_t> position(graph.relations);
  std::uint32_t row = 0;
  for (const auto& [len, rels] : by_length) {
    std::vector<std::vector<std::uint32_t>> batch;
    for (const auto r : rels) {
      batch.push_back(graph.relation_tokens[r]);
      position[r] = row++;
    }
    const auto steps = embed.steps(batch);
    const auto h = nn::gru_encode(gru, steps, tape.constant(nn::Tensor(rels.size(), config_.dim)));
    stacked = stacked.valid() ? nn::concat_rows(stacked, h) : h;
  }
  st.relations = nn::gather_rows(stacked, position);
  return st;
}

namespace {

LayerState layer_step(const BoundLayer& layer, const GraphIndex& graph, const LayerState& prev,
                      Var q_k, Var q, std::size_t d) {
  if (graph.src.empty()) return prev;
  const auto E = prev.entities;
  const auto R = prev.relations;
  const std::size_t n = graph.entities;

  // W_m [e; r] = W_m1 e + W_m2 r, so the products run per
  // entity and per relation instead of per message.
  const auto from_e = nn::linear(E, nn::slice_cols(layer.w_m, 0, d));
  const auto from_r = nn::linear(R, nn::slice_cols(layer.w_m, d, d));
  const auto m = nn::tanh(nn::add_row(
      nn::add(nn::gather_rows(from_e, graph.src), nn::gather_rows(from_r, graph.rel)), layer.b_m));

  const auto q_part = nn::add(nn::linear(q_k, nn::slice_cols(layer.w_a, d, d)), layer.b_a);
  const auto scores = nn::linear(
      nn::leaky_relu(nn::add_row(nn::linear(m, nn::slice_cols(layer.w_a, 0, d)), q_part)),
      layer.a);
  const auto alpha = nn::segment_softmax(scores, graph.dst, n);
  const auto agg = nn::segment_sum(nn::scale_rows(m, alpha), graph.dst, n);

  const auto w_u1 = nn::slice_cols(layer.w_u, 0, d);
  const auto u_part = nn::add(nn::linear(q, nn::slice_cols(layer.w_u, d, d)), layer.b_u);
  const auto s_m = nn::linear(nn::leaky_relu(nn::add_row(nn::linear(agg, w_u1), u_part)), layer.a_u);
  const auto s_e = nn::linear(nn::leaky_relu(nn::add_row(nn::linear(E, w_u1), u_part)), layer.a_u);
  // The two-way shifted softmax reduces to sigmoid(s_m - s_e) for the message.
  const auto w = nn::sigmoid(nn::sub(s_m, s_e));
  const auto mixed = nn::add(nn::scale_rows(agg, w), nn::scale_rows(E, nn::one_minus(w)));
  return {nn::where_rows(graph.has_neighbor, mixed, E), R};
}

}  // namespace

GnnModel::Forward GnnModel::forward(nn::Tape& tape, const GraphIndex& graph, const QaExample& ex,
                                    const KnowledgeGraph& kg) const {
  if (graph.entities != kg.entity_count()) {
    throw InvalidArgument("graph index does not belong to this knowledge graph");
  }
  const BoundQuestionEncoder encoder(tape, *provider_, question_);
  const auto mentions = topic_mentions(ex, kg);
  Forward f;
  f.question = encoder.encode(ex.question, mentions);
  f.question.layers.reserve(config_.layers);
  f.states.push_back(init_embeddings(tape, graph, f.question.q, ex.topic_entities));
  for (std::size_t k = 1; k <= config_.layers; ++k) {
    const LayerReference* prev = k == 1 ? nullptr : &f.question.layers.back();
    f.question.layers.push_back(encoder.encode_layerwise(f.question.tokens, k, prev));
    const auto layer = bind(tape, layers_[k - 1]);
    f.states.push_back(layer_step(layer, graph, f.states.back(), f.question.layers.back().q,
                                  f.question.q, config_.dim));
  }
  f.distances = nn::row_norm(nn::sub_row(f.states.back().entities, f.question.q));
  return f;
}

nn::Tensor GnnModel::distances(const GraphIndex& graph, const QaExample& ex,
                               const KnowledgeGraph& kg) const {
  nn::Tape tape(nn::Tape::Mode::inference);
  return forward(tape, graph, ex, kg).distances.value();
}

Var GnnModel::rank_loss(Var distances, std::span<const std::pair<EntityId, EntityId>> pairs,
                        double margin) {
  if (margin < 0.0) throw InvalidArgument("margin must be non-negative");
  if (pairs.empty()) return distances.tape().constant(nn::Tensor::scalar(0.0));
  std::vector<std::uint32_t> pos, neg;
  for (const auto& [a, b] : pairs) {
    pos.push_back(a.value);
    neg.push_back(b.value);
  }
  const auto gap = nn::sub(nn::gather_rows(distances, pos), nn::gather_rows(distances, neg));
  return nn::sum(nn::relu(nn::add_scalar(gap, margin)));
}

std::vector<std::pair<EntityId, EntityId>> GnnModel::sample_pairs(
    std::span<const EntityId> answers, std::size_t entity_count, std::size_t count, nn::Rng& rng) {
  if (answers.empty()) throw InvalidArgument("cannot sample pairs without answers");
  std::vector<EntityId> sorted(answers.begin(), answers.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.size() >= entity_count) return {};
  std::uniform_int_distribution<std::size_t> pick_answer(0, sorted.size() - 1);
  std::uniform_int_distribution<std::uint32_t> pick_entity(
      0, static_cast<std::uint32_t>(entity_count - 1));
  std::vector<std::pair<EntityId, EntityId>> out;
  out.reserve(count);
  while (out.size() < count) {
    const auto a = sorted[pick_answer(rng)];
    EntityId b{pick_entity(rng)};
    while (std::binary_search(sorted.begin(), sorted.end(), b)) b = EntityId{pick_entity(rng)};
    out.emplace_back(a, b);
  }
  return out;
}

double GnnModel::hits_at_1(const KnowledgeGraph& kg, const GraphIndex& graph,
                           const std::vector<QaExample>& data) const {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : data) {
    const auto top = select_candidates(distances(graph, ex, kg), 1);
    if (!top.empty() &&
        std::binary_search(ex.answers.begin(), ex.answers.end(), top.front().entity)) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

void GnnModel::train(const KnowledgeGraph& kg, const std::vector<QaExample>& train,
                     const std::vector<QaExample>& valid, const EpochCallback& on_epoch) {
  for (const auto& ex : train) {
    if (ex.answers.empty()) throw InvalidArgument("training question " + ex.id + " has no answers");
    for (const auto e : ex.answers) {
      if (!kg.contains(e)) throw InvalidArgument("question " + ex.id + ": answer outside the graph");
    }
  }
  const auto graph = GraphIndex::build(kg, *provider_);
  nn::Rng rng(config_.seed + 0x9e3779b97f4a7c15ULL);
  nn::Adam adam({.learning_rate = config_.learning_rate});
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  nn::ParameterStore best;
  double best_hits = -1.0;
  for (std::size_t epoch = 1; epoch <= config_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (const auto i : order) {
      const auto& ex = train[i];
      nn::Tape tape;
      const auto f = forward(tape, graph, ex, kg);
      const auto pairs = sample_pairs(ex.answers, kg.entity_count(), config_.pairs_per_question, rng);
      const auto loss = rank_loss(f.distances, pairs, config_.margin);
      total += loss.value().item();
      params_.zero_grad();
      tape.backward(loss);
      adam.step(params_);
    }
    const double hits = valid.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : hits_at_1(kg, graph, valid);
    if (!valid.empty() && hits > best_hits) {
      best_hits = hits;
      best = params_.clone();
    }
    if (on_epoch) on_epoch(epoch, total / std::max<std::size_t>(1, train.size()), hits);
  }
  if (best_hits >= 0.0) params_.assign_values(best);
  params_.zero_grad();
}

}  // namespace kgqa
