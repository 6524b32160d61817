#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kgqa/kg/knowledge_graph.hpp"
#include "kgqa/numerics/adam.hpp"
#include "kgqa/numerics/gru.hpp"
#include "kgqa/pipeline/dataset.hpp"
#include "kgqa/text/question_encoder.hpp"

namespace kgqa {

struct GnnConfig {
  std::size_t layers = 3;
  std::size_t dim = 64;
  double margin = 1.0;
  std::size_t pairs_per_question = 32;
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  std::uint64_t seed = 7;
};

/// Parameters of one encoding layer. W_m, W_a and W_u are d x 2d and are
/// applied to concatenations; the dimension-conversion transforms are
/// identities because every layer keeps the same width.
struct GnnLayerParams {
  nn::Parameter* w_m = nullptr;
  nn::Parameter* b_m = nullptr;
  nn::Parameter* a = nullptr;
  nn::Parameter* w_a = nullptr;
  nn::Parameter* b_a = nullptr;
  nn::Parameter* a_u = nullptr;
  nn::Parameter* w_u = nullptr;
  nn::Parameter* b_u = nullptr;

  static GnnLayerParams create(nn::ParameterStore& store, const std::string& prefix,
                               std::size_t dim, nn::Rng& rng);
  static GnnLayerParams attach(nn::ParameterStore& store, const std::string& prefix,
                               std::size_t dim);
};

struct BoundLayer {
  nn::Var w_m, b_m, a, w_a, b_a, a_u, w_u, b_u;
};

BoundLayer bind(nn::Tape& tape, const GnnLayerParams& p);

/// Message routing for one graph: every triple (h, r, t) yields a message
/// into t from h and one into h from t, both carrying r.
struct GraphIndex {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::vector<std::uint32_t> src, rel, dst;
  std::vector<bool> has_neighbor;
  std::vector<std::vector<std::uint32_t>> relation_tokens;  ///< label token ids per relation

  static GraphIndex build(const KnowledgeGraph& kg, const TokenProvider& provider);
};

struct LayerState {
  nn::Var entities;   ///< E^k, |E| x d
  nn::Var relations;  ///< R^k, |R| x d
};

struct AttentionResult {
  nn::Var message;  ///< m^k
  nn::Var weights;  ///< one weight per incoming message, n x 1
};

struct GateResult {
  nn::Var embedding;    ///< e^k
  nn::Var weights;    ///< 2 x 1: (message weight, previous-embedding weight)
};

// Single-entity forms of the layer equations, used for inspection and
// testing; the batched forward pass computes the same quantities for all
// entities at once.

/// tanh(W_m [e_i ; r_j] + b_m)
nn::Var compute_message(const BoundLayer& layer, nn::Var e_i, nn::Var r_j);
/// Attention over the rows of `messages` (n x d) against the reference q^k.
AttentionResult attend_aggregate(const BoundLayer& layer, nn::Var messages, nn::Var q_k);
/// Two-way max-shifted softmax between m^k and e^{k-1}, scored against q.
GateResult gated_update(const BoundLayer& layer, nn::Var message, nn::Var e_prev, nn::Var q);

struct Candidate {
  EntityId entity;
  double distance = 0.0;
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// The n nearest entities by distance, ties broken by ascending id. n larger
/// than the entity count returns every entity.
std::vector<Candidate> select_candidates(const nn::Tensor& distances, std::size_t n);

/// Question-conditioned graph encoder trained with a margin ranking loss.
class GnnModel {
 public:
  using EpochCallback = std::function<void(std::size_t epoch, double loss, double valid_hits)>;

  GnnModel(std::shared_ptr<const TokenProvider> provider, GnnConfig config);
  /// Rebuilds a model around previously saved parameters.
  GnnModel(std::shared_ptr<const TokenProvider> provider, GnnConfig config,
           nn::ParameterStore params);
  GnnModel(GnnModel&&) noexcept = default;
  GnnModel& operator=(GnnModel&&) noexcept = default;
  GnnModel(const GnnModel&) = delete;
  GnnModel& operator=(const GnnModel&) = delete;

  const GnnConfig& config() const { return config_; }
  GnnConfig& config() { return config_; }
  const TokenProvider& provider() const { return *provider_; }
  std::shared_ptr<const TokenProvider> provider_ptr() const { return provider_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

  /// Everything computed for one question on one tape.
  struct Forward {
    EncodedQuestion question;
    std::vector<LayerState> states;  ///< states[0] is the initial state, states[K] the output
    nn::Var distances;               ///< |E| x 1, ||q - e^K||
  };

  /// R^0 from relation labels; E^0 with topic rows set to q and all other rows
  /// set to the shared learned vector.
  LayerState init_embeddings(nn::Tape& tape, const GraphIndex& graph, nn::Var q,
                             std::span<const EntityId> topics) const;

  Forward forward(nn::Tape& tape, const GraphIndex& graph, const QaExample& ex,
                  const KnowledgeGraph& kg) const;

  /// Distances from q to every entity, computed on a throwaway inference tape.
  nn::Tensor distances(const GraphIndex& graph, const QaExample& ex,
                       const KnowledgeGraph& kg) const;

  /// sum over pairs of max(||q - e|| - ||q - e'|| + margin, 0)
  static nn::Var rank_loss(nn::Var distances, std::span<const std::pair<EntityId, EntityId>> pairs,
                           double margin);

  /// Uniform (answer, non-answer) pairs.
  static std::vector<std::pair<EntityId, EntityId>> sample_pairs(
      std::span<const EntityId> answers, std::size_t entity_count, std::size_t count,
      nn::Rng& rng);

  /// Per-question Adam updates; after each epoch the parameters with the best
  /// validation Hits@1 so far are remembered and restored at the end. Without
  /// validation data the final parameters are kept.
  void train(const KnowledgeGraph& kg, const std::vector<QaExample>& train,
             const std::vector<QaExample>& valid, const EpochCallback& on_epoch = {});

  /// Fraction of questions whose nearest entity is a gold answer.
  double hits_at_1(const KnowledgeGraph& kg, const GraphIndex& graph,
                   const std::vector<QaExample>& data) const;

 private:
  void attach();

  std::shared_ptr<const TokenProvider> provider_;
  GnnConfig config_;
  nn::ParameterStore params_;
  QuestionEncoderParams question_;
  nn::GruParams relation_gru_;
  nn::Parameter* shared_init_ = nullptr;
  std::vector<GnnLayerParams> layers_;
};

}  // namespace kgqa
