#pragma once

#include <span>
#include <string>
#include <vector>

#include "kgqa/numerics/gru.hpp"
#include "kgqa/text/token_provider.hpp"

namespace kgqa {

/// Parameters of the question side of the graph model: a token table (when
/// the provider is trainable) and two bidirectional GRUs, one producing the
/// general embedding q and one producing the per-layer references q^k.
struct QuestionEncoderParams {
  nn::Parameter* tokens = nullptr;
  nn::GruParams general_fwd, general_bwd;
  nn::GruParams layer_fwd, layer_bwd;

  std::size_t dim() const { return general_fwd.hidden_dim; }

  static QuestionEncoderParams create(nn::ParameterStore& store, const TokenProvider& provider,
                                      std::size_t dim, nn::Rng& rng,
                                      const std::string& prefix = "question");
  static QuestionEncoderParams attach(nn::ParameterStore& store, const TokenProvider& provider,
                                      const std::string& prefix = "question");
};

/// q^k together with the final hidden states that seed layer k + 1.
struct LayerReference {
  nn::Var q;
  nn::Var c0;  ///< forward direction
  nn::Var c1;  ///< backward direction
};

struct EncodedQuestion {
  std::vector<std::uint32_t> token_ids;
  std::vector<nn::Var> tokens;  ///< Q, one 1 x d_in row per token
  nn::Var q;
  std::vector<LayerReference> layers;  ///< filled on demand by the graph model
};

/// QuestionEncoderParams read onto one tape.
class BoundQuestionEncoder {
 public:
  BoundQuestionEncoder(nn::Tape& tape, const TokenProvider& provider,
                       const QuestionEncoderParams& params);

  std::size_t dim() const { return dim_; }
  nn::Tape& tape() const { return *tape_; }

  std::vector<nn::Var> token_matrix(const std::vector<std::uint32_t>& ids) const;

  /// Mean of the final states of a bidirectional pass from zero states.
  nn::Var encode_general(std::span<const nn::Var> tokens) const;

  /// Layer k >= 1. For k == 1, or when `previous` is null, zero states are
  /// used; otherwise the pair carried by `previous` seeds both directions.
  LayerReference encode_layerwise(std::span<const nn::Var> tokens, std::size_t k,
                                  const LayerReference* previous) const;

  /// Masks, embeds and encodes q. Layer references are left empty.
  EncodedQuestion encode(const std::string& text, std::span<const std::string> mentions) const;
  EncodedQuestion encode_ids(std::vector<std::uint32_t> ids) const;

 private:
  nn::Tape* tape_;
  std::size_t dim_;
  BoundEmbedding embedding_;
  const TokenProvider* provider_;
  nn::BoundGru general_fwd_, general_bwd_, layer_fwd_, layer_bwd_;
};

}  // namespace kgqa
