#include "kgqa/text/question_encoder.hpp"

#include "kgqa/error.hpp"
#include "kgqa/text/tokenizer.hpp"

namespace kgqa {

QuestionEncoderParams QuestionEncoderParams::create(nn::ParameterStore& store,
                                                    const TokenProvider& provider,
                                                    std::size_t dim, nn::Rng& rng,
                                                    const std::string& prefix) {
  QuestionEncoderParams p;
  p.tokens = create_token_table(provider, store, prefix + ".tokens", rng);
  p.general_fwd = nn::GruParams::create(store, prefix + ".general_fwd", provider.dim(), dim, rng);
  p.general_bwd = nn::GruParams::create(store, prefix + ".general_bwd", provider.dim(), dim, rng);
  p.layer_fwd = nn::GruParams::create(store, prefix + ".layer_fwd", provider.dim(), dim, rng);
  p.layer_bwd = nn::GruParams::create(store, prefix + ".layer_bwd", provider.dim(), dim, rng);
  return p;
}

QuestionEncoderParams QuestionEncoderParams::attach(nn::ParameterStore& store,
                                                    const TokenProvider& provider,
                                                    const std::string& prefix) {
  QuestionEncoderParams p;
  if (provider.mode() == TokenProvider::Mode::trainable) p.tokens = &store.get(prefix + ".tokens");
  p.general_fwd = nn::GruParams::attach(store, prefix + ".general_fwd");
  p.general_bwd = nn::GruParams::attach(store, prefix + ".general_bwd");
  p.layer_fwd = nn::GruParams::attach(store, prefix + ".layer_fwd");
  p.layer_bwd = nn::GruParams::attach(store, prefix + ".layer_bwd");
  for (const auto* g : {&p.general_fwd, &p.general_bwd, &p.layer_fwd, &p.layer_bwd}) {
    if (g->input_dim != provider.dim() || g->hidden_dim != p.general_fwd.hidden_dim) {
      throw DimensionError("question encoder '" + prefix + "' does not match the token provider");
    }
  }
  return p;
}

BoundQuestionEncoder::BoundQuestionEncoder(nn::Tape& tape, const TokenProvider& provider,
                                           const QuestionEncoderParams& params)
    : tape_(&tape),
      dim_(params.dim()),
      embedding_(tape, provider, params.tokens),
      provider_(&provider),
      general_fwd_(nn::bind(tape, params.general_fwd)),
      general_bwd_(nn::bind(tape, params.general_bwd)),
      layer_fwd_(nn::bind(tape, params.layer_fwd)),
      layer_bwd_(nn::bind(tape, params.layer_bwd)) {}

std::vector<nn::Var> BoundQuestionEncoder::token_matrix(
    const std::vector<std::uint32_t>& ids) const {
  return embedding_.steps(ids);
}

nn::Var BoundQuestionEncoder::encode_general(std::span<const nn::Var> tokens) const {
  if (tokens.empty()) throw InvalidArgument("cannot encode an empty question");
  const auto zero = tape_->constant(nn::Tensor(1, dim_));
  return nn::bigru_encode(general_fwd_, general_bwd_, tokens, zero, zero).mean;
}

LayerReference BoundQuestionEncoder::encode_layerwise(std::span<const nn::Var> tokens,
                                                      std::size_t k,
                                                      const LayerReference* previous) const {
  if (k == 0) throw InvalidArgument("layer indices start at 1");
  nn::Var h0f, h0b;
  if (k == 1 || previous == nullptr) {
    h0f = h0b = tape_->constant(nn::Tensor(1, dim_));
  } else {
    h0f = previous->c0;
    h0b = previous->c1;
    if (h0f.cols() != dim_ || h0b.cols() != dim_) {
      throw DimensionError("carried hidden state does not match the encoder dimension");
    }
  }
  const auto out = nn::bigru_encode(layer_fwd_, layer_bwd_, tokens, h0f, h0b);
  return {out.mean, out.forward_final, out.backward_final};
}

EncodedQuestion BoundQuestionEncoder::encode(const std::string& text,
                                             std::span<const std::string> mentions) const {
  const auto tokens = tokenize_and_mask(text, mentions);
  if (tokens.empty()) throw InvalidArgument("question '" + text + "' has no tokens");
  return encode_ids(provider_->ids(tokens));
}

EncodedQuestion BoundQuestionEncoder::encode_ids(std::vector<std::uint32_t> ids) const {
  EncodedQuestion out;
  out.token_ids = std::move(ids);
  out.tokens = token_matrix(out.token_ids);
  out.q = encode_general(out.tokens);
  return out;
}

}  // namespace kgqa
