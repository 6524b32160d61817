#include "kgqa/scorer/text_encoder.hpp"

#include <map>

#include "kgqa/error.hpp"
#include "kgqa/numerics/ops.hpp"
#include "kgqa/text/tokenizer.hpp"

namespace kgqa {

TextEncoder::TextEncoder(std::shared_ptr<const TokenProvider> provider, TextEncoderConfig config)
    : provider_(std::move(provider)), config_(config) {
  if (!provider_) throw InvalidArgument("text encoder needs a token provider");
  if (config_.dim == 0) throw InvalidArgument("text encoder dimension must be positive");
  nn::Rng rng(config_.seed ^ 0x5bd1e995ULL);
  tokens_ = create_token_table(*provider_, params_, "text.tokens", rng);
  fwd_ = nn::GruParams::create(params_, "text.fwd", provider_->dim(), config_.dim, rng);
  bwd_ = nn::GruParams::create(params_, "text.bwd", provider_->dim(), config_.dim, rng);
}

TextEncoder::TextEncoder(std::shared_ptr<const TokenProvider> provider, TextEncoderConfig config,
                         nn::ParameterStore params)
    : provider_(std::move(provider)), config_(config), params_(std::move(params)) {
  if (!provider_) throw InvalidArgument("text encoder needs a token provider");
  if (provider_->mode() == TokenProvider::Mode::trainable) tokens_ = &params_.get("text.tokens");
  fwd_ = nn::GruParams::attach(params_, "text.fwd");
  bwd_ = nn::GruParams::attach(params_, "text.bwd");
  if (fwd_.input_dim != provider_->dim() || bwd_.input_dim != provider_->dim() ||
      fwd_.hidden_dim != config_.dim || bwd_.hidden_dim != config_.dim) {
    throw DimensionError("stored text encoder does not match the configuration");
  }
}

TextEncoder::Bound::Bound(nn::Tape& tape, const TextEncoder& encoder)
    : tape_(&tape),
      encoder_(&encoder),
      embedding_(tape, *encoder.provider_, encoder.tokens_),
      fwd_(nn::bind(tape, encoder.fwd_)),
      bwd_(nn::bind(tape, encoder.bwd_)) {}

nn::Var TextEncoder::Bound::encode(const std::string& text) const {
  return encode_batch(std::span<const std::string>(&text, 1));
}

nn::Var TextEncoder::Bound::encode_batch(std::span<const std::string> texts) const {
  if (texts.empty()) throw InvalidArgument("encode_batch needs at least one text");
  const std::size_t d = encoder_->config_.dim;
  std::map<std::size_t, std::vector<std::size_t>> by_length;
  std::vector<std::vector<std::uint32_t>> ids(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto tokens = tokenize(texts[i]);
    if (tokens.empty()) throw InvalidArgument("cannot encode text without tokens: '" + texts[i] + "'");
    ids[i] = encoder_->provider_->ids(tokens);
    by_length[ids[i].size()].push_back(i);
  }
  nn::Var stacked;
  std::vector<std::uint32_t> position(texts.size());
  std::uint32_t row = 0;
  for (const auto& [len, members] : by_length) {
    std::vector<std::vector<std::uint32_t>> batch;
    for (const auto i : members) {
      batch.push_back(ids[i]);
      position[i] = row++;
    }
    const auto steps = embedding_.steps(batch);
    const auto zero = tape_->constant(nn::Tensor(members.size(), d));
    const auto mean = nn::bigru_encode(fwd_, bwd_, steps, zero, zero).mean;
    stacked = stacked.valid() ? nn::concat_rows(stacked, mean) : mean;
  }
  if (by_length.size() == 1) return stacked;
  return nn::gather_rows(stacked, position);
}

nn::Tensor TextEncoder::encode_text(const std::string& text) const {
  nn::Tape tape(nn::Tape::Mode::inference);
  return Bound(tape, *this).encode(text).value();
}

std::vector<double> TextEncoder::similarities(const std::string& question,
                                              std::span<const std::string> texts) const {
  if (texts.empty()) return {};
  nn::Tape tape(nn::Tape::Mode::inference);
  const Bound bound(tape, *this);
  const auto q = bound.encode(question);
  const auto sims = nn::cosine_rows(bound.encode_batch(texts), q);
  const auto v = sims.value().values();
  return {v.begin(), v.end()};
}

std::optional<Selection> select_by_similarity(std::span<const Expression> expressions,
                                              std::span<const double> similarities) {
  if (expressions.size() != similarities.size()) {
    throw DimensionError("one similarity per expression expected");
  }
  if (expressions.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < expressions.size(); ++i) {
    const auto& a = expressions[i];
    const auto& b = expressions[best];
    if (similarities[i] != similarities[best]) {
      if (similarities[i] > similarities[best]) best = i;
    } else if (a.mention_count != b.mention_count) {
      if (a.mention_count < b.mention_count) best = i;
    } else if (a.text < b.text) {
      best = i;
    }
  }
  return Selection{best, similarities[best]};
}

std::optional<Selection> select_optimal(const TextEncoder& encoder, const std::string& question,
                                        std::span<const Expression> expressions) {
  if (expressions.empty()) return std::nullopt;
  std::vector<std::string> texts;
  texts.reserve(expressions.size());
  for (const auto& e : expressions) texts.push_back(e.text);
  const auto sims = encoder.similarities(question, texts);
  return select_by_similarity(expressions, sims);
}

nn::Var triplet_loss(nn::Var q, nn::Var positives, nn::Var negatives, double margin) {
  if (margin < 0.0) throw InvalidArgument("margin must be non-negative");
  const auto sp = nn::cosine_rows(positives, q);
  const auto sn = nn::cosine_rows(negatives, q);
  std::vector<std::uint32_t> pi, ni;
  for (std::uint32_t p = 0; p < positives.rows(); ++p) {
    for (std::uint32_t n = 0; n < negatives.rows(); ++n) {
      pi.push_back(p);
      ni.push_back(n);
    }
  }
  if (pi.empty()) return q.tape().constant(nn::Tensor::scalar(0.0));
  const auto gap = nn::sub(nn::gather_rows(sn, ni), nn::gather_rows(sp, pi));
  return nn::sum(nn::relu(nn::add_scalar(gap, margin)));
}

}  // namespace kgqa
