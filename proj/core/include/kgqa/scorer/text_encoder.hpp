#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgqa/numerics/gru.hpp"
#include "kgqa/numerics/tape.hpp"
#include "kgqa/reasoner/subgraph.hpp"
#include "kgqa/text/token_provider.hpp"

namespace kgqa {

struct TextEncoderConfig {
  std::size_t dim = 64;
  double margin = 0.1;
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  std::uint64_t seed = 7;
};

/// Sentence encoder for questions and expressions: token lookup followed by a
/// bidirectional GRU whose two final states are averaged. Similarity is cosine.
class TextEncoder {
 public:
  TextEncoder(std::shared_ptr<const TokenProvider> provider, TextEncoderConfig config);
  TextEncoder(std::shared_ptr<const TokenProvider> provider, TextEncoderConfig config,
              nn::ParameterStore params);
  TextEncoder(TextEncoder&&) noexcept = default;
  TextEncoder& operator=(TextEncoder&&) noexcept = default;
  TextEncoder(const TextEncoder&) = delete;
  TextEncoder& operator=(const TextEncoder&) = delete;

  const TextEncoderConfig& config() const { return config_; }
  TextEncoderConfig& config() { return config_; }
  const TokenProvider& provider() const { return *provider_; }
  std::shared_ptr<const TokenProvider> provider_ptr() const { return provider_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

  /// Encoder bound to one tape.
  class Bound {
   public:
    Bound(nn::Tape& tape, const TextEncoder& encoder);
    /// 1 x d embedding of one text; throws InvalidArgument when it has no tokens.
    nn::Var encode(const std::string& text) const;
    /// One row per text, in input order. Texts are batched by token count.
    nn::Var encode_batch(std::span<const std::string> texts) const;

   private:
    nn::Tape* tape_;
    const TextEncoder* encoder_;
    BoundEmbedding embedding_;
    nn::BoundGru fwd_, bwd_;
  };

  /// Embedding of `text` computed on a throwaway inference tape.
  nn::Tensor encode_text(const std::string& text) const;
  /// Cosine similarity between the question and each text.
  std::vector<double> similarities(const std::string& question,
                                   std::span<const std::string> texts) const;

 private:
  std::shared_ptr<const TokenProvider> provider_;
  TextEncoderConfig config_;
  nn::ParameterStore params_;
  nn::Parameter* tokens_ = nullptr;
  nn::GruParams fwd_, bwd_;
};

struct Selection {
  std::size_t index = 0;  ///< into the expression list
  double similarity = 0.0;
};

/// Highest cosine similarity to the question; ties go to the smaller
/// mention count, then to the lexicographically smaller text. nullopt for an
/// empty expression list.
std::optional<Selection> select_optimal(const TextEncoder& encoder, const std::string& question,
                                        std::span<const Expression> expressions);

/// Same selection rule applied to precomputed similarities.
std::optional<Selection> select_by_similarity(std::span<const Expression> expressions,
                                              std::span<const double> similarities);

/// Sum over (positive, negative) pairs of max(sim_n - sim_p + margin, 0).
/// `positives` and `negatives` hold one embedding per row; q is 1 x d.
nn::Var triplet_loss(nn::Var q, nn::Var positives, nn::Var negatives, double margin);

}  // namespace kgqa
