#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgqa/numerics/parameters.hpp"
#include "kgqa/numerics/tape.hpp"

namespace kgqa {

/// Token to index map. Index 0 is always the out-of-vocabulary token.
class Vocabulary {
 public:
  static constexpr std::uint32_t kUnk = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  std::uint32_t add(const std::string& token);
  std::uint32_t index(std::string_view token) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Keeps tokens seen at least `min_count` times, plus everything in `always`.
  /// Insertion order is deterministic: `always` first, then by first appearance.
  static Vocabulary build(std::span<const std::vector<std::string>> texts, std::size_t min_count,
                          std::span<const std::string> always = {});

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Source of initial token vectors.
///
/// File-backed providers hold frozen vectors exported offline (for instance
/// contextual embeddings); trainable providers only fix the vocabulary and the
/// dimension, and each model owns its own lookup table.
class TokenProvider {
 public:
  enum class Mode { file_backed, trainable };

  static TokenProvider trainable(Vocabulary vocab, std::size_t dim);
  /// Header line `d_in`, then `token<TAB>v1 v2 ... v_d` per line. A `<unk>` row,
  /// if present, becomes the OOV vector; otherwise OOV maps to zeros.
  static TokenProvider load_file(const std::filesystem::path& path);
  static TokenProvider file_backed(Vocabulary vocab, nn::Tensor vectors);

  Mode mode() const { return mode_; }
  std::size_t dim() const { return dim_; }
  const Vocabulary& vocab() const { return vocab_; }
  /// Frozen vectors, one row per vocabulary entry (file-backed mode only).
  const nn::Tensor& vectors() const { return vectors_; }

  std::vector<std::uint32_t> ids(std::span<const std::string> tokens) const;

 private:
  Mode mode_ = Mode::trainable;
  std::size_t dim_ = 0;
  Vocabulary vocab_;
  nn::Tensor vectors_;
};

/// A model's token lookup bound to one tape.
class BoundEmbedding {
 public:
  BoundEmbedding(nn::Tape& tape, const TokenProvider& provider, nn::Parameter* table);

  /// Time-major steps for a batch of equal-length id sequences:
  /// result[t] is batch_size x dim with row b = vector of batch[b][t].
  std::vector<nn::Var> steps(std::span<const std::vector<std::uint32_t>> batch) const;
  std::vector<nn::Var> steps(const std::vector<std::uint32_t>& sequence) const;

 private:
  nn::Tape* tape_;
  const TokenProvider* provider_;
  nn::Var table_;
};

/// Registers `name` as a trainable table (trainable providers only); returns
/// nullptr for file-backed providers, whose vectors stay frozen.
nn::Parameter* create_token_table(const TokenProvider& provider, nn::ParameterStore& store,
                                  const std::string& name, nn::Rng& rng);

}  // namespace kgqa
