#include "kgqa/text/token_provider.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "kgqa/error.hpp"
#include "kgqa/numerics/ops.hpp"

namespace kgqa {

Vocabulary::Vocabulary() { add(std::string(kUnkToken)); }

std::uint32_t Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.try_emplace(token, static_cast<std::uint32_t>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::uint32_t Vocabulary::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> texts, std::size_t min_count,
                             std::span<const std::string> always) {
  Vocabulary v;
  for (const auto& t : always) v.add(t);
  std::unordered_map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  for (const auto& text : texts) {
    for (const auto& tok : text) {
      if (counts[tok]++ == 0) order.push_back(tok);
    }
  }
  for (const auto& tok : order) {
    if (counts[tok] >= min_count) v.add(tok);
  }
  return v;
}

TokenProvider TokenProvider::trainable(Vocabulary vocab, std::size_t dim) {
  if (dim == 0) throw InvalidArgument("token dimension must be positive");
  TokenProvider p;
  p.mode_ = Mode::trainable;
  p.dim_ = dim;
  p.vocab_ = std::move(vocab);
  return p;
}

TokenProvider TokenProvider::file_backed(Vocabulary vocab, nn::Tensor vectors) {
  if (vectors.rows() != vocab.size()) {
    throw DimensionError("token vectors have " + std::to_string(vectors.rows()) + " rows for " +
                         std::to_string(vocab.size()) + " tokens");
  }
  TokenProvider p;
  p.mode_ = Mode::file_backed;
  p.dim_ = vectors.cols();
  p.vocab_ = std::move(vocab);
  p.vectors_ = std::move(vectors);
  return p;
}

TokenProvider TokenProvider::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open token embeddings '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw LoadError(path.string() + ": missing dimension header");
  std::size_t dim = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> dim) || dim == 0) throw LoadError(path.string() + ": bad dimension header");
  }
  Vocabulary vocab;
  std::vector<double> values(dim, 0.0);  // row 0: <unk>, zeros unless overridden
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (tab == std::string::npos || tab == 0) throw LoadError(where + ": expected token<TAB>vector");
    const std::string token = line.substr(0, tab);
    std::istringstream vs(line.substr(tab + 1));
    std::vector<double> row;
    double x = 0.0;
    while (vs >> x) row.push_back(x);
    if (!vs.eof() || row.size() != dim) {
      throw LoadError(where + ": expected " + std::to_string(dim) + " numbers");
    }
    if (token == Vocabulary::kUnkToken) {
      std::copy(row.begin(), row.end(), values.begin());
      continue;
    }
    if (vocab.contains(token)) throw LoadError(where + ": duplicate token '" + token + "'");
    vocab.add(token);
    values.insert(values.end(), row.begin(), row.end());
  }
  const auto rows = vocab.size();
  return file_backed(std::move(vocab), nn::Tensor(rows, dim, std::move(values)));
}

std::vector<std::uint32_t> TokenProvider::ids(std::span<const std::string> tokens) const {
  std::vector<std::uint32_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(vocab_.index(t));
  return out;
}

nn::Parameter* create_token_table(const TokenProvider& provider, nn::ParameterStore& store,
                                  const std::string& name, nn::Rng& rng) {
  if (provider.mode() == TokenProvider::Mode::file_backed) return nullptr;
  return &store.add(name, nn::uniform_tensor(provider.vocab().size(), provider.dim(), 1.0, rng));
}

BoundEmbedding::BoundEmbedding(nn::Tape& tape, const TokenProvider& provider, nn::Parameter* table)
    : tape_(&tape), provider_(&provider) {
  if (provider.mode() == TokenProvider::Mode::trainable) {
    if (table == nullptr) throw InvalidArgument("trainable token provider without a table");
    if (table->value.rows() != provider.vocab().size() || table->value.cols() != provider.dim()) {
      throw DimensionError("token table " + nn::shape_string(table->value) +
                           " does not match the vocabulary");
    }
    table_ = tape.parameter(*table);
  }
}

std::vector<nn::Var> BoundEmbedding::steps(std::span<const std::vector<std::uint32_t>> batch) const {
  if (batch.empty()) return {};
  const std::size_t len = batch.front().size();
  for (const auto& s : batch) {
    if (s.size() != len) throw DimensionError("batched sequences must share one length");
  }
  std::vector<nn::Var> out;
  out.reserve(len);
  std::vector<std::uint32_t> column(batch.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t b = 0; b < batch.size(); ++b) column[b] = batch[b][t];
    if (table_.valid()) {
      out.push_back(nn::gather_rows(table_, column));
    } else {
      const auto& vec = provider_->vectors();
      nn::Tensor rows(column.size(), vec.cols());
      for (std::size_t b = 0; b < column.size(); ++b) {
        const auto src = vec.row_span(column[b]);
        std::copy(src.begin(), src.end(), rows.row_span(b).begin());
      }
      out.push_back(tape_->constant(std::move(rows)));
    }
  }
  return out;
}

std::vector<nn::Var> BoundEmbedding::steps(const std::vector<std::uint32_t>& sequence) const {
  return steps(std::span<const std::vector<std::uint32_t>>(&sequence, 1));
}

}  // namespace kgqa
