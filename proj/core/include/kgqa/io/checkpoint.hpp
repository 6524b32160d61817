#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "kgqa/gnn/gnn_model.hpp"
#include "kgqa/numerics/tensor.hpp"
#include "kgqa/scorer/text_encoder.hpp"
#include "kgqa/text/token_provider.hpp"

namespace kgqa {

/// Raw checkpoint contents: a JSON metadata document plus named tensors.
/// The byte layout is described in docs/checkpoint-format.md.
struct Checkpoint {
  std::string meta;
  std::vector<std::pair<std::string, nn::Tensor>> tensors;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

void save_gnn(const std::filesystem::path& path, const GnnModel& model);
GnnModel load_gnn(const std::filesystem::path& path);

void save_text_encoder(const std::filesystem::path& path, const TextEncoder& encoder);
/// Reuses `provider` when given (it must match the stored vocabulary);
/// otherwise the provider stored in the file is rebuilt.
TextEncoder load_text_encoder(const std::filesystem::path& path,
                              std::shared_ptr<const TokenProvider> provider = nullptr);

}  // namespace kgqa
