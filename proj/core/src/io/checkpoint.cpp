#include "kgqa/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "kgqa/error.hpp"

namespace kgqa {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'K', 'G', 'Q', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kVectorsName = "provider.vectors";

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& where) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw LoadError(where + ": truncated checkpoint");
  }
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const std::string& where) {
  if (n > (1ULL << 32)) throw LoadError(where + ": implausible length field");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw LoadError(where + ": truncated checkpoint");
  }
  return s;
}

json provider_meta(const TokenProvider& p) {
  json j;
  j["mode"] = p.mode() == TokenProvider::Mode::trainable ? "trainable" : "file";
  j["dim"] = p.dim();
  j["vocab"] = p.vocab().tokens();
  return j;
}

std::shared_ptr<const TokenProvider> provider_from(const json& j, const Checkpoint& ckpt) {
  Vocabulary vocab;
  const auto tokens = j.at("vocab").get<std::vector<std::string>>();
  if (tokens.empty() || tokens.front() != Vocabulary::kUnkToken) {
    throw LoadError("checkpoint vocabulary must start with " + std::string(Vocabulary::kUnkToken));
  }
  for (std::size_t i = 1; i < tokens.size(); ++i) vocab.add(tokens[i]);
  if (vocab.size() != tokens.size()) throw LoadError("checkpoint vocabulary has duplicates");
  const auto dim = j.at("dim").get<std::size_t>();
  if (j.at("mode").get<std::string>() == "trainable") {
    return std::make_shared<const TokenProvider>(TokenProvider::trainable(std::move(vocab), dim));
  }
  for (const auto& [name, t] : ckpt.tensors) {
    if (name == kVectorsName) {
      return std::make_shared<const TokenProvider>(TokenProvider::file_backed(std::move(vocab), t));
    }
  }
  throw LoadError("file-backed provider without stored vectors");
}

Checkpoint pack(json meta, const nn::ParameterStore& params, const TokenProvider& provider) {
  Checkpoint c;
  meta["provider"] = provider_meta(provider);
  c.meta = meta.dump();
  for (const auto& [name, p] : params) c.tensors.emplace_back(name, p.value);
  if (provider.mode() == TokenProvider::Mode::file_backed) {
    c.tensors.emplace_back(kVectorsName, provider.vectors());
  }
  return c;
}

nn::ParameterStore unpack(const Checkpoint& c) {
  nn::ParameterStore store;
  for (const auto& [name, t] : c.tensors) {
    if (name != kVectorsName) store.add(name, t);
  }
  return store;
}

json parse_meta(const Checkpoint& c, const std::string& kind, const std::filesystem::path& path) {
  json meta;
  try {
    meta = json::parse(c.meta);
  } catch (const json::parse_error& e) {
    throw LoadError(path.string() + ": bad metadata: " + e.what());
  }
  if (meta.value("kind", "") != kind) {
    throw LoadError(path.string() + ": expected a '" + kind + "' checkpoint, found '" +
                    meta.value("kind", "") + "'");
  }
  return meta;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, ckpt.meta.size());
  out.write(ckpt.meta.data(), static_cast<std::streamsize>(ckpt.meta.size()));
  put<std::uint64_t>(out, ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, t.rows());
    put<std::uint64_t>(out, t.cols());
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw LoadError("failed while writing checkpoint '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  const std::string where = path.string();
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw LoadError(where + ": not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in, where);
  if (version != kVersion) {
    throw LoadError(where + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.meta = get_bytes(in, get<std::uint64_t>(in, where), where);
  const auto count = get<std::uint64_t>(in, where);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = get_bytes(in, get<std::uint32_t>(in, where), where);
    const auto rows = get<std::uint64_t>(in, where);
    const auto cols = get<std::uint64_t>(in, where);
    if (rows > (1ULL << 28) || cols > (1ULL << 28)) throw LoadError(where + ": implausible shape");
    nn::Tensor t(rows, cols);
    if (t.size() > 0 && !in.read(reinterpret_cast<char*>(t.data()),
                                 static_cast<std::streamsize>(t.size() * sizeof(double)))) {
      throw LoadError(where + ": truncated tensor '" + name + "'");
    }
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError(where + ": trailing bytes");
  return c;
}

void save_gnn(const std::filesystem::path& path, const GnnModel& model) {
  const auto& cfg = model.config();
  json meta;
  meta["kind"] = "gnn";
  meta["config"] = {{"layers", cfg.layers},
                    {"dim", cfg.dim},
                    {"margin", cfg.margin},
                    {"pairs_per_question", cfg.pairs_per_question},
                    {"epochs", cfg.epochs},
                    {"learning_rate", cfg.learning_rate},
                    {"seed", cfg.seed}};
  write_checkpoint(path, pack(std::move(meta), model.params(), model.provider()));
}

GnnModel load_gnn(const std::filesystem::path& path) {
  const auto c = read_checkpoint(path);
  const auto meta = parse_meta(c, "gnn", path);
  try {
    const auto& j = meta.at("config");
    GnnConfig cfg;
    cfg.layers = j.at("layers").get<std::size_t>();
    cfg.dim = j.at("dim").get<std::size_t>();
    cfg.margin = j.at("margin").get<double>();
    cfg.pairs_per_question = j.at("pairs_per_question").get<std::size_t>();
    cfg.epochs = j.at("epochs").get<std::size_t>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return GnnModel(provider_from(meta.at("provider"), c), cfg, unpack(c));
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const UnknownIdError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

void save_text_encoder(const std::filesystem::path& path, const TextEncoder& encoder) {
  const auto& cfg = encoder.config();
  json meta;
  meta["kind"] = "text";
  meta["config"] = {{"dim", cfg.dim},
                    {"margin", cfg.margin},
                    {"epochs", cfg.epochs},
                    {"learning_rate", cfg.learning_rate},
                    {"seed", cfg.seed}};
  write_checkpoint(path, pack(std::move(meta), encoder.params(), encoder.provider()));
}

TextEncoder load_text_encoder(const std::filesystem::path& path,
                              std::shared_ptr<const TokenProvider> provider) {
  const auto c = read_checkpoint(path);
  const auto meta = parse_meta(c, "text", path);
  try {
    const auto& j = meta.at("config");
    TextEncoderConfig cfg;
    cfg.dim = j.at("dim").get<std::size_t>();
    cfg.margin = j.at("margin").get<double>();
    cfg.epochs = j.at("epochs").get<std::size_t>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    auto stored = provider_from(meta.at("provider"), c);
    if (provider && provider->vocab().tokens() != stored->vocab().tokens()) {
      throw LoadError(path.string() + ": vocabulary differs from the supplied token provider");
    }
    return TextEncoder(provider ? provider : stored, cfg, unpack(c));
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const UnknownIdError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace kgqa
