#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kgqa/error.hpp"
#include "kgqa/kg/knowledge_graph.hpp"

namespace kgqa::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,        // anything unexpected
  kUsage = 2,          // bad flags or arguments
  kMissingPath = 3,    // a required file or directory does not exist
  kBadInput = 4,       // malformed KG, dataset, token or checkpoint file
  kBadConfig = 5,      // value out of range
  kNumeric = 6,        // training diverged
};

/// A flag value outside its allowed range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A required path is missing or does not exist.
class PathError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  // paths
  std::string kg;  ///< directory with triples.tsv, entities.tsv, relations.tsv
  std::string train, valid, test;
  std::string tokens;  ///< optional frozen token vectors
  std::string ckpt_gnn, ckpt_encoder;
  std::string labels;  ///< weak-label cache; defaults to <ckpt_encoder>.labels.jsonl
  std::string out;

  // model and search
  std::size_t layers = 3;
  std::size_t dim = 64;
  double margin = 1.0;
  double margin_ft = 0.1;
  std::size_t top_n = 10;
  std::size_t max_len = 2;
  double multiplier = 1.05;
  std::optional<std::size_t> epochs;  ///< unset: the trained module's default
  std::optional<double> lr;
  std::uint64_t seed = 7;

  // modes
  bool fast = false;
  bool skip_finetune = false;  ///< answer with an untrained text encoder
  bool graph_only = false;     ///< answer with the graph step alone

  // synth
  std::size_t entities = 500;
  std::size_t relations = 12;
  std::size_t triples = 1500;
  std::size_t hops = 2;
  std::size_t n_train = 200, n_valid = 50, n_test = 50;
  std::size_t max_answers = 3;

  /// Throws ConfigError for out-of-range values.
  void validate() const;
};

KnowledgeGraph load_kg_dir(const std::string& dir);
void write_kg_dir(const KnowledgeGraph& kg, const std::string& dir);

/// Each command logs progress to `log` and writes its primary output to
/// `cfg.out` (or `out` when no path is given).
void cmd_train_gnn(const RunConfig& cfg, std::ostream& out, std::ostream& log);
void cmd_finetune(const RunConfig& cfg, std::ostream& out, std::ostream& log);
void cmd_answer(const RunConfig& cfg, std::ostream& out, std::ostream& log);
void cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& log);
void cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& log);
void cmd_interactive(const RunConfig& cfg, std::istream& in, std::ostream& out, std::ostream& log);

/// Topic entities for a free-form question: longest label matches over the
/// question's tokens, left to right, without overlap.
std::vector<EntityId> detect_topics(const std::string& question, const KnowledgeGraph& kg);

/// Parses flags (and an optional --config file), runs the subcommand and maps
/// errors to exit codes.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace kgqa::cli
