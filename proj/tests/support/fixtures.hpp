#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kgqa/kg/knowledge_graph.hpp"
#include "kgqa/kg/paths.hpp"
#include "kgqa/kg/query.hpp"
#include "kgqa/numerics/parameters.hpp"
#include "kgqa/numerics/tape.hpp"
#include "kgqa/pipeline/dataset.hpp"
#include "kgqa/pipeline/pipeline.hpp"

namespace kgqa::testing {

// Movie graph around the introductory example: Tim Burton was born in
// California and directed Batman 1989, which stars Michael Keaton.
struct MovieGraph {
  KnowledgeGraph kg;
  EntityId tim_burton, california, batman, keaton, nicholson, elfman, scissorhands, depp,
      pennsylvania, new_jersey, usa, kentucky;
  RelationId birthplace, director, cast_member, composer, country;
};
MovieGraph movie_graph();
/// Same graph plus Beetlejuice, a second Burton film starring Keaton.
MovieGraph movie_graph_with_beetlejuice(EntityId* beetlejuice = nullptr);

// University case: what state is saint louis university in?
struct UniversityGraph {
  KnowledgeGraph kg;
  EntityId missouri, st_louis, slu, usa, library;
  RelationId admin_parent, containedby, state;
};
UniversityGraph university_graph();

/// Random multigraph without self loops; duplicate triples are dropped.
KnowledgeGraph random_graph(std::size_t entities, std::size_t relations, std::size_t triples,
                            std::mt19937_64& rng);

// ---- independent oracles ---------------------------------------------------

/// Every simple path of length 1..max_len, found by scanning the raw triple
/// list at each step (no incidence index), sorted by triple id sequence.
std::vector<Path> oracle_paths(const KnowledgeGraph& kg, EntityId s, EntityId t,
                               std::size_t max_len);
/// Shortest simple paths: the oracle paths of the smallest length that has any.
std::vector<Path> oracle_shortest(const KnowledgeGraph& kg, EntityId s, EntityId t);
/// Bindings of the variable by trying every entity and checking each chain
/// with a recursive triple scan.
std::vector<EntityId> oracle_query(const QueryGraph& q, const KnowledgeGraph& kg);

/// Straight transcription of the rewriting rules.
std::string oracle_rewrite(const std::vector<Path>& paths, const std::string& question,
                           const std::vector<EntityId>& topics, const KnowledgeGraph& kg,
                           std::size_t* mentions = nullptr);

struct OracleLabels {
  std::map<std::string, long> votes;
  std::map<std::string, std::size_t> mentions;
  std::set<std::string> positives, negatives;
};
/// Weak labels recomputed from the oracle paths, rewriter and query executor.
OracleLabels oracle_weak_labels(const QaExample& ex, const std::vector<EntityId>& candidates,
                                const KnowledgeGraph& kg, std::size_t max_len);

/// First grounding of a synthetic question's gold chain (answer to topic) as
/// a path. Throws std::runtime_error when a chain triple is missing.
Path planted_path(const QaExample& ex, const KnowledgeGraph& kg, std::size_t hops);

// ---- metric fixture ----------------------------------------------------------

// Ten questions scored by hand. Predicted answer ids double as predicted
// triple ids, and gold answer ids as gold-chain triple ids, so answer and
// explanation scores share the same per-question values:
//   q1 hit 1  P 1    R 1    F1 1      q6  hit 1  P 1    R 1    F1 1
//   q2 hit 0  P .5   R .5   F1 .5     q7  hit 1  P .25  R 1    F1 .4
//   q3 hit 0  P 0    R 0    F1 0      q8  hit 0  P .5   R .5   F1 .5
//   q4 hit 1  P 1    R 1/3  F1 .5     q9  hit 1  P 1    R 1    F1 1
//   q5 hit 0  P 0    R 0    F1 0      q10 hit 1  P 1    R .5   F1 2/3
// q3 returns nothing although its top1 is gold, so it is not a hit.
struct MetricFixture {
  KnowledgeGraph kg;  ///< a chain whose triple i links entity i to entity i + 1
  std::vector<QaExample> data;
  std::vector<AnswerResult> results;
  double hits_at_1, precision, recall, f1;
};
MetricFixture metric_fixture();

// ---- gradient checking -------------------------------------------------------

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  ///< "param[index]" of the worst entry
  std::size_t checked = 0;
  std::size_t kinks = 0;  ///< entries whose stencil straddled a kink, checked one-sided
};

/// |analytic - numeric| / max(|analytic|, |numeric|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-4);

/// Compares backward() against central differences for every scalar of every
/// parameter in `store`. Where the stencil straddles a kink the matching
/// one-sided difference is used instead. `loss` must build a fresh scalar on the given tape.
GradCheck check_gradients(nn::ParameterStore& store,
                          const std::function<nn::Var(nn::Tape&)>& loss, double step = 1e-5);

/// Central-difference check of a loss over leaf tensors that are not
/// parameters: `inputs` are wrapped as temporary parameters.
GradCheck check_input_gradients(std::vector<nn::Tensor> inputs,
                                const std::function<nn::Var(nn::Tape&, std::vector<nn::Var>&)>& f,
                                double step = 1e-5);

// ---- files -------------------------------------------------------------------

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& p, const std::string& content);
std::string read_file(const std::filesystem::path& p);

nn::Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                         double lo = -1.0, double hi = 1.0);

}  // namespace kgqa::testing
