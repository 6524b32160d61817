#include "app.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgqa/gnn/gnn_model.hpp"
#include "kgqa/io/checkpoint.hpp"
#include "kgqa/pipeline/pipeline.hpp"
#include "kgqa/pipeline/synthetic.hpp"
#include "kgqa/pipeline/vocab.hpp"
#include "kgqa/scorer/weak_labels.hpp"
#include "kgqa/text/tokenizer.hpp"

namespace kgqa::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kTriplesFile = "triples.tsv";
constexpr const char* kEntitiesFile = "entities.tsv";
constexpr const char* kRelationsFile = "relations.tsv";

void need(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

const std::string& require_path(const std::string& path, const std::string& flag) {
  if (path.empty()) throw PathError(flag + " is required");
  if (!fs::exists(path)) throw PathError(flag + ": '" + path + "' does not exist");
  return path;
}

const std::string& require_output(const std::string& path, const std::string& flag) {
  if (path.empty()) throw PathError(flag + " is required");
  const auto parent = fs::absolute(path).parent_path();
  if (!fs::is_directory(parent)) {
    throw PathError(flag + ": directory '" + parent.string() + "' does not exist");
  }
  return path;
}

std::string labels_path(const RunConfig& cfg) {
  return cfg.labels.empty() ? cfg.ckpt_encoder + ".labels.jsonl" : cfg.labels;
}

/// Writes to cfg.out when set, otherwise to the fallback stream.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw PathError("cannot write '" + path + "'");
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

std::shared_ptr<const TokenProvider> token_provider(const RunConfig& cfg, const KnowledgeGraph& kg,
                                                    const std::vector<QaExample>& train) {
  if (!cfg.tokens.empty()) {
    return std::make_shared<const TokenProvider>(
        TokenProvider::load_file(require_path(cfg.tokens, "--tokens")));
  }
  return std::make_shared<const TokenProvider>(
      TokenProvider::trainable(corpus_vocabulary(kg, train), cfg.dim));
}

PipelineConfig pipeline_config(const RunConfig& cfg) {
  PipelineConfig pc;
  pc.top_n = cfg.top_n;
  pc.max_len = cfg.max_len;
  pc.multiplier = cfg.multiplier;
  pc.fast = cfg.fast;
  return pc;
}

TextEncoderConfig encoder_config(const RunConfig& cfg) {
  TextEncoderConfig tc;
  tc.dim = cfg.dim;
  tc.margin = cfg.margin_ft;
  tc.seed = cfg.seed;
  if (cfg.epochs) tc.epochs = *cfg.epochs;
  if (cfg.lr) tc.learning_rate = *cfg.lr;
  return tc;
}

/// The encoder provider shares the graph model's vocabulary; frozen vectors
/// are shared as they are.
std::shared_ptr<const TokenProvider> encoder_provider(const GnnModel& gnn, std::size_t dim) {
  if (gnn.provider().mode() == TokenProvider::Mode::file_backed) return gnn.provider_ptr();
  return std::make_shared<const TokenProvider>(TokenProvider::trainable(gnn.provider().vocab(), dim));
}

struct Models {
  KnowledgeGraph kg;
  std::optional<GnnModel> gnn;
  std::optional<TextEncoder> encoder;
  std::string mode;
};

Models load_models(const RunConfig& cfg) {
  require_path(cfg.kg, "--kg");
  require_path(cfg.ckpt_gnn, "--ckpt-gnn");
  if (!cfg.graph_only && !cfg.skip_finetune) {
    if (cfg.ckpt_encoder.empty()) {
      throw PathError("--ckpt-encoder is required unless --skip-finetune or --graph-only is given");
    }
    require_path(cfg.ckpt_encoder, "--ckpt-encoder");
  }
  Models m;
  m.kg = load_kg_dir(cfg.kg);
  m.gnn.emplace(load_gnn(cfg.ckpt_gnn));
  if (cfg.graph_only) {
    m.mode = "graph-only";
  } else if (cfg.skip_finetune) {
    auto tc = encoder_config(cfg);
    tc.dim = m.gnn->config().dim;
    m.encoder.emplace(encoder_provider(*m.gnn, tc.dim), tc);
    m.mode = cfg.fast ? "fast-unfinetuned" : "unfinetuned";
  } else {
    m.encoder.emplace(load_text_encoder(cfg.ckpt_encoder));
    m.mode = cfg.fast ? "fast" : "full";
  }
  return m;
}

json answer_record(const AnswerResult& r, const KnowledgeGraph& kg, const std::string& mode) {
  auto j = json::parse(answer_json(r, kg, -1));
  j["mode"] = mode;
  return j;
}

std::vector<EntityId> candidate_ids(const GnnModel& gnn, const GraphIndex& graph,
                                    const QaExample& ex, const KnowledgeGraph& kg,
                                    std::size_t top_n) {
  std::vector<EntityId> ids;
  for (const auto& c : select_candidates(gnn.distances(graph, ex, kg), top_n)) {
    ids.push_back(c.entity);
  }
  return ids;
}

std::string render_triple(const Triple& t, const KnowledgeGraph& kg) {
  return "(" + kg.entity_label(t.head) + ", " + kg.relation_label(t.relation) + ", " +
         kg.entity_label(t.tail) + ")";
}

}  // namespace

void RunConfig::validate() const {
  need(layers >= 1, "--layers must be at least 1");
  need(dim >= 1, "--dim must be at least 1");
  need(margin >= 0.0, "--margin must be non-negative");
  need(margin_ft >= 0.0, "--margin-ft must be non-negative");
  need(top_n >= 1, "--top-n must be at least 1");
  need(max_len >= 1, "--max-len must be at least 1");
  need(multiplier >= 1.0, "--multiplier must be at least 1");
  need(!lr || *lr > 0.0, "--lr must be positive");
  need(hops >= 1, "--hops must be at least 1");
  need(entities >= 2, "--entities must be at least 2");
  need(relations >= 1, "--relations must be at least 1");
  need(max_answers >= 1, "--max-answers must be at least 1");
}

KnowledgeGraph load_kg_dir(const std::string& dir) {
  require_path(dir, "--kg");
  if (!fs::is_directory(dir)) throw PathError("--kg: '" + dir + "' is not a directory");
  const fs::path d(dir);
  for (const char* f : {kTriplesFile, kEntitiesFile, kRelationsFile}) {
    if (!fs::exists(d / f)) throw PathError("--kg: missing " + (d / f).string());
  }
  return KnowledgeGraph::load(d / kTriplesFile, d / kEntitiesFile, d / kRelationsFile);
}

void write_kg_dir(const KnowledgeGraph& kg, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path d(dir);
  kg.write(d / kTriplesFile, d / kEntitiesFile, d / kRelationsFile);
}

void cmd_train_gnn(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  cfg.validate();
  require_path(cfg.kg, "--kg");
  require_path(cfg.train, "--train");
  if (!cfg.valid.empty()) require_path(cfg.valid, "--valid");
  require_output(cfg.ckpt_gnn, "--ckpt-gnn");

  const auto kg = load_kg_dir(cfg.kg);
  const auto train = load_dataset(cfg.train, kg);
  const auto valid = cfg.valid.empty() ? std::vector<QaExample>{} : load_dataset(cfg.valid, kg);

  GnnConfig gc;
  gc.layers = cfg.layers;
  gc.dim = cfg.dim;
  gc.margin = cfg.margin;
  gc.seed = cfg.seed;
  if (cfg.epochs) gc.epochs = *cfg.epochs;
  if (cfg.lr) gc.learning_rate = *cfg.lr;
  GnnModel gnn(token_provider(cfg, kg, train), gc);
  log << "train-gnn: " << train.size() << " train / " << valid.size() << " valid questions, "
      << kg.entity_count() << " entities, vocabulary " << gnn.provider().vocab().size() << "\n";

  json epochs = json::array();
  gnn.train(kg, train, valid, [&](std::size_t epoch, double loss, double hits) {
    log << "epoch " << epoch << " loss " << loss << " valid_hits@1 " << hits << "\n" << std::flush;
    epochs.push_back({{"epoch", epoch}, {"loss", loss}, {"valid_hits_at_1", hits}});
  });
  save_gnn(cfg.ckpt_gnn, gnn);
  log << "wrote " << cfg.ckpt_gnn << "\n";

  json report{{"checkpoint", cfg.ckpt_gnn}, {"epochs", std::move(epochs)}};
  Output o(cfg.out, out);
  *o << report.dump(2) << "\n";
}

void cmd_finetune(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  cfg.validate();
  require_path(cfg.kg, "--kg");
  require_path(cfg.train, "--train");
  if (!cfg.valid.empty()) require_path(cfg.valid, "--valid");
  require_path(cfg.ckpt_gnn, "--ckpt-gnn");
  require_output(cfg.ckpt_encoder, "--ckpt-encoder");
  const auto cache = labels_path(cfg);
  require_output(cache, "--labels");

  const auto kg = load_kg_dir(cfg.kg);
  const auto train = load_dataset(cfg.train, kg);
  const auto valid = cfg.valid.empty() ? std::vector<QaExample>{} : load_dataset(cfg.valid, kg);
  const auto gnn = load_gnn(cfg.ckpt_gnn);

  std::map<std::string, WeakLabelSet> by_id;
  if (fs::exists(cache)) {
    for (auto& s : load_label_cache(cache)) by_id.emplace(s.question_id, std::move(s));
    log << "finetune: using cached weak labels from " << cache << " (" << by_id.size()
        << " questions); regeneration skipped\n";
  }
  std::vector<WeakLabelSet> fresh;
  const auto graph = GraphIndex::build(kg, gnn.provider());
  auto examples = [&](const std::vector<QaExample>& data) {
    std::vector<FinetuneExample> res;
    for (const auto& ex : data) {
      auto it = by_id.find(ex.id);
      if (it == by_id.end()) {
        auto labels = predict_pos_neg(ex, candidate_ids(gnn, graph, ex, kg, cfg.top_n), kg, cfg.max_len);
        fresh.push_back(labels);
        it = by_id.emplace(ex.id, std::move(labels)).first;
      }
      res.push_back(to_finetune_example(ex, it->second));
      if (!res.back().usable()) {
        log << "skipped " << ex.id << ": "
            << (std::count(res.back().positive.begin(), res.back().positive.end(), true) == 0
                    ? "no positive expression"
                    : "no negative expression")
            << "\n";
      }
    }
    return res;
  };
  const auto ft_train = examples(train);
  const auto ft_valid = examples(valid);
  if (!fresh.empty()) {
    std::vector<WeakLabelSet> all;
    for (auto& [id, s] : by_id) all.push_back(s);
    write_label_cache(cache, all);
    log << "wrote weak labels for " << fresh.size() << " questions to " << cache << "\n";
  }

  const auto tc = encoder_config(cfg);
  TextEncoder encoder(encoder_provider(gnn, tc.dim), tc);
  json epochs = json::array();
  finetune(encoder, ft_train, ft_valid,
           [&](std::size_t epoch, double loss, double acc, std::size_t skipped) {
             log << "epoch " << epoch << " loss " << loss << " valid_selection_accuracy " << acc
                 << " skipped " << skipped << "\n" << std::flush;
             epochs.push_back({{"epoch", epoch},
                               {"loss", loss},
                               {"valid_selection_accuracy", acc},
                               {"skipped", skipped}});
           });
  save_text_encoder(cfg.ckpt_encoder, encoder);
  log << "wrote " << cfg.ckpt_encoder << "\n";

  json report{{"checkpoint", cfg.ckpt_encoder}, {"labels", cache}, {"epochs", std::move(epochs)}};
  Output o(cfg.out, out);
  *o << report.dump(2) << "\n";
}

void cmd_answer(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  cfg.validate();
  require_path(cfg.test, "--test");
  const auto m = load_models(cfg);
  const auto data = load_dataset(cfg.test, m.kg);
  const auto results =
      answer_all(data, m.kg, *m.gnn, m.encoder ? &*m.encoder : nullptr, pipeline_config(cfg));
  Output o(cfg.out, out);
  std::size_t fallbacks = 0;
  for (const auto& r : results) {
    fallbacks += r.fallback;
    *o << answer_record(r, m.kg, m.mode).dump() << "\n";
  }
  log << "answer: " << results.size() << " questions (" << m.mode << "), " << fallbacks
      << " fell back to graph-only answers\n";
}

void cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  cfg.validate();
  require_path(cfg.test, "--test");
  const auto m = load_models(cfg);
  const auto data = load_dataset(cfg.test, m.kg);
  const auto results =
      answer_all(data, m.kg, *m.gnn, m.encoder ? &*m.encoder : nullptr, pipeline_config(cfg));

  json report;
  report["mode"] = m.mode;
  report["questions"] = data.size();
  report["qa"] = json::parse(metrics_json(score_answers(data, results), -1));
  const bool chains = std::all_of(data.begin(), data.end(),
                                  [](const QaExample& ex) { return !ex.gold_chain.empty(); });
  if (chains && !data.empty()) {
    report["explanations"] = json::parse(metrics_json(score_explanations(data, results, m.kg), -1));
  } else {
    report["explanations"] = nullptr;
    log << "eval: some questions lack gold chains; explanation metrics skipped\n";
  }
  log << "eval: hits@1 " << report["qa"]["hits_at_1"].get<double>() << " f1 "
      << report["qa"]["f1"].get<double>() << "\n";
  Output o(cfg.out, out);
  *o << report.dump(2) << "\n";
}

void cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  cfg.validate();
  if (cfg.out.empty()) throw PathError("--out (output directory) is required");
  SyntheticConfig sc;
  sc.entities = cfg.entities;
  sc.relations = cfg.relations;
  sc.triples = cfg.triples;
  sc.hops = cfg.hops;
  sc.train = cfg.n_train;
  sc.valid = cfg.n_valid;
  sc.test = cfg.n_test;
  sc.max_answers = cfg.max_answers;
  sc.seed = cfg.seed;
  const auto bench = generate_synthetic(sc);

  const fs::path dir(cfg.out);
  write_kg_dir(bench.kg, (dir / "kg").string());
  write_dataset(dir / "train.jsonl", bench.train, bench.kg);
  write_dataset(dir / "valid.jsonl", bench.valid, bench.kg);
  write_dataset(dir / "test.jsonl", bench.test, bench.kg);
  log << "synth: wrote " << bench.kg.entity_count() << " entities, " << bench.kg.triple_count()
      << " triples and " << bench.train.size() + bench.valid.size() + bench.test.size()
      << " questions to " << dir.string() << "\n";
  json report{{"kg", (dir / "kg").string()},
               {"train", (dir / "train.jsonl").string()},
               {"valid", (dir / "valid.jsonl").string()},
               {"test", (dir / "test.jsonl").string()},
               {"entities", bench.kg.entity_count()},
               {"triples", bench.kg.triple_count()},
               {"hops", sc.hops}};
  out << report.dump(2) << "\n";
}

std::vector<EntityId> detect_topics(const std::string& question, const KnowledgeGraph& kg) {
  std::map<std::vector<std::string>, EntityId> labels;
  std::size_t longest = 0;
  for (std::uint32_t e = 0; e < kg.entity_count(); ++e) {
    auto toks = tokenize(kg.entity_label(EntityId{e}));
    if (toks.empty()) continue;
    longest = std::max(longest, toks.size());
    labels.emplace(std::move(toks), EntityId{e});  // first id wins on duplicate labels
  }
  const auto toks = tokenize(question);
  std::vector<EntityId> found;
  for (std::size_t i = 0; i < toks.size();) {
    std::size_t matched = 0;
    for (std::size_t n = std::min(longest, toks.size() - i); n > 0 && matched == 0; --n) {
      const std::vector<std::string> span(toks.begin() + i, toks.begin() + i + n);
      if (auto it = labels.find(span); it != labels.end()) {
        if (std::find(found.begin(), found.end(), it->second) == found.end()) {
          found.push_back(it->second);
        }
        matched = n;
      }
    }
    i += std::max<std::size_t>(matched, 1);
  }
  return found;
}

void cmd_interactive(const RunConfig& cfg, std::istream& in, std::ostream& out, std::ostream& log) {
  cfg.validate();
  const auto m = load_models(cfg);
  const auto graph = GraphIndex::build(m.kg, m.gnn->provider());
  const auto pc = pipeline_config(cfg);
  log << "interactive (" << m.mode << "): one question per line, optionally followed by a tab "
      << "and comma-separated topic entity ids; 'quit' exits\n";
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line == "quit" || line == "exit") break;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    QaExample ex;
    ex.id = "q" + std::to_string(n++);
    if (const auto tab = line.find('\t'); tab != std::string::npos) {
      ex.question = line.substr(0, tab);
      std::stringstream keys(line.substr(tab + 1));
      std::string key;
      try {
        while (std::getline(keys, key, ',')) {
          if (!key.empty()) ex.topic_entities.push_back(m.kg.entity(key));
        }
      } catch (const UnknownIdError& e) {
        out << "error: " << e.what() << "\n" << std::flush;
        continue;
      }
    } else {
      ex.question = line;
      ex.topic_entities = detect_topics(line, m.kg);
    }
    if (ex.topic_entities.empty()) {
      out << "error: no topic entity recognised; append a tab and entity ids\n" << std::flush;
      continue;
    }
    const auto r = answer(ex, m.kg, graph, *m.gnn, m.encoder ? &*m.encoder : nullptr, pc);
    out << "answer: " << m.kg.entity_label(r.top1) << " [" << m.kg.entity_key(r.top1) << "]\n";
    if (r.answers.size() > 1) {
      out << "all answers:";
      for (const auto& c : r.answers) out << " " << m.kg.entity_label(c.entity) << ";";
      out << "\n";
    }
    if (r.fallback) out << "no reasoning subgraph found; graph-only answer\n";
    if (!r.expression.empty()) out << "expression: " << r.expression << "\n";
    for (const auto& sg : r.subgraphs) {
      out << "subgraph for " << m.kg.entity_label(sg.answer) << ":\n";
      for (const auto t : sg.triples()) out << "  " << render_triple(m.kg.triple(t), m.kg) << "\n";
    }
    out << std::flush;
  }
}

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Two-step question answering over knowledge graphs"};
  app.set_config("--config", "", "Flat key = value file; flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  auto* g = "Paths";
  app.add_option("--kg", cfg.kg, "KG directory (triples.tsv, entities.tsv, relations.tsv)")->group(g);
  app.add_option("--train", cfg.train, "Training questions (JSONL)")->group(g);
  app.add_option("--valid", cfg.valid, "Validation questions (JSONL)")->group(g);
  app.add_option("--test", cfg.test, "Questions to answer or evaluate (JSONL)")->group(g);
  app.add_option("--tokens", cfg.tokens, "Frozen token vectors (header d, then token<TAB>values)")->group(g);
  app.add_option("--ckpt-gnn", cfg.ckpt_gnn, "Graph model checkpoint")->group(g);
  app.add_option("--ckpt-encoder", cfg.ckpt_encoder, "Text encoder checkpoint")->group(g);
  app.add_option("--labels", cfg.labels, "Weak-label cache (default <ckpt-encoder>.labels.jsonl)")->group(g);
  app.add_option("--out", cfg.out, "Output file (synth: output directory)")->group(g);

  g = "Model";
  app.add_option("--layers", cfg.layers, "Graph layers")->capture_default_str()->group(g);
  app.add_option("--dim", cfg.dim, "Embedding width")->capture_default_str()->group(g);
  app.add_option("--margin", cfg.margin, "Graph ranking margin")->capture_default_str()->group(g);
  app.add_option("--margin-ft", cfg.margin_ft, "Fine-tuning triplet margin")->capture_default_str()->group(g);
  app.add_option("--top-n", cfg.top_n, "Candidates kept after the graph step")->capture_default_str()->group(g);
  app.add_option("--max-len", cfg.max_len, "Longest path considered")->capture_default_str()->group(g);
  app.add_option("--multiplier", cfg.multiplier, "Graph-only answer threshold")->capture_default_str()->group(g);
  app.add_option("--epochs", cfg.epochs, "Training epochs (default per model)")->group(g);
  app.add_option("--lr", cfg.lr, "Learning rate (default per model)")->group(g);
  app.add_option("--seed", cfg.seed, "Seed for every random choice")->capture_default_str()->group(g);

  g = "Modes";
  app.add_flag("--fast", cfg.fast, "Shortest paths only")->group(g);
  app.add_flag("--skip-finetune", cfg.skip_finetune, "Use an untrained text encoder")->group(g);
  app.add_flag("--graph-only", cfg.graph_only, "Skip the subgraph step")->group(g);

  g = "Synthetic data";
  app.add_option("--entities", cfg.entities)->capture_default_str()->group(g);
  app.add_option("--relations", cfg.relations)->capture_default_str()->group(g);
  app.add_option("--triples", cfg.triples)->capture_default_str()->group(g);
  app.add_option("--hops", cfg.hops)->capture_default_str()->group(g);
  app.add_option("--n-train", cfg.n_train)->capture_default_str()->group(g);
  app.add_option("--n-valid", cfg.n_valid)->capture_default_str()->group(g);
  app.add_option("--n-test", cfg.n_test)->capture_default_str()->group(g);
  app.add_option("--max-answers", cfg.max_answers)->capture_default_str()->group(g);

  auto* train_gnn = app.add_subcommand("train-gnn", "Train the graph model");
  auto* ft = app.add_subcommand("finetune", "Build weak labels and fine-tune the text encoder");
  auto* ans = app.add_subcommand("answer", "Answer questions; one JSON record per line");
  auto* ev = app.add_subcommand("eval", "Answer and score questions; JSON metrics report");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic KG and question set");
  auto* inter = app.add_subcommand("interactive", "Answer questions read from standard input");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_gnn) cmd_train_gnn(cfg, out, err);
    else if (*ft) cmd_finetune(cfg, out, err);
    else if (*ans) cmd_answer(cfg, out, err);
    else if (*ev) cmd_eval(cfg, out, err);
    else if (*synth) cmd_synth(cfg, out, err);
    else if (*inter) cmd_interactive(cfg, in, out, err);
    return kOk;
  } catch (const PathError& e) {
    err << "error: " << e.what() << "\n";
    return kMissingPath;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const LoadError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const UnknownIdError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace kgqa::cli
