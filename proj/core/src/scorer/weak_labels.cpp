#include "kgqa/scorer/weak_labels.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#include "kgqa/error.hpp"
#include "kgqa/kg/query.hpp"
#include "kgqa/numerics/adam.hpp"
#include "kgqa/numerics/ops.hpp"

namespace kgqa {

using nlohmann::json;

std::vector<std::string> WeakLabelSet::positives() const {
  std::vector<std::string> out;
  for (const auto& it : items) {
    if (it.positive) out.push_back(it.expression.text);
  }
  return out;
}

std::vector<std::string> WeakLabelSet::negatives() const {
  std::vector<std::string> out;
  for (const auto& it : items) {
    if (!it.positive) out.push_back(it.expression.text);
  }
  return out;
}

namespace {

// Subgraphs that differ only in intermediate entities produce the same query.
std::string query_key(const QueryGraph& q) {
  std::string key;
  for (const auto& c : q.chains) {
    key += std::to_string(c.anchor.value) + ':';
    for (const auto& s : c.steps) {
      key += std::to_string(s.relation.value) + (s.inverse ? "-" : "+");
    }
    key += '|';
  }
  return key;
}

}  // namespace

WeakLabelSet predict_pos_neg(const QaExample& ex, std::span<const EntityId> candidates,
                             const KnowledgeGraph& kg, std::size_t max_len) {
  WeakLabelSet out;
  out.question_id = ex.id;
  std::vector<EntityId> universe(candidates.begin(), candidates.end());
  universe.insert(universe.end(), ex.answers.begin(), ex.answers.end());
  const auto subgraphs = extract_candidates(kg, universe, ex.topic_entities, max_len, false);
  const auto expressions = build_expression_set(subgraphs, ex.question, ex.topic_entities, kg);
  if (expressions.empty()) return out;

  std::map<std::string, std::vector<EntityId>> results;
  long max_vote = std::numeric_limits<long>::min();
  for (const auto& expr : expressions) {
    LabeledExpression item{expr, {}, 0, false};
    for (const auto s : expr.sources) {
      const auto q = QueryGraph::from_paths(subgraphs[s].paths);
      auto [it, inserted] = results.try_emplace(query_key(q));
      if (inserted) it->second = execute_query(q, kg);
      item.matched.insert(item.matched.end(), it->second.begin(), it->second.end());
    }
    std::sort(item.matched.begin(), item.matched.end());
    item.matched.erase(std::unique(item.matched.begin(), item.matched.end()), item.matched.end());
    long up = 0;
    for (const auto e : item.matched) {
      if (std::binary_search(ex.answers.begin(), ex.answers.end(), e)) ++up;
    }
    item.vote = up - (static_cast<long>(item.matched.size()) - up);
    max_vote = std::max(max_vote, item.vote);
    out.items.push_back(std::move(item));
  }
  std::size_t min_len = std::numeric_limits<std::size_t>::max();
  for (const auto& it : out.items) {
    if (it.vote == max_vote) min_len = std::min(min_len, it.expression.mention_count);
  }
  for (auto& it : out.items) {
    it.positive = it.vote == max_vote && it.expression.mention_count == min_len;
  }
  return out;
}

void write_label_cache(const std::filesystem::path& path, const std::vector<WeakLabelSet>& labels) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write label cache '" + path.string() + "'");
  for (const auto& set : labels) {
    json rec;
    rec["id"] = set.question_id;
    rec["positives"] = set.positives();
    rec["negatives"] = set.negatives();
    rec["votes"] = json::object();
    rec["mentions"] = json::object();
    rec["order"] = json::array();
    for (const auto& it : set.items) {
      rec["votes"][it.expression.text] = it.vote;
      rec["mentions"][it.expression.text] = it.expression.mention_count;
      rec["order"].push_back(it.expression.text);
    }
    out << rec.dump() << '\n';
  }
}

std::vector<WeakLabelSet> load_label_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open label cache '" + path.string() + "'");
  std::vector<WeakLabelSet> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      const auto rec = json::parse(line);
      WeakLabelSet set;
      set.question_id = rec.at("id").get<std::string>();
      const auto positives = rec.at("positives").get<std::vector<std::string>>();
      const auto& votes = rec.at("votes");
      const auto& mentions = rec.at("mentions");
      std::vector<std::string> order;
      if (rec.contains("order")) {
        order = rec["order"].get<std::vector<std::string>>();
      } else {
        order = positives;
        for (const auto& t : rec.at("negatives")) order.push_back(t.get<std::string>());
      }
      for (const auto& text : order) {
        LabeledExpression it;
        it.expression.text = text;
        it.expression.mention_count = mentions.at(text).get<std::size_t>();
        it.vote = votes.at(text).get<long>();
        it.positive = std::find(positives.begin(), positives.end(), text) != positives.end();
        set.items.push_back(std::move(it));
      }
      out.push_back(std::move(set));
    } catch (const json::exception& e) {
      throw LoadError(where + ": " + e.what());
    }
  }
  return out;
}

bool FinetuneExample::usable() const {
  const auto pos = std::count(positive.begin(), positive.end(), true);
  return pos > 0 && static_cast<std::size_t>(pos) < positive.size();
}

FinetuneExample to_finetune_example(const QaExample& ex, const WeakLabelSet& labels) {
  FinetuneExample out;
  out.question = ex.question;
  for (const auto& it : labels.items) {
    out.expressions.push_back(it.expression);
    out.positive.push_back(it.positive);
  }
  return out;
}

double selection_accuracy(const TextEncoder& encoder, std::span<const FinetuneExample> data) {
  std::size_t total = 0, correct = 0;
  for (const auto& ex : data) {
    if (std::find(ex.positive.begin(), ex.positive.end(), true) == ex.positive.end()) continue;
    ++total;
    const auto sel = select_optimal(encoder, ex.question, ex.expressions);
    if (sel && ex.positive[sel->index]) ++correct;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

void finetune(TextEncoder& encoder, std::span<const FinetuneExample> train,
              std::span<const FinetuneExample> valid, const FinetuneCallback& on_epoch) {
  const auto& cfg = encoder.config();
  nn::Rng rng(cfg.seed + 0x2545f4914f6cdd1dULL);
  nn::Adam adam({.learning_rate = cfg.learning_rate});
  std::vector<std::size_t> order;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].usable()) {
      order.push_back(i);
    } else {
      ++skipped;
    }
  }
  nn::ParameterStore best;
  double best_acc = -1.0;
  auto& params = encoder.params();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (const auto i : order) {
      const auto& ex = train[i];
      std::vector<std::string> pos, neg;
      for (std::size_t j = 0; j < ex.expressions.size(); ++j) {
        (ex.positive[j] ? pos : neg).push_back(ex.expressions[j].text);
      }
      nn::Tape tape;
      const TextEncoder::Bound bound(tape, encoder);
      const auto loss = triplet_loss(bound.encode(ex.question), bound.encode_batch(pos),
                                     bound.encode_batch(neg), cfg.margin);
      total += loss.value().item();
      params.zero_grad();
      tape.backward(loss);
      adam.step(params);
    }
    const double acc = valid.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : selection_accuracy(encoder, valid);
    if (!valid.empty() && acc > best_acc) {
      best_acc = acc;
      best = params.clone();
    }
    if (on_epoch) on_epoch(epoch, total / std::max<std::size_t>(1, order.size()), acc, skipped);
  }
  if (best_acc >= 0.0) params.assign_values(best);
  params.zero_grad();
}

}  // namespace kgqa
