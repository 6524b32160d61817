#include "kgqa/pipeline/dataset.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "kgqa/error.hpp"

namespace kgqa {

using nlohmann::json;

std::vector<std::string> topic_mentions(const QaExample& ex, const KnowledgeGraph& kg) {
  std::vector<std::string> out;
  for (const auto e : ex.topic_entities) out.push_back(kg.entity_label(e));
  return out;
}

namespace {

EntityId lookup_entity(const KnowledgeGraph& kg, const json& key, const std::string& where) {
  if (!key.is_string()) throw LoadError(where + ": entity ids must be strings");
  auto e = kg.find_entity(key.get<std::string>());
  if (!e) throw LoadError(where + ": unknown entity '" + key.get<std::string>() + "'");
  return *e;
}

std::vector<EntityId> entity_list(const KnowledgeGraph& kg, const json& rec, const char* field,
                                  const std::string& where) {
  if (!rec.contains(field) || !rec[field].is_array()) {
    throw LoadError(where + ": missing array '" + field + "'");
  }
  std::vector<EntityId> out;
  for (const auto& k : rec[field]) out.push_back(lookup_entity(kg, k, where));
  return out;
}

}  // namespace

std::vector<QaExample> load_dataset(const std::filesystem::path& path, const KnowledgeGraph& kg) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open dataset '" + path.string() + "'");
  std::vector<QaExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw LoadError(where + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("question") || !rec["question"].is_string()) {
      throw LoadError(where + ": record needs a string 'question'");
    }
    QaExample ex;
    ex.id = rec.contains("id") ? (rec["id"].is_string() ? rec["id"].get<std::string>()
                                                         : rec["id"].dump())
                               : std::to_string(out.size());
    ex.question = rec["question"].get<std::string>();
    ex.topic_entities = entity_list(kg, rec, "topic_entities", where);
    ex.answers = entity_list(kg, rec, "answers", where);
    std::sort(ex.answers.begin(), ex.answers.end());
    ex.answers.erase(std::unique(ex.answers.begin(), ex.answers.end()), ex.answers.end());
    if (ex.topic_entities.empty()) throw LoadError(where + ": no topic entities");
    if (rec.contains("gold_chain") && !rec["gold_chain"].is_null()) {
      for (const auto& t : rec["gold_chain"]) {
        if (!t.is_array() || t.size() < 3 || !t[1].is_string()) {
          throw LoadError(where + ": gold_chain entries are [head, relation, tail, inverse]");
        }
        ChainTriple ct;
        ct.triple.head = lookup_entity(kg, t[0], where);
        auto r = kg.find_relation(t[1].get<std::string>());
        if (!r) throw LoadError(where + ": unknown relation '" + t[1].get<std::string>() + "'");
        ct.triple.relation = *r;
        ct.triple.tail = lookup_entity(kg, t[2], where);
        ct.inverse = t.size() > 3 && t[3].is_boolean() && t[3].get<bool>();
        if (!kg.find_triple(ct.triple)) throw LoadError(where + ": gold triple not in the graph");
        ex.gold_chain.push_back(ct);
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<QaExample>& examples,
                   const KnowledgeGraph& kg) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write dataset '" + path.string() + "'");
  for (const auto& ex : examples) {
    json rec;
    rec["id"] = ex.id;
    rec["question"] = ex.question;
    rec["topic_entities"] = json::array();
    for (const auto e : ex.topic_entities) rec["topic_entities"].push_back(kg.entity_key(e));
    rec["answers"] = json::array();
    for (const auto e : ex.answers) rec["answers"].push_back(kg.entity_key(e));
    if (!ex.gold_chain.empty()) {
      rec["gold_chain"] = json::array();
      for (const auto& ct : ex.gold_chain) {
        rec["gold_chain"].push_back({kg.entity_key(ct.triple.head),
                                     kg.relation_key(ct.triple.relation),
                                     kg.entity_key(ct.triple.tail), ct.inverse});
      }
    }
    out << rec.dump() << '\n';
  }
}

}  // namespace kgqa
