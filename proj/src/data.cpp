#include "dialgraph/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dialgraph {

using nlohmann::json;

// ---- Vocabulary -------------------------------------------------------------

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
  add("<cls>");
}

long Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

long Vocabulary::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  long id = static_cast<long>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(token);
  return id;
}

const std::string& Vocabulary::token_of(long id) const {
  if (id < 0 || id >= size()) throw ContractError("Vocabulary: id out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::to_json() const {
  json j = json::array();
  for (const auto& t : id_to_token_) j.push_back(t);
  return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_array() || j.size() < 3)
    throw ParseError("Vocabulary: malformed vocabulary JSON");
  Vocabulary v;
  for (std::size_t i = 3; i < j.size(); ++i) v.add(j[i].get<std::string>());
  return v;
}

// ---- tokenizer ----------------------------------------------------------------

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&]() {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && !std::isalnum(c)) {
      // punctuation kept as its own token
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      word.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::vector<long> tokenize_ids(const std::string& text, const Vocabulary& vocab) {
  std::vector<long> ids;
  for (const auto& t : tokenize(text)) ids.push_back(vocab.id_of(t));
  return ids;
}

// ---- parsing ---------------------------------------------------------------------

std::string RawDialogue::reassemble_article() const {
  std::string out;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    out += speakers[i];
    out += " : ";
    out += utterances[i];
  }
  return out;
}

namespace {

// Positions of "m : " / "f : " markers at the start or after a space.
std::vector<std::size_t> marker_positions(const std::string& article) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i + 4 <= article.size(); ++i) {
    if ((article[i] == 'm' || article[i] == 'f') && article.compare(i + 1, 3, " : ") == 0 &&
        (i == 0 || article[i - 1] == ' '))
      pos.push_back(i);
  }
  return pos;
}

}  // namespace

RawDialogue parse_mutual(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("parse_mutual: not a JSON object");
  RawDialogue raw;
  raw.id = j.value("id", "<no-id>");
  if (!j.contains("article") || !j.contains("options") || !j.contains("answers"))
    throw ParseError("parse_mutual: missing field in example " + raw.id);

  const auto& opts = j["options"];
  if (!opts.is_array() || opts.size() != 4)
    throw ParseError("parse_mutual: expected exactly 4 options in example " + raw.id);
  for (const auto& o : opts) raw.options.push_back(o.get<std::string>());

  std::string ans = j["answers"].get<std::string>();
  if (ans.size() != 1 || ans[0] < 'A' || ans[0] > 'D')
    throw ParseError("parse_mutual: unknown answer letter '" + ans + "' in example " + raw.id);
  raw.answer = ans[0] - 'A';

  std::string article = j["article"].get<std::string>();
  auto marks = marker_positions(article);
  if (marks.empty())
    throw ParseError("parse_mutual: zero utterances after split in example " + raw.id);
  if (marks[0] != 0)
    throw ParseError("parse_mutual: article does not start with a speaker marker in example " +
                     raw.id);
  for (std::size_t k = 0; k < marks.size(); ++k) {
    std::size_t begin = marks[k] + 4;
    std::size_t end = (k + 1 < marks.size()) ? marks[k + 1] : article.size();
    raw.speakers.emplace_back(1, article[marks[k]]);
    raw.utterances.push_back(article.substr(begin, end - begin));
  }
  return raw;
}

DialogueExample tokenize_dialogue(const RawDialogue& raw, const Vocabulary& vocab,
                                  const TokenizeLimits& limits) {
  DialogueExample ex;
  ex.id = raw.id;
  ex.answer = raw.answer;

  std::size_t first = 0;
  if (raw.utterances.size() > static_cast<std::size_t>(limits.max_turns))
    first = raw.utterances.size() - static_cast<std::size_t>(limits.max_turns);

  auto cut = [&](std::vector<long> ids) {
    if (ids.size() > static_cast<std::size_t>(limits.max_sentence_tokens))
      ids.resize(static_cast<std::size_t>(limits.max_sentence_tokens));
    return ids;
  };
  for (std::size_t i = first; i < raw.utterances.size(); ++i) {
    auto ids = cut(tokenize_ids(raw.utterances[i], vocab));
    if (ids.empty()) throw ParseError("tokenize: empty utterance in example " + raw.id);
    ex.utterances.push_back(std::move(ids));
  }
  for (const auto& o : raw.options) {
    auto ids = cut(tokenize_ids(o, vocab));
    if (ids.empty()) throw ParseError("tokenize: empty option in example " + raw.id);
    ex.options.push_back(std::move(ids));
  }
  if (ex.utterances.empty()) throw ParseError("tokenize: no utterances in example " + raw.id);
  return ex;
}

Vocabulary build_vocab(const std::vector<RawDialogue>& corpus) {
  Vocabulary v;
  for (const auto& raw : corpus) {
    for (const auto& u : raw.utterances)
      for (const auto& t : tokenize(u)) v.add(t);
    for (const auto& o : raw.options)
      for (const auto& t : tokenize(o)) v.add(t);
  }
  return v;
}

std::string to_mutual_json(const RawDialogue& raw) {
  json j;
  j["id"] = raw.id;
  j["article"] = raw.reassemble_article();
  j["options"] = raw.options;
  j["answers"] = std::string(1, static_cast<char>('A' + raw.answer));
  return j.dump();
}

std::vector<RawDialogue> load_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("load_corpus: cannot open " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  std::string text = buf.str();

  // A whole-file JSON object is one record; otherwise JSON lines.
  json whole = json::parse(text, nullptr, false);
  if (!whole.is_discarded() && whole.is_object()) return {parse_mutual(text)};

  std::vector<RawDialogue> out;
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_mutual(line));
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw ParseError("load_corpus: no records in " + path);
  return out;
}

void save_corpus(const std::vector<RawDialogue>& corpus, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("save_corpus: cannot open " + path + " for writing");
  for (const auto& raw : corpus) os << to_mutual_json(raw) << "\n";
}

// ---- synthetic generator ------------------------------------------------------

namespace {

struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed + 0x9e3779b97f4a7c15ULL) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
};

const char* kEntities[] = {"alex", "bella", "carl",  "dana", "evan", "flora",
                           "gina", "hugo",  "iris",  "jonas", "kara", "liam"};
const char* kAttributes[] = {"color", "size", "pet", "drink", "sport", "fruit", "job", "city"};
// One value pool shared by every attribute: an option can only be judged by
// binding entity, attribute and value together, never by spotting a value
// word on its own.
const char* kValues[] = {"red",  "blue", "green", "gold", "pink",
                         "gray", "jade", "plum",  "rust", "teal"};

std::string entity_name(int i) {
  if (i < 12) return kEntities[i];
  return "person" + std::to_string(i);
}
std::string attr_name(int a) {
  if (a < 8) return kAttributes[a];
  return "topic" + std::to_string(a);
}
std::string value_name(int a, int v) {
  (void)a;
  if (v < 10) return kValues[v];
  return "item" + std::to_string(v);
}

struct Fact {
  int entity;
  int attr;
  int value;
};

std::string fact_sentence(const Fact& f) {
  return entity_name(f.entity) + " has " + attr_name(f.attr) + " " + value_name(f.attr, f.value) +
         " .";
}

RawDialogue gen_dialogue(const SyntheticSpec& spec, Rng& rng, const std::string& id) {
  const int fact_turns = spec.turns - 1;

  int q = rng.below(spec.num_entities);
  int other = rng.below(spec.num_entities - 1);
  if (other >= q) ++other;

  int attr_o = rng.below(spec.num_attributes);  // overridden attribute
  int attr_a = rng.below(spec.num_attributes - 1);
  if (attr_a >= attr_o) ++attr_a;  // wrong-value target
  int attr_b;                      // wrong-entity target
  if (spec.num_attributes >= 3) {
    do {
      attr_b = rng.below(spec.num_attributes);
    } while (attr_b == attr_o || attr_b == attr_a);
  } else {
    attr_b = attr_a;
  }

  // the overridden attribute runs through a chain of values; the stale
  // distractor quotes the middle one, so ranking it needs the full order
  int v_first = rng.below(spec.values_per_attribute);
  int v_stale = rng.below(spec.values_per_attribute - 1);
  if (v_stale >= v_first) ++v_stale;
  int v_current;
  do {
    v_current = rng.below(spec.values_per_attribute);
  } while (v_current == v_stale);
  int v_a = rng.below(spec.values_per_attribute);
  int v_b = (attr_b == attr_a) ? v_a : rng.below(spec.values_per_attribute);
  int v_e = rng.below(spec.values_per_attribute - 1);  // other entity's value, != Q's
  if (v_e >= v_b) ++v_e;

  // wrong value: never stated for (q, attr_a); also distinct from the
  // wrong-entity option when both target the same attribute
  int v_wrong;
  do {
    v_wrong = rng.below(spec.values_per_attribute);
  } while (v_wrong == v_a || (attr_b == attr_a && v_wrong == v_e));

  std::vector<Fact> base = {{q, attr_o, v_first}, {q, attr_a, v_a}};
  if (attr_b != attr_a) base.push_back({q, attr_b, v_b});
  base.push_back({other, attr_b, v_e});

  // filler facts over unstated (entity, attribute) pairs
  std::vector<std::pair<int, int>> used;
  for (const auto& f : base) used.emplace_back(f.entity, f.attr);
  int fillers = fact_turns - static_cast<int>(base.size()) - 2;  // two override turns
  for (int k = 0; k < fillers; ++k) {
    int guard = 0;
    int e, a;
    do {
      e = rng.below(spec.num_entities);
      a = rng.below(spec.num_attributes);
      if (++guard > 1000)
        throw ConfigError("gen_synthetic: not enough (entity, attribute) pairs for " +
                          std::to_string(spec.turns) + " turns");
    } while (std::find(used.begin(), used.end(), std::make_pair(e, a)) != used.end());
    used.emplace_back(e, a);
    base.push_back({e, a, rng.below(spec.values_per_attribute)});
  }

  // shuffle, then thread the override chain in order after the base statement
  for (int i = static_cast<int>(base.size()) - 1; i > 0; --i) {
    int j = rng.below(i + 1);
    std::swap(base[static_cast<std::size_t>(i)], base[static_cast<std::size_t>(j)]);
  }
  auto insert_after_last = [&](int attr, Fact fact) {
    int pos = 0;
    for (std::size_t i = 0; i < base.size(); ++i)
      if (base[i].entity == q && base[i].attr == attr) pos = static_cast<int>(i);
    int at = pos + 1 + rng.below(static_cast<int>(base.size()) - pos);
    base.insert(base.begin() + at, fact);
  };
  insert_after_last(attr_o, {q, attr_o, v_stale});
  insert_after_last(attr_o, {q, attr_o, v_current});

  RawDialogue raw;
  raw.id = id;
  for (std::size_t i = 0; i < base.size(); ++i) {
    raw.speakers.emplace_back(i % 2 == 0 ? "m" : "f");
    raw.utterances.push_back(fact_sentence(base[i]) + " ");
  }
  raw.speakers.emplace_back(base.size() % 2 == 0 ? "m" : "f");
  raw.utterances.push_back("tell me about " + entity_name(q) + " .");

  // options: the correct restatement plus the three distractor kinds. The
  // correct option restates the overridden attribute's current value, so
  // separating it from the stale distractor always takes an order judgment
  // on top of fact matching.
  std::string correct = fact_sentence({q, attr_o, v_current});
  std::vector<std::string> distractors = {
      fact_sentence({q, attr_a, v_wrong}),   // wrong value
      fact_sentence({q, attr_b, v_e}),       // another entity's value
      fact_sentence({q, attr_o, v_stale}),   // overridden stale fact
  };
  // guard against the correct option colliding with a distractor text
  for (const auto& d : distractors)
    if (d == correct) throw ContractError("gen_synthetic: duplicate option generated");

  int gold = rng.below(4);
  raw.answer = gold;
  raw.options.assign(4, "");
  raw.options[static_cast<std::size_t>(gold)] = correct;
  std::size_t di = 0;
  for (int slot = 0; slot < 4; ++slot) {
    if (slot == gold) continue;
    raw.options[static_cast<std::size_t>(slot)] = distractors[di++];
  }
  return raw;
}

}  // namespace

SyntheticCorpus gen_synthetic(const SyntheticSpec& spec) {
  if (spec.values_per_attribute < 2)
    throw ConfigError("gen_synthetic: need at least 2 values per attribute");
  if (spec.num_entities < 2) throw ConfigError("gen_synthetic: need at least 2 entities");
  if (spec.num_attributes < 2) throw ConfigError("gen_synthetic: need at least 2 attributes");
  if (spec.num_attributes == 2 && spec.values_per_attribute == 2)
    throw ConfigError("gen_synthetic: 2 attributes with 2 values cannot produce 4 distinct options");
  int min_turns = (spec.num_attributes >= 3 ? 6 : 5) + 1;
  if (spec.turns < min_turns)
    throw ConfigError("gen_synthetic: need at least " + std::to_string(min_turns) + " turns");

  Rng rng(spec.seed);
  SyntheticCorpus corpus;
  corpus.train.reserve(static_cast<std::size_t>(spec.train_size));
  for (int i = 0; i < spec.train_size; ++i)
    corpus.train.push_back(gen_dialogue(spec, rng, "synth_train_" + std::to_string(i)));
  corpus.val.reserve(static_cast<std::size_t>(spec.val_size));
  for (int i = 0; i < spec.val_size; ++i)
    corpus.val.push_back(gen_dialogue(spec, rng, "synth_val_" + std::to_string(i)));
  return corpus;
}

std::vector<int> consistent_options(const RawDialogue& raw) {
  // latest stated value per (entity, attribute), in turn order
  std::map<std::pair<std::string, std::string>, std::string> latest;
  auto parse_fact = [](const std::string& text)
      -> std::optional<std::array<std::string, 3>> {
    auto toks = tokenize(text);
    if (toks.size() != 5 || toks[1] != "has" || toks[4] != ".") return std::nullopt;
    return std::array<std::string, 3>{toks[0], toks[2], toks[3]};
  };
  for (const auto& u : raw.utterances) {
    if (auto f = parse_fact(u)) latest[{(*f)[0], (*f)[1]}] = (*f)[2];
  }
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(raw.options.size()); ++i) {
    auto f = parse_fact(raw.options[static_cast<std::size_t>(i)]);
    if (!f) continue;
    auto it = latest.find({(*f)[0], (*f)[1]});
    if (it != latest.end() && it->second == (*f)[2]) out.push_back(i);
  }
  return out;
}

}  // namespace dialgraph
