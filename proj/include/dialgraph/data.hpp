#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dialgraph/errors.hpp"

namespace dialgraph {

/// Word-level vocabulary with dense ids. Ids 0..2 are reserved.
class Vocabulary {
 public:
  static constexpr long kPad = 0;
  static constexpr long kUnk = 1;
  static constexpr long kCls = 2;

  Vocabulary();

  long id_of(const std::string& token) const;  // kUnk for unknown tokens
  long add(const std::string& token);          // id of existing or newly added
  long size() const { return static_cast<long>(id_to_token_.size()); }
  const std::string& token_of(long id) const;

  std::string to_json() const;
  static Vocabulary from_json(const std::string& text);

 private:
  std::map<std::string, long> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Lowercases and splits on whitespace; each punctuation character becomes
/// its own token. Empty text gives an empty sequence.
std::vector<std::string> tokenize(const std::string& text);
std::vector<long> tokenize_ids(const std::string& text, const Vocabulary& vocab);

/// One dialogue record as raw text, before tokenization.
struct RawDialogue {
  std::string id;
  std::vector<std::string> speakers;    // "m" or "f", one per utterance
  std::vector<std::string> utterances;  // exact article segments, markers stripped
  std::vector<std::string> options;     // exactly 4
  int answer = 0;                       // 0..3

  /// Re-inserts the speaker markers; reproduces the original article string.
  std::string reassemble_article() const;
};

/// Tokenized example: N utterance sequences, 4 option sequences, gold index.
struct DialogueExample {
  std::string id;
  std::vector<std::vector<long>> utterances;
  std::vector<std::vector<long>> options;
  int answer = 0;
};

/// Parses one JSON record with fields "article", "options" (4 strings) and
/// "answers" ("A".."D"). The article splits into utterances at the speaker
/// markers "m : " and "f : ".
RawDialogue parse_mutual(const std::string& line);

struct TokenizeLimits {
  int max_turns = 12;
  int max_sentence_tokens = 32;
};

/// Tokenizes a raw dialogue. Dialogues beyond max_turns keep the most recent
/// turns; sentences beyond max_sentence_tokens are truncated.
DialogueExample tokenize_dialogue(const RawDialogue& raw, const Vocabulary& vocab,
                                  const TokenizeLimits& limits = {});

/// Builds a vocabulary over every token of every record.
Vocabulary build_vocab(const std::vector<RawDialogue>& corpus);

/// Serializes a record back to the one-line JSON schema read by parse_mutual.
std::string to_mutual_json(const RawDialogue& raw);

/// Reads a corpus file: either JSON lines or a single JSON object per file.
std::vector<RawDialogue> load_corpus(const std::string& path);
void save_corpus(const std::vector<RawDialogue>& corpus, const std::string& path);

// ---- synthetic task --------------------------------------------------------

/// Generator knobs for the synthetic logical-consistency corpus. Each
/// dialogue states facts ("<entity> has <attribute> <value> ."), revises one
/// attribute of the queried entity across a chain of later turns, and ends
/// with a turn naming the queried entity. Exactly one option is consistent
/// with every stated fact; the three distractors contradict exactly one
/// utterance each (wrong value, wrong entity's value, or an overridden
/// stale value from the middle of the chain).
struct SyntheticSpec {
  std::uint64_t seed = 0;
  int num_entities = 3;
  int num_attributes = 3;
  int values_per_attribute = 3;
  int turns = 7;  // fact turns + final query turn
  int train_size = 2000;
  int val_size = 500;
};

struct SyntheticCorpus {
  std::vector<RawDialogue> train;
  std::vector<RawDialogue> val;
};

SyntheticCorpus gen_synthetic(const SyntheticSpec& spec);

/// Rule-based consistency checker, independent of the generator: re-parses
/// fact utterances from the text and marks an option consistent iff its
/// (entity, attribute, value) matches the latest stated value. Returns the
/// indices of consistent options.
std::vector<int> consistent_options(const RawDialogue& raw);

}  // namespace dialgraph
