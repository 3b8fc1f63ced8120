#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace vqacoin::textprep {

/// Lowercases and splits on whitespace after replacing punctuation with
/// spaces. Apostrophes survive only inside a word ("what's"); leading and
/// trailing ones are trimmed.
std::vector<std::string> tokenize(const std::string& text);

/// Question form of tokenize: truncates to max_len tokens and rejects
/// questions that tokenize to nothing.
std::vector<std::string> tokenize_question(const std::string& q, size_t max_len = 14);

/// Token-level longest-common-subsequence similarity
/// 2*LCS(a,b)/(len(a)+len(b)); 0 when both are empty.
double token_lcs_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Greedy near-duplicate suppression in emission order: a sentence is
/// dropped iff its similarity to some already-selected sentence reaches
/// `threshold`. Returns the first `max_selected` survivors (fewer if the
/// input runs out).
std::vector<std::string> dedup_captions(const std::vector<std::string>& captions,
                                        double threshold = 0.8, size_t max_selected = 10);

/// The three filter word lists. `load` reads one token per line from
/// stopwords.txt, prepositions.txt, and auxiliary_verbs.txt in `dir`;
/// `builtin` is the compiled-in copy of the same lists (a test keeps the
/// two in sync).
struct Wordlists {
  std::unordered_set<std::string> stopwords;
  std::unordered_set<std::string> prepositions;
  std::unordered_set<std::string> auxiliary_verbs;

  bool contains(const std::string& w) const {
    return stopwords.count(w) || prepositions.count(w) || auxiliary_verbs.count(w);
  }

  static Wordlists builtin();
  static Wordlists load(const std::string& dir);
};

/// Concatenated tokens of all sentences minus wordlist tokens, order
/// preserved, truncated to max_words.
std::vector<std::string> filter_content_words(const std::vector<std::string>& sentences,
                                              const Wordlists& lists, size_t max_words = 40);

/// Full caption pipeline: dedup, filter, cap at max_words.
std::vector<std::string> make_semantic_info(const std::vector<std::string>& captions,
                                            const Wordlists& lists, double threshold = 0.8,
                                            size_t max_sentences = 10, size_t max_words = 40);

/// Token ids with two reserved entries: 0 = padding, 1 = unknown. Real
/// tokens get ids by corpus frequency (descending), ties broken
/// lexicographically, so the mapping is deterministic across runs and
/// platforms.
struct Vocabulary {
  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, size_t> token_to_id;

  static constexpr size_t kPadId = 0;
  static constexpr size_t kUnkId = 1;

  static Vocabulary build(const std::vector<std::vector<std::string>>& documents);
  /// Rebuilds from a serialized token list (entry 0 must be the pad token,
  /// entry 1 the unknown token).
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  size_t size() const { return id_to_token.size(); }
  /// Unknown tokens map to kUnkId.
  size_t id(const std::string& token) const;
  std::vector<size_t> ids(const std::vector<std::string>& tokens) const;
};

/// Answer classes retained when their canonical-answer count reaches
/// min_occurrences over the training split; same deterministic ordering as
/// Vocabulary. No reserved ids.
struct AnswerSet {
  std::vector<std::string> id_to_answer;
  std::unordered_map<std::string, size_t> answer_to_id;

  static AnswerSet build(const std::vector<std::string>& canonical_answers,
                         size_t min_occurrences = 9);
  static AnswerSet from_answers(std::vector<std::string> answers);

  size_t size() const { return id_to_answer.size(); }
  /// -1 when the answer is not a retained class.
  long long id(const std::string& answer) const;
};

}  // namespace vqacoin::textprep
