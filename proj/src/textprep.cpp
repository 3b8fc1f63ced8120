#include "vqacoin/textprep.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "vqacoin/error.hpp"

namespace vqacoin::textprep {

std::vector<std::string> tokenize(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char ch : text) {
    if (std::isalnum(ch) || ch == '\'' || ch >= 0x80) {
      cleaned.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      cleaned.push_back(' ');
    }
  }
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && cleaned[i] == ' ') ++i;
    size_t start = i;
    while (i < cleaned.size() && cleaned[i] != ' ') ++i;
    if (i == start) break;
    std::string tok = cleaned.substr(start, i - start);
    size_t b = 0, e = tok.size();
    while (b < e && tok[b] == '\'') ++b;
    while (e > b && tok[e - 1] == '\'') --e;
    if (e > b) tokens.push_back(tok.substr(b, e - b));
  }
  return tokens;
}

std::vector<std::string> tokenize_question(const std::string& q, size_t max_len) {
  std::vector<std::string> tokens = tokenize(q);
  if (tokens.empty()) {
    throw data_error("question tokenizes to nothing: \"" + q + "\"");
  }
  if (tokens.size() > max_len) tokens.resize(max_len);
  return tokens;
}

double token_lcs_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  size_t la = a.size(), lb = b.size();
  if (la + lb == 0) return 0.0;
  if (la == 0 || lb == 0) return 0.0;
  // Classic LCS table, rolled to two rows.
  std::vector<size_t> prev(lb + 1, 0), cur(lb + 1, 0);
  for (size_t i = 1; i <= la; ++i) {
    for (size_t j = 1; j <= lb; ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return 2.0 * static_cast<double>(prev[lb]) / static_cast<double>(la + lb);
}

std::vector<std::string> dedup_captions(const std::vector<std::string>& captions, double threshold,
                                        size_t max_selected) {
  std::vector<std::string> selected;
  std::vector<std::vector<std::string>> selected_tokens;
  for (const std::string& cap : captions) {
    if (selected.size() >= max_selected) break;
    std::vector<std::string> toks = tokenize(cap);
    if (toks.empty()) continue;
    bool duplicate = false;
    for (const auto& prev : selected_tokens) {
      if (token_lcs_similarity(toks, prev) >= threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) {
      selected.push_back(cap);
      selected_tokens.push_back(std::move(toks));
    }
  }
  return selected;
}

namespace {

// The shipped filter lists, compiled in. data/wordlists/*.txt hold the same
// content one token per line; a test asserts file and builtin stay equal.
const char* const kStopwords[] = {
    "a",     "all",   "an",    "and",   "any",    "as",     "because", "both",  "but",
    "each",  "either", "few",  "he",    "her",    "hers",   "him",     "his",   "how",
    "i",     "if",    "it",    "its",   "me",     "mine",   "more",    "most",  "my",
    "neither", "no",  "nor",   "not",   "only",   "or",     "other",   "our",   "ours",
    "she",   "so",    "some",  "such",  "than",   "that",   "the",     "their", "theirs",
    "them",  "then",  "there", "these", "they",   "this",   "those",   "too",   "us",
    "very",  "we",    "what",  "when",  "where",  "which",  "who",     "whom",  "whose",
    "why",   "you",   "your",  "yours",
};

const char* const kPrepositions[] = {
    "about",  "above",   "across", "after",   "against", "along",   "amid",    "among",
    "around", "at",      "atop",   "before",  "behind",  "below",   "beneath", "beside",
    "between", "beyond", "by",     "down",    "during",  "for",     "from",    "in",
    "inside", "into",    "near",   "of",      "off",     "on",      "onto",    "out",
    "outside", "over",   "past",   "per",     "since",   "through", "to",      "toward",
    "towards", "under",  "underneath", "until", "up",    "upon",    "via",     "with",
    "within", "without",
};

const char* const kAuxiliaryVerbs[] = {
    "am",    "are",   "be",     "been",  "being", "can",   "could", "dare",  "did",
    "do",    "does",  "doing",  "had",   "has",   "have",  "having", "is",   "may",
    "might", "must",  "need",   "ought", "shall", "should", "was",  "were",  "will",
    "would",
};

std::unordered_set<std::string> read_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open wordlist " + path);
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

}  // namespace

Wordlists Wordlists::builtin() {
  Wordlists w;
  for (const char* s : kStopwords) w.stopwords.insert(s);
  for (const char* s : kPrepositions) w.prepositions.insert(s);
  for (const char* s : kAuxiliaryVerbs) w.auxiliary_verbs.insert(s);
  return w;
}

Wordlists Wordlists::load(const std::string& dir) {
  Wordlists w;
  w.stopwords = read_list(dir + "/stopwords.txt");
  w.prepositions = read_list(dir + "/prepositions.txt");
  w.auxiliary_verbs = read_list(dir + "/auxiliary_verbs.txt");
  return w;
}

std::vector<std::string> filter_content_words(const std::vector<std::string>& sentences,
                                              const Wordlists& lists, size_t max_words) {
  std::vector<std::string> out;
  for (const std::string& sentence : sentences) {
    for (std::string& tok : tokenize(sentence)) {
      if (out.size() >= max_words) return out;
      if (!lists.contains(tok)) out.push_back(std::move(tok));
    }
  }
  return out;
}

std::vector<std::string> make_semantic_info(const std::vector<std::string>& captions,
                                            const Wordlists& lists, double threshold,
                                            size_t max_sentences, size_t max_words) {
  return filter_content_words(dedup_captions(captions, threshold, max_sentences), lists, max_words);
}

namespace {

/// Frequency-descending, ties lexicographic: the shared ordering rule of
/// Vocabulary and AnswerSet.
std::vector<std::string> order_by_count(const std::unordered_map<std::string, size_t>& counts,
                                        size_t min_count) {
  std::vector<std::pair<std::string, size_t>> items;
  for (const auto& [tok, c] : counts) {
    if (c >= min_count) items.emplace_back(tok, c);
  }
  std::sort(items.begin(), items.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  std::vector<std::string> out;
  out.reserve(items.size());
  for (auto& [tok, c] : items) out.push_back(std::move(tok));
  return out;
}

}  // namespace

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& documents) {
  std::unordered_map<std::string, size_t> counts;
  for (const auto& doc : documents) {
    for (const auto& tok : doc) ++counts[tok];
  }
  Vocabulary v;
  v.id_to_token = {"<pad>", "<unk>"};
  for (std::string& tok : order_by_count(counts, 1)) v.id_to_token.push_back(std::move(tok));
  for (size_t i = 0; i < v.id_to_token.size(); ++i) v.token_to_id[v.id_to_token[i]] = i;
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw data_error("vocabulary list must start with <pad>, <unk>");
  }
  Vocabulary v;
  v.id_to_token = std::move(tokens);
  for (size_t i = 0; i < v.id_to_token.size(); ++i) {
    if (!v.token_to_id.emplace(v.id_to_token[i], i).second) {
      throw data_error("duplicate vocabulary token: " + v.id_to_token[i]);
    }
  }
  return v;
}

size_t Vocabulary::id(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnkId : it->second;
}

std::vector<size_t> Vocabulary::ids(const std::vector<std::string>& tokens) const {
  std::vector<size_t> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) out.push_back(id(tok));
  return out;
}

AnswerSet AnswerSet::build(const std::vector<std::string>& canonical_answers,
                           size_t min_occurrences) {
  std::unordered_map<std::string, size_t> counts;
  for (const auto& a : canonical_answers) ++counts[a];
  AnswerSet s;
  s.id_to_answer = order_by_count(counts, min_occurrences);
  if (s.id_to_answer.empty()) {
    throw config_error("answer set is empty: no answer occurs >= " +
                       std::to_string(min_occurrences) + " times in " +
                       std::to_string(canonical_answers.size()) + " annotations");
  }
  for (size_t i = 0; i < s.id_to_answer.size(); ++i) s.answer_to_id[s.id_to_answer[i]] = i;
  return s;
}

AnswerSet AnswerSet::from_answers(std::vector<std::string> answers) {
  if (answers.empty()) throw data_error("answer set list is empty");
  AnswerSet s;
  s.id_to_answer = std::move(answers);
  for (size_t i = 0; i < s.id_to_answer.size(); ++i) {
    if (!s.answer_to_id.emplace(s.id_to_answer[i], i).second) {
      throw data_error("duplicate answer class: " + s.id_to_answer[i]);
    }
  }
  return s;
}

long long AnswerSet::id(const std::string& answer) const {
  auto it = answer_to_id.find(answer);
  return it == answer_to_id.end() ? -1 : static_cast<long long>(it->second);
}

}  // namespace vqacoin::textprep
