#include "lbow/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "lbow/common.hpp"

namespace lbow {

namespace {

const char* kSpecialTokens[] = {"<pad>", "<unk>", "<bos>", "<eos>"};

bool is_special_literal(const std::string& t) {
  for (const char* s : kSpecialTokens)
    if (t == s) return true;
  return false;
}

bool is_punct_char(unsigned char c) {
  return std::ispunct(c) && c != '<' && c != '>';
}

}  // namespace

// ---------------------------------------------------------------- Stoplist

Stoplist Stoplist::builtin() {
  static const char* kWords[] = {
      // articles, determiners
      "the", "a", "an", "this", "that", "these", "those", "some", "any",
      "each", "every", "all", "both", "such", "no",
      // pronouns
      "i", "you", "he", "she", "it", "we", "they", "me", "him", "her",
      "us", "them", "my", "your", "his", "its", "our", "their", "mine",
      "yours", "myself", "yourself", "itself", "who", "whom", "whose",
      "which", "what", "something", "anything", "nothing", "everything",
      "someone", "anyone", "everyone",
      // prepositions
      "in", "on", "at", "to", "of", "for", "with", "from", "by", "about",
      "into", "onto", "over", "under", "near", "between", "through",
      "during", "before", "after", "above", "below", "up", "down", "out",
      "off", "against", "among", "around", "without", "within",
      // conjunctions
      "and", "or", "but", "nor", "so", "yet", "if", "because", "while",
      "although", "though", "unless", "until", "since", "whether", "than",
      "as", "when", "where", "why", "how",
      // auxiliaries and copulas
      "is", "are", "was", "were", "be", "been", "being", "am", "do",
      "does", "did", "have", "has", "had", "will", "would", "can",
      "could", "shall", "should", "may", "might", "must",
      // misc function words
      "not", "there", "here", "then", "also", "too", "very", "just",
      "only", "quite", "rather",
      // punctuation
      ".", ",", "!", "?", ";", ":", "'", "\"", "-", "(", ")", "[", "]",
  };
  Stoplist s;
  for (const char* w : kWords) s.words_.insert(w);
  return s;
}

Stoplist Stoplist::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("stoplist: cannot open " + file.string());
  Stoplist s;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (!line.empty()) s.words_.insert(line);
  }
  return s;
}

void Stoplist::save(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw DataError("stoplist: cannot write " + file.string());
  std::vector<std::string> sorted(words_.begin(), words_.end());
  std::sort(sorted.begin(), sorted.end());
  for (const auto& w : sorted) out << w << '\n';
}

// --------------------------------------------------------------- tokenizer

std::vector<std::string> tokenize(const std::string& line) {
  std::string spaced;
  spaced.reserve(line.size() * 2);
  for (char ch : line) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (is_punct_char(c)) {
      spaced.push_back(' ');
      spaced.push_back(ch);
      spaced.push_back(' ');
    } else {
      spaced.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  std::vector<std::string> out;
  size_t i = 0;
  while (i < spaced.size()) {
    while (i < spaced.size() && std::isspace(static_cast<unsigned char>(spaced[i]))) ++i;
    size_t j = i;
    while (j < spaced.size() && !std::isspace(static_cast<unsigned char>(spaced[j]))) ++j;
    if (j > i) out.push_back(spaced.substr(i, j - i));
    i = j;
  }
  return out;
}

bool classify_content(const std::string& token, const Stoplist& stoplist) {
  if (token.empty()) throw std::invalid_argument("classify_content: empty token");
  if (is_special_literal(token)) return false;
  if (stoplist.contains(token)) return false;
  for (unsigned char c : token)
    if (std::isalnum(c)) return true;
  return false;  // pure punctuation
}

// -------------------------------------------------------------- Vocabulary

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

void Vocabulary::append(const std::string& token, bool content) {
  index_[token] = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  content_.push_back(content ? 1 : 0);
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

void Vocabulary::save(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw DataError("vocab: cannot write " + file.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& file, const Stoplist& stoplist) {
  std::ifstream in(file);
  if (!in) throw DataError("vocab: cannot open " + file.string());
  Vocabulary v;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    ++lineno;
    if (line.empty()) throw DataError("vocab: empty token at line " + std::to_string(lineno));
    if (lineno <= kNumSpecial) {
      if (line != kSpecialTokens[lineno - 1])
        throw DataError("vocab: line " + std::to_string(lineno) + " must be " +
                        kSpecialTokens[lineno - 1]);
      v.append(line, false);
    } else {
      v.append(line, classify_content(line, stoplist));
    }
  }
  if (v.size() < kNumSpecial) throw DataError("vocab: missing special tokens in " + file.string());
  return v;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sentences,
                       int max_size, const Stoplist& stoplist) {
  if (sentences.empty()) throw DataError("build_vocab: empty corpus");
  if (max_size <= Vocabulary::kNumSpecial)
    throw UsageError("build_vocab: max_size must exceed " +
                     std::to_string(Vocabulary::kNumSpecial));

  struct Entry {
    int count = 0;
    int first_seen = 0;
  };
  std::unordered_map<std::string, Entry> freq;
  int pos = 0;
  for (const auto& sent : sentences) {
    for (const auto& tok : sent) {
      auto [it, inserted] = freq.try_emplace(tok);
      if (inserted) it->second.first_seen = pos;
      it->second.count += 1;
      ++pos;
    }
  }
  std::vector<std::pair<std::string, Entry>> entries(freq.begin(), freq.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first_seen < b.second.first_seen;
  });

  Vocabulary v;
  for (const char* s : kSpecialTokens) v.append(s, false);
  const size_t keep = static_cast<size_t>(max_size - Vocabulary::kNumSpecial);
  for (size_t i = 0; i < entries.size() && i < keep; ++i) {
    const std::string& tok = entries[i].first;
    if (is_special_literal(tok)) continue;  // raw text may not redefine specials
    v.append(tok, classify_content(tok, stoplist));
  }
  return v;
}

}  // namespace lbow
