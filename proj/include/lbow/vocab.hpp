#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace lbow {

// Closed-class word list used to separate content words (nouns, verbs,
// adverbs, adjectives) from function words and punctuation. Ships as a
// data file so it can be replaced without rebuilding.
class Stoplist {
 public:
  static Stoplist builtin();
  static Stoplist load(const std::filesystem::path& file);
  void save(const std::filesystem::path& file) const;
  bool contains(const std::string& token) const { return words_.count(token) > 0; }
  size_t size() const { return words_.size(); }
  void add(const std::string& token) { words_.insert(token); }

 private:
  std::unordered_set<std::string> words_;
};

// Lowercase, split punctuation into separate tokens, then split on
// whitespace.
std::vector<std::string> tokenize(const std::string& line);

// True for content words: not in the stoplist, not a special-token
// literal, and containing at least one alphanumeric character.
bool classify_content(const std::string& token, const Stoplist& stoplist);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumSpecial = 4;

  int size() const { return static_cast<int>(tokens_.size()); }
  // Unknown tokens map to kUnk.
  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<size_t>(id)); }
  bool has(const std::string& token) const { return index_.count(token) > 0; }
  bool is_content(int id) const { return content_.at(static_cast<size_t>(id)) != 0; }
  bool is_special(int id) const { return id < kNumSpecial; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  void save(const std::filesystem::path& file) const;
  static Vocabulary load(const std::filesystem::path& file, const Stoplist& stoplist);

  friend Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sentences,
                                int max_size, const Stoplist& stoplist);

 private:
  void append(const std::string& token, bool content);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::vector<char> content_;
};

// Keeps the most frequent tokens up to max_size (the 4 specials count
// toward the cap). Frequency ties break by first occurrence.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sentences,
                       int max_size, const Stoplist& stoplist);

}  // namespace lbow
