#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lbow/rng.hpp"
#include "lbow/vocab.hpp"

namespace lbow {

// One paraphrase pair (or caption group). Source carries no specials;
// every target sequence ends with kEos. target_bow is the sorted set of
// content-word ids drawn from all targets.
struct Instance {
  std::vector<int> source;
  std::vector<std::vector<int>> targets;
  std::vector<int> target_bow;
};

enum class Format { quora, mscoco };

Format parse_format(const std::string& name);

struct LoadStats {
  int loaded = 0;
  int skipped_empty_bow = 0;
};

// quora: one pair per line, source TAB target.
// mscoco: 5 consecutive lines per group (source + 4 targets), groups
// separated by blank lines.
std::vector<Instance> load_pairs(const std::filesystem::path& path, Format format,
                                 const Vocabulary& vocab, int max_len,
                                 LoadStats* stats = nullptr);

// Shared constructor used by the loaders and the synthetic generator.
// Sequences longer than max_len are truncated (targets keep room for EOS).
Instance make_instance(const std::vector<std::string>& source,
                       const std::vector<std::vector<std::string>>& targets,
                       const Vocabulary& vocab, int max_len);

// ------------------------------------------------------------------ batches

struct Batch {
  int size = 0;
  // Padded id matrices (rows = instances) plus 0/1 masks.
  std::vector<std::vector<int>> src;
  std::vector<std::vector<uint8_t>> src_mask;
  std::vector<std::vector<int>> tgt;  // the drawn target, ends with EOS before padding
  std::vector<std::vector<uint8_t>> tgt_mask;
  std::vector<std::vector<int>> bows;
  std::vector<int> instance_index;
};

// Single-consumer iterator over shuffled, padded batches. Each reset()
// begins a new epoch: the order is reshuffled and, for multi-target
// instances, one target is redrawn per instance.
class BatchIterator {
 public:
  BatchIterator(const std::vector<Instance>& instances, int batch_size, Rng* rng);
  bool next(Batch& out);
  void reset();

 private:
  const std::vector<Instance>* instances_;
  int batch_size_;
  Rng* rng_;
  std::vector<int> order_;
  std::vector<int> chosen_target_;
  size_t cursor_ = 0;
};

// --------------------------------------------------------- synthetic corpus

// Template/synonym specification for the synthetic paraphrase corpus.
// Patterns contain slot tokens like "{noun}", "{verb}", "{noun2}"; the
// trailing digit distinguishes repeated categories within one pattern.
// Source and target of an instance are realizations of the same template
// group that differ only by template choice and synonym substitution.
struct SynthSpec {
  int instance_count = 2000;
  int test_count = 0;
  int vocab_budget = 150;
  uint64_t seed = 1;
  int max_len = 16;
  // Probability that the target reuses the source's surface template
  // (paraphrase pairs tend to share structure); otherwise drawn uniformly.
  double same_template_prob = 0.8;
  // category -> synonym groups, in declaration order; empty -> builtin
  std::vector<std::pair<std::string, std::vector<std::vector<std::string>>>> synonyms;
  // groups of alternative surface patterns; empty -> builtin
  std::vector<std::vector<std::string>> template_groups;
};

struct SynthCorpus {
  Vocabulary vocab;
  std::vector<Instance> train;
  std::vector<Instance> test;
  // raw text, for writing quora-format files
  std::vector<std::pair<std::string, std::string>> train_text;
  std::vector<std::pair<std::string, std::string>> test_text;
  // planted synonym sets: word -> its group minus itself
  std::map<std::string, std::set<std::string>> neighbor_truth;
};

SynthCorpus make_synth_corpus(const SynthSpec& spec);

}  // namespace lbow
