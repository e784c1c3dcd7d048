#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

#include "lbow/vocab.hpp"

namespace lbow {

using TokenSeq = std::vector<int>;
using RefSet = std::vector<TokenSeq>;

// Corpus-level BLEU-n in [0, 100]: geometric mean of modified n-gram
// precisions with brevity penalty against the closest-length reference;
// add-one smoothing on orders with zero matches.
double bleu(const std::vector<TokenSeq>& hypotheses, const std::vector<RefSet>& references,
            int max_n);

// ROUGE-n recall in [0, 100]: best reference per instance, averaged.
double rouge_n(const std::vector<TokenSeq>& hypotheses, const std::vector<RefSet>& references,
               int n);

// ROUGE-L F-measure in [0, 100] (recall-weighted, beta^2 = 12), best
// reference per instance, averaged.
double rouge_l(const std::vector<TokenSeq>& hypotheses, const std::vector<RefSet>& references);

// (precision, recall) of a predicted id set against the target bag.
// Empty prediction gives precision 0 by convention; empty target throws.
std::pair<double, double> bow_pr(const std::set<int>& predicted, const std::set<int>& target);

// Fraction of generated non-special tokens whose id is in the bag.
// Throws if nothing remains after filtering specials.
double utilization(std::span<const int> generated, const std::set<int>& bag_ids,
                   const Vocabulary& vocab);

struct MetricsReport {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double rouge1 = 0, rouge2 = 0, rougeL = 0;
  double bow_precision = 0, bow_recall = 0;
  double bow_precision_support = 0;  // mean predicted-set size
  double bow_recall_support = 0;     // mean target-bag size
  double utilization = 0;
  double utilization_support = 0;    // mean counted tokens per instance
  double mode_count_mean = 0;
  int instances = 0;

  std::string to_kv_text() const;
  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
  bool operator==(const MetricsReport&) const = default;
};

}  // namespace lbow
