#include "lbow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "lbow/common.hpp"

namespace lbow {

namespace {

using Ngram = std::vector<int>;

std::map<Ngram, int> ngram_counts(const TokenSeq& seq, int n) {
  std::map<Ngram, int> counts;
  if (static_cast<int>(seq.size()) >= n) {
    for (size_t i = 0; i + static_cast<size_t>(n) <= seq.size(); ++i)
      counts[Ngram(seq.begin() + static_cast<long>(i), seq.begin() + static_cast<long>(i + n))]++;
  }
  return counts;
}

void check_inputs(const std::vector<TokenSeq>& hyps, const std::vector<RefSet>& refs) {
  if (hyps.empty()) throw std::invalid_argument("metrics: empty hypothesis list");
  if (hyps.size() != refs.size())
    throw std::invalid_argument("metrics: hypothesis/reference length mismatch");
  for (const auto& rs : refs)
    if (rs.empty()) throw std::invalid_argument("metrics: instance with no references");
}

}  // namespace

double bleu(const std::vector<TokenSeq>& hyps, const std::vector<RefSet>& refs, int max_n) {
  check_inputs(hyps, refs);
  if (max_n < 1 || max_n > 4) throw std::invalid_argument("bleu: max_n must be in 1..4");

  std::vector<long> matches(static_cast<size_t>(max_n), 0);
  std::vector<long> totals(static_cast<size_t>(max_n), 0);
  long hyp_len = 0, ref_len = 0;

  for (size_t i = 0; i < hyps.size(); ++i) {
    const TokenSeq& hyp = hyps[i];
    hyp_len += static_cast<long>(hyp.size());
    // closest-length reference for the brevity penalty; ties -> shorter
    long best_ref = static_cast<long>(refs[i][0].size());
    for (const auto& r : refs[i]) {
      long len = static_cast<long>(r.size());
      long d_new = std::labs(len - static_cast<long>(hyp.size()));
      long d_old = std::labs(best_ref - static_cast<long>(hyp.size()));
      if (d_new < d_old || (d_new == d_old && len < best_ref)) best_ref = len;
    }
    ref_len += best_ref;

    for (int n = 1; n <= max_n; ++n) {
      auto hyp_counts = ngram_counts(hyp, n);
      std::map<Ngram, int> max_ref_counts;
      for (const auto& r : refs[i]) {
        for (const auto& [g, c] : ngram_counts(r, n)) {
          auto& m = max_ref_counts[g];
          m = std::max(m, c);
        }
      }
      for (const auto& [g, c] : hyp_counts) {
        totals[static_cast<size_t>(n - 1)] += c;
        auto it = max_ref_counts.find(g);
        if (it != max_ref_counts.end())
          matches[static_cast<size_t>(n - 1)] += std::min(c, it->second);
      }
    }
  }

  double log_precision = 0.0;
  for (int n = 0; n < max_n; ++n) {
    double p;
    if (matches[static_cast<size_t>(n)] == 0) {
      p = 1.0 / static_cast<double>(totals[static_cast<size_t>(n)] + 1);
    } else {
      p = static_cast<double>(matches[static_cast<size_t>(n)]) /
          static_cast<double>(totals[static_cast<size_t>(n)]);
    }
    log_precision += std::log(p);
  }
  double bp = hyp_len < ref_len && hyp_len > 0
                  ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len))
                  : (hyp_len == 0 ? 0.0 : 1.0);
  return 100.0 * bp * std::exp(log_precision / static_cast<double>(max_n));
}

double rouge_n(const std::vector<TokenSeq>& hyps, const std::vector<RefSet>& refs, int n) {
  check_inputs(hyps, refs);
  if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
  double total = 0.0;
  for (size_t i = 0; i < hyps.size(); ++i) {
    auto hyp_counts = ngram_counts(hyps[i], n);
    double best = 0.0;
    for (const auto& r : refs[i]) {
      auto ref_counts = ngram_counts(r, n);
      long ref_total = 0, overlap = 0;
      for (const auto& [g, c] : ref_counts) {
        ref_total += c;
        auto it = hyp_counts.find(g);
        if (it != hyp_counts.end()) overlap += std::min(c, it->second);
      }
      double recall = ref_total > 0 ? static_cast<double>(overlap) / static_cast<double>(ref_total)
                                    : 0.0;
      best = std::max(best, recall);
    }
    total += best;
  }
  return 100.0 * total / static_cast<double>(hyps.size());
}

namespace {

int lcs_length(const TokenSeq& a, const TokenSeq& b) {
  std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double rouge_l(const std::vector<TokenSeq>& hyps, const std::vector<RefSet>& refs) {
  check_inputs(hyps, refs);
  constexpr double kBetaSq = 12.0;  // recall-weighted F
  double total = 0.0;
  for (size_t i = 0; i < hyps.size(); ++i) {
    double best = 0.0;
    for (const auto& r : refs[i]) {
      if (hyps[i].empty() || r.empty()) continue;
      double lcs = lcs_length(hyps[i], r);
      if (lcs == 0) continue;
      double prec = lcs / static_cast<double>(hyps[i].size());
      double rec = lcs / static_cast<double>(r.size());
      double f = (1.0 + kBetaSq) * prec * rec / (rec + kBetaSq * prec);
      best = std::max(best, f);
    }
    total += best;
  }
  return 100.0 * total / static_cast<double>(hyps.size());
}

std::pair<double, double> bow_pr(const std::set<int>& predicted, const std::set<int>& target) {
  if (target.empty()) throw std::invalid_argument("bow_pr: empty target bag");
  if (predicted.empty()) return {0.0, 0.0};
  long inter = 0;
  for (int id : predicted)
    if (target.count(id)) ++inter;
  return {static_cast<double>(inter) / static_cast<double>(predicted.size()),
          static_cast<double>(inter) / static_cast<double>(target.size())};
}

double utilization(std::span<const int> generated, const std::set<int>& bag_ids,
                   const Vocabulary& vocab) {
  long counted = 0, hits = 0;
  for (int id : generated) {
    if (vocab.is_special(id)) continue;
    ++counted;
    if (bag_ids.count(id)) ++hits;
  }
  if (counted == 0) throw std::invalid_argument("utilization: no non-special tokens");
  return static_cast<double>(hits) / static_cast<double>(counted);
}

std::string MetricsReport::to_kv_text() const {
  auto f = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::string s;
  s += "bleu1 " + f(bleu1) + "\n";
  s += "bleu2 " + f(bleu2) + "\n";
  s += "bleu3 " + f(bleu3) + "\n";
  s += "bleu4 " + f(bleu4) + "\n";
  s += "rouge1 " + f(rouge1) + "\n";
  s += "rouge2 " + f(rouge2) + "\n";
  s += "rougeL " + f(rougeL) + "\n";
  s += "bow_precision " + f(bow_precision) + "\n";
  s += "bow_recall " + f(bow_recall) + "\n";
  s += "bow_precision_support " + f(bow_precision_support) + "\n";
  s += "bow_recall_support " + f(bow_recall_support) + "\n";
  s += "utilization " + f(utilization) + "\n";
  s += "utilization_support " + f(utilization_support) + "\n";
  s += "mode_count_mean " + f(mode_count_mean) + "\n";
  s += "instances " + std::to_string(instances) + "\n";
  return s;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j{{"bleu1", bleu1},
                   {"bleu2", bleu2},
                   {"bleu3", bleu3},
                   {"bleu4", bleu4},
                   {"rouge1", rouge1},
                   {"rouge2", rouge2},
                   {"rougeL", rougeL},
                   {"bow_precision", bow_precision},
                   {"bow_recall", bow_recall},
                   {"bow_precision_support", bow_precision_support},
                   {"bow_recall_support", bow_recall_support},
                   {"utilization", utilization},
                   {"utilization_support", utilization_support},
                   {"mode_count_mean", mode_count_mean},
                   {"instances", instances}};
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  MetricsReport r;
  r.bleu1 = j.at("bleu1");
  r.bleu2 = j.at("bleu2");
  r.bleu3 = j.at("bleu3");
  r.bleu4 = j.at("bleu4");
  r.rouge1 = j.at("rouge1");
  r.rouge2 = j.at("rouge2");
  r.rougeL = j.at("rougeL");
  r.bow_precision = j.at("bow_precision");
  r.bow_recall = j.at("bow_recall");
  r.bow_precision_support = j.at("bow_precision_support");
  r.bow_recall_support = j.at("bow_recall_support");
  r.utilization = j.at("utilization");
  r.utilization_support = j.at("utilization_support");
  r.mode_count_mean = j.at("mode_count_mean");
  r.instances = j.at("instances");
  return r;
}

}  // namespace lbow
