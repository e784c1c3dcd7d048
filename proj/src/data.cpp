#include "lbow/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "lbow/common.hpp"

namespace lbow {

Format parse_format(const std::string& name) {
  if (name == "quora") return Format::quora;
  if (name == "mscoco") return Format::mscoco;
  throw UsageError("unknown data format: " + name + " (expected quora or mscoco)");
}

Instance make_instance(const std::vector<std::string>& source,
                       const std::vector<std::vector<std::string>>& targets,
                       const Vocabulary& vocab, int max_len) {
  Instance inst;
  inst.source = vocab.encode(source);
  if (inst.source.size() > static_cast<size_t>(max_len)) inst.source.resize(max_len);

  std::set<int> bow;
  for (const auto& tgt : targets) {
    std::vector<int> ids = vocab.encode(tgt);
    if (ids.size() > static_cast<size_t>(max_len - 1)) ids.resize(max_len - 1);
    for (int id : ids)
      if (!vocab.is_special(id) && vocab.is_content(id)) bow.insert(id);
    ids.push_back(Vocabulary::kEos);
    inst.targets.push_back(std::move(ids));
  }
  inst.target_bow.assign(bow.begin(), bow.end());
  return inst;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::vector<Instance> load_pairs(const std::filesystem::path& path, Format format,
                                 const Vocabulary& vocab, int max_len, LoadStats* stats) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<Instance> out;
  LoadStats local;
  LoadStats& st = stats ? *stats : local;

  auto push_instance = [&](const std::vector<std::string>& src,
                           const std::vector<std::vector<std::string>>& tgts, int lineno) {
    if (src.empty())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty source sentence");
    for (const auto& t : tgts)
      if (t.empty())
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty target sentence");
    Instance inst = make_instance(src, tgts, vocab, max_len);
    if (inst.target_bow.empty()) {
      ++st.skipped_empty_bow;
      return;
    }
    out.push_back(std::move(inst));
    ++st.loaded;
  };

  if (format == Format::quora) {
    for (size_t i = 0; i < lines.size(); ++i) {
      const std::string& line = lines[i];
      if (line.empty()) continue;
      size_t tab = line.find('\t');
      if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
        throw DataError(path.string() + ":" + std::to_string(i + 1) +
                        ": expected exactly one TAB separator");
      push_instance(tokenize(line.substr(0, tab)), {tokenize(line.substr(tab + 1))},
                    static_cast<int>(i + 1));
    }
  } else {
    std::vector<std::string> group;
    int group_start = 1;
    auto flush = [&](size_t end_line) {
      if (group.empty()) return;
      if (group.size() != 5)
        throw DataError(path.string() + ":" + std::to_string(end_line) +
                        ": mscoco group must have 5 captions, got " +
                        std::to_string(group.size()));
      std::vector<std::vector<std::string>> tgts;
      for (size_t j = 1; j < group.size(); ++j) tgts.push_back(tokenize(group[j]));
      push_instance(tokenize(group[0]), tgts, group_start);
      group.clear();
    };
    for (size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) {
        flush(i);
      } else {
        if (group.empty()) group_start = static_cast<int>(i + 1);
        group.push_back(lines[i]);
      }
    }
    flush(lines.size());
  }
  return out;
}

// ------------------------------------------------------------------ batches

BatchIterator::BatchIterator(const std::vector<Instance>& instances, int batch_size, Rng* rng)
    : instances_(&instances), batch_size_(batch_size), rng_(rng) {
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  order_.resize(instances.size());
  chosen_target_.assign(instances.size(), 0);
  reset();
}

void BatchIterator::reset() {
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  // Draw targets first, in instance order, so the draw does not depend on
  // the shuffle or the batch size.
  for (size_t i = 0; i < order_.size(); ++i) {
    int n = static_cast<int>((*instances_)[i].targets.size());
    chosen_target_[i] = (n > 1 && rng_) ? rng_->uniform_int(n) : 0;
  }
  if (rng_) rng_->shuffle(order_);
  cursor_ = 0;
}

bool BatchIterator::next(Batch& out) {
  if (cursor_ >= order_.size()) return false;
  size_t end = std::min(cursor_ + static_cast<size_t>(batch_size_), order_.size());

  out = Batch{};
  out.size = static_cast<int>(end - cursor_);
  size_t max_src = 0, max_tgt = 0;
  for (size_t i = cursor_; i < end; ++i) {
    const Instance& inst = (*instances_)[static_cast<size_t>(order_[i])];
    max_src = std::max(max_src, inst.source.size());
    max_tgt = std::max(max_tgt, inst.targets[static_cast<size_t>(chosen_target_[static_cast<size_t>(order_[i])])].size());
  }
  for (size_t i = cursor_; i < end; ++i) {
    int idx = order_[i];
    const Instance& inst = (*instances_)[static_cast<size_t>(idx)];
    const std::vector<int>& tgt = inst.targets[static_cast<size_t>(chosen_target_[static_cast<size_t>(idx)])];

    std::vector<int> s(max_src, Vocabulary::kPad);
    std::vector<uint8_t> sm(max_src, 0);
    std::copy(inst.source.begin(), inst.source.end(), s.begin());
    std::fill(sm.begin(), sm.begin() + static_cast<long>(inst.source.size()), 1);

    std::vector<int> t(max_tgt, Vocabulary::kPad);
    std::vector<uint8_t> tm(max_tgt, 0);
    std::copy(tgt.begin(), tgt.end(), t.begin());
    std::fill(tm.begin(), tm.begin() + static_cast<long>(tgt.size()), 1);

    out.src.push_back(std::move(s));
    out.src_mask.push_back(std::move(sm));
    out.tgt.push_back(std::move(t));
    out.tgt_mask.push_back(std::move(tm));
    out.bows.push_back(inst.target_bow);
    out.instance_index.push_back(idx);
  }
  cursor_ = end;
  return true;
}

// --------------------------------------------------------- synthetic corpus

namespace {

std::vector<std::pair<std::string, std::vector<std::vector<std::string>>>> builtin_synonyms() {
  auto g = [](std::initializer_list<const char*> ws) {
    std::vector<std::string> v;
    for (const char* w : ws) v.push_back(w);
    return v;
  };
  return {
      {"noun",
       {g({"dog", "hound"}), g({"cat", "kitten"}), g({"house", "home"}),
        g({"car", "auto"}), g({"road", "street"}), g({"photo", "picture"}),
        g({"movie", "film"}), g({"kid", "child"}), g({"shop", "store"}),
        g({"sea", "ocean"}), g({"stone", "rock"}), g({"cash", "money"}),
        g({"song", "tune"}), g({"boat", "ship"}), g({"forest", "woods"}),
        g({"hill", "mountain"}), g({"meal", "dinner"}), g({"friend", "pal"}),
        g({"book", "novel"}), g({"garden", "yard"})}},
      {"verb",
       {g({"learn", "study"}), g({"improve", "boost"}), g({"buy", "purchase"}),
        g({"fix", "repair"}), g({"build", "construct"}), g({"clean", "wash"}),
        g({"start", "begin"}), g({"finish", "complete"}), g({"pick", "choose"}),
        g({"get", "obtain"}), g({"like", "enjoy"}), g({"run", "jog"}),
        g({"walk", "stroll"}), g({"speak", "talk"}), g({"watch", "observe"}),
        g({"find", "locate"})}},
      {"adj",
       {g({"big", "large"}), g({"small", "little"}), g({"fast", "quick"}),
        g({"slow", "sluggish"}), g({"happy", "glad"}), g({"sad", "gloomy"}),
        g({"smart", "clever"}), g({"cheap", "affordable"}),
        g({"pretty", "beautiful"}), g({"old", "ancient"}), g({"new", "modern"}),
        g({"hard", "difficult"})}},
      {"adv",
       {g({"quickly", "rapidly"}), g({"easily", "smoothly"}),
        g({"often", "frequently"}), g({"loudly", "noisily"})}},
  };
}

std::vector<std::vector<std::string>> builtin_templates() {
  return {
      {"how do i {verb} my {noun} ?",
       "how can i {verb} my {noun} ?",
       "what is the best way to {verb} my {noun} ?"},
      {"why is the {noun} so {adj} ?",
       "is the {noun} really {adj} ?",
       "what makes the {noun} look {adj} ?"},
      {"the {adj} {noun} will {verb} today .",
       "today the {adj} {noun} can {verb} .",
       "a {adj} {noun} may {verb} now ."},
      {"the {noun} can {verb} the {noun2} .",
       "a {noun} will {verb} that {noun2} .",
       "see the {noun} {verb} the {noun2} ."},
      {"the {noun} can {verb} very {adv} .",
       "that {noun} will {verb} so {adv} .",
       "people see the {noun} {verb} {adv} ."},
      {"people want to {verb} the {noun} .",
       "everyone wants to {verb} that {noun} .",
       "we want to {verb} this {noun} ."},
  };
}

struct Slot {
  std::string name;      // e.g. "noun2"
  std::string category;  // e.g. "noun"
};

// Patterns are whitespace-separated and must keep slot tokens intact, so
// they bypass the text tokenizer.
std::vector<std::string> split_pattern(const std::string& pattern) {
  std::vector<std::string> out;
  std::istringstream is(pattern);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

bool is_slot(const std::string& tok) {
  return tok.size() > 2 && tok.front() == '{' && tok.back() == '}';
}

Slot parse_slot(const std::string& tok) {
  Slot s;
  s.name = tok.substr(1, tok.size() - 2);
  s.category = s.name;
  while (!s.category.empty() && std::isdigit(static_cast<unsigned char>(s.category.back())))
    s.category.pop_back();
  return s;
}

}  // namespace

SynthCorpus make_synth_corpus(const SynthSpec& spec) {
  if (spec.vocab_budget < 30) throw UsageError("synth: vocabulary budget must be >= 30");
  if (spec.instance_count < 1) throw UsageError("synth: instance_count must be >= 1");

  const auto synonyms = spec.synonyms.empty() ? builtin_synonyms() : spec.synonyms;
  const auto template_groups =
      spec.template_groups.empty() ? builtin_templates() : spec.template_groups;

  // Collect literal tokens and per-group slot lists.
  std::set<std::string> literal_set;
  std::vector<std::vector<Slot>> group_slots(template_groups.size());
  std::map<std::string, int> max_slot_multiplicity;  // category -> distinct slots needed
  for (size_t gi = 0; gi < template_groups.size(); ++gi) {
    std::set<std::string> seen;
    std::map<std::string, int> cat_count;
    for (const auto& pattern : template_groups[gi]) {
      for (const auto& tok : split_pattern(pattern)) {
        if (is_slot(tok)) {
          Slot s = parse_slot(tok);
          if (!seen.count(s.name)) {
            seen.insert(s.name);
            group_slots[gi].push_back(s);
            cat_count[s.category] += 1;
          }
        } else {
          literal_set.insert(tok);
        }
      }
    }
    for (const auto& [cat, cnt] : cat_count) {
      auto& m = max_slot_multiplicity[cat];
      m = std::max(m, cnt);
    }
  }

  // Apply the vocabulary budget: specials + literals are mandatory, then
  // synonym groups are added round-robin across categories while they fit.
  int used = Vocabulary::kNumSpecial + static_cast<int>(literal_set.size());
  if (used >= spec.vocab_budget)
    throw DataError("synth: budget " + std::to_string(spec.vocab_budget) +
                    " cannot even cover the template words (" + std::to_string(used) + ")");

  std::map<std::string, std::vector<std::vector<std::string>>> kept;
  size_t max_groups = 0;
  for (const auto& [cat, groups] : synonyms) max_groups = std::max(max_groups, groups.size());
  for (size_t round = 0; round < max_groups; ++round) {
    for (const auto& [cat, groups] : synonyms) {
      if (round >= groups.size()) continue;
      int fresh = 0;
      for (const auto& w : groups[round])
        if (!literal_set.count(w)) ++fresh;
      if (used + fresh > spec.vocab_budget) continue;
      kept[cat].push_back(groups[round]);
      used += fresh;
    }
  }
  for (const auto& [cat, need] : max_slot_multiplicity) {
    if (static_cast<int>(kept[cat].size()) < need)
      throw DataError("synth: budget too small to fill templates; category '" + cat +
                      "' needs " + std::to_string(need) + " synonym groups, kept " +
                      std::to_string(kept[cat].size()));
  }

  // Generate raw sentence pairs.
  Rng rng(spec.seed);
  const int total = spec.instance_count + spec.test_count;
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(static_cast<size_t>(total));
  for (int n = 0; n < total; ++n) {
    int gi = rng.uniform_int(static_cast<int>(template_groups.size()));
    const auto& patterns = template_groups[static_cast<size_t>(gi)];
    const auto& slots = group_slots[static_cast<size_t>(gi)];

    // Pick a synonym group per slot, without replacement inside a category.
    std::map<std::string, std::vector<int>> available;
    std::map<std::string, std::string> src_word, tgt_word;
    for (const Slot& slot : slots) {
      auto& avail = available[slot.category];
      if (avail.empty()) {
        avail.resize(kept[slot.category].size());
        for (size_t i = 0; i < avail.size(); ++i) avail[i] = static_cast<int>(i);
      }
      int pick = rng.uniform_int(static_cast<int>(avail.size()));
      int group_idx = avail[static_cast<size_t>(pick)];
      avail.erase(avail.begin() + pick);
      const auto& group = kept[slot.category][static_cast<size_t>(group_idx)];
      src_word[slot.name] = group[static_cast<size_t>(rng.uniform_int(static_cast<int>(group.size())))];
      tgt_word[slot.name] = group[static_cast<size_t>(rng.uniform_int(static_cast<int>(group.size())))];
    }

    auto render = [&](const std::string& pattern,
                      const std::map<std::string, std::string>& words) {
      std::string out;
      for (const auto& tok : split_pattern(pattern)) {
        if (!out.empty()) out.push_back(' ');
        if (is_slot(tok))
          out += words.at(parse_slot(tok).name);
        else
          out += tok;
      }
      return out;
    };
    const size_t src_pick = static_cast<size_t>(rng.uniform_int(static_cast<int>(patterns.size())));
    size_t tgt_pick = static_cast<size_t>(rng.uniform_int(static_cast<int>(patterns.size())));
    if (rng.uniform01() < spec.same_template_prob) tgt_pick = src_pick;
    pairs.emplace_back(render(patterns[src_pick], src_word),
                       render(patterns[tgt_pick], tgt_word));
  }

  // Vocabulary over everything generated; the budget is the size cap.
  std::vector<std::vector<std::string>> sentences;
  for (const auto& [s, t] : pairs) {
    sentences.push_back(tokenize(s));
    sentences.push_back(tokenize(t));
  }
  const Stoplist stoplist = Stoplist::builtin();

  SynthCorpus corpus;
  corpus.vocab = build_vocab(sentences, spec.vocab_budget, stoplist);
  for (int n = 0; n < total; ++n) {
    Instance inst = make_instance(tokenize(pairs[static_cast<size_t>(n)].first),
                                  {tokenize(pairs[static_cast<size_t>(n)].second)},
                                  corpus.vocab, spec.max_len);
    if (n < spec.instance_count) {
      corpus.train.push_back(std::move(inst));
      corpus.train_text.push_back(pairs[static_cast<size_t>(n)]);
    } else {
      corpus.test.push_back(std::move(inst));
      corpus.test_text.push_back(pairs[static_cast<size_t>(n)]);
    }
  }
  for (const auto& [cat, groups] : kept) {
    for (const auto& group : groups) {
      for (const auto& w : group) {
        auto& truth = corpus.neighbor_truth[w];
        for (const auto& other : group)
          if (other != w) truth.insert(other);
      }
    }
  }
  return corpus;
}

}  // namespace lbow
