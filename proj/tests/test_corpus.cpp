#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "lbow/common.hpp"
#include "lbow/data.hpp"
#include "lbow/vocab.hpp"

using namespace lbow;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << content;
  return p;
}

std::vector<std::vector<std::string>> toks(std::initializer_list<const char*> sentences) {
  std::vector<std::vector<std::string>> out;
  for (const char* s : sentences) out.push_back(tokenize(s));
  return out;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation") {
  CHECK(tokenize("How do I learn English?") ==
        std::vector<std::string>{"how", "do", "i", "learn", "english", "?"});
  CHECK(tokenize("a,b") == std::vector<std::string>{"a", ",", "b"});
  CHECK(tokenize("  spaced   out  ") == std::vector<std::string>{"spaced", "out"});
}

TEST_CASE("classify_content follows the stoplist") {
  Stoplist stop = Stoplist::builtin();
  CHECK(classify_content("improve", stop));
  CHECK_FALSE(classify_content("the", stop));
  CHECK_FALSE(classify_content(",", stop));
  CHECK_FALSE(classify_content("<pad>", stop));
  CHECK_THROWS(classify_content("", stop));
}

TEST_CASE("build_vocab counts, caps, and breaks ties by first occurrence") {
  Stoplist stop = Stoplist::builtin();

  SUBCASE("three distinct words give V = 7") {
    Vocabulary v = build_vocab(toks({"red green blue"}), 10, stop);
    CHECK(v.size() == 7);
  }
  SUBCASE("cap keeps the most frequent") {
    Vocabulary v = build_vocab(toks({"a a a b b c"}), 6, stop);
    CHECK(v.size() == 6);
    CHECK(v.has("a"));
    CHECK(v.has("b"));
    CHECK_FALSE(v.has("c"));
  }
  SUBCASE("equal frequency: earlier-seen token gets the lower id") {
    Vocabulary v = build_vocab(toks({"zebra apple zebra apple"}), 10, stop);
    CHECK(v.id("zebra") < v.id("apple"));
  }
  SUBCASE("empty corpus is an error") {
    CHECK_THROWS_AS(build_vocab({}, 10, stop), DataError);
    CHECK_THROWS_AS(build_vocab(toks({"x"}), 4, stop), UsageError);
  }
}

TEST_CASE("vocabulary round trip and UNK fallback") {
  Stoplist stop = Stoplist::builtin();
  Vocabulary v = build_vocab(toks({"the cat sat on the mat"}), 50, stop);
  std::vector<std::string> sent = tokenize("the cat sat");
  CHECK(v.decode(v.encode(sent)) == sent);
  CHECK(v.id("unseen-token") == Vocabulary::kUnk);

  fs::path p = write_temp("lbow_vocab_rt.txt", "");
  v.save(p);
  Vocabulary loaded = Vocabulary::load(p, stop);
  CHECK(loaded.size() == v.size());
  for (int i = 0; i < v.size(); ++i) {
    CHECK(loaded.token(i) == v.token(i));
    CHECK(loaded.is_content(i) == v.is_content(i));
  }
}

TEST_CASE("quora loader builds instances with content-word bags") {
  Stoplist stop = Stoplist::builtin();
  std::string text = "how do i learn english\thow can i improve my english\n";
  Vocabulary v = build_vocab(toks({"how do i learn english", "how can i improve my english"}),
                             100, stop);
  fs::path p = write_temp("lbow_quora.txt", text);
  auto instances = load_pairs(p, Format::quora, v, 16);
  REQUIRE(instances.size() == 1);
  const Instance& inst = instances[0];
  CHECK(inst.source == v.encode(tokenize("how do i learn english")));
  REQUIRE(inst.targets.size() == 1);
  CHECK(inst.targets[0].back() == Vocabulary::kEos);

  std::set<int> bow(inst.target_bow.begin(), inst.target_bow.end());
  CHECK(bow.count(v.id("improve")) == 1);
  CHECK(bow.count(v.id("english")) == 1);
  CHECK(bow.count(v.id("learn")) == 0);  // source-side only
  CHECK(bow.count(v.id("the")) == 0);
  for (int id : inst.target_bow) {
    CHECK(v.is_content(id));
    CHECK_FALSE(v.is_special(id));
  }
}

TEST_CASE("quora loader rejects malformed lines with the line number") {
  Stoplist stop = Stoplist::builtin();
  Vocabulary v = build_vocab(toks({"a b"}), 20, stop);
  fs::path p = write_temp("lbow_quora_bad.txt", "ok line\tfine\nno tab here\n");
  try {
    load_pairs(p, Format::quora, v, 16);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("mscoco loader gathers four targets per group") {
  Stoplist stop = Stoplist::builtin();
  std::string text =
      "a dog runs fast\n"
      "the dog is quick\n"
      "a hound sprints\n"
      "the dog moves quickly\n"
      "a quick dog\n"
      "\n"
      "a cat sleeps\n"
      "the cat naps\n"
      "a kitten rests\n"
      "the cat is asleep\n"
      "a sleepy cat\n";
  std::vector<std::vector<std::string>> all;
  {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line))
      if (!line.empty()) all.push_back(tokenize(line));
  }
  Vocabulary v = build_vocab(all, 100, stop);
  fs::path p = write_temp("lbow_coco.txt", text);
  auto instances = load_pairs(p, Format::mscoco, v, 16);
  REQUIRE(instances.size() == 2);
  CHECK(instances[0].targets.size() == 4);
  std::set<int> bow(instances[0].target_bow.begin(), instances[0].target_bow.end());
  CHECK(bow.count(v.id("hound")) == 1);    // from caption 3
  CHECK(bow.count(v.id("quickly")) == 1);  // from caption 4
  CHECK(bow.count(v.id("runs")) == 0);     // source caption is not a target

  fs::path bad = write_temp("lbow_coco_bad.txt", "one\ntwo\nthree\n");
  CHECK_THROWS_AS(load_pairs(bad, Format::mscoco, v, 16), DataError);
}

TEST_CASE("over-length sentences are truncated, never dropped") {
  Stoplist stop = Stoplist::builtin();
  std::string twenty = "w0 w1 w2 w3 w4 w5 w6 w7 w8 w9 w10 w11 w12 w13 w14 w15 w16 w17 w18 w19";
  Vocabulary v = build_vocab(toks({twenty.c_str()}), 100, stop);
  fs::path p = write_temp("lbow_trunc.txt", twenty + "\t" + twenty + "\n");
  auto instances = load_pairs(p, Format::quora, v, 16);
  REQUIRE(instances.size() == 1);
  CHECK(instances[0].source.size() == 16);
  CHECK(instances[0].targets[0].size() == 16);  // 15 tokens + EOS
  CHECK(instances[0].targets[0].back() == Vocabulary::kEos);
}

TEST_CASE("instances with an empty bag are skipped and counted") {
  Stoplist stop = Stoplist::builtin();
  Vocabulary v = build_vocab(toks({"cat", "the"}), 100, stop);
  fs::path p = write_temp("lbow_skip.txt", "cat\tthe\ncat\tcat\n");
  LoadStats stats;
  auto instances = load_pairs(p, Format::quora, v, 16, &stats);
  CHECK(instances.size() == 1);
  CHECK(stats.skipped_empty_bow == 1);
}

TEST_CASE("batches pad, mask, and reshuffle deterministically") {
  Stoplist stop = Stoplist::builtin();
  Vocabulary v = build_vocab(toks({"a b c d e cat dog bird fish goat"}), 100, stop);
  std::vector<Instance> instances;
  for (int i = 0; i < 5; ++i) {
    Instance inst = make_instance({"cat"}, {{"cat", "dog"}}, v, 16);
    inst.source.assign(static_cast<size_t>(1 + i), v.id("cat"));  // varying lengths
    instances.push_back(inst);
  }

  SUBCASE("batch sizes 2,2,1 and pad mask zeros") {
    BatchIterator it(instances, 2, nullptr);
    Batch b;
    std::vector<int> sizes;
    while (it.next(b)) {
      sizes.push_back(b.size);
      for (int i = 0; i < b.size; ++i) {
        for (size_t j = 0; j < b.src[static_cast<size_t>(i)].size(); ++j) {
          if (!b.src_mask[static_cast<size_t>(i)][j])
            CHECK(b.src[static_cast<size_t>(i)][j] == Vocabulary::kPad);
        }
      }
    }
    CHECK(sizes == std::vector<int>{2, 2, 1});
  }
  SUBCASE("same seed gives the same order") {
    Rng r1(9), r2(9);
    BatchIterator a(instances, 2, &r1), b(instances, 2, &r2);
    Batch ba, bb;
    while (a.next(ba)) {
      REQUIRE(b.next(bb));
      CHECK(ba.instance_index == bb.instance_index);
    }
  }
}

TEST_CASE("synthetic corpus: determinism, planted pairs, truth") {
  SynthSpec spec;
  spec.instance_count = 60;
  spec.test_count = 10;
  spec.seed = 1;

  SynthCorpus c1 = make_synth_corpus(spec);
  SynthCorpus c2 = make_synth_corpus(spec);
  CHECK(c1.train_text == c2.train_text);
  CHECK(c1.test_text == c2.test_text);

  SUBCASE("neighbor truth holds the planted partner") {
    REQUIRE(c1.neighbor_truth.count("big") == 1);
    CHECK(c1.neighbor_truth.at("big").count("large") == 1);
  }

  SUBCASE("every planted source word maps to a group member in the target") {
    int checked = 0;
    for (const auto& [src, tgt] : c1.train_text) {
      auto src_toks = tokenize(src);
      auto tgt_toks = tokenize(tgt);
      for (const auto& w : src_toks) {
        auto it = c1.neighbor_truth.find(w);
        if (it == c1.neighbor_truth.end()) continue;
        bool found = false;
        for (const auto& t : tgt_toks) {
          if (t == w || it->second.count(t)) {
            found = true;
            break;
          }
        }
        CHECK(found);
        ++checked;
      }
    }
    CHECK(checked > 0);
  }

  SUBCASE("instances respect the bag invariants") {
    for (const Instance& inst : c1.train) {
      CHECK(!inst.target_bow.empty());
      std::set<int> tgt_ids;
      for (const auto& t : inst.targets) tgt_ids.insert(t.begin(), t.end());
      for (int id : inst.target_bow) {
        CHECK(tgt_ids.count(id) == 1);
        CHECK(c1.vocab.is_content(id));
      }
      CHECK(inst.source.size() <= 16);
    }
  }

  SUBCASE("tiny budget fails loudly") {
    SynthSpec small = spec;
    small.vocab_budget = 40;
    CHECK_THROWS_AS(make_synth_corpus(small), DataError);
    small.vocab_budget = 10;
    CHECK_THROWS_AS(make_synth_corpus(small), UsageError);
  }
}
