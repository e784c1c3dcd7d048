#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "lbow/common.hpp"
#include "lbow/trainer.hpp"

using namespace lbow;
namespace fs = std::filesystem;

namespace {

SynthCorpus shared_corpus() {
  SynthSpec spec;
  spec.instance_count = 400;
  spec.test_count = 100;
  spec.vocab_budget = 100;
  spec.seed = 11;
  return make_synth_corpus(spec);
}

RunConfig small_config(const std::string& variant) {
  RunConfig cfg;
  cfg.variant = variant;
  cfg.emb = 24;
  cfg.hidden = 24;
  cfg.l = 3;
  cfg.k = 8;
  cfg.batch_size = 16;
  cfg.epochs = 12;
  cfg.seed = 1;
  return cfg;
}

// One shared trained model for the diagnostic tests below.
struct Trained {
  SynthCorpus corpus;
  std::unique_ptr<Session> session;
  TrainResult result;
};

const Trained& trained_lbow() {
  static Trained t = [] {
    Trained out{shared_corpus(), nullptr, {}};
    RunConfig cfg = small_config("lbow_topk");
    out.session = std::make_unique<Session>(cfg, out.corpus.vocab.size());
    out.result = train(*out.session, out.corpus.train, &out.corpus.test, out.corpus.vocab);
    return out;
  }();
  return t;
}

double held_out_s2s(const LatentBowModel& model, const std::vector<Instance>& test,
                    uint64_t noise_seed) {
  Rng noise(noise_seed);
  double total = 0;
  ad::Tape t;
  for (const Instance& inst : test) {
    t.reset();
    auto L = model.instance_loss(t, inst.source, {}, inst.targets[0], inst.target_bow, &noise);
    total += t.val(L.s2s)(0, 0);
  }
  return total / static_cast<double>(test.size());
}

}  // namespace

TEST_CASE("adam minimizes a quadratic") {
  ad::ParameterStore store;
  ad::Parameter* p = store.create("x", 4, 1);
  p->value << 3.0, -2.0, 1.5, 0.5;
  AdamConfig cfg;
  cfg.lr = 0.05;
  ad::Tape t;
  for (uint64_t step = 1; step <= 400; ++step) {
    t.reset();
    ad::Var x = t.leaf(p);
    ad::Var loss = t.dot(x, x);
    t.backward(loss);
    adam_step(store, cfg, step);
  }
  CHECK(p->value.cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("config serialization round trips byte for byte") {
  RunConfig cfg = small_config("lbow_gumbel");
  cfg.data_path = "/tmp/x.txt";
  cfg.lambda_bow = 0.75;
  std::string once = cfg.to_json_text();
  RunConfig parsed = RunConfig::from_json_text(once);
  CHECK(parsed == cfg);
  CHECK(parsed.to_json_text() == once);
}

TEST_CASE("config validation rejects bad combinations") {
  RunConfig cfg = small_config("seq2seq");
  cfg.ext_copy = true;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = small_config("lbow_topk");
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = small_config("lbow_topk");
  cfg.residual = true;
  cfg.layers = 2;
  cfg.hidden = 32;  // emb stays 24
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.hidden = 24;
  cfg.validate();  // emb == hidden is fine
}

TEST_CASE("epoch log JSON round trips") {
  EpochLog log;
  log.epoch = 7;
  log.train_loss = 1.25;
  log.train_s2s = 1.0;
  log.train_bow = 0.25;
  log.has_dev = true;
  log.dev.bleu2 = 33.25;
  log.dev.instances = 100;
  EpochLog back = EpochLog::from_json(log.to_json());
  CHECK(back.epoch == 7);
  CHECK(back.train_loss == 1.25);
  CHECK(back.has_dev);
  CHECK(back.dev.bleu2 == 33.25);
}

TEST_CASE("same config and seed trains to the identical loss") {
  SynthCorpus corpus = shared_corpus();
  RunConfig cfg = small_config("lbow_gumbel");
  cfg.epochs = 3;
  Session a(cfg, corpus.vocab.size());
  Session b(cfg, corpus.vocab.size());
  TrainResult ra = train(a, corpus.train, nullptr, corpus.vocab);
  TrainResult rb = train(b, corpus.train, nullptr, corpus.vocab);
  REQUIRE(ra.logs.size() == rb.logs.size());
  for (size_t i = 0; i < ra.logs.size(); ++i)
    CHECK(ra.logs[i].train_loss == rb.logs[i].train_loss);  // bit-identical
}

TEST_CASE("checkpoints restore the exact model and trajectory") {
  SynthCorpus corpus = shared_corpus();
  fs::path dir = fs::temp_directory_path() / "lbow_ckpt_test";
  fs::create_directories(dir);

  RunConfig cfg = small_config("lbow_gumbel");
  cfg.epochs = 5;

  // straight 5-epoch run
  Session full(cfg, corpus.vocab.size());
  train(full, corpus.train, nullptr, corpus.vocab);
  MetricsReport full_report = evaluate(full.model(), corpus.test, corpus.vocab);

  // 3 epochs, checkpoint, resume 2 more
  RunConfig cfg3 = cfg;
  cfg3.epochs = 3;
  cfg3.checkpoint_path = (dir / "ckpt.bin").string();
  Session part(cfg3, corpus.vocab.size());
  train(part, corpus.train, nullptr, corpus.vocab);

  auto resumed = Session::load_checkpoint(dir / "ckpt.bin");
  CHECK(resumed->epoch == 3);

  SUBCASE("loaded checkpoint evaluates bit-identically to the in-memory model") {
    MetricsReport in_memory = evaluate(part.model(), corpus.test, corpus.vocab);
    MetricsReport loaded = evaluate(resumed->model(), corpus.test, corpus.vocab);
    CHECK(in_memory == loaded);
  }

  SUBCASE("resume matches the uninterrupted run to full precision") {
    // extend the loaded session to 5 epochs
    RunConfig cfg5 = resumed->cfg();
    REQUIRE(cfg5.epochs == 3);
    auto extended = std::make_unique<Session>(cfg, corpus.vocab.size());
    // transplant state: reload via checkpoint with an epochs override
    fs::path ext_path = dir / "ckpt_ext.bin";
    {
      auto tmp = Session::load_checkpoint(dir / "ckpt.bin");
      // write a new checkpoint that carries epochs = 5
      RunConfig bumped = tmp->cfg();
      bumped.epochs = 5;
      Session fresh(bumped, corpus.vocab.size());
      // copy learned state over
      for (const auto& p : tmp->model().params().all()) {
        ad::Parameter* q = fresh.model().params().find(p->name);
        q->value = p->value;
        q->adam_m = p->adam_m;
        q->adam_v = p->adam_v;
      }
      fresh.epoch = tmp->epoch;
      fresh.adam_t = tmp->adam_t;
      fresh.data_rng.set_state(tmp->data_rng.state());
      fresh.noise_rng.set_state(tmp->noise_rng.state());
      fresh.save_checkpoint(ext_path);
    }
    auto cont = Session::load_checkpoint(ext_path);
    train(*cont, corpus.train, nullptr, corpus.vocab);
    MetricsReport resumed_report = evaluate(cont->model(), corpus.test, corpus.vocab);
    CHECK(resumed_report == full_report);
    for (const auto& p : full.model().params().all()) {
      const ad::Parameter* q = cont->model().params().find(p->name);
      CHECK((p->value - q->value).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("divergence aborts with an error") {
  SynthCorpus corpus = shared_corpus();
  RunConfig cfg = small_config("lbow_topk");
  cfg.epochs = 1;
  Session s(cfg, corpus.vocab.size());
  s.model().params().find("dec.out.w")->value(0, 0) = std::nan("");
  CHECK_THROWS_AS(train(s, corpus.train, nullptr, corpus.vocab), DivergenceError);
}

TEST_CASE("untrained neighbor heads are near uniform") {
  SynthCorpus corpus = shared_corpus();
  const int v = corpus.vocab.size();
  REQUIRE(v >= 100);
  RunConfig cfg = small_config("lbow_topk");
  Session s(cfg, corpus.vocab.size());
  NeighborTable table =
      dump_neighbors(s.model(), {"big", "dog", "learn"}, corpus.vocab, 1);
  for (const auto& row : table.rows) CHECK(row.prob < 10.0 / v);
}

TEST_CASE("training discovers planted synonyms and self-neighbors") {
  const Trained& t = trained_lbow();

  SUBCASE("held-out metrics exist and the loss went down") {
    REQUIRE(t.result.logs.size() == 12);
    CHECK(t.result.logs.back().train_loss < t.result.logs.front().train_loss);
    CHECK(t.result.logs.back().has_dev);
  }

  SUBCASE("mode counts trend upward over the first 10 epochs") {
    int violations = 0;
    for (size_t i = 1; i < 10 && i < t.result.logs.size(); ++i) {
      if (t.result.logs[i].dev.mode_count_mean < t.result.logs[i - 1].dev.mode_count_mean - 1e-9)
        ++violations;
    }
    CHECK(violations <= 1);
  }

  SUBCASE("every probed word is its own neighbor") {
    std::vector<std::string> words{"big", "dog", "learn", "cat"};
    std::vector<std::string> in_vocab;
    for (const auto& w : words)
      if (t.corpus.vocab.has(w)) in_vocab.push_back(w);
    REQUIRE(!in_vocab.empty());
    NeighborTable table = dump_neighbors(t.session->model(), in_vocab, t.corpus.vocab, 3);
    for (const auto& w : in_vocab) {
      bool self_found = false;
      for (const auto& row : table.rows)
        if (row.word == w && row.neighbor == w) self_found = true;
      CHECK_MESSAGE(self_found, w);
    }
  }

  SUBCASE("planted partners appear among the top predicted neighbors") {
    int hits = 0, total = 0;
    for (const auto& [word, partners] : t.corpus.neighbor_truth) {
      if (!t.corpus.vocab.has(word)) continue;
      ad::Tape tape;
      std::vector<int> ids{t.corpus.vocab.id(word)};
      EncoderOutput enc = t.session->model().encoder().encode(tape, ids);
      NeighborDists nd = t.session->model().heads().apply(tape, enc);
      ad::Var pi = mix_slices(tape, nd);
      std::vector<int> top = top_k_ids(tape.val(pi).col(0), 3);
      bool hit = false;
      for (int id : top)
        if (partners.count(t.corpus.vocab.token(id))) hit = true;
      hits += hit ? 1 : 0;
      ++total;
    }
    CAPTURE(hits);
    CAPTURE(total);
    CHECK(hits * 10 >= total * 3);  // at least 30% at this small scale
  }

  SUBCASE("oov words are reported, not scored") {
    NeighborTable table = dump_neighbors(t.session->model(), {"zzz-not-here"}, t.corpus.vocab, 3);
    CHECK(table.rows.empty());
    REQUIRE(table.oov.size() == 1);
    CHECK(table.oov[0] == "zzz-not-here");
  }
}

TEST_CASE("trace invariants on the trained model") {
  const Trained& t = trained_lbow();
  std::vector<std::string> sentence = tokenize(t.corpus.train_text[0].first);

  GenerationTrace tr = trace(t.session->model(), sentence, t.corpus.vocab);
  REQUIRE(!tr.output.empty());
  CHECK(tr.neighbors.size() == sentence.size());

  SUBCASE("attention rows sum to one") {
    for (const auto& row : tr.attention) {
      double total = 0;
      for (double a : row) total += a;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("provenance flags match bag membership") {
    std::set<std::string> bag_words;
    for (const auto& [w, p] : tr.bag) bag_words.insert(w);
    for (size_t i = 0; i < tr.output.size(); ++i)
      CHECK(static_cast<bool>(tr.from_bag[i]) == (bag_words.count(tr.output[i]) > 0));
  }
  SUBCASE("deterministic sampling gives identical traces") {
    GenerationTrace again = trace(t.session->model(), sentence, t.corpus.vocab);
    CHECK(again.to_text() == tr.to_text());
  }
  SUBCASE("trace text sections are present and stable") {
    std::string text = tr.to_text();
    CHECK(text.find("source:") != std::string::npos);
    CHECK(text.find("neighbors:") != std::string::npos);
    CHECK(text.find("bag:") != std::string::npos);
    CHECK(text.find("output:") != std::string::npos);
    CHECK(text.find("provenance:") != std::string::npos);
    CHECK(text.find("attention:") != std::string::npos);
  }
}

TEST_CASE("edit_and_generate identity and removal behavior") {
  const Trained& t = trained_lbow();

  SUBCASE("empty edit reproduces the trace") {
    std::vector<std::string> sentence = tokenize(t.corpus.train_text[1].first);
    auto [before, after] = edit_and_generate(t.session->model(), sentence, {}, {}, t.corpus.vocab);
    CHECK(before.to_text() == after.to_text());
  }

  SUBCASE("removing the bag words the decoder used changes the output") {
    int differs = 0, trials = 0;
    for (int i = 0; i < 40 && trials < 10; ++i) {
      std::vector<std::string> sentence = tokenize(t.corpus.train_text[static_cast<size_t>(i)].first);
      GenerationTrace before = trace(t.session->model(), sentence, t.corpus.vocab);
      std::vector<std::string> used;
      for (size_t j = 0; j < before.output.size(); ++j)
        if (before.from_bag[j]) used.push_back(before.output[j]);
      std::sort(used.begin(), used.end());
      used.erase(std::unique(used.begin(), used.end()), used.end());
      if (used.empty()) continue;
      ++trials;
      auto [b2, after] =
          edit_and_generate(t.session->model(), sentence, {}, used, t.corpus.vocab);
      if (after.output != before.output) ++differs;
    }
    REQUIRE(trials >= 8);
    CHECK(differs * 10 >= trials * 8);  // at least 80% must change
  }
}

TEST_CASE("cheating bag reaches a lower held-out realization loss than the learned bag") {
  SynthCorpus corpus = shared_corpus();
  RunConfig lbow_cfg = small_config("lbow_topk");
  lbow_cfg.epochs = 6;
  RunConfig cheat_cfg = small_config("cheating_bow");
  cheat_cfg.epochs = 6;

  Session lbow_s(lbow_cfg, corpus.vocab.size());
  Session cheat_s(cheat_cfg, corpus.vocab.size());
  train(lbow_s, corpus.train, nullptr, corpus.vocab);
  train(cheat_s, corpus.train, nullptr, corpus.vocab);

  double lbow_loss = held_out_s2s(lbow_s.model(), corpus.test, 4);
  double cheat_loss = held_out_s2s(cheat_s.model(), corpus.test, 4);
  CAPTURE(lbow_loss);
  CAPTURE(cheat_loss);
  CHECK(cheat_loss < lbow_loss);
}
