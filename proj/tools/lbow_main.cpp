// Command line for the latent bag-of-words paraphrase toolkit:
// data preparation, synthetic corpus generation, training, evaluation,
// generation, neighbor tables, traces, bag editing, and training plots.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "lbow/common.hpp"
#include "lbow/config.hpp"
#include "lbow/data.hpp"
#include "lbow/metrics.hpp"
#include "lbow/model.hpp"
#include "lbow/plot.hpp"
#include "lbow/trainer.hpp"

namespace fs = std::filesystem;
using namespace lbow;

namespace {

std::vector<std::string> split_words(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(csv);
  while (std::getline(is, cur, ','))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

Stoplist load_stoplist(const std::string& path) {
  return path.empty() ? Stoplist::builtin() : Stoplist::load(path);
}

struct ConfigFlags {
  std::optional<std::string> config_file;
  std::optional<std::string> variant, weighting, sampling, format;
  std::optional<std::string> data, dev, vocab, checkpoint, report, log;
  std::optional<int> emb, hidden, layers, l, k, batch_size, epochs, max_len;
  std::optional<double> lambda_bow, lr, clip;
  std::optional<uint64_t> seed;
  bool bow_emb = false, copy = false, residual = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "config file (JSON); flags override its values");
    cmd->add_option("--variant", variant,
                    "seq2seq|seq2seq_attn|lbow_topk|lbow_gumbel|bow_hard|cheating_bow");
    cmd->add_option("--weighting", weighting, "bag weight source: base|perturbed");
    cmd->add_option("--sampling", sampling, "bag sampling: auto|gumbel|deterministic");
    cmd->add_option("--format", format, "data format: quora|mscoco");
    cmd->add_option("--data", data, "training data file");
    cmd->add_option("--dev", dev, "held-out data file evaluated each epoch");
    cmd->add_option("--vocab", vocab, "vocabulary file");
    cmd->add_option("--checkpoint", checkpoint, "checkpoint path");
    cmd->add_option("--report", report, "metrics report path (JSON)");
    cmd->add_option("--log", log, "per-epoch JSONL log path");
    cmd->add_option("--emb", emb, "embedding size");
    cmd->add_option("--hidden", hidden, "LSTM state size");
    cmd->add_option("--layers", layers, "LSTM layers");
    cmd->add_option("--l", l, "neighbors per source word");
    cmd->add_option("--k", k, "bag size");
    cmd->add_option("--batch-size", batch_size, "batch size");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--max-len", max_len, "maximum sentence length");
    cmd->add_option("--lambda-bow", lambda_bow, "weight of the bag loss");
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--clip", clip, "gradient norm clip");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_flag("--bow-emb", bow_emb, "condition each decoder input on the bag embedding");
    cmd->add_flag("--copy", copy, "copy mechanism over the bag");
    cmd->add_flag("--residual", residual, "residual connections between LSTM layers");
  }

  RunConfig build() const {
    RunConfig cfg;
    if (config_file) cfg = RunConfig::from_file(*config_file);
    auto set = [](auto& field, const auto& opt) {
      if (opt) field = *opt;
    };
    set(cfg.variant, variant);
    set(cfg.weighting, weighting);
    set(cfg.sampling, sampling);
    set(cfg.format, format);
    set(cfg.data_path, data);
    set(cfg.dev_path, dev);
    set(cfg.vocab_path, vocab);
    set(cfg.checkpoint_path, checkpoint);
    set(cfg.report_path, report);
    set(cfg.log_path, log);
    set(cfg.emb, emb);
    set(cfg.hidden, hidden);
    set(cfg.layers, layers);
    set(cfg.l, l);
    set(cfg.k, k);
    set(cfg.batch_size, batch_size);
    set(cfg.epochs, epochs);
    set(cfg.max_len, max_len);
    set(cfg.lambda_bow, lambda_bow);
    set(cfg.learning_rate, lr);
    set(cfg.grad_clip, clip);
    set(cfg.seed, seed);
    if (bow_emb) cfg.ext_bow_emb = true;
    if (copy) cfg.ext_copy = true;
    if (residual) cfg.residual = true;
    cfg.validate();
    return cfg;
  }
};

int cmd_synth(const std::string& out_dir, int count, int test_count, int budget, uint64_t seed,
              int max_len) {
  SynthSpec spec;
  spec.instance_count = count;
  spec.test_count = test_count;
  spec.vocab_budget = budget;
  spec.seed = seed;
  spec.max_len = max_len;
  SynthCorpus corpus = make_synth_corpus(spec);

  fs::create_directories(out_dir);
  auto write_pairs = [](const fs::path& path,
                        const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::ofstream out(path);
    if (!out) throw DataError("synth: cannot write " + path.string());
    for (const auto& [s, t] : pairs) out << s << '\t' << t << '\n';
  };
  write_pairs(fs::path(out_dir) / "train.txt", corpus.train_text);
  if (test_count > 0) write_pairs(fs::path(out_dir) / "test.txt", corpus.test_text);
  corpus.vocab.save(fs::path(out_dir) / "vocab.txt");
  Stoplist::builtin().save(fs::path(out_dir) / "stoplist.txt");
  {
    std::ofstream truth(fs::path(out_dir) / "truth.tsv");
    if (!truth) throw DataError("synth: cannot write truth.tsv");
    for (const auto& [word, partners] : corpus.neighbor_truth)
      for (const auto& p : partners) truth << word << '\t' << p << '\n';
  }
  std::cout << "wrote " << corpus.train.size() << " train and " << corpus.test.size()
            << " test instances, vocab " << corpus.vocab.size() << ", to " << out_dir << "\n";
  return 0;
}

int cmd_prepare(const std::string& input, const std::string& format_name, int max_vocab,
                const std::string& vocab_out, const std::string& stoplist_path, int max_len) {
  Format format = parse_format(format_name);
  Stoplist stoplist = load_stoplist(stoplist_path);

  std::ifstream in(input);
  if (!in) throw DataError("prepare-data: cannot open " + input);
  std::vector<std::vector<std::string>> sentences;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    if (format == Format::quora) {
      size_t tab = line.find('\t');
      if (tab == std::string::npos) {
        sentences.push_back(tokenize(line));
      } else {
        sentences.push_back(tokenize(line.substr(0, tab)));
        sentences.push_back(tokenize(line.substr(tab + 1)));
      }
    } else {
      sentences.push_back(tokenize(line));
    }
  }
  Vocabulary vocab = build_vocab(sentences, max_vocab, stoplist);
  vocab.save(vocab_out);

  LoadStats stats;
  std::vector<Instance> instances = load_pairs(input, format, vocab, max_len, &stats);
  std::cout << "vocab " << vocab.size() << " -> " << vocab_out << "\n"
            << "instances " << instances.size() << " (skipped " << stats.skipped_empty_bow
            << " with empty target bag)\n";
  return 0;
}

Vocabulary require_vocab(const std::string& flag_path, const RunConfig& cfg,
                         const std::string& stoplist_path) {
  std::string path = !flag_path.empty() ? flag_path : cfg.vocab_path;
  if (path.empty()) throw UsageError("a vocabulary is required (--vocab or config vocab_path)");
  return Vocabulary::load(path, load_stoplist(stoplist_path));
}

int cmd_train(const ConfigFlags& flags, bool resume) {
  RunConfig cfg = flags.build();
  if (cfg.data_path.empty()) throw UsageError("train: --data is required");

  std::unique_ptr<Session> session;
  if (resume) {
    if (cfg.checkpoint_path.empty()) throw UsageError("train --resume needs --checkpoint");
    session = Session::load_checkpoint(cfg.checkpoint_path);
  }
  Vocabulary vocab = require_vocab("", cfg, "");
  if (!session) session = std::make_unique<Session>(cfg, vocab.size());

  Format format = parse_format(cfg.format);
  LoadStats stats;
  std::vector<Instance> train_set =
      load_pairs(cfg.data_path, format, vocab, cfg.max_len, &stats);
  if (stats.skipped_empty_bow > 0)
    std::cerr << "warning: skipped " << stats.skipped_empty_bow
              << " instances with empty target bag\n";
  std::vector<Instance> dev_set;
  if (!cfg.dev_path.empty()) dev_set = load_pairs(cfg.dev_path, format, vocab, cfg.max_len);

  TrainResult result =
      train(*session, train_set, dev_set.empty() ? nullptr : &dev_set, vocab, &std::cout);
  if (!result.logs.empty()) {
    const EpochLog& last = result.logs.back();
    std::cout << "final train loss " << last.train_loss << "\n";
    if (last.has_dev && !cfg.report_path.empty()) {
      std::ofstream out(cfg.report_path);
      out << last.dev.to_json() << "\n";
    }
  }
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& vocab_path,
             const std::string& format_name, int beam, const std::string& report_path) {
  auto session = Session::load_checkpoint(ckpt);
  Vocabulary vocab = require_vocab(vocab_path, session->cfg(), "");
  Format format = parse_format(format_name.empty() ? session->cfg().format : format_name);
  std::vector<Instance> test_set =
      load_pairs(data, format, vocab, session->cfg().max_len);
  MetricsReport report = evaluate(session->model(), test_set, vocab, beam);
  std::cout << report.to_kv_text();
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw DataError("eval: cannot write " + report_path);
    out << report.to_json() << "\n";
  }
  return 0;
}

int cmd_generate(const std::string& ckpt, const std::string& input,
                 const std::string& vocab_path, const std::string& strategy, int beam_width,
                 const std::string& out_path) {
  auto session = Session::load_checkpoint(ckpt);
  Vocabulary vocab = require_vocab(vocab_path, session->cfg(), "");
  int width = strategy == "beam" ? std::max(2, beam_width) : 1;

  std::ifstream in(input);
  if (!in) throw DataError("generate: cannot open " + input);
  std::ostream* os = &std::cout;
  std::ofstream file_out;
  if (!out_path.empty()) {
    file_out.open(out_path);
    if (!file_out) throw DataError("generate: cannot write " + out_path);
    os = &file_out;
  }
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> tokens = tokenize(line);
    if (tokens.empty()) {
      (*os) << "\n";
      continue;
    }
    if (tokens.size() > static_cast<size_t>(session->cfg().max_len))
      tokens.resize(static_cast<size_t>(session->cfg().max_len));
    std::vector<int> ids = vocab.encode(tokens);
    LatentBowModel::GenRequest req;
    req.source = ids;
    req.max_len = session->cfg().max_len;
    req.beam_width = width;
    SampledBag cheat;
    if (session->model().variant() == Variant::cheating_bow)
      throw UsageError("generate: cheating_bow needs paired data; use eval instead");
    auto out = session->model().generate(req);
    std::string text;
    for (int id : out.tokens) {
      if (!text.empty()) text += ' ';
      text += vocab.token(id);
    }
    (*os) << text << "\n";
  }
  return 0;
}

int cmd_neighbors(const std::string& ckpt, const std::string& vocab_path,
                  const std::string& words_csv, const std::string& words_file, int top_n,
                  const std::string& out_path) {
  auto session = Session::load_checkpoint(ckpt);
  Vocabulary vocab = require_vocab(vocab_path, session->cfg(), "");
  std::vector<std::string> words = split_words(words_csv);
  if (!words_file.empty()) {
    std::ifstream in(words_file);
    if (!in) throw DataError("neighbors: cannot open " + words_file);
    std::string w;
    while (in >> w) words.push_back(w);
  }
  if (words.empty()) throw UsageError("neighbors: no words given");
  NeighborTable table = dump_neighbors(session->model(), words, vocab, top_n);
  for (const auto& w : table.oov) std::cerr << "warning: '" << w << "' not in vocabulary\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw DataError("neighbors: cannot write " + out_path);
    out << table.to_tsv();
  } else {
    std::cout << table.to_tsv();
  }
  return 0;
}

int cmd_trace(const std::string& ckpt, const std::string& vocab_path,
              const std::string& sentence, const std::string& sampling, uint64_t noise_seed) {
  auto session = Session::load_checkpoint(ckpt);
  Vocabulary vocab = require_vocab(vocab_path, session->cfg(), "");
  TraceOptions opt;
  Rng noise(noise_seed);
  if (!sampling.empty() && sampling != "auto") {
    opt.sampling = parse_sample_mode(sampling);
    if (opt.sampling == SampleMode::gumbel) opt.noise_rng = &noise;
  }
  GenerationTrace tr = trace(session->model(), tokenize(sentence), vocab, opt);
  std::cout << tr.to_text();
  return 0;
}

int cmd_edit_bag(const std::string& ckpt, const std::string& vocab_path,
                 const std::string& sentence, const std::string& add_csv,
                 const std::string& remove_csv) {
  auto session = Session::load_checkpoint(ckpt);
  Vocabulary vocab = require_vocab(vocab_path, session->cfg(), "");
  auto [before, after] = edit_and_generate(session->model(), tokenize(sentence),
                                           split_words(add_csv), split_words(remove_csv), vocab);
  std::cout << "--- before\n" << before.to_text() << "--- after\n" << after.to_text();
  return 0;
}

int cmd_plot(const std::string& log_path, const std::string& out_dir) {
  std::ifstream in(log_path);
  if (!in) throw DataError("plot: cannot open " + log_path);
  std::vector<EpochLog> logs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    logs.push_back(EpochLog::from_json(line));
  }
  if (logs.empty()) throw DataError("plot: no log entries in " + log_path);

  fs::create_directories(out_dir);
  Series modes{"discovered modes", {}, {}};
  Series target_modes{"target bag size", {}, {}};
  Series precision{"bow precision", {}, {}};
  Series recall{"bow recall", {}, {}};
  for (const EpochLog& log : logs) {
    if (!log.has_dev) continue;
    double e = static_cast<double>(log.epoch);
    modes.x.push_back(e);
    modes.y.push_back(log.dev.mode_count_mean);
    target_modes.x.push_back(e);
    target_modes.y.push_back(log.dev.bow_recall_support);
    precision.x.push_back(e);
    precision.y.push_back(log.dev.bow_precision);
    recall.x.push_back(e);
    recall.y.push_back(log.dev.bow_recall);
  }
  if (modes.x.empty())
    throw DataError("plot: the log has no held-out metrics (train with --dev)");
  write_svg(fs::path(out_dir) / "modes.svg",
            render_line_chart("Discovered modes per instance", "epoch", "modes",
                              {modes, target_modes}));
  write_svg(fs::path(out_dir) / "bow_pr.svg",
            render_line_chart("Bag prediction", "epoch", "value", {precision, recall}));
  std::cout << "wrote " << (fs::path(out_dir) / "modes.svg").string() << " and "
            << (fs::path(out_dir) / "bow_pr.svg").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent bag-of-words paraphrase toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic paraphrase corpus");
  std::string synth_out = "synth";
  int synth_count = 2000, synth_test = 400, synth_budget = 150, synth_max_len = 16;
  uint64_t synth_seed = 1;
  synth->add_option("--out-dir", synth_out, "output directory");
  synth->add_option("--count", synth_count, "training instances");
  synth->add_option("--test-count", synth_test, "held-out instances");
  synth->add_option("--budget", synth_budget, "vocabulary budget");
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--max-len", synth_max_len, "maximum sentence length");

  // prepare-data
  auto* prep = app.add_subcommand("prepare-data", "build a vocabulary from a data file");
  std::string prep_input, prep_format = "quora", prep_vocab_out = "vocab.txt", prep_stoplist;
  int prep_max_vocab = 8000, prep_max_len = 16;
  prep->add_option("--input", prep_input, "data file")->required();
  prep->add_option("--format", prep_format, "quora|mscoco");
  prep->add_option("--max-vocab", prep_max_vocab, "vocabulary size cap");
  prep->add_option("--vocab-out", prep_vocab_out, "output vocabulary path");
  prep->add_option("--stoplist", prep_stoplist, "custom stoplist file");
  prep->add_option("--max-len", prep_max_len, "maximum sentence length");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model");
  ConfigFlags train_flags;
  train_flags.add_to(train_cmd);
  bool resume = false;
  train_cmd->add_flag("--resume", resume, "resume from the configured checkpoint");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_vocab, eval_format, eval_report;
  int eval_beam = 1;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "test data")->required();
  eval_cmd->add_option("--vocab", eval_vocab, "vocabulary file");
  eval_cmd->add_option("--format", eval_format, "quora|mscoco");
  eval_cmd->add_option("--beam", eval_beam, "beam width (1 = greedy)");
  eval_cmd->add_option("--report", eval_report, "write the report as JSON here");

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "decode a file of sentences");
  std::string gen_ckpt, gen_input, gen_vocab, gen_strategy = "greedy", gen_out;
  int gen_beam = 4;
  gen_cmd->add_option("--checkpoint", gen_ckpt, "checkpoint")->required();
  gen_cmd->add_option("--input", gen_input, "file with one sentence per line")->required();
  gen_cmd->add_option("--vocab", gen_vocab, "vocabulary file");
  gen_cmd->add_option("--strategy", gen_strategy, "greedy|beam");
  gen_cmd->add_option("--beam-width", gen_beam, "beam width for --strategy beam");
  gen_cmd->add_option("--out", gen_out, "output file (default stdout)");

  // neighbors
  auto* nb_cmd = app.add_subcommand("neighbors", "dump learned word neighbors as TSV");
  std::string nb_ckpt, nb_vocab, nb_words, nb_words_file, nb_out;
  int nb_top = 3;
  nb_cmd->add_option("--checkpoint", nb_ckpt, "checkpoint")->required();
  nb_cmd->add_option("--vocab", nb_vocab, "vocabulary file");
  nb_cmd->add_option("--words", nb_words, "comma-separated words");
  nb_cmd->add_option("--words-file", nb_words_file, "file with one word per line");
  nb_cmd->add_option("--top-n", nb_top, "entries per neighbor slot");
  nb_cmd->add_option("--out", nb_out, "output TSV file (default stdout)");

  // trace
  auto* trace_cmd = app.add_subcommand("trace", "show the three generation stages");
  std::string tr_ckpt, tr_vocab, tr_sentence, tr_sampling = "deterministic";
  uint64_t tr_seed = 1;
  trace_cmd->add_option("--checkpoint", tr_ckpt, "checkpoint")->required();
  trace_cmd->add_option("--vocab", tr_vocab, "vocabulary file");
  trace_cmd->add_option("--sentence", tr_sentence, "source sentence")->required();
  trace_cmd->add_option("--sampling", tr_sampling, "deterministic|gumbel");
  trace_cmd->add_option("--noise-seed", tr_seed, "seed for gumbel sampling");

  // edit-bag
  auto* edit_cmd = app.add_subcommand("edit-bag", "edit the sampled bag and regenerate");
  std::string ed_ckpt, ed_vocab, ed_sentence, ed_add, ed_remove;
  edit_cmd->add_option("--checkpoint", ed_ckpt, "checkpoint")->required();
  edit_cmd->add_option("--vocab", ed_vocab, "vocabulary file");
  edit_cmd->add_option("--sentence", ed_sentence, "source sentence")->required();
  edit_cmd->add_option("--add", ed_add, "comma-separated words to add");
  edit_cmd->add_option("--remove", ed_remove, "comma-separated words to remove");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "render training curves as SVG");
  std::string plot_log, plot_out = "plots";
  plot_cmd->add_option("--log", plot_log, "JSONL training log")->required();
  plot_cmd->add_option("--out-dir", plot_out, "output directory");

  try {
    app.parse(argc, argv);
    if (*synth)
      return cmd_synth(synth_out, synth_count, synth_test, synth_budget, synth_seed,
                       synth_max_len);
    if (*prep)
      return cmd_prepare(prep_input, prep_format, prep_max_vocab, prep_vocab_out, prep_stoplist,
                         prep_max_len);
    if (*train_cmd) return cmd_train(train_flags, resume);
    if (*eval_cmd)
      return cmd_eval(eval_ckpt, eval_data, eval_vocab, eval_format, eval_beam, eval_report);
    if (*gen_cmd)
      return cmd_generate(gen_ckpt, gen_input, gen_vocab, gen_strategy, gen_beam, gen_out);
    if (*nb_cmd) return cmd_neighbors(nb_ckpt, nb_vocab, nb_words, nb_words_file, nb_top, nb_out);
    if (*trace_cmd) return cmd_trace(tr_ckpt, tr_vocab, tr_sentence, tr_sampling, tr_seed);
    if (*edit_cmd) return cmd_edit_bag(ed_ckpt, ed_vocab, ed_sentence, ed_add, ed_remove);
    if (*plot_cmd) return cmd_plot(plot_log, plot_out);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
