#include "lbow/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "lbow/common.hpp"

namespace lbow {

// -------------------------------------------------------------------- Adam

void adam_step(ad::ParameterStore& params, const AdamConfig& cfg, uint64_t t) {
  double sq_norm = 0.0;
  for (const auto& p : params.all()) sq_norm += p->grad.squaredNorm();
  double norm = std::sqrt(sq_norm);
  double scale = (cfg.clip > 0 && norm > cfg.clip) ? cfg.clip / norm : 1.0;

  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (const auto& p : params.all()) {
    Eigen::ArrayXXd g = scale * p->grad.array();
    p->adam_m.array() = cfg.beta1 * p->adam_m.array() + (1.0 - cfg.beta1) * g;
    p->adam_v.array() = cfg.beta2 * p->adam_v.array() + (1.0 - cfg.beta2) * g.square();
    p->value.array() -=
        cfg.lr * (p->adam_m.array() / bc1) / ((p->adam_v.array() / bc2).sqrt() + cfg.eps);
    p->grad.setZero();
  }
}

// ----------------------------------------------------------------- Session

namespace {
constexpr uint64_t kStreamSalt = 0x9E3779B97F4A7C15ULL;
}

Session::Session(const RunConfig& cfg, int vocab_size)
    : data_rng(cfg.seed * kStreamSalt + 2),
      noise_rng(cfg.seed * kStreamSalt + 3),
      cfg_(cfg),
      vocab_size_(vocab_size) {
  cfg_.validate();
  Rng init_rng(cfg.seed * kStreamSalt + 1);
  model_ = std::make_unique<LatentBowModel>(cfg_, vocab_size, init_rng);
}

// ------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[8] = {'L', 'B', 'O', 'W', 'C', 'K', 'P', 'T'};
constexpr uint8_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_mat(std::ostream& os, const ad::Mat& m) {
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double)) * m.size());
}

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::string read_str(std::istream& is) {
  uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}
void read_mat(std::istream& is, ad::Mat& m) {
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double)) * m.size());
}

}  // namespace

void Session::save_checkpoint(const std::filesystem::path& path) const {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot write " + tmp.string());
    os.write(kMagic, 8);
    os.put(static_cast<char>(kVersion));
    write_str(os, cfg_.to_json_text());
    write_u32(os, static_cast<uint32_t>(epoch));
    write_u64(os, adam_t);
    write_u32(os, static_cast<uint32_t>(vocab_size_));
    const auto& params = model_->params().all();
    write_u32(os, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) {
      write_str(os, p->name);
      write_u32(os, static_cast<uint32_t>(p->value.rows()));
      write_u32(os, static_cast<uint32_t>(p->value.cols()));
      write_mat(os, p->value);
      write_mat(os, p->adam_m);
      write_mat(os, p->adam_v);
    }
    write_str(os, data_rng.state());
    write_str(os, noise_rng.state());
    if (!os) throw DataError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<Session> Session::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("checkpoint: bad magic in " + path.string());
  int version = is.get();
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));

  RunConfig cfg = RunConfig::from_json_text(read_str(is));
  int epoch = static_cast<int>(read_u32(is));
  uint64_t adam_t = read_u64(is);
  int vocab_size = static_cast<int>(read_u32(is));

  auto session = std::unique_ptr<Session>(new Session(cfg, vocab_size));
  session->epoch = epoch;
  session->adam_t = adam_t;

  uint32_t n_params = read_u32(is);
  for (uint32_t i = 0; i < n_params; ++i) {
    std::string name = read_str(is);
    uint32_t rows = read_u32(is);
    uint32_t cols = read_u32(is);
    ad::Parameter* p = session->model_->params().find(name);
    if (!p) throw DataError("checkpoint: unknown parameter " + name);
    if (p->value.rows() != static_cast<Eigen::Index>(rows) ||
        p->value.cols() != static_cast<Eigen::Index>(cols))
      throw DataError("checkpoint: shape mismatch for " + name);
    read_mat(is, p->value);
    read_mat(is, p->adam_m);
    read_mat(is, p->adam_v);
  }
  session->data_rng.set_state(read_str(is));
  session->noise_rng.set_state(read_str(is));
  if (!is) throw DataError("checkpoint: truncated file " + path.string());
  return session;
}

// ------------------------------------------------------------------ logging

std::string EpochLog::to_json() const {
  nlohmann::json j{{"epoch", epoch},
                   {"train_loss", train_loss},
                   {"train_s2s", train_s2s},
                   {"train_bow", train_bow}};
  if (has_dev) j["dev"] = nlohmann::json::parse(dev.to_json());
  return j.dump();
}

EpochLog EpochLog::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  EpochLog log;
  log.epoch = j.at("epoch");
  log.train_loss = j.at("train_loss");
  log.train_s2s = j.at("train_s2s");
  log.train_bow = j.at("train_bow");
  if (j.contains("dev")) {
    log.has_dev = true;
    log.dev = MetricsReport::from_json(j.at("dev").dump());
  }
  return log;
}

// ----------------------------------------------------------------- training

TrainResult train(Session& session, const std::vector<Instance>& train_set,
                  const std::vector<Instance>* dev_set, const Vocabulary& vocab,
                  std::ostream* progress) {
  const RunConfig& cfg = session.cfg();
  if (train_set.empty()) throw DataError("train: empty training set");
  TrainResult result;
  LatentBowModel& model = session.model();
  AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.grad_clip};

  ad::Tape tape;
  while (session.epoch < cfg.epochs) {
    BatchIterator batches(train_set, cfg.batch_size, &session.data_rng);
    double sum_total = 0, sum_s2s = 0, sum_bow = 0;
    long n_batches = 0;
    Batch batch;
    while (batches.next(batch)) {
      tape.reset();
      std::vector<ad::Var> totals, s2ss, bows;
      for (int i = 0; i < batch.size; ++i) {
        std::vector<int> target;
        for (size_t j = 0; j < batch.tgt[static_cast<size_t>(i)].size(); ++j)
          if (batch.tgt_mask[static_cast<size_t>(i)][j])
            target.push_back(batch.tgt[static_cast<size_t>(i)][j]);
        LatentBowModel::Losses L = model.instance_loss(
            tape, batch.src[static_cast<size_t>(i)], batch.src_mask[static_cast<size_t>(i)],
            target, batch.bows[static_cast<size_t>(i)], &session.noise_rng);
        totals.push_back(L.total);
        s2ss.push_back(L.s2s);
        if (L.bow.ok()) bows.push_back(L.bow);
      }
      ad::Var batch_loss = tape.average(totals);
      double loss_value = tape.val(batch_loss)(0, 0);
      if (!std::isfinite(loss_value))
        throw DivergenceError("train: non-finite loss at epoch " +
                              std::to_string(session.epoch + 1));
      tape.backward(batch_loss);
      session.adam_t += 1;
      adam_step(model.params(), adam, session.adam_t);

      sum_total += loss_value;
      double b_s2s = 0;
      for (ad::Var v : s2ss) b_s2s += tape.val(v)(0, 0);
      sum_s2s += b_s2s / static_cast<double>(s2ss.size());
      if (!bows.empty()) {
        double b_bow = 0;
        for (ad::Var v : bows) b_bow += tape.val(v)(0, 0);
        sum_bow += b_bow / static_cast<double>(bows.size());
      }
      ++n_batches;
    }
    session.epoch += 1;

    EpochLog log;
    log.epoch = session.epoch;
    log.train_loss = sum_total / static_cast<double>(n_batches);
    log.train_s2s = sum_s2s / static_cast<double>(n_batches);
    log.train_bow = sum_bow / static_cast<double>(n_batches);
    if (dev_set) {
      log.has_dev = true;
      log.dev = evaluate(model, *dev_set, vocab);
    }
    if (!cfg.checkpoint_path.empty()) session.save_checkpoint(cfg.checkpoint_path);
    if (!cfg.log_path.empty()) {
      std::ofstream log_out(cfg.log_path, std::ios::app);
      if (!log_out) throw DataError("train: cannot append to log " + cfg.log_path);
      log_out << log.to_json() << "\n";
    }
    if (progress) {
      (*progress) << "epoch " << log.epoch << " loss " << log.train_loss;
      if (log.has_dev) (*progress) << " dev-bleu2 " << log.dev.bleu2;
      (*progress) << "\n";
    }
    result.logs.push_back(std::move(log));
  }
  return result;
}

// --------------------------------------------------------------- evaluation

MetricsReport evaluate(const LatentBowModel& model, const std::vector<Instance>& test_set,
                       const Vocabulary& vocab, int beam_width) {
  if (test_set.empty()) throw DataError("evaluate: empty test set");
  MetricsReport report;
  std::vector<TokenSeq> hyps;
  std::vector<RefSet> refs;
  double p_sum = 0, r_sum = 0, p_sup = 0, r_sup = 0;
  double util_sum = 0, util_sup = 0;
  long util_count = 0;
  double mode_sum = 0;

  for (const Instance& inst : test_set) {
    LatentBowModel::GenRequest req;
    req.source = inst.source;
    req.max_len = model.cfg().max_len;
    req.beam_width = beam_width;
    SampledBag cheat;
    if (model.variant() == Variant::cheating_bow) {
      cheat.ids = inst.target_bow;
      cheat.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(inst.target_bow.size()));
      req.bag_override = &cheat;
    }
    LatentBowModel::GenOutput out = model.generate(req);

    hyps.push_back(out.tokens);
    RefSet rs;
    for (const auto& tgt : inst.targets) {
      TokenSeq r = tgt;
      while (!r.empty() && r.back() == Vocabulary::kEos) r.pop_back();
      rs.push_back(std::move(r));
    }
    refs.push_back(std::move(rs));

    if (model.has_planner()) {
      std::set<int> modes = mode_words(out.probs);
      std::set<int> bow(inst.target_bow.begin(), inst.target_bow.end());
      auto [p, r] = bow_pr(modes, bow);
      p_sum += p;
      r_sum += r;
      p_sup += static_cast<double>(modes.size());
      r_sup += static_cast<double>(bow.size());
      mode_sum += static_cast<double>(modes.size());

      long counted = 0;
      for (int id : out.tokens)
        if (!vocab.is_special(id)) ++counted;
      if (counted > 0) {
        std::set<int> bag_ids(out.bag.ids.begin(), out.bag.ids.end());
        util_sum += utilization(out.tokens, bag_ids, vocab);
        util_sup += static_cast<double>(counted);
        ++util_count;
      }
    }
  }

  const double n = static_cast<double>(test_set.size());
  report.instances = static_cast<int>(test_set.size());
  report.bleu1 = bleu(hyps, refs, 1);
  report.bleu2 = bleu(hyps, refs, 2);
  report.bleu3 = bleu(hyps, refs, 3);
  report.bleu4 = bleu(hyps, refs, 4);
  report.rouge1 = rouge_n(hyps, refs, 1);
  report.rouge2 = rouge_n(hyps, refs, 2);
  report.rougeL = rouge_l(hyps, refs);
  if (model.has_planner()) {
    report.bow_precision = p_sum / n;
    report.bow_recall = r_sum / n;
    report.bow_precision_support = p_sup / n;
    report.bow_recall_support = r_sup / n;
    report.mode_count_mean = mode_sum / n;
    if (util_count > 0) {
      report.utilization = util_sum / static_cast<double>(util_count);
      report.utilization_support = util_sup / static_cast<double>(util_count);
    }
  }
  return report;
}

// ---------------------------------------------------------------- neighbors

std::string NeighborTable::to_tsv() const {
  std::string s;
  auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  for (const auto& r : rows)
    s += r.word + "\t" + r.neighbor + "\t" + f(r.prob) + "\n";
  return s;
}

NeighborTable dump_neighbors(const LatentBowModel& model, const std::vector<std::string>& words,
                             const Vocabulary& vocab, int top_n) {
  if (!model.has_planner())
    throw UsageError("neighbors: variant " + model.cfg().variant + " has no planner");
  NeighborTable table;
  for (const auto& word : words) {
    if (!vocab.has(word)) {
      table.oov.push_back(word);
      continue;
    }
    ad::Tape t;
    std::vector<int> ids{vocab.id(word)};
    EncoderOutput enc = model.encoder().encode(t, ids);
    NeighborDists nd = model.heads().apply(t, enc);
    NeighborProbs probs = neighbor_probs(t, nd);
    for (size_t j = 0; j < probs[0].size(); ++j) {
      const Eigen::VectorXd& slice = probs[0][j];
      for (int id : top_k_ids(slice, std::min<int>(top_n, static_cast<int>(slice.size())))) {
        table.rows.push_back(NeighborRow{word, static_cast<int>(j), vocab.token(id), slice(id)});
      }
    }
  }
  return table;
}

// -------------------------------------------------------------------- trace

namespace {

GenerationTrace make_trace(const LatentBowModel& model, const std::vector<std::string>& tokens,
                           const LatentBowModel::GenOutput& out, const Vocabulary& vocab) {
  GenerationTrace tr;
  tr.source = tokens;
  for (size_t i = 0; i < out.probs.size(); ++i) {
    std::vector<std::pair<std::string, double>> row;
    for (const Eigen::VectorXd& slice : out.probs[i]) {
      Eigen::Index arg = 0;
      double p = slice.maxCoeff(&arg);
      row.emplace_back(vocab.token(static_cast<int>(arg)), p);
    }
    tr.neighbors.push_back(std::move(row));
  }
  for (size_t j = 0; j < out.bag.ids.size(); ++j)
    tr.bag.emplace_back(vocab.token(out.bag.ids[j]), out.bag.weights(static_cast<Eigen::Index>(j)));
  std::set<int> bag_ids(out.bag.ids.begin(), out.bag.ids.end());
  for (int id : out.tokens) {
    tr.output.push_back(vocab.token(id));
    tr.from_bag.push_back(bag_ids.count(id) ? 1 : 0);
  }
  tr.attention = out.attention;
  return tr;
}

}  // namespace

GenerationTrace trace(const LatentBowModel& model, const std::vector<std::string>& sentence,
                      const Vocabulary& vocab, const TraceOptions& opt) {
  std::vector<std::string> tokens = sentence;
  if (tokens.size() > static_cast<size_t>(model.cfg().max_len))
    tokens.resize(static_cast<size_t>(model.cfg().max_len));
  if (tokens.empty()) throw UsageError("trace: empty sentence");
  std::vector<int> ids = vocab.encode(tokens);

  LatentBowModel::GenRequest req;
  req.source = ids;
  req.max_len = model.cfg().max_len;
  req.beam_width = opt.beam_width;
  req.sampling = opt.sampling;
  req.noise_rng = opt.noise_rng;
  req.bag_override = opt.bag_override;
  LatentBowModel::GenOutput out = model.generate(req);
  return make_trace(model, tokens, out, vocab);
}

std::pair<GenerationTrace, GenerationTrace> edit_and_generate(
    const LatentBowModel& model, const std::vector<std::string>& sentence,
    const std::vector<std::string>& add, const std::vector<std::string>& remove,
    const Vocabulary& vocab) {
  std::vector<std::string> tokens = sentence;
  if (tokens.size() > static_cast<size_t>(model.cfg().max_len))
    tokens.resize(static_cast<size_t>(model.cfg().max_len));
  if (tokens.empty()) throw UsageError("edit-bag: empty sentence");
  std::vector<int> ids = vocab.encode(tokens);

  auto to_ids = [&](const std::vector<std::string>& words, bool must_exist) {
    std::vector<int> out;
    for (const auto& w : words) {
      if (!vocab.has(w)) {
        if (must_exist) throw UsageError("edit-bag: '" + w + "' is not in the vocabulary");
        continue;
      }
      out.push_back(vocab.id(w));
    }
    return out;
  };

  LatentBowModel::GenRequest req;
  req.source = ids;
  req.max_len = model.cfg().max_len;
  LatentBowModel::GenOutput before_out = model.generate(req);
  GenerationTrace before = make_trace(model, tokens, before_out, vocab);

  SampledBag edited =
      edit_bag(before_out.bag, to_ids(add, true), to_ids(remove, true), vocab);
  req.bag_override = &edited;
  LatentBowModel::GenOutput after_out = model.generate(req);
  GenerationTrace after = make_trace(model, tokens, after_out, vocab);
  return {std::move(before), std::move(after)};
}

}  // namespace lbow
