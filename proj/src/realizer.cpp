#include "lbow/realizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "lbow/common.hpp"

namespace lbow {

Variant parse_variant(const std::string& name) {
  if (name == "seq2seq") return Variant::seq2seq;
  if (name == "seq2seq_attn") return Variant::seq2seq_attn;
  if (name == "lbow_topk") return Variant::lbow_topk;
  if (name == "lbow_gumbel") return Variant::lbow_gumbel;
  if (name == "bow_hard") return Variant::bow_hard;
  if (name == "cheating_bow") return Variant::cheating_bow;
  throw UsageError("unknown variant: " + name);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::seq2seq: return "seq2seq";
    case Variant::seq2seq_attn: return "seq2seq_attn";
    case Variant::lbow_topk: return "lbow_topk";
    case Variant::lbow_gumbel: return "lbow_gumbel";
    case Variant::bow_hard: return "bow_hard";
    case Variant::cheating_bow: return "cheating_bow";
  }
  return "?";
}

bool is_bag_variant(Variant v) {
  return v == Variant::lbow_topk || v == Variant::lbow_gumbel || v == Variant::bow_hard ||
         v == Variant::cheating_bow;
}

bool uses_attention(Variant v) { return v != Variant::seq2seq; }

// ----------------------------------------------------------------- Decoder

void Decoder::init(ad::ParameterStore& store, int vocab, int emb, int hidden, int layers,
                   bool residual, const Extensions& ext, Rng& rng) {
  ext_ = ext;
  emb_ = store.create("dec.emb", emb, vocab);
  init_uniform(emb_, 0.1, rng);
  int input_dim = ext.bow_emb ? 2 * emb : emb;
  lstm_.init(store, "dec.lstm", input_dim, hidden, layers, residual, rng);
  attn_mem_ = store.create("dec.attn.mem", hidden, hidden);
  attn_state_ = store.create("dec.attn.state", hidden, hidden);
  attn_v_ = store.create("dec.attn.v", hidden, 1);
  mix_w_ = store.create("dec.mix.w", hidden, 2 * hidden);
  mix_b_ = store.create("dec.mix.b", hidden, 1);
  out_w_ = store.create("dec.out.w", vocab, hidden);
  out_b_ = store.create("dec.out.b", vocab, 1);
  bag_mem_proj_ = store.create("dec.bag.mem_proj", hidden, emb);
  bag_init_proj_ = store.create("dec.bag.init_proj", hidden, emb);
  gate_w_ = store.create("dec.copy.gate_w", 1, hidden);
  gate_b_ = store.create("dec.copy.gate_b", 1, 1);
  for (ad::Parameter* p : {attn_mem_, attn_state_, attn_v_, mix_w_, out_w_, bag_mem_proj_,
                           bag_init_proj_, gate_w_})
    init_glorot(p, rng);
  // start the copy gate mostly closed so the generator path trains first
  gate_b_->value(0, 0) = 2.0;
}

ad::Var Decoder::init_state_offset(ad::Tape& t, ad::Var bag_avg) const {
  return t.matmul(t.leaf(bag_init_proj_), bag_avg);
}

Decoder::Prepared Decoder::prepare(ad::Tape& t, const EncoderOutput& enc,
                                   const std::optional<BagOnTape>& bag, Variant variant) const {
  if (is_bag_variant(variant) && !bag.has_value())
    throw std::invalid_argument("decoder: variant " + to_string(variant) + " requires a bag");
  if (!is_bag_variant(variant) && bag.has_value())
    throw std::invalid_argument("decoder: variant " + to_string(variant) + " takes no bag");

  const bool detach = variant == Variant::bow_hard;
  auto shield = [&](ad::Var v) { return detach ? t.stop_gradient(v) : v; };

  Prepared prep;
  prep.emb_leaf = t.leaf(emb_);
  prep.attn_state_leaf = t.leaf(attn_state_);
  prep.attn_v_leaf = t.leaf(attn_v_);
  prep.mix_w_leaf = t.leaf(mix_w_);
  prep.mix_b_leaf = t.leaf(mix_b_);
  prep.out_w_leaf = t.leaf(out_w_);
  prep.out_b_leaf = t.leaf(out_b_);
  prep.gate_w_leaf = t.leaf(gate_w_);
  prep.gate_b_leaf = t.leaf(gate_b_);

  // initial state from the encoder code
  for (size_t j = 0; j < enc.final_h.size(); ++j) {
    prep.state0.h.push_back(shield(enc.final_h[j]));
    prep.state0.c.push_back(shield(enc.final_c[j]));
  }

  std::vector<ad::Var> memory_parts;
  for (int i = 0; i < enc.true_len; ++i)
    memory_parts.push_back(shield(enc.states[static_cast<size_t>(i)]));
  prep.src_len = enc.true_len;

  if (bag.has_value()) {
    prep.has_bag = true;
    prep.bag_ids = bag->ids;
    ad::Var weights = shield(bag->weights);
    const int k = static_cast<int>(bag->ids.size());
    std::vector<ad::Var> weighted;
    for (int j = 0; j < k; ++j) {
      ad::Var e = t.column(prep.emb_leaf, bag->ids[static_cast<size_t>(j)]);
      weighted.push_back(t.smul(t.pick(weights, j), e));
    }
    prep.bag_avg = t.scale(t.add_many(weighted), 1.0 / static_cast<double>(k));
    // decoder start: encoder code plus the projected bag average
    prep.state0.h[0] = t.add(prep.state0.h[0], init_state_offset(t, prep.bag_avg));
    ad::Var bag_mat = t.hconcat(weighted);
    memory_parts.push_back(t.matmul(t.leaf(bag_mem_proj_), bag_mat));
  }

  if (uses_attention(variant)) {
    prep.has_attention = true;
    prep.memory = t.hconcat(memory_parts);
    prep.mem_pre = t.matmul(t.leaf(attn_mem_), prep.memory);
  }
  return prep;
}

Decoder::StepResult Decoder::step(ad::Tape& t, const Prepared& prep, int input_id,
                                  const LstmStack::State& prev) const {
  ad::Var x = t.column(prep.emb_leaf, input_id);
  x = augment_decoder_input(t, x, prep.bag_avg, ext_.bow_emb && prep.has_bag);

  StepResult out;
  out.state = lstm_.step(t, x, prev);
  ad::Var h = out.state.h.back();

  ad::Var o = h;
  ad::Var scores;
  if (prep.has_attention) {
    ad::Var query = t.matmul(prep.attn_state_leaf, h);
    ad::Var blended = t.tanh_(t.colwise_add(prep.mem_pre, query));
    scores = t.mat_t_vec(blended, prep.attn_v_leaf);
    out.att = t.softmax(scores);
    ad::Var ctx = t.matmul(prep.memory, out.att);
    o = t.tanh_(t.affine(prep.mix_w_leaf, t.vconcat(h, ctx), prep.mix_b_leaf));
  }
  ad::Var logits = t.affine(prep.out_w_leaf, o, prep.out_b_leaf);

  if (ext_.copy && prep.has_bag) {
    ad::Var bag_scores = t.rows(scores, prep.src_len, static_cast<int>(prep.bag_ids.size()));
    ad::Var bag_att = t.softmax(bag_scores);
    ad::Var gate = t.sigmoid_(t.affine(prep.gate_w_leaf, o, prep.gate_b_leaf));
    ad::Var dist = copy_output_dist(t, logits, bag_att, prep.bag_ids, gate);
    out.log_dist = t.log_eps(dist, 1e-12);
  } else {
    out.log_dist = t.log_softmax(logits);
  }
  return out;
}

Decoder::TeacherForced Decoder::teacher_forced_loss(ad::Tape& t, const Prepared& prep,
                                                    std::span<const int> target) const {
  if (target.empty()) throw std::invalid_argument("teacher_forced_loss: empty target");
  TeacherForced tf;
  std::vector<ad::Var> step_losses;
  LstmStack::State state = prep.state0;
  for (size_t s = 0; s < target.size(); ++s) {
    int input_id = s == 0 ? Vocabulary::kBos : target[s - 1];
    StepResult sr = step(t, prep, input_id, state);
    state = sr.state;
    step_losses.push_back(t.neg(t.pick(sr.log_dist, target[s])));
    tf.log_dists.push_back(sr.log_dist);
  }
  tf.loss = t.scale(t.add_many(step_losses), 1.0 / static_cast<double>(target.size()));
  return tf;
}

std::vector<int> Decoder::generate(ad::Tape& t, const Prepared& prep, const GenOptions& opt,
                                   std::vector<std::vector<double>>* attention_out) const {
  if (opt.max_len < 1) throw std::invalid_argument("generate: max_len must be >= 1");

  auto att_row = [&](ad::Var att) {
    const ad::Mat& a = t.val(att);
    return std::vector<double>(a.data(), a.data() + a.size());
  };

  if (opt.beam_width <= 1) {  // greedy
    std::vector<int> out;
    LstmStack::State state = prep.state0;
    int prev = Vocabulary::kBos;
    for (int s = 0; s < opt.max_len; ++s) {
      StepResult sr = step(t, prep, prev, state);
      state = sr.state;
      Eigen::Index arg = 0;
      t.val(sr.log_dist).col(0).maxCoeff(&arg);
      if (attention_out && sr.att.ok()) attention_out->push_back(att_row(sr.att));
      if (static_cast<int>(arg) == Vocabulary::kEos) break;
      out.push_back(static_cast<int>(arg));
      prev = static_cast<int>(arg);
    }
    return out;
  }

  struct Hyp {
    LstmStack::State state;
    std::vector<int> tokens;
    std::vector<std::vector<double>> atts;
    double score = 0.0;
    int last = Vocabulary::kBos;
  };
  auto normalized = [](const Hyp& h) {
    return h.score / static_cast<double>(std::max<size_t>(1, h.tokens.size() + 1));
  };

  std::vector<Hyp> live{Hyp{prep.state0, {}, {}, 0.0, Vocabulary::kBos}};
  std::vector<Hyp> done;
  for (int s = 0; s < opt.max_len && !live.empty(); ++s) {
    struct Cand {
      size_t from;
      int token;
      double score;
    };
    std::vector<Cand> cands;
    std::vector<StepResult> steps;
    steps.reserve(live.size());
    for (size_t hi = 0; hi < live.size(); ++hi) {
      StepResult sr = step(t, prep, live[hi].last, live[hi].state);
      const ad::Mat& ld = t.val(sr.log_dist);
      std::vector<int> top = top_k_ids(ld.col(0),
                                       std::min<int>(opt.beam_width, static_cast<int>(ld.rows())));
      for (int tok : top) cands.push_back({hi, tok, live[hi].score + ld(tok, 0)});
      steps.push_back(std::move(sr));
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.from != b.from) return a.from < b.from;
      return a.token < b.token;
    });
    std::vector<Hyp> next;
    int taken = 0;
    for (const Cand& c : cands) {
      if (taken >= opt.beam_width) break;
      ++taken;
      Hyp h = live[c.from];
      h.state = steps[c.from].state;
      if (steps[c.from].att.ok()) h.atts.push_back(att_row(steps[c.from].att));
      h.score = c.score;
      if (c.token == Vocabulary::kEos) {
        done.push_back(std::move(h));
      } else {
        h.tokens.push_back(c.token);
        h.last = c.token;
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }
  for (Hyp& h : live) done.push_back(std::move(h));
  if (done.empty()) return {};
  const Hyp* best = &done[0];
  for (const Hyp& h : done)
    if (normalized(h) > normalized(*best)) best = &h;
  if (attention_out) *attention_out = best->atts;
  return best->tokens;
}

// -------------------------------------------------------------- extensions

ad::Var augment_decoder_input(ad::Tape& t, ad::Var x, ad::Var bag_avg, bool enabled) {
  if (!enabled) return x;
  return t.vconcat(x, bag_avg);
}

ad::Var copy_output_dist(ad::Tape& t, ad::Var logits, ad::Var bag_att,
                         const std::vector<int>& bag_ids, ad::Var gate) {
  return t.copy_mix(t.softmax(logits), bag_att, bag_ids, gate);
}

// ---------------------------------------------------------------- edit_bag

SampledBag edit_bag(const SampledBag& bag, std::span<const int> add, std::span<const int> remove,
                    const Vocabulary& vocab) {
  const int original_k = static_cast<int>(bag.ids.size());
  for (int id : add) {
    if (id < 0 || id >= vocab.size())
      throw UsageError("edit_bag: id " + std::to_string(id) + " is out of the vocabulary");
    if (vocab.is_special(id))
      throw UsageError("edit_bag: cannot add special token " + vocab.token(id));
  }
  std::set<int> to_remove;
  for (int id : remove) {
    if (std::find(bag.ids.begin(), bag.ids.end(), id) == bag.ids.end())
      throw UsageError("edit_bag: '" + vocab.token(id) + "' (id " + std::to_string(id) +
                       ") is not in the bag");
    to_remove.insert(id);
  }

  SampledBag out;
  out.mode = bag.mode;
  std::vector<double> weights;
  for (int j = 0; j < original_k; ++j) {
    if (to_remove.count(bag.ids[static_cast<size_t>(j)])) continue;
    out.ids.push_back(bag.ids[static_cast<size_t>(j)]);
    weights.push_back(bag.weights(j));
  }
  double new_weight;
  if (weights.empty()) {
    new_weight = 1.0 / static_cast<double>(original_k);
  } else {
    double sum = 0.0;
    for (double w : weights) sum += w;
    new_weight = sum / static_cast<double>(weights.size());
  }
  for (int id : add) {
    if (std::find(out.ids.begin(), out.ids.end(), id) != out.ids.end()) continue;
    out.ids.push_back(id);
    weights.push_back(new_weight);
  }
  out.weights.resize(static_cast<Eigen::Index>(weights.size()));
  for (size_t j = 0; j < weights.size(); ++j)
    out.weights(static_cast<Eigen::Index>(j)) = weights[j];
  return out;
}

// -------------------------------------------------------------- total loss

double total_loss(double l_s2s, double l_bow, double lambda_bow) {
  if (!std::isfinite(l_s2s) || !std::isfinite(l_bow))
    throw DivergenceError("total_loss: non-finite input");
  return l_s2s + lambda_bow * l_bow;
}

ad::Var total_loss(ad::Tape& t, ad::Var l_s2s, ad::Var l_bow, double lambda_bow) {
  return t.add(l_s2s, t.scale(l_bow, lambda_bow));
}

// ------------------------------------------------------------------- trace

namespace {
std::string fmt(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}
}  // namespace

std::string GenerationTrace::to_text() const {
  std::string s;
  s += "=== trace\n";
  s += "source:";
  for (const auto& w : source) s += " " + w;
  s += "\nneighbors:\n";
  for (size_t i = 0; i < neighbors.size(); ++i) {
    s += "  " + source[i] + ":";
    for (const auto& [w, p] : neighbors[i]) s += " " + w + ":" + fmt(p, 6);
    s += "\n";
  }
  s += "bag:";
  for (const auto& [w, p] : bag) s += " " + w + ":" + fmt(p, 6);
  s += "\noutput:";
  for (const auto& w : output) s += " " + w;
  s += "\nprovenance:";
  for (size_t i = 0; i < output.size(); ++i)
    s += " " + output[i] + ":" + (from_bag[i] ? "bag" : "lm");
  s += "\nattention:\n";
  for (size_t t = 0; t < attention.size(); ++t) {
    s += "  step" + std::to_string(t) + ":";
    for (double a : attention[t]) s += " " + fmt(a, 4);
    s += "\n";
  }
  return s;
}

}  // namespace lbow
