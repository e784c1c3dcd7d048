#include "lbow/planner.hpp"

#include <set>
#include <stdexcept>

namespace lbow {

void Encoder::init(ad::ParameterStore& store, int vocab, int emb, int hidden, int layers,
                   bool residual, Rng& rng) {
  emb_ = store.create("enc.emb", emb, vocab);
  init_uniform(emb_, 0.1, rng);
  lstm_.init(store, "enc.lstm", emb, hidden, layers, residual, rng);
}

EncoderOutput Encoder::encode(ad::Tape& t, std::span<const int> ids,
                              std::span<const uint8_t> pad_mask) const {
  if (ids.empty()) throw std::invalid_argument("encode: empty source");
  int true_len = 0;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i < pad_mask.size() && pad_mask[i]) ++true_len;
  }
  if (true_len == 0) throw std::invalid_argument("encode: all positions padded");

  EncoderOutput out;
  out.true_len = true_len;
  out.pad_mask.assign(pad_mask.begin(), pad_mask.end());

  ad::Var emb_leaf = t.leaf(emb_);
  LstmStack::State state = lstm_.zero_state(t);
  for (int i = 0; i < true_len; ++i) {
    ad::Var x = t.column(emb_leaf, ids[static_cast<size_t>(i)]);
    state = lstm_.step(t, x, state);
    out.states.push_back(state.h.back());
  }
  for (size_t i = static_cast<size_t>(true_len); i < ids.size(); ++i)
    out.states.push_back(t.constant(ad::Mat::Zero(lstm_.hidden(), 1)));
  out.final_h = state.h;
  out.final_c = state.c;
  return out;
}

EncoderOutput Encoder::encode(ad::Tape& t, std::span<const int> ids) const {
  std::vector<uint8_t> mask(ids.size(), 1);
  return encode(t, ids, mask);
}

void NeighborHeads::init(ad::ParameterStore& store, int vocab, int hidden, int l, Rng& rng) {
  if (l < 1) throw std::invalid_argument("NeighborHeads: l must be >= 1");
  for (int j = 0; j < l; ++j) {
    ad::Parameter* w = store.create("plan.head" + std::to_string(j) + ".w", vocab, hidden);
    ad::Parameter* b = store.create("plan.head" + std::to_string(j) + ".b", vocab, 1);
    init_glorot(w, rng);
    w_.push_back(w);
    b_.push_back(b);
  }
}

NeighborDists NeighborHeads::apply(ad::Tape& t, const EncoderOutput& enc) const {
  NeighborDists nd;
  nd.l = l();
  std::vector<ad::Var> w_leaf, b_leaf;
  for (size_t j = 0; j < w_.size(); ++j) {
    w_leaf.push_back(t.leaf(w_[j]));
    b_leaf.push_back(t.leaf(b_[j]));
  }
  for (int i = 0; i < enc.true_len; ++i) {
    std::vector<ad::Var> row;
    for (size_t j = 0; j < w_.size(); ++j)
      row.push_back(t.softmax(t.affine(w_leaf[j], enc.states[static_cast<size_t>(i)], b_leaf[j])));
    nd.slices.push_back(std::move(row));
  }
  return nd;
}

ad::Var mix_slices(ad::Tape& t, const NeighborDists& nd) {
  std::vector<ad::Var> flat;
  for (const auto& row : nd.slices)
    for (ad::Var s : row) flat.push_back(s);
  if (flat.empty()) throw std::invalid_argument("mix_slices: no unpadded positions");
  return t.average(flat);
}

ad::Var bow_loss(ad::Tape& t, ad::Var pi, std::span<const int> target_bow, double eps) {
  if (target_bow.empty()) throw std::invalid_argument("bow_loss: empty target bag");
  return t.nll_of_set(pi, std::vector<int>(target_bow.begin(), target_bow.end()), eps);
}

NeighborProbs neighbor_probs(const ad::Tape& t, const NeighborDists& nd) {
  NeighborProbs out;
  for (const auto& row : nd.slices) {
    std::vector<Eigen::VectorXd> r;
    for (ad::Var s : row) r.push_back(t.val(s).col(0));
    out.push_back(std::move(r));
  }
  return out;
}

std::set<int> mode_words(const NeighborProbs& probs, double threshold) {
  std::set<int> ids;
  for (const auto& row : probs) {
    for (const auto& p : row) {
      Eigen::Index arg = 0;
      double mx = p.maxCoeff(&arg);
      if (mx > threshold) ids.insert(static_cast<int>(arg));
    }
  }
  return ids;
}

int count_modes(const NeighborProbs& probs, double threshold) {
  return static_cast<int>(mode_words(probs, threshold).size());
}

}  // namespace lbow
