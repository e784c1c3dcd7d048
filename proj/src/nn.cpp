#include "lbow/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace lbow {

void init_uniform(ad::Parameter* p, double range, Rng& rng) {
  for (Eigen::Index c = 0; c < p->value.cols(); ++c)
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      p->value(r, c) = rng.uniform(-range, range);
}

void init_glorot(ad::Parameter* p, Rng& rng) {
  double range = std::sqrt(6.0 / static_cast<double>(p->value.rows() + p->value.cols()));
  init_uniform(p, range, rng);
}

void LstmStack::init(ad::ParameterStore& store, const std::string& prefix, int input_dim,
                     int hidden, int layers, bool residual, Rng& rng) {
  if (layers < 1) throw std::invalid_argument("LstmStack: layers must be >= 1");
  if (residual && layers > 1 && input_dim != hidden)
    throw std::invalid_argument("LstmStack: residual stacking needs input_dim == hidden");
  hidden_ = hidden;
  input_dim_ = input_dim;
  residual_ = residual;
  layers_.clear();
  for (int j = 0; j < layers; ++j) {
    int in = (j == 0) ? input_dim : hidden;
    Layer layer;
    layer.w = store.create(prefix + ".l" + std::to_string(j) + ".w", 4 * hidden, in);
    layer.u = store.create(prefix + ".l" + std::to_string(j) + ".u", 4 * hidden, hidden);
    layer.b = store.create(prefix + ".l" + std::to_string(j) + ".b", 4 * hidden, 1);
    init_glorot(layer.w, rng);
    init_glorot(layer.u, rng);
    // forget gate bias starts at 1
    layer.b->value.middleRows(hidden, hidden).setOnes();
    layers_.push_back(layer);
  }
}

LstmStack::State LstmStack::zero_state(ad::Tape& t) const {
  State s;
  for (size_t j = 0; j < layers_.size(); ++j) {
    s.h.push_back(t.constant(ad::Mat::Zero(hidden_, 1)));
    s.c.push_back(t.constant(ad::Mat::Zero(hidden_, 1)));
  }
  return s;
}

LstmStack::State LstmStack::step(ad::Tape& t, ad::Var x, const State& prev) const {
  State next;
  ad::Var input = x;
  for (size_t j = 0; j < layers_.size(); ++j) {
    const Layer& L = layers_[j];
    ad::Var pre = t.affine2(t.leaf(L.w), input, t.leaf(L.u), prev.h[j], t.leaf(L.b));
    ad::Var i = t.sigmoid_(t.rows(pre, 0, hidden_));
    ad::Var f = t.sigmoid_(t.rows(pre, hidden_, hidden_));
    ad::Var g = t.tanh_(t.rows(pre, 2 * hidden_, hidden_));
    ad::Var o = t.sigmoid_(t.rows(pre, 3 * hidden_, hidden_));
    ad::Var c = t.add(t.cmul(f, prev.c[j]), t.cmul(i, g));
    ad::Var h = t.cmul(o, t.tanh_(c));
    next.h.push_back(h);
    next.c.push_back(c);
    input = (residual_ && j + 1 < layers_.size()) ? t.add(input, h) : h;
  }
  return next;
}

}  // namespace lbow
